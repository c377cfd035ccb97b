#pragma once

#include "hgnas/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hgnas {

struct SynthNodeType {
  std::string name;
  Index count = 0;
};

// Declared relation; every node of `anchor` type (src or dst) receives `per_anchor` edges.
struct SynthRelation {
  std::string name;
  std::string src;
  std::string dst;
  std::string anchor;
  int per_anchor = 1;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  std::vector<SynthNodeType> types;
  std::vector<SynthRelation> relations;  // declared; reverses are derived
  std::string target_type;
  MetaPath planted_path;  // relation names (declared or derived), ends at target_type
  double noise = 0.05;    // per-node label corruption probability
  int num_classes = 3;
  int feature_dim = 8;
  double signal = 1.0;     // class-signal amplitude on source-type features
  double homophily = 0.9;  // same-community partner probability on path relations
  double train_fraction = 1.0 / 3.0;
  double val_fraction = 1.0 / 3.0;
  double balance_tolerance = 0.10;  // per-class share must stay within 1/C +- tolerance
  int max_attempts = 64;
};

// ACM-shaped default schema: A-P (2 authors per paper), P-S (1 subject per paper),
// planted path P-S then S-P, target P.
SynthConfig acm_like_config(std::uint64_t seed, Index authors = 60, Index papers = 180,
                            Index subjects = 9);

// Planted-signal heterogeneous graph. Labels of the target type are the argmax of the
// class coordinates of source-type features propagated along the planted path with
// symmetric degree normalisation, then flipped to another class with probability `noise`.
// Regenerates with seed+1, seed+2, ... until the label distribution is balanced.
HeteroGraph synth_graph(const SynthConfig& cfg);

// Noise-free labels recomputed from features and adjacency alone; used as the oracle
// for what an ideal reader of the planted path would predict.
std::vector<int> planted_labels(const HeteroGraph& g, const MetaPath& path, int num_classes);

}  // namespace hgnas
