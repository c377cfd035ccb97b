#pragma once

#include "hgnas/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hgnas {

enum class Task { node_classification, link_prediction };

std::string to_string(Task task);
Task task_from_string(const std::string& text);

// Directed relation; messages flow along edges from `src` type to `dst` type.
struct Relation {
  std::string name;
  std::string src;
  std::string dst;

  bool operator==(const Relation&) const = default;
};

using Edge = std::pair<Index, Index>;

struct MetaPath {
  std::vector<std::string> steps;  // relation names

  bool empty() const { return steps.empty(); }
  std::size_t size() const { return steps.size(); }
};

struct LinkSample {
  std::string relation;
  std::vector<Edge> positives;
  std::vector<Edge> negatives;
};

struct NodeSplit {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

struct LinkSplit {
  LinkSample train;
  LinkSample val;
  LinkSample test;
};

// Typed multi-relational graph. Node ids are local indices within their type.
// Treated as immutable once built; share it freely between evaluators.
struct HeteroGraph {
  std::string name;
  std::vector<std::string> node_types;
  std::vector<Index> num_nodes;  // per node type
  std::vector<Relation> relations;
  std::vector<std::vector<Edge>> edges;  // per relation, (src index, dst index)
  std::vector<MatrixXd> features;        // per node type, nodes x input_dim

  Task task = Task::node_classification;
  std::string target_type;      // node classification
  std::string target_relation;  // link prediction
  int num_classes = 0;
  std::vector<int> labels;  // per target-type node, -1 when unlabelled
  NodeSplit node_split;
  LinkSplit link_split;

  std::optional<std::size_t> type_index(const std::string& type) const;
  std::size_t require_type(const std::string& type) const;
  std::optional<std::size_t> relation_index(const std::string& name) const;
  std::size_t require_relation(const std::string& name) const;

  Index count(const std::string& type) const { return num_nodes[require_type(type)]; }

  // Types whose final representation feeds the task head.
  std::vector<std::string> task_types() const;
};

// Throws ValidationError / SchemaError describing the first violated invariant.
void validate(const HeteroGraph& g);

// Index of the relation whose edge set is the transpose of `r`'s, if any.
std::optional<std::size_t> find_reverse(const HeteroGraph& g, std::size_t r);

// Name used for a derived reverse: "A-P" -> "P-A", otherwise "<name>_rev".
std::string reverse_name(const std::string& name);

// Adds r^-1 for every relation lacking one; each reverse is inserted right after
// its forward relation. Idempotent.
HeteroGraph derive_reverse_relations(HeteroGraph g);

// Throws SchemaError when a step is unknown or the chain is not type-consistent.
void check_meta_path(const HeteroGraph& g, const MetaPath& mp);

// Uniform non-edges with the same type signature, 1:1 with `positives`.
std::vector<Edge> sample_negatives(const HeteroGraph& g, const std::string& relation,
                                   const std::vector<Edge>& positives, std::uint64_t seed);

}  // namespace hgnas
