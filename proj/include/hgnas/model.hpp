#pragma once

#include "hgnas/autodiff.hpp"
#include "hgnas/graph.hpp"
#include "hgnas/layers.hpp"
#include "hgnas/space.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

using Var = ad::Var<double>;
using Tape = ad::Tape<double>;

enum class Mode { train, eval };

struct TrainConfig {
  double learning_rate = 0.005;
  double dropout = 0.6;
  Index hidden_dim = 256;
  int epochs = 100;
  int patience = 20;
  std::uint64_t seed = 0;

  // Settings used for desk-scale experiments on synthetic graphs.
  static TrainConfig desk_scale() {
    TrainConfig c;
    c.hidden_dim = 16;
    return c;
  }

  void check() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

// Adjacency lists shared by every model trained on one graph. For link prediction the
// held-out validation and test positives are removed from the message-passing edges.
struct PreparedGraph {
  const HeteroGraph* graph = nullptr;
  std::vector<Adjacency> relations;  // per relation
  std::vector<Adjacency> self;       // identity per node type
};

PreparedGraph prepare(const HeteroGraph& g);

// Named dense parameters; initial values depend only on (seed, name), so two
// architectures share the exact initial value of every parameter they have in common.
struct Parameters {
  std::vector<std::string> names;
  std::vector<MatrixXd> values;

  std::size_t add_glorot(const std::string& name, Index rows, Index cols, std::uint64_t seed);
  std::size_t add_zeros(const std::string& name, Index rows, Index cols);
  std::size_t index_of(const std::string& name) const;
  std::size_t scalar_count() const;
};

// Full-graph HGNN for one architecture: per-type input projection, one relation weight
// per active slot, per-layer aggregator parameters, and a task head.
class HgnnModel {
 public:
  HgnnModel(ArchSeq arch, const SearchSpace& space, const HeteroGraph& g, Index hidden_dim, std::uint64_t seed);

  const ArchSeq& arch() const { return arch_; }
  const SearchSpace& space() const { return space_; }
  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }
  Index hidden_dim() const { return hidden_; }

  // Final representations of the task types (HeteroGraph::task_types order) before the head.
  // `vars` holds one tape variable per parameter; `dropout_seed` selects the train-mode masks.
  std::vector<Var> forward(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                           double dropout, std::uint64_t dropout_seed) const;

 private:
  ArchSeq arch_;
  SearchSpace space_;
  Index hidden_;
  Parameters params_;
  std::vector<std::size_t> proj_;                     // per node type
  std::vector<std::vector<std::size_t>> slot_w_;    // per layer, per slot; npos when zero
  std::vector<std::vector<std::size_t>> slot_att_;  // per layer, per slot; npos unless gat
  std::vector<std::size_t> lstm_wx_, lstm_wh_, att_q_;  // per layer; npos when absent
};

// Adds the task head ("head:W", "head:b" for classification; nothing for link prediction).
void add_head(Parameters& params, const HeteroGraph& g, Index hidden_dim, std::uint64_t seed);

// Class logits (nodes x classes) for node classification.
Var classify(const Parameters& params, const std::vector<Var>& vars, Var rep);

// Inverted-dropout mask for one (layer, type) input; deterministic in (seed, layer, type).
MatrixXd dropout_mask(Index rows, Index cols, double p, std::uint64_t seed, std::uint64_t layer, std::uint64_t type);

struct TrialResult {
  double val_metric = 0;
  double test_metric = 0;
  bool failed = false;
  int epochs_run = 0;
  int best_epoch = -1;
  std::string error;
};

using ForwardFn = std::function<std::vector<Var>(Tape&, const std::vector<Var>&, Mode, std::uint64_t dropout_seed)>;

// Full-batch Adam training with early stopping on the validation metric (macro-F1 or AUC).
// Returns the test metric at the best-validation epoch. Non-finite losses yield a failed
// trial with both metrics 0.
TrialResult fit(Parameters& params, const PreparedGraph& pg, const TrainConfig& cfg, const ForwardFn& forward);

TrialResult train_eval(const ArchSeq& arch, const SearchSpace& space, const PreparedGraph& pg, const TrainConfig& cfg);
TrialResult train_eval(const ArchSeq& arch, const SearchSpace& space, const HeteroGraph& g, const TrainConfig& cfg);

}  // namespace hgnas
