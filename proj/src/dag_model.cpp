#include "hgnas/dag_model.hpp"

#include "hgnas/error.hpp"

namespace hgnas {

DagModel::DagModel(DagArch arch, const DagSpace& space, const PreparedGraph& pg, Index hidden_dim,
                   std::uint64_t seed)
    : arch_(std::move(arch)), space_(space), hidden_(hidden_dim) {
  try {
    check_dag_arch(arch_, space_);
  } catch (const DecodeError& e) {
    throw ValidationError(std::string("invalid meta-structure assignment: ") + e.what());
  }
  const HeteroGraph& g = *pg.graph;
  bool final_input = false;
  for (std::size_t k = 0; k < space_.edges.size(); ++k) {
    if (space_.edges[k].to == space_.states && arch_[k] != dag_empty) final_input = true;
    if (arch_[k] != dag_empty && arch_[k] != dag_identity) g.require_relation(arch_[k]);
  }
  if (!final_input) throw ValidationError("the final state receives no input");

  for (Index n : g.num_nodes) {
    offset_.push_back(total_);
    total_ += n;
  }
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const Adjacency& a = pg.relations[r];
    const Index so = offset_[g.require_type(g.relations[r].src)];
    const Index dof = offset_[g.require_type(g.relations[r].dst)];
    std::vector<Edge> edges;
    edges.reserve(a.num_edges());
    for (std::size_t e = 0; e < a.num_edges(); ++e) edges.emplace_back(a.src[e] + so, a.dst[e] + dof);
    global_.push_back(Adjacency::from_edges(edges, total_, total_));
  }

  for (std::size_t t = 0; t < g.node_types.size(); ++t)
    params_.add_glorot("proj:" + g.node_types[t], g.features[t].cols(), hidden_, seed);
  add_head(params_, g, hidden_, seed);
}

std::vector<Var> DagModel::states(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                                  double dropout, std::uint64_t dropout_seed) const {
  const HeteroGraph& g = *pg.graph;
  std::vector<Var> parts;
  for (std::size_t t = 0; t < g.node_types.size(); ++t)
    parts.push_back(ad::matmul(tape.constant(g.features[t]), vars[t]));
  Var h0 = ad::concat_rows(parts);
  if (mode == Mode::train && dropout > 0)
    h0 = ad::cwise_mul(h0, tape.constant(dropout_mask(h0.rows(), h0.cols(), dropout, dropout_seed, 0, 0)));

  std::vector<Var> states{h0};
  for (int j = 1; j <= space_.states; ++j) {
    std::vector<Var> inputs;
    for (std::size_t k = 0; k < space_.edges.size(); ++k) {
      const DagEdge& e = space_.edges[k];
      if (e.to != j || arch_[k] == dag_empty) continue;
      const Var& src = states[static_cast<std::size_t>(e.from)];
      if (arch_[k] == dag_identity) {
        inputs.push_back(src);
      } else {
        inputs.push_back(ad::gcn_propagate(src, global_[g.require_relation(arch_[k])]));
      }
    }
    if (inputs.empty()) {
      states.push_back(tape.constant(MatrixXd::Zero(total_, hidden_)));
      continue;
    }
    states.push_back(aggregate(Aggr::mean, inputs));
  }
  return states;
}

std::vector<Var> DagModel::forward(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                                   double dropout, std::uint64_t dropout_seed) const {
  const HeteroGraph& g = *pg.graph;
  const std::vector<Var> states = this->states(tape, vars, pg, mode, dropout, dropout_seed);
  std::vector<Var> reps;
  for (const auto& type : g.task_types()) {
    const std::size_t t = g.require_type(type);
    reps.push_back(ad::block_rows(states.back(), offset_[t], g.num_nodes[t]));
  }
  return reps;
}

TrialResult eval_dag_arch(const DagArch& arch, const DagSpace& space, const PreparedGraph& pg, const TrainConfig& cfg) {
  cfg.check();
  DagModel model(arch, space, pg, cfg.hidden_dim, cfg.seed);
  return fit(model.parameters(), pg, cfg,
             [&](Tape& tape, const std::vector<Var>& vars, Mode mode, std::uint64_t dropout_seed) {
               return model.forward(tape, vars, pg, mode, cfg.dropout, dropout_seed);
             });
}

}  // namespace hgnas
