#pragma once

#include "hgnas/dag_space.hpp"
#include "hgnas/model.hpp"

namespace hgnas {

// Meta-structure model over all nodes at once. H0 stacks the projected features of every
// type; H_j is the mean of propagate(choice, H_i) over its non-O incoming edges, where a
// relation propagates with symmetric degree normalisation and I is the identity.
class DagModel {
 public:
  // Throws ValidationError when the assignment breaks the candidate sets or H_N has no input.
  DagModel(DagArch arch, const DagSpace& space, const PreparedGraph& pg, Index hidden_dim, std::uint64_t seed);

  Parameters& parameters() { return params_; }
  const Parameters& parameters() const { return params_; }

  // H0..HN over all nodes, rows grouped by node type in declaration order.
  std::vector<Var> states(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                          double dropout, std::uint64_t dropout_seed) const;

  // Representations of the task types, taken from the rows of H_N.
  std::vector<Var> forward(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                           double dropout, std::uint64_t dropout_seed) const;

 private:
  DagArch arch_;
  DagSpace space_;
  Index hidden_;
  Parameters params_;
  std::vector<Index> offset_;  // first global row per node type
  Index total_ = 0;
  std::vector<Adjacency> global_;  // per graph relation, in global row space
};

TrialResult eval_dag_arch(const DagArch& arch, const DagSpace& space, const PreparedGraph& pg, const TrainConfig& cfg);

}  // namespace hgnas
