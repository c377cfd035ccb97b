#pragma once

#include "hgnas/graph.hpp"

#include <string>
#include <vector>

namespace hgnas {

// Meta-structure search space: states H0..HN, an edge H_i -> H_j for every i < j.
// Each edge picks a relation, the identity "I", or the empty matrix "O".
struct DagEdge {
  int from = 0;  // i
  int to = 0;    // j

  std::string label() const { return "H" + std::to_string(from) + "-H" + std::to_string(to); }
  bool operator==(const DagEdge&) const = default;
};

enum class DagCase { consecutive, skip, final_consecutive, final_skip };

// Case of edge (j, i) for a DAG with N intermediate states; total for all 0 <= i < j <= N.
DagCase dag_case(int to, int from, int states);

inline constexpr const char* dag_identity = "I";
inline constexpr const char* dag_empty = "O";

struct DagSpace {
  int states = 0;  // N
  std::string target_type;
  std::vector<std::string> relations;         // all relations, declaration order
  std::vector<std::string> target_relations;  // relations whose messages land on the target type
  std::vector<DagEdge> edges;                 // consecutive edges first, then skips by (to, from)
  std::vector<std::vector<std::string>> candidates;  // per edge
};

DagSpace build_dag_space(const HeteroGraph& g, int states, const std::string& target_type);

// One choice per edge of DagSpace::edges.
using DagArch = std::vector<std::string>;

std::string encode(const DagArch& a);
// Throws LengthError / TokenError when a choice violates the per-edge candidate sets.
DagArch decode_dag(const std::string& text, const DagSpace& s);
void check_dag_arch(const DagArch& a, const DagSpace& s);

// Natural-language search-space section listing each edge group's candidates.
std::string render_dag_space(const DagSpace& s);

}  // namespace hgnas
