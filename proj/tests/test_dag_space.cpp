#include "hgnas/dag_space.hpp"
#include "hgnas/error.hpp"
#include "hgnas/space.hpp"

#include <gtest/gtest.h>

namespace hgnas {
namespace {

// ACM schema with the relation names used in meta-structure prompts: PA carries
// author messages to papers, AP the reverse.
HeteroGraph acm_schema() {
  HeteroGraph g;
  g.node_types = {"P", "A", "S"};
  g.num_nodes = {3, 2, 2};
  g.relations = {{"PA", "A", "P"}, {"AP", "P", "A"}, {"PS", "S", "P"}, {"SP", "P", "S"}};
  g.edges = {{{0, 0}, {1, 1}}, {{0, 0}, {1, 1}}, {{0, 0}, {1, 2}}, {{0, 0}, {2, 1}}};
  g.target_type = "P";
  return g;
}

std::vector<std::string> candidates_of(const DagSpace& s, const std::string& label) {
  for (std::size_t k = 0; k < s.edges.size(); ++k)
    if (s.edges[k].label() == label) return s.candidates[k];
  ADD_FAILURE() << "no edge " << label;
  return {};
}

using Names = std::vector<std::string>;

TEST(DagSpace, AcmFourStatesCandidateSets) {
  const DagSpace s = build_dag_space(acm_schema(), 4, "P");
  EXPECT_EQ(s.edges.size(), 10u);
  for (const char* e : {"H0-H1", "H1-H2", "H2-H3"}) EXPECT_EQ(candidates_of(s, e), (Names{"PA", "AP", "PS", "SP", "I"}));
  EXPECT_EQ(candidates_of(s, "H3-H4"), (Names{"PA", "PS", "I"}));
  for (const char* e : {"H0-H4", "H1-H4", "H2-H4"}) EXPECT_EQ(candidates_of(s, e), (Names{"PA", "PS", "I", "O"}));
  for (const char* e : {"H0-H2", "H0-H3", "H1-H3"})
    EXPECT_EQ(candidates_of(s, e), (Names{"PA", "AP", "PS", "SP", "I", "O"}));
}

TEST(DagSpace, AcmRenderedSearchSpaceText) {
  const DagSpace s = build_dag_space(acm_schema(), 4, "P");
  EXPECT_EQ(render_dag_space(s),
            "For a given meta-structure {H0-H1, H1-H2, H2-H3, H3-H4} {H0-H2, H0-H3, H1-H3, H0-H4, H1-H4, H2-H4}, "
            "H0-H1, H1-H2, H2-H3 should be selected from [PA, AP, PS, SP, I], H3-H4 should be selected from "
            "[PA, PS, I] and H0-H4, H1-H4, H2-H4 should be selected from [PA, PS, I, O] because the target is P. "
            "For H0-H2, H0-H3, and H1-H3 you can choose from [PA, AP, PS, SP, I, O]");
}

TEST(DagSpace, CaseAssignmentIsTotal) {
  for (int n = 2; n <= 6; ++n) {
    const DagSpace s = build_dag_space(acm_schema(), n, "P");
    EXPECT_EQ(s.edges.size(), static_cast<std::size_t>(n * (n + 1) / 2));
    int counts[4] = {0, 0, 0, 0};
    for (int j = 1; j <= n; ++j)
      for (int i = 0; i < j; ++i) ++counts[static_cast<int>(dag_case(j, i, n))];
    EXPECT_EQ(counts[0], n - 1);
    EXPECT_EQ(counts[1], (n - 1) * (n - 2) / 2);
    EXPECT_EQ(counts[2], 1);
    EXPECT_EQ(counts[3], n - 1);
  }
  EXPECT_THROW(dag_case(2, 2, 4), std::out_of_range);
  EXPECT_THROW(dag_case(5, 0, 4), std::out_of_range);
}

TEST(DagSpace, TwoStates) {
  const DagSpace s = build_dag_space(acm_schema(), 2, "P");
  ASSERT_EQ(s.edges.size(), 3u);
  EXPECT_EQ(candidates_of(s, "H0-H1"), (Names{"PA", "AP", "PS", "SP", "I"}));
  EXPECT_EQ(candidates_of(s, "H1-H2"), (Names{"PA", "PS", "I"}));
  EXPECT_EQ(candidates_of(s, "H0-H2"), (Names{"PA", "PS", "I", "O"}));
}

TEST(DagSpace, Errors) {
  EXPECT_THROW(build_dag_space(acm_schema(), 1, "P"), ConfigError);
  EXPECT_THROW(build_dag_space(acm_schema(), 4, "X"), SchemaError);
  HeteroGraph g = acm_schema();
  g.relations = {{"AP", "P", "A"}, {"SP", "P", "S"}};
  g.edges = {{{0, 0}}, {{0, 0}}};
  EXPECT_THROW(build_dag_space(g, 4, "P"), SchemaError);
}

TEST(DagArchCodec, RoundTripAndValidation) {
  const DagSpace s = build_dag_space(acm_schema(), 2, "P");
  const DagArch a = decode_dag("[AP, PA, O]", s);
  EXPECT_EQ(a, (DagArch{"AP", "PA", "O"}));
  EXPECT_EQ(decode_dag(encode(a), s), a);
  try {
    decode_dag("[PA, SP, O]", s);  // SP lands on S, not the target
    FAIL() << "expected TokenError";
  } catch (const TokenError& e) {
    EXPECT_EQ(e.position(), 1u);
    EXPECT_NE(std::string(e.what()).find("H1-H2"), std::string::npos);
  }
  EXPECT_THROW(decode_dag("[PA, O, O]", s), TokenError);  // final consecutive edge admits no O
  EXPECT_THROW(decode_dag("[PA, PA]", s), LengthError);
}

}  // namespace
}  // namespace hgnas
