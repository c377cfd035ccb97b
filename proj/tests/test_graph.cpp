#include "hgnas/error.hpp"
#include "hgnas/graph.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

namespace hgnas {
namespace {

std::set<Edge> edge_set(const HeteroGraph& g, const std::string& rel) {
  const auto& e = g.edges[g.require_relation(rel)];
  return {e.begin(), e.end()};
}

std::set<Edge> transpose(const std::set<Edge>& es) {
  std::set<Edge> out;
  for (const auto& [s, d] : es) out.emplace(d, s);
  return out;
}

// A-P and P-S declared, node classification on P.
HeteroGraph tiny_graph() {
  HeteroGraph g;
  g.name = "tiny";
  g.node_types = {"A", "P", "S"};
  g.num_nodes = {3, 4, 2};
  g.relations = {{"A-P", "A", "P"}, {"P-S", "P", "S"}};
  g.edges = {{{0, 0}, {0, 1}, {1, 2}, {2, 3}, {2, 0}}, {{0, 0}, {1, 0}, {2, 1}, {3, 1}}};
  g.target_type = "P";
  g.num_classes = 2;
  g.labels = {0, 1, 0, 1};
  g.node_split = {{0}, {1}, {2, 3}};
  return g;
}

TEST(DeriveReverse, AddsTransposeAfterEachRelation) {
  const HeteroGraph g = derive_reverse_relations(tiny_graph());
  ASSERT_EQ(g.relations.size(), 4u);
  EXPECT_EQ(g.relations[0].name, "A-P");
  EXPECT_EQ(g.relations[1], (Relation{"P-A", "P", "A"}));
  EXPECT_EQ(g.relations[2].name, "P-S");
  EXPECT_EQ(g.relations[3], (Relation{"S-P", "S", "P"}));
  EXPECT_EQ(g.edges[1].size(), g.edges[0].size());
  EXPECT_EQ(edge_set(g, "P-A"), transpose(edge_set(g, "A-P")));
  EXPECT_EQ(edge_set(g, "S-P"), transpose(edge_set(g, "P-S")));
}

TEST(DeriveReverse, Idempotent) {
  const HeteroGraph once = derive_reverse_relations(tiny_graph());
  const HeteroGraph twice = derive_reverse_relations(once);
  EXPECT_EQ(twice.relations, once.relations);
  EXPECT_EQ(twice.edges, once.edges);
}

TEST(DeriveReverse, InvolutionOnAdjacency) {
  const HeteroGraph g = derive_reverse_relations(tiny_graph());
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    auto q = find_reverse(g, r);
    ASSERT_TRUE(q.has_value()) << g.relations[r].name;
    auto back = find_reverse(g, *q);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, r);
  }
}

TEST(DeriveReverse, AcmScaleCounts) {
  HeteroGraph g;
  g.node_types = {"A", "P", "S"};
  g.num_nodes = {17351, 4025, 72};
  g.relations = {{"A-P", "A", "P"}, {"P-S", "P", "S"}};
  g.edges.resize(2);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<Index> a(0, 17350), p(0, 4024), s(0, 71);
  std::set<Edge> ap;
  while (ap.size() < 13407) ap.emplace(a(rng), p(rng));
  g.edges[0].assign(ap.begin(), ap.end());
  for (Index i = 0; i < 4025; ++i) g.edges[1].emplace_back(i, s(rng));

  const HeteroGraph out = derive_reverse_relations(g);
  ASSERT_EQ(out.relations.size(), 4u);
  EXPECT_EQ(out.edges[out.require_relation("P-A")].size(), 13407u);
  EXPECT_EQ(out.edges[out.require_relation("S-P")].size(), 4025u);
}

TEST(DeriveReverse, NamesWithoutSingleDashGetSuffix) {
  EXPECT_EQ(reverse_name("A-P"), "P-A");
  EXPECT_EQ(reverse_name("writes"), "writes_rev");
  EXPECT_EQ(reverse_name("B-Ca-x"), "B-Ca-x_rev");
}

TEST(DeriveReverse, SymmetricSelfRelationIsItsOwnReverse) {
  HeteroGraph g = tiny_graph();
  g.relations.push_back({"P-P", "P", "P"});
  g.edges.push_back({{0, 1}, {1, 0}});
  const HeteroGraph out = derive_reverse_relations(g);
  EXPECT_FALSE(out.relation_index("P-P_rev").has_value());
  EXPECT_EQ(out.relations.size(), 5u);
}

TEST(Validate, AcceptsWellFormedGraph) { EXPECT_NO_THROW(validate(derive_reverse_relations(tiny_graph()))); }

TEST(Validate, RejectsHomogeneousGraph) {
  HeteroGraph g;
  g.node_types = {"P"};
  g.num_nodes = {2};
  g.relations = {{"P-P", "P", "P"}};
  g.edges = {{{0, 1}}};
  g.target_type = "P";
  g.num_classes = 2;
  g.labels = {0, 1};
  EXPECT_THROW(validate(g), ValidationError);
}

TEST(Validate, RejectsEdgeOutsideEndpointType) {
  HeteroGraph g = tiny_graph();
  g.edges[1].emplace_back(0, 2);  // S has 2 nodes
  EXPECT_THROW(validate(g), ValidationError);
}

TEST(Validate, OverlappingSplitsNameTheIds) {
  HeteroGraph g = tiny_graph();
  g.node_split.val = {1, 3};
  try {
    validate(g);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("val"), std::string::npos);
  }
}

TEST(Validate, RejectsLabelOutOfRange) {
  HeteroGraph g = tiny_graph();
  g.labels[2] = 5;
  EXPECT_THROW(validate(g), ValidationError);
}

TEST(MetaPathCheck, AcceptsTypeConsistentChain) {
  const HeteroGraph g = derive_reverse_relations(tiny_graph());
  EXPECT_NO_THROW(check_meta_path(g, MetaPath{{"P-A", "A-P"}}));
  EXPECT_NO_THROW(check_meta_path(g, MetaPath{{"P-S", "S-P", "P-A"}}));
}

TEST(MetaPathCheck, RejectsBrokenChainAndUnknownStep) {
  const HeteroGraph g = derive_reverse_relations(tiny_graph());
  EXPECT_THROW(check_meta_path(g, MetaPath{{"A-P", "A-P"}}), SchemaError);
  EXPECT_THROW(check_meta_path(g, MetaPath{{"P-X"}}), SchemaError);
}

TEST(TaskTypes, NodeAndLinkTasks) {
  HeteroGraph g = derive_reverse_relations(tiny_graph());
  EXPECT_EQ(g.task_types(), std::vector<std::string>{"P"});
  g.task = Task::link_prediction;
  g.target_relation = "A-P";
  EXPECT_EQ(g.task_types(), (std::vector<std::string>{"A", "P"}));
}

TEST(NegativeSampling, DisjointFromEdgesAndOneToOne) {
  const HeteroGraph g = derive_reverse_relations(tiny_graph());
  const std::vector<Edge> pos{{0, 0}, {1, 2}};
  const auto neg = sample_negatives(g, "A-P", pos, 9);
  ASSERT_EQ(neg.size(), pos.size());
  const auto existing = edge_set(g, "A-P");
  std::set<Edge> seen;
  for (const Edge& e : neg) {
    EXPECT_FALSE(existing.count(e));
    EXPECT_TRUE(seen.insert(e).second);
    EXPECT_LT(e.first, 3);
    EXPECT_LT(e.second, 4);
  }
  EXPECT_EQ(sample_negatives(g, "A-P", pos, 9), neg);
}

TEST(NegativeSampling, RefusesWhenRelationIsTooDense) {
  HeteroGraph g = tiny_graph();
  g.edges[1] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {3, 0}};
  EXPECT_THROW(sample_negatives(g, "P-S", {{3, 1}, {0, 0}}, 1), ValidationError);
}

TEST(TaskNames, RoundTrip) {
  EXPECT_EQ(task_from_string(to_string(Task::link_prediction)), Task::link_prediction);
  EXPECT_EQ(task_from_string("node_classification"), Task::node_classification);
  EXPECT_THROW(task_from_string("regression"), SchemaError);
}

}  // namespace
}  // namespace hgnas
