#include "hgnas/dataset_io.hpp"
#include "hgnas/error.hpp"
#include "hgnas/synth.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

namespace hgnas {
namespace {

namespace fs = std::filesystem;

class DatasetDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hgnas_ds_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path file(const std::string& name, const std::string& content) {
    std::ofstream(dir_ / name) << content;
    return dir_ / name;
  }

  // Small ACM-shaped dataset with one-hot features.
  void write_small() {
    file("dataset.json",
         R"({"name": "mini", "node_types": ["A", "P", "S"],
             "relations": [{"name": "A-P", "src": "A", "dst": "P"}, {"name": "P-S", "src": "P", "dst": "S"}],
             "task": "nc", "target": "P", "num_classes": 2})");
    file("nodes.tsv", "a0\tA\na1\tA\np0\tP\np1\tP\np2\tP\ns0\tS\n");
    file("edges.tsv", "a0\tp0\tA-P\na1\tp1\tA-P\na1\tp2\tA-P\np0\ts0\tP-S\np1\ts0\tP-S\n");
    file("labels.tsv", "p0\t0\np1\t1\np2\t1\n");
    file("splits.tsv", "p0\ttrain\np1\tval\np2\ttest\n");
  }

  fs::path dir_;
};

std::set<Edge> edge_set(const HeteroGraph& g, std::size_t r) { return {g.edges[r].begin(), g.edges[r].end()}; }

TEST_F(DatasetDir, LoadsSmallDatasetWithDerivedReverses) {
  write_small();
  std::vector<std::string> warnings;
  const HeteroGraph g = load_dataset(DatasetPaths::in_directory(dir_), &warnings);
  EXPECT_TRUE(warnings.empty());
  ASSERT_EQ(g.relations.size(), 4u);
  EXPECT_EQ(g.relations[1].name, "P-A");
  EXPECT_EQ(g.relations[3].name, "S-P");
  EXPECT_EQ(g.num_nodes, (std::vector<Index>{2, 3, 1}));
  EXPECT_EQ(g.labels, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(g.node_split.val, std::vector<Index>{1});
  // One-hot of the local index when the node file carries no features.
  EXPECT_TRUE(g.features[1].isApprox(MatrixXd::Identity(3, 3)));
}

TEST_F(DatasetDir, AcmSchemaCounts) {
  file("dataset.json",
       R"({"name": "ACM", "node_types": ["A", "P", "S"],
           "relations": [{"name": "A-P", "src": "A", "dst": "P"}, {"name": "P-S", "src": "P", "dst": "S"}],
           "task": "nc", "target": "P", "num_classes": 3})");
  std::ofstream nodes(dir_ / "nodes.tsv"), edges(dir_ / "edges.tsv"), labels(dir_ / "labels.tsv"),
      splits(dir_ / "splits.tsv");
  const Index na = 17351, np = 4025, ns = 72;
  for (Index i = 0; i < na; ++i) nodes << "a" << i << "\tA\n";
  for (Index i = 0; i < np; ++i) nodes << "p" << i << "\tP\n";
  for (Index i = 0; i < ns; ++i) nodes << "s" << i << "\tS\n";
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<Index> a(0, na - 1), p(0, np - 1);
  std::set<Edge> ap;
  while (ap.size() < 13407) ap.emplace(a(rng), p(rng));
  for (const auto& [x, y] : ap) edges << "a" << x << "\tp" << y << "\tA-P\n";
  for (Index i = 0; i < np; ++i) edges << "p" << i << "\ts" << i % ns << "\tP-S\n";
  for (Index i = 0; i < np; ++i) {
    labels << "p" << i << '\t' << i % 3 << '\n';
    splits << "p" << i << '\t' << (i < 400 ? "train" : i < 800 ? "val" : "test") << '\n';
  }
  nodes.close();
  edges.close();
  labels.close();
  splits.close();

  const HeteroGraph g = load_dataset(DatasetPaths::in_directory(dir_));
  ASSERT_EQ(g.relations.size(), 4u);
  EXPECT_EQ(g.edges[g.require_relation("A-P")].size(), 13407u);
  EXPECT_EQ(g.edges[g.require_relation("P-A")].size(), 13407u);
  EXPECT_EQ(g.edges[g.require_relation("P-S")].size(), 4025u);
  EXPECT_EQ(g.edges[g.require_relation("S-P")].size(), 4025u);
  const std::string summary = relation_summary(g);
  EXPECT_NE(summary.find("Relation(P-S)"), std::string::npos);
  EXPECT_NE(summary.find("4025"), std::string::npos);
}

TEST_F(DatasetDir, EmptyEdgeListForDeclaredRelationWarns) {
  write_small();
  file("edges.tsv", "a0\tp0\tA-P\n");
  std::vector<std::string> warnings;
  const HeteroGraph g = load_dataset(DatasetPaths::in_directory(dir_), &warnings);
  EXPECT_EQ(g.edges[g.require_relation("P-S")].size(), 0u);
  ASSERT_FALSE(warnings.empty());
  EXPECT_NE(warnings[0].find("P-S"), std::string::npos);
}

TEST_F(DatasetDir, UndeclaredNodeNamesTheId) {
  write_small();
  file("edges.tsv", "a0\tp0\tA-P\na9\tp1\tA-P\n");
  try {
    load_dataset(DatasetPaths::in_directory(dir_));
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("'a9'"), std::string::npos);
  }
}

TEST_F(DatasetDir, MalformedRowCarriesLineNumber) {
  write_small();
  file("edges.tsv", "a0\tp0\tA-P\n# comment\na1\tp1\n");
  try {
    load_dataset(DatasetPaths::in_directory(dir_));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST_F(DatasetDir, BadFeatureValueIsParseError) {
  write_small();
  file("nodes.tsv", "a0\tA\t1.0,2.0\na1\tA\t1.0,x\np0\tP\np1\tP\np2\tP\ns0\tS\n");
  try {
    load_dataset(DatasetPaths::in_directory(dir_));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST_F(DatasetDir, UnknownTypeIsSchemaError) {
  write_small();
  file("nodes.tsv", "a0\tA\na1\tB\n");
  EXPECT_THROW(load_dataset(DatasetPaths::in_directory(dir_)), SchemaError);
}

TEST_F(DatasetDir, UnknownRelationAndWrongEndpointTypes) {
  write_small();
  file("edges.tsv", "a0\tp0\tA-X\n");
  EXPECT_THROW(load_dataset(DatasetPaths::in_directory(dir_)), SchemaError);
  file("edges.tsv", "p0\ta0\tA-P\n");
  EXPECT_THROW(load_dataset(DatasetPaths::in_directory(dir_)), SchemaError);
}

TEST_F(DatasetDir, OverlappingSplitsIsValidationError) {
  write_small();
  file("splits.tsv", "p0\ttrain\np1\tval\np1\ttest\n");
  EXPECT_THROW(load_dataset(DatasetPaths::in_directory(dir_)), ValidationError);
}

TEST_F(DatasetDir, DescriptorRejectsUndeclaredTypes) {
  EXPECT_THROW(descriptor_from_json(nlohmann::json::parse(
                   R"({"node_types": ["A"], "relations": [{"name": "A-B", "src": "A", "dst": "B"}], "target": "A"})")),
               SchemaError);
  EXPECT_THROW(descriptor_from_json(nlohmann::json::parse(R"({"relations": []})")), SchemaError);
}

TEST_F(DatasetDir, SyntheticRoundTrip) {
  const HeteroGraph g = synth_graph(acm_like_config(4));
  write_dataset(g, dir_);
  const HeteroGraph h = load_dataset(DatasetPaths::in_directory(dir_));
  EXPECT_EQ(h.node_types, g.node_types);
  EXPECT_EQ(h.num_nodes, g.num_nodes);
  EXPECT_EQ(h.relations, g.relations);
  for (std::size_t r = 0; r < g.relations.size(); ++r) EXPECT_EQ(edge_set(h, r), edge_set(g, r));
  EXPECT_EQ(h.labels, g.labels);
  EXPECT_EQ(h.num_classes, g.num_classes);
  EXPECT_EQ(h.node_split.train, g.node_split.train);
  EXPECT_EQ(h.node_split.test, g.node_split.test);
  for (std::size_t t = 0; t < g.features.size(); ++t) EXPECT_EQ(h.features[t], g.features[t]);
}

TEST_F(DatasetDir, LinkPredictionSplitRoundTrip) {
  file("dataset.json",
       R"({"name": "lp", "node_types": ["U", "I", "C"],
           "relations": [{"name": "U-I", "src": "U", "dst": "I"}, {"name": "I-C", "src": "I", "dst": "C"}],
           "task": "lp", "target": "U-I"})");
  file("nodes.tsv", "u0\tU\nu1\tU\nu2\tU\ni0\tI\ni1\tI\ni2\tI\nc0\tC\n");
  file("edges.tsv", "u0\ti0\tU-I\nu1\ti1\tU-I\nu2\ti2\tU-I\ni0\tc0\tI-C\n");
  file("labels.tsv", "");
  file("splits.tsv", "u0\ti0\ttrain\t1\nu1\ti1\tval\t1\nu2\ti2\ttest\t1\n");
  const HeteroGraph g = load_dataset(DatasetPaths::in_directory(dir_));
  EXPECT_EQ(g.task, Task::link_prediction);
  ASSERT_EQ(g.link_split.val.positives.size(), 1u);
  ASSERT_EQ(g.link_split.val.negatives.size(), 1u);
  EXPECT_NE(g.link_split.val.negatives[0], g.link_split.val.positives[0]);

  const fs::path copy = dir_ / "copy";
  write_dataset(g, copy);
  const HeteroGraph h = load_dataset(DatasetPaths::in_directory(copy));
  EXPECT_EQ(h.link_split.test.positives, g.link_split.test.positives);
  EXPECT_EQ(h.link_split.test.negatives, g.link_split.test.negatives);
}

TEST(RelationSummary, ColumnLayout) {
  const HeteroGraph g = synth_graph(acm_like_config(1));
  const std::string text = relation_summary(g);
  std::istringstream in(text);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.substr(0, 14), "Relations(A-B)");
  std::string line;
  std::getline(in, line);
  std::istringstream row(line);
  std::string label;
  long a = 0, b = 0, ab = 0;
  row >> label >> a >> b >> ab;
  EXPECT_EQ(label, "Relation(A-P)");
  EXPECT_EQ(a, g.count("A"));
  EXPECT_EQ(b, g.count("P"));
  EXPECT_EQ(ab, static_cast<long>(g.edges[0].size()));
}

}  // namespace
}  // namespace hgnas
