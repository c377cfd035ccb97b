#include "bench_fixture.hpp"
#include "gradcheck.hpp"

#include "hgnas/dag_model.hpp"
#include "hgnas/error.hpp"
#include "hgnas/model.hpp"

#include <gtest/gtest.h>

namespace hgnas {
namespace {

using testing::benchmark_space;
using testing::planted_graph;
using testing::planted_path;

// X -> Y with one edge, one node per type; target Y with two classes.
HeteroGraph two_node_graph() {
  HeteroGraph g;
  g.name = "pair";
  g.node_types = {"X", "Y"};
  g.num_nodes = {1, 1};
  g.relations = {{"X-Y", "X", "Y"}};
  g.edges = {{{0, 0}}};
  g = derive_reverse_relations(std::move(g));
  g.features = {MatrixXd::Constant(1, 2, 0.5), MatrixXd::Constant(1, 2, -1.0)};
  g.features[0](0, 1) = 2.0;
  g.target_type = "Y";
  g.num_classes = 2;
  g.labels = {1};
  return g;
}

std::vector<Var> eval_vars(Tape& tape, const Parameters& p) {
  std::vector<Var> vars;
  for (const auto& v : p.values) vars.push_back(tape.constant(v));
  return vars;
}

MatrixXd eval_logits(const HgnnModel& m, const PreparedGraph& pg) {
  Tape tape;
  auto vars = eval_vars(tape, m.parameters());
  auto reps = m.forward(tape, vars, pg, Mode::eval, 0.6, 0);
  return classify(m.parameters(), vars, reps.front()).value();
}

MatrixXd eval_rep(const HgnnModel& m, const PreparedGraph& pg) {
  Tape tape;
  auto vars = eval_vars(tape, m.parameters());
  return m.forward(tape, vars, pg, Mode::eval, 0.6, 0).front().value();
}

ArchSeq all_zero(const SearchSpace& s, Aggr aggr = Aggr::sum) {
  ArchSeq a;
  a.kind = s.kind;
  for (const auto& layer : s.slots) {
    a.ops.emplace_back(layer.size(), GnnOp::zero);
    a.aggr.push_back(aggr);
  }
  return a;
}

TEST(Forward, OneLayerGcnMatchesHandComputation) {
  const HeteroGraph g = two_node_graph();
  SpaceOptions o;
  o.layers = 1;
  const SearchSpace s = build_space(g, o);
  ASSERT_EQ(s.slots[0].size(), 4u);  // X-Y, Y-X, X-self, Y-self
  const ArchSeq a = baseline_archs(s, MetaPath{}).all_relations;
  const HgnnModel m(a, s, g, 3, 11);
  const PreparedGraph pg = prepare(g);
  const Parameters& p = m.parameters();
  auto P = [&](const std::string& n) { return p.values[p.index_of(n)]; };

  const MatrixXd hx = g.features[0] * P("proj:X");
  const MatrixXd hy = g.features[1] * P("proj:Y");
  // Unit degrees on X-Y and on the identity self-relation.
  const MatrixXd rep = hx * P("w:0:X-Y") + hy * P("w:0:Y-self");
  const MatrixXd logits = rep * P("head:W") + P("head:b");
  EXPECT_LT((eval_logits(m, pg) - logits).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Forward, AllZeroArchGivesIdenticalLogits) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  const HgnnModel m(all_zero(s), s, g, 8, 3);
  const MatrixXd logits = eval_logits(m, prepare(g));
  for (Index i = 1; i < logits.rows(); ++i) EXPECT_EQ(logits.row(i), logits.row(0));
  EXPECT_EQ(logits.row(0), m.parameters().values[m.parameters().index_of("head:b")]);
}

TEST(Forward, EvalModeIsDeterministic) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  const HgnnModel m(baseline_archs(s, planted_path()).all_relations, s, g, 8, 3);
  const PreparedGraph pg = prepare(g);
  EXPECT_EQ(eval_logits(m, pg), eval_logits(m, pg));
}

TEST(Forward, ZeroSlotIgnoresItsAdjacency) {
  const HeteroGraph& g = planted_graph();
  SpaceOptions o;
  o.layers = 2;
  const SearchSpace s = build_space(g, o);
  ArchSeq a = all_zero(s, Aggr::mean);
  a.ops[0][2] = GnnOp::gat;  // P-S
  a.ops[1][3] = GnnOp::sage;  // S-P
  a.aggr[1] = Aggr::lstm;
  const HgnnModel m(a, s, g, 6, 5);
  PreparedGraph pg = prepare(g);
  const MatrixXd before = eval_rep(m, pg);
  std::mt19937_64 rng(1);
  const std::size_t ap = g.require_relation("A-P");
  pg.relations[ap] = testing::random_adjacency(g.count("A"), g.count("P"), rng, 0.3);
  EXPECT_EQ(eval_rep(m, pg), before);
}

TEST(Forward, IsolatedTargetWithoutSelfRelationIsZero) {
  HeteroGraph g = two_node_graph();
  g.num_nodes = {1, 2};
  g.features[1] = MatrixXd::Ones(2, 2);
  g.labels = {1, 0};
  SpaceOptions o;
  o.layers = 2;
  o.self_relations = false;
  const SearchSpace s = build_space(g, o);
  const PreparedGraph pg = prepare(g);
  for (GnnOp op : all_gnn_ops())
    for (Aggr aggr : all_aggrs()) {
      ArchSeq a = all_zero(s, aggr);
      for (auto& layer : a.ops) std::fill(layer.begin(), layer.end(), op);
      const HgnnModel m(a, s, g, 4, 9);
      const MatrixXd rep = eval_rep(m, pg);
      EXPECT_EQ(rep.row(1), MatrixXd::Zero(1, 4)) << to_string(op) << "/" << to_string(aggr);
    }
}

TEST(Model, ZeroSlotsOwnNoParameters) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  const ArchSeq full = baseline_archs(s, planted_path()).all_relations;
  ArchSeq fewer = full;
  fewer.ops[0][0] = GnnOp::zero;
  const Index h = 8;
  const HgnnModel a(full, s, g, h, 1), b(fewer, s, g, h, 1), c(full, s, g, h, 99);
  EXPECT_EQ(a.parameter_count(), b.parameter_count() + static_cast<std::size_t>(h * h));
  EXPECT_EQ(a.parameter_count(), c.parameter_count());
}

TEST(Model, SharedParametersStartEqualAcrossArchitectures) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  const BaselineArchs base = baseline_archs(s, planted_path());
  const HgnnModel a(base.all_relations, s, g, 8, 4), b(base.meta_path, s, g, 8, 4);
  const auto& pa = a.parameters();
  const auto& pb = b.parameters();
  for (std::size_t i = 0; i < pb.names.size(); ++i) EXPECT_EQ(pb.values[i], pa.values[pa.index_of(pb.names[i])]);
}

TEST(Model, MissingRelationIsRejected) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  HeteroGraph other = two_node_graph();
  EXPECT_THROW(HgnnModel(baseline_archs(s, planted_path()).meta_path, s, other, 4, 1), std::exception);
}

TEST(TrainEval, PlantedMetaPathBeatsAllZero) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  const PreparedGraph pg = prepare(g);
  const TrainConfig cfg = TrainConfig::desk_scale();
  const TrialResult meta = train_eval(baseline_archs(s, planted_path()).meta_path, s, pg, cfg);
  const TrialResult zero = train_eval(all_zero(s), s, pg, cfg);
  EXPECT_GE(meta.val_metric, 0.9);

  std::vector<int> truth;
  for (Index i : g.node_split.val) truth.push_back(g.labels[static_cast<std::size_t>(i)]);
  EXPECT_LE(zero.val_metric, testing::constant_predictor_bound(truth, g.num_classes) + 1e-12);
  EXPECT_LE(zero.val_metric, 0.5);
}

TEST(TrainEval, BitwiseReproducible) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.seed = 12;
  const ArchSeq a = baseline_archs(s, planted_path()).all_relations;
  const TrialResult x = train_eval(a, s, g, cfg);
  const TrialResult y = train_eval(a, s, g, cfg);
  EXPECT_EQ(x.val_metric, y.val_metric);
  EXPECT_EQ(x.test_metric, y.test_metric);
  EXPECT_EQ(x.epochs_run, y.epochs_run);
}

TEST(TrainEval, DivergenceIsAFailedTrial) {
  const HeteroGraph& g = planted_graph();
  const SearchSpace s = benchmark_space(g);
  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.learning_rate = 1e300;
  cfg.dropout = 0;
  const TrialResult r = train_eval(baseline_archs(s, planted_path()).all_relations, s, g, cfg);
  EXPECT_TRUE(r.failed);
  EXPECT_EQ(r.val_metric, 0.0);
  EXPECT_EQ(r.test_metric, 0.0);
}

TEST(TrainEval, FullSpaceOperatorsTrain) {
  const HeteroGraph& g = planted_graph();
  SpaceOptions o;
  o.layers = 2;
  o.prune = true;
  const SearchSpace s = build_space(g, o);
  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.epochs = 5;
  for (Aggr aggr : all_aggrs()) {
    ArchSeq a = all_zero(s, aggr);
    for (std::size_t l = 0; l < a.ops.size(); ++l)
      for (std::size_t k = 0; k < a.ops[l].size(); ++k) a.ops[l][k] = all_gnn_ops()[(k + l) % 4];
    const TrialResult r = train_eval(a, s, g, cfg);
    EXPECT_FALSE(r.failed) << to_string(aggr);
    EXPECT_GE(r.val_metric, 0.0);
    EXPECT_LE(r.val_metric, 1.0);
  }
}

TEST(TrainEval, LinkPredictionReportsAuc) {
  HeteroGraph g = planted_graph();
  g.task = Task::link_prediction;
  g.target_relation = "P-S";
  const std::size_t r = g.require_relation("P-S");
  std::vector<Edge> pos = g.edges[r];
  LinkSample* parts[] = {&g.link_split.train, &g.link_split.val, &g.link_split.test};
  for (std::size_t i = 0; i < pos.size(); ++i) parts[i % 3]->positives.push_back(pos[i]);
  for (std::size_t k = 0; k < 3; ++k) {
    parts[k]->relation = "P-S";
    parts[k]->negatives = sample_negatives(g, "P-S", parts[k]->positives, 7 + k);
  }
  SpaceOptions o;
  o.layers = 2;
  o.kind = SpaceKind::benchmark;
  const SearchSpace s = build_space(g, o);
  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.epochs = 20;
  const TrialResult res = train_eval(baseline_archs(s, MetaPath{}).all_relations, s, g, cfg);
  EXPECT_FALSE(res.failed);
  EXPECT_GE(res.val_metric, 0.0);
  EXPECT_LE(res.val_metric, 1.0);
}

TEST(DagModel, IdentityChainCarriesProjectedFeatures) {
  const HeteroGraph& g = planted_graph();
  const DagSpace ds = build_dag_space(g, 3, "P");
  const PreparedGraph pg = prepare(g);

  const DagArch a(ds.edges.size(), dag_identity);
  const DagModel m(a, ds, pg, 4, 1);
  Tape tape;
  auto vars = eval_vars(tape, m.parameters());
  const auto states = m.states(tape, vars, pg, Mode::eval, 0.5, 0);
  const Parameters& p = m.parameters();
  const std::size_t P = g.require_type("P");
  Index offset = 0;
  for (std::size_t t = 0; t < P; ++t) offset += g.num_nodes[t];
  const MatrixXd projected = g.features[P] * p.values[p.index_of("proj:P")];
  for (int j = 0; j <= ds.states; ++j)
    EXPECT_LT((states[static_cast<std::size_t>(j)].value().middleRows(offset, g.count("P")) - projected).cwiseAbs().maxCoeff(),
              1e-12);
  const auto reps = m.forward(tape, vars, pg, Mode::eval, 0.5, 0);
  EXPECT_LT((reps[0].value() - projected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DagModel, PlantedPathAssignmentLearns) {
  const HeteroGraph& g = planted_graph();
  const DagSpace ds = build_dag_space(g, 2, "P");
  ASSERT_EQ(ds.edges.size(), 3u);  // H0-H1, H1-H2, H0-H2
  const DagArch a{"P-S", "S-P", dag_empty};
  const TrialResult r = eval_dag_arch(a, ds, prepare(g), TrainConfig::desk_scale());
  EXPECT_GE(r.val_metric, 0.9);
}

TEST(DagModel, FinalEdgeOutsideTargetRelationsIsRejected) {
  const HeteroGraph& g = planted_graph();
  const DagSpace ds = build_dag_space(g, 2, "P");
  const DagArch a{"P-S", "P-S", dag_empty};
  EXPECT_THROW(eval_dag_arch(a, ds, prepare(g), TrainConfig::desk_scale()), ValidationError);
}

}  // namespace
}  // namespace hgnas
