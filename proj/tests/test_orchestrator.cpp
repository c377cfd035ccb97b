#include "bench_fixture.hpp"

#include "hgnas/error.hpp"
#include "hgnas/orchestrator.hpp"
#include "hgnas/rng.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

namespace hgnas {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const SearchSpace& bench() {
  static const SearchSpace s = testing::benchmark_space(testing::planted_graph());
  return s;
}

double pseudo_metric(const std::string& text, std::uint64_t salt = 0) {
  return static_cast<double>(derive_seed(fnv1a(text), salt) >> 11) / 9007199254740992.0;
}

// Deterministic stand-in for training: metric is a hash of the arch text (and seed).
struct FakeEvaluator {
  std::shared_ptr<std::atomic<int>> calls = std::make_shared<std::atomic<int>>(0);
  std::shared_ptr<std::mutex> mu = std::make_shared<std::mutex>();
  std::shared_ptr<std::vector<std::uint64_t>> seeds = std::make_shared<std::vector<std::uint64_t>>();
  bool seed_dependent = false;

  Evaluator fn() const {
    return [*this](const ArchSeq& a, std::uint64_t seed) {
      ++*calls;
      {
        std::lock_guard lock(*mu);
        seeds->push_back(seed);
      }
      TrialResult r;
      r.val_metric = pseudo_metric(encode(a), seed_dependent ? seed : 0);
      r.test_metric = r.val_metric / 2;
      return r;
    };
  }
};

std::string tmpfile(const std::string& name) {
  return (fs::temp_directory_path() / ("hgnas_orch_" + name)).string();
}

TrialRecord rec(double v) {
  static int n = 0;
  TrialRecord r;
  r.text = "r" + std::to_string(n++);
  r.val_metric = v;
  return r;
}

TEST(TopK, TiesPreferFewerActiveSlotsThenLowerIndex) {
  ArchSeq none;
  none.kind = bench().kind;
  for (const auto& layer : bench().slots) {
    none.ops.emplace_back(layer.size(), GnnOp::zero);
    none.aggr.push_back(bench().aggr_candidates.front());
  }
  ArchSeq full = none, early = none, late = none;
  for (auto& layer : full.ops) std::fill(layer.begin(), layer.end(), GnnOp::gcn);
  early.ops[0][0] = GnnOp::gcn;
  late.ops[1][0] = GnnOp::gcn;
  if (arch_index(late, bench()) < arch_index(early, bench())) std::swap(early, late);

  std::vector<TrialRecord> h = {rec(0.91), rec(0.93), rec(0.93), rec(0.90), rec(0.93)};
  h[0].arch = none;
  h[1].arch = full;
  h[2].arch = late;
  h[3].arch = none;
  h[4].arch = early;
  const auto best = top_k(h, 3, bench());
  ASSERT_EQ(best.size(), 3u);
  EXPECT_EQ(best[0].text, h[4].text);
  EXPECT_EQ(best[1].text, h[2].text);
  EXPECT_EQ(best[2].text, h[1].text);
  EXPECT_EQ(top_k(h, 10, bench()).size(), 5u);
  EXPECT_TRUE(ranks_before(0.5, full, 0.4, none, bench()));
}

TEST(EvaluateBatch, CacheHitsSkipTraining) {
  const auto all = enumerate_all(bench());
  FakeEvaluator fake;
  EvalCache cache;
  evaluate_batch({all[0], all[1], all[2]}, fake.fn(), 0, cache);
  EXPECT_EQ(*fake.calls, 3);
  std::vector<ArchSeq> batch(all.begin(), all.begin() + 20);
  const auto items = evaluate_batch(batch, fake.fn(), 0, cache, 3);
  EXPECT_EQ(*fake.calls, 3 + 17);
  EXPECT_EQ(cache.invocations(), 20);
  EXPECT_EQ(cache.hits(), 3);
  ASSERT_EQ(items.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(items[i].text, encode(all[i]));
    EXPECT_EQ(items[i].cached, i < 3);
  }
}

TEST(EvaluateBatch, DuplicateInBatchTrainedOnce) {
  const auto all = enumerate_all(bench());
  FakeEvaluator fake;
  EvalCache cache;
  const auto items = evaluate_batch({all[5], all[6], all[5]}, fake.fn(), 0, cache);
  EXPECT_EQ(*fake.calls, 2);
  ASSERT_EQ(items.size(), 2u);
}

TEST(EvaluateBatch, FailuresScoreZero) {
  const auto all = enumerate_all(bench());
  EvalCache cache;
  const Evaluator boom = [&](const ArchSeq& a, std::uint64_t) -> TrialResult {
    if (a == all[1]) throw std::runtime_error("diverged");
    TrialResult r;
    r.val_metric = 0.7;
    return r;
  };
  const auto items = evaluate_batch({all[0], all[1]}, boom, 0, cache);
  EXPECT_FALSE(items[0].result.failed);
  EXPECT_TRUE(items[1].result.failed);
  EXPECT_EQ(items[1].result.val_metric, 0.0);
  EXPECT_EQ(items[1].result.error, "diverged");
}

TEST(EvaluateBatch, ParallelMatchesSerialWithRealTraining) {
  TrainConfig cfg = TrainConfig::desk_scale();
  cfg.epochs = 15;
  const Evaluator train = training_evaluator(testing::planted_graph(), bench(), cfg);
  const auto all = enumerate_all(bench());
  const std::vector<ArchSeq> batch = {all[0], all[100], all[517], all[1023], all[64], all[300]};
  EvalCache serial_cache, parallel_cache;
  const auto serial = evaluate_batch(batch, train, 3, serial_cache, 1);
  const auto parallel = evaluate_batch(batch, train, 3, parallel_cache, 4);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    EXPECT_EQ(serial[i].text, parallel[i].text);
    EXPECT_EQ(serial[i].result.val_metric, parallel[i].result.val_metric);
    EXPECT_EQ(serial[i].result.test_metric, parallel[i].result.test_metric);
  }
}

TEST(SearchConfigTest, BudgetSplit) {
  SearchConfig c;
  c.batch = 20;
  c.budget = 100;
  c.apply_budget();
  EXPECT_EQ(c.explore_iterations, 3);
  EXPECT_EQ(c.optimize_iterations, 2);
  c.budget = 300;
  c.apply_budget();
  EXPECT_EQ(c.explore_iterations, 9);
  EXPECT_EQ(c.optimize_iterations, 6);
  c.budget = 10;
  c.apply_budget();
  EXPECT_EQ(c.explore_iterations, 1);
  EXPECT_EQ(c.optimize_iterations, 0);
}

TEST(SearchConfigTest, JsonRoundTripRejectsUnknownKeys) {
  SearchConfig c;
  c.top_k = 7;
  c.budget = 40;
  c.ablation.no_strategy = true;
  c.train.hidden_dim = 16;
  const SearchConfig back = search_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_THROW(search_config_from_json({{"topk", 3}}), ConfigError);
  EXPECT_THROW(search_config_from_json({{"batch", 0}}), ConfigError);
  EXPECT_THROW(search_config_from_json({{"ablate", {"no-task"}}}), ConfigError);
  EXPECT_THROW(search_config_from_json({{"train", {{"lr", 0.1}}}}), ConfigError);
}

SearchConfig small_config(int te, int to, std::size_t batch = 20) {
  SearchConfig c;
  c.explore_iterations = te;
  c.optimize_iterations = to;
  c.batch = batch;
  c.top_k = 10;
  c.retrain_count = 2;
  c.workers = 2;
  return c;
}

TEST(RunSearch, PaperDefaultsStayWithinBudget) {
  FakeEvaluator fake;
  RandomController rc(bench(), 1);
  SearchConfig c = small_config(10, 5);
  c.retrain_count = 0;
  const SearchRun run = run_search(new_search_run(bench(), "random", c), rc, fake.fn());
  EXPECT_EQ(run.status, RunStatus::done);
  EXPECT_EQ(run.history.size(), 300u);
  EXPECT_EQ(*fake.calls, 300);
  EXPECT_EQ(run.series.size(), 15u);
  std::set<std::string> texts;
  for (const auto& r : run.history) EXPECT_TRUE(texts.insert(r.text).second);
  EXPECT_EQ(run.history.front().stage, StageKind::exploration);
  EXPECT_EQ(run.history.back().stage, StageKind::optimization);
  EXPECT_EQ(run.history.back().iteration, 14);
}

TEST(RunSearch, ScriptedFixtureWithBestArchIsSelected) {
  const auto all = enumerate_all(bench());
  std::size_t best = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (pseudo_metric(encode(all[i])) > pseudo_metric(encode(all[best]))) best = i;
  json batches = json::array();
  std::size_t next = 0;
  for (int it = 0; it < 5; ++it) {
    json b = json::array();
    for (int k = 0; k < 20; ++k) {
      if (next == best) ++next;
      b.push_back(encode(all[next++]));
    }
    if (it == 4) b[7] = encode(all[best]);
    batches.push_back(b);
  }
  FakeEvaluator fake;
  ScriptedController sc(bench(), batches);
  const SearchRun run = run_search(new_search_run(bench(), "scripted", small_config(3, 2)), sc, fake.fn());
  EXPECT_EQ(run.status, RunStatus::done);
  int proposed = 0;
  for (const auto& s : run.series) proposed += s.proposed;
  EXPECT_EQ(proposed, 100);
  ASSERT_TRUE(run.best.has_value());
  EXPECT_EQ(*run.best, all[best]);
  ASSERT_EQ(run.retrain.size(), 10u);
  for (const auto& e : run.retrain) EXPECT_LE(e.mean_val, run.best_val);
}

TEST(RunSearch, RepeatedProposalsEchoedNotRetrained) {
  const auto all = enumerate_all(bench());
  json batches = json::array({json::array({encode(all[0]), encode(all[1])}), json::array({encode(all[1]), encode(all[2])})});
  FakeEvaluator fake;
  ScriptedController sc(bench(), batches);
  SearchConfig c = small_config(2, 0);
  c.retrain_count = 0;
  const SearchRun run = run_search(new_search_run(bench(), "scripted", c), sc, fake.fn());
  EXPECT_EQ(*fake.calls, 3);
  EXPECT_EQ(run.history.size(), 3u);
  EXPECT_EQ(run.cache_hits, 1);
  EXPECT_EQ(run.series[1].repeats, 1);
  ASSERT_EQ(run.pending_notes.size(), 1u);
  EXPECT_EQ(run.pending_notes[0].rfind("already evaluated: " + encode(all[1]) + " is ", 0), 0u);
}

TEST(RunSearch, RetrainUsesConsecutiveSeedsAndMean) {
  const auto all = enumerate_all(bench());
  FakeEvaluator fake;
  fake.seed_dependent = true;
  ScriptedController sc(bench(), json{{encode(all[0]), encode(all[1]), encode(all[2])}});
  SearchConfig c = small_config(1, 0);
  c.train.seed = 40;
  c.top_k = 2;
  c.retrain_count = 3;
  c.workers = 1;
  const SearchRun run = run_search(new_search_run(bench(), "scripted", c), sc, fake.fn());
  ASSERT_EQ(run.retrain.size(), 2u);
  EXPECT_EQ(fake.seeds->size(), 3u + 6u);
  EXPECT_EQ(std::vector<std::uint64_t>(fake.seeds->begin() + 3, fake.seeds->end()),
            (std::vector<std::uint64_t>{40, 41, 42, 40, 41, 42}));
  for (const auto& e : run.retrain) {
    ASSERT_EQ(e.val.size(), 3u);
    EXPECT_DOUBLE_EQ(e.mean_val, (e.val[0] + e.val[1] + e.val[2]) / 3);
  }
  const auto& winner = run.retrain[0].mean_val >= run.retrain[1].mean_val ? run.retrain[0] : run.retrain[1];
  EXPECT_EQ(encode(*run.best), winner.text);
}

TEST(RunSearch, ControllerAbortKeepsPartialHistory) {
  const auto all = enumerate_all(bench());
  json script = json::array({json::array({encode(all[0])}), "nothing", "still nothing", "no", "none"});
  FakeEvaluator fake;
  ScriptedController sc(bench(), script);
  const std::string path = tmpfile("abort.json");
  SearchHooks hooks;
  hooks.persist_path = path;
  const SearchRun run = run_search(new_search_run(bench(), "scripted", small_config(3, 2)), sc, fake.fn(), hooks);
  EXPECT_EQ(run.status, RunStatus::aborted);
  EXPECT_NE(run.abort_reason.find("no valid architecture"), std::string::npos);
  EXPECT_EQ(run.history.size(), 1u);
  const SearchRun stored = resume(path);
  EXPECT_EQ(stored.status, RunStatus::aborted);
  EXPECT_EQ(stored.history, run.history);
  fs::remove(path);
}

TEST(RunSearch, RandomControllerRunsAreBitIdentical) {
  FakeEvaluator f1, f2;
  RandomController a(bench(), 77), b(bench(), 77);
  const SearchRun r1 = run_search(new_search_run(bench(), "random", small_config(3, 2)), a, f1.fn());
  const SearchRun r2 = run_search(new_search_run(bench(), "random", small_config(3, 2)), b, f2.fn());
  EXPECT_EQ(to_json(r1).dump(), to_json(r2).dump());
}

struct Killed {};

TEST(PersistResume, KillMidExplorationMatchesUninterrupted) {
  const std::string path = tmpfile("resume.json");
  fs::remove(path);
  FakeEvaluator straight_eval;
  RandomController straight(bench(), 5);
  const SearchRun expected = run_search(new_search_run(bench(), "random", small_config(3, 2)), straight, straight_eval.fn());

  FakeEvaluator first_eval;
  RandomController first(bench(), 5);
  SearchHooks hooks;
  hooks.persist_path = path;
  hooks.on_iteration_end = [](const SearchRun& r) {
    if (r.next_iteration == 2) throw Killed{};
  };
  EXPECT_THROW(run_search(new_search_run(bench(), "random", small_config(3, 2)), first, first_eval.fn(), hooks), Killed);

  const SearchRun partial = resume(path);
  EXPECT_EQ(partial.next_iteration, 2);
  EXPECT_EQ(partial.cursor, StageCursor::exploration);
  EXPECT_EQ(partial.history.size(), 40u);

  FakeEvaluator second_eval;
  RandomController second(bench(), 5);
  hooks.on_iteration_end = nullptr;
  const SearchRun finished = run_search(partial, second, second_eval.fn(), hooks);
  EXPECT_EQ(to_json(finished).dump(), to_json(expected).dump());
  EXPECT_EQ(*first_eval.calls + *second_eval.calls, *straight_eval.calls);
  fs::remove(path);
}

TEST(PersistResume, ScriptedCursorSurvivesRestart) {
  const auto all = enumerate_all(bench());
  json batches = json::array();
  for (int it = 0; it < 4; ++it) {
    json b = json::array();
    for (int k = 0; k < 5; ++k) b.push_back(encode(all[it * 5 + k]));
    batches.push_back(b);
  }
  const std::string path = tmpfile("scripted_resume.json");
  fs::remove(path);
  FakeEvaluator e0, e1, e2;
  ScriptedController straight(bench(), batches);
  const SearchRun expected = run_search(new_search_run(bench(), "scripted", small_config(2, 2, 5)), straight, e0.fn());

  ScriptedController first(bench(), batches);
  SearchHooks hooks;
  hooks.persist_path = path;
  hooks.on_iteration_end = [](const SearchRun& r) {
    if (r.next_iteration == 1) throw Killed{};
  };
  EXPECT_THROW(run_search(new_search_run(bench(), "scripted", small_config(2, 2, 5)), first, e1.fn(), hooks), Killed);
  ScriptedController second(bench(), batches);
  hooks.on_iteration_end = nullptr;
  const SearchRun finished = run_search(resume(path), second, e2.fn(), hooks);
  EXPECT_EQ(to_json(finished).dump(), to_json(expected).dump());
  fs::remove(path);
}

TEST(PersistResume, DoneRunReturnsImmediately) {
  const std::string path = tmpfile("done.json");
  FakeEvaluator fake;
  RandomController rc(bench(), 2);
  SearchHooks hooks;
  hooks.persist_path = path;
  const SearchRun done = run_search(new_search_run(bench(), "random", small_config(1, 1)), rc, fake.fn(), hooks);
  const int calls = *fake.calls;
  const SearchRun again = run_search(resume(path), rc, fake.fn(), hooks);
  EXPECT_EQ(*fake.calls, calls);
  ASSERT_TRUE(again.best.has_value());
  EXPECT_EQ(*again.best, *done.best);
  fs::remove(path);
}

TEST(PersistResume, TruncatedFileReportsOffsetAndIsPreserved) {
  const std::string path = tmpfile("truncated.json");
  FakeEvaluator fake;
  RandomController rc(bench(), 2);
  SearchHooks hooks;
  hooks.persist_path = path;
  run_search(new_search_run(bench(), "random", small_config(1, 0)), rc, fake.fn(), hooks);
  std::string text;
  {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  const std::string cut = text.substr(0, text.size() / 2);
  {
    std::ofstream out(path, std::ios::trunc);
    out << cut;
  }
  try {
    resume(path);
    FAIL() << "expected IntegrityError";
  } catch (const IntegrityError& e) {
    EXPECT_GT(e.offset(), 0u);
    EXPECT_LE(e.offset(), cut.size() + 1);
  }
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), cut);
  EXPECT_THROW(resume(tmpfile("missing.json")), IntegrityError);
  fs::remove(path);
}

TEST(SeriesCsv, OneRowPerIteration) {
  FakeEvaluator fake;
  RandomController rc(bench(), 9);
  const SearchRun run = run_search(new_search_run(bench(), "random", small_config(2, 1, 10)), rc, fake.fn());
  const std::string path = tmpfile("series.csv");
  write_series_csv(run, path);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], "iteration,stage,proposed,new_records,repeats,rejects,best_so_far,mean,variance");
  EXPECT_EQ(lines[3].rfind("2,optimization,10,10,0,0,", 0), 0u);
  double prev = 0;
  for (const auto& s : run.series) {
    EXPECT_GE(s.best_so_far, prev);
    prev = s.best_so_far;
  }
  fs::remove(path);
}

}  // namespace
}  // namespace hgnas
