#pragma once

#include "hgnas/controller.hpp"
#include "hgnas/model.hpp"
#include "hgnas/prompt.hpp"
#include "hgnas/space.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

// Trains (or looks up) one architecture with the given seed.
using Evaluator = std::function<TrialResult(const ArchSeq&, std::uint64_t seed)>;

// Evaluator backed by train_eval; `cfg.seed` is replaced by the requested seed. The graph
// must outlive the evaluator.
Evaluator training_evaluator(const HeteroGraph& g, SearchSpace space, TrainConfig cfg);

int default_workers();

// Results by canonical arch text. Thread-safe.
class EvalCache {
 public:
  std::optional<TrialResult> find(const std::string& text) const;
  void store(const std::string& text, const TrialResult& r);
  void count_hit() { ++hits_; }
  void count_invocation() { ++invocations_; }
  int hits() const { return hits_; }
  int invocations() const { return invocations_; }  // evaluator calls made through evaluate_batch
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, TrialResult> results_;
  std::atomic<int> hits_{0};
  std::atomic<int> invocations_{0};
};

struct BatchItem {
  ArchSeq arch;
  std::string text;
  TrialResult result;
  bool cached = false;
};

// One item per distinct arch, in first-proposal order. Misses are evaluated on up to
// `workers` threads; an evaluator exception becomes a failed, metric-0 result.
std::vector<BatchItem> evaluate_batch(const std::vector<ArchSeq>& archs, const Evaluator& evaluate, std::uint64_t seed,
                                      EvalCache& cache, int workers = 1);

// Order shared by search selection and oracle ranks: higher validation metric, then fewer
// active slots, then lower arch index.
bool ranks_before(double val_a, const ArchSeq& a, double val_b, const ArchSeq& b, const SearchSpace& s);

// The k records that come first under ranks_before.
std::vector<TrialRecord> top_k(const std::vector<TrialRecord>& history, std::size_t k, const SearchSpace& s);

struct SearchConfig {
  int explore_iterations = 10;
  int optimize_iterations = 5;
  std::size_t batch = 20;
  std::size_t top_k = 10;
  int retrain_count = 10;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: available cores - 1
  int retries = 3;
  double explore_temperature = 1.0;
  double optimize_temperature = 0.0;
  std::optional<int> budget;  // proposals; overrides the iteration counts when set
  Ablation ablation;
  TrainConfig train;

  // Budget B gives n = ceil(B / batch) iterations: 2n/5 (floor) optimization, the rest exploration.
  void apply_budget();
  int resolved_workers() const { return workers > 0 ? workers : default_workers(); }
  void check() const;
};

nlohmann::json to_json(const SearchConfig& c);
// Unknown keys are rejected.
SearchConfig search_config_from_json(const nlohmann::json& j, SearchConfig defaults = {});

enum class StageCursor { exploration, optimization, selection, done };
enum class RunStatus { running, done, aborted };

std::string to_string(StageCursor c);
std::string to_string(RunStatus s);

struct IterationStat {
  int iteration = 0;
  StageKind stage = StageKind::exploration;
  int proposed = 0;     // valid archs in the proposal
  int new_records = 0;  // appended to history
  int repeats = 0;      // already in history
  int rejects = 0;
  double best_so_far = 0;  // best validation metric over the whole history
  double mean = 0;         // over this iteration's new records
  double variance = 0;     // population variance, same records
};

struct RetrainEntry {
  ArchSeq arch;
  std::string text;
  std::vector<double> val;
  std::vector<double> test;
  double mean_val = 0;
  double mean_test = 0;
};

struct SearchRun {
  SearchSpace space;
  std::string controller;
  SearchConfig config;
  std::vector<TrialRecord> history;
  StageCursor cursor = StageCursor::exploration;
  int next_iteration = 0;  // global
  RunStatus status = RunStatus::running;
  std::string abort_reason;
  std::vector<std::string> pending_notes;  // feedback for the next proposal round
  nlohmann::json controller_state = nlohmann::json::object();
  std::vector<IterationStat> series;
  std::vector<RetrainEntry> retrain;
  std::optional<ArchSeq> best;
  double best_val = 0;
  double best_test = 0;
  int evaluations = 0;  // evaluator calls during the search stages
  int cache_hits = 0;   // proposals answered from history

  const TrialRecord* find(const std::string& text) const;
};

SearchRun new_search_run(SearchSpace space, std::string controller, SearchConfig config);

nlohmann::json to_json(const SearchRun& r);
SearchRun search_run_from_json(const nlohmann::json& j);

// Written through a temporary file and renamed, so a crash leaves the previous state.
void persist(const SearchRun& run, const std::filesystem::path& path);
// Throws IntegrityError (with the byte offset) when the file is truncated or corrupt.
SearchRun resume(const std::filesystem::path& path);

struct SearchHooks {
  std::filesystem::path persist_path;  // empty: keep state in memory only
  std::function<void(const SearchRun&)> on_iteration_end;
  std::function<void(const std::string&)> log;  // progress lines
};

// Runs the remaining stages of `run`: exploration, optimization, then retraining of the
// top_k and selection by mean validation metric. A controller abort returns the run with
// status aborted; transport errors are persisted and rethrown.
SearchRun run_search(SearchRun run, Controller& controller, const Evaluator& evaluate, const SearchHooks& hooks = {});

// iteration,stage,proposed,new_records,repeats,rejects,best_so_far,mean,variance
void write_series_csv(const SearchRun& run, const std::filesystem::path& path);

}  // namespace hgnas
