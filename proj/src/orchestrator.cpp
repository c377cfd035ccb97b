#include "hgnas/orchestrator.hpp"

#include "hgnas/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace hgnas {

using nlohmann::json;

namespace {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  for (auto& th : pool) th.join();
}

TrialResult guarded(const Evaluator& evaluate, const ArchSeq& a, std::uint64_t seed) {
  try {
    return evaluate(a, seed);
  } catch (const std::exception& e) {
    TrialResult r;
    r.failed = true;
    r.error = e.what();
    return r;
  }
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int default_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n > 1 ? static_cast<int>(n) - 1 : 1;
}

Evaluator training_evaluator(const HeteroGraph& g, SearchSpace space, TrainConfig cfg) {
  auto pg = std::make_shared<const PreparedGraph>(prepare(g));
  return [pg, space = std::move(space), cfg](const ArchSeq& a, std::uint64_t seed) {
    TrainConfig c = cfg;
    c.seed = seed;
    return train_eval(a, space, *pg, c);
  };
}

std::optional<TrialResult> EvalCache::find(const std::string& text) const {
  std::lock_guard lock(mu_);
  const auto it = results_.find(text);
  if (it == results_.end()) return std::nullopt;
  return it->second;
}

void EvalCache::store(const std::string& text, const TrialResult& r) {
  std::lock_guard lock(mu_);
  results_[text] = r;
}

std::size_t EvalCache::size() const {
  std::lock_guard lock(mu_);
  return results_.size();
}

std::vector<BatchItem> evaluate_batch(const std::vector<ArchSeq>& archs, const Evaluator& evaluate, std::uint64_t seed,
                                      EvalCache& cache, int workers) {
  std::vector<BatchItem> items;
  std::set<std::string> seen;
  std::vector<std::size_t> misses;
  for (const ArchSeq& a : archs) {
    std::string text = encode(a);
    if (!seen.insert(text).second) continue;
    BatchItem item{a, text, {}, false};
    if (auto hit = cache.find(text)) {
      item.result = *hit;
      item.cached = true;
      cache.count_hit();
    } else {
      misses.push_back(items.size());
    }
    items.push_back(std::move(item));
  }
  parallel_for(misses.size(), workers, [&](std::size_t m) {
    BatchItem& item = items[misses[m]];
    cache.count_invocation();
    item.result = guarded(evaluate, item.arch, seed);
    if (item.result.failed) item.result.val_metric = item.result.test_metric = 0;
  });
  for (std::size_t i : misses) cache.store(items[i].text, items[i].result);
  return items;
}

bool ranks_before(double val_a, const ArchSeq& a, double val_b, const ArchSeq& b, const SearchSpace& s) {
  if (val_a != val_b) return val_a > val_b;
  const std::size_t na = a.active_slots(), nb = b.active_slots();
  if (na != nb) return na < nb;
  return arch_index(a, s) < arch_index(b, s);
}

std::vector<TrialRecord> top_k(const std::vector<TrialRecord>& history, std::size_t k, const SearchSpace& s) {
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranks_before(history[a].val_metric, history[a].arch, history[b].val_metric, history[b].arch, s);
  });
  if (order.size() > k) order.resize(k);
  std::vector<TrialRecord> out;
  for (std::size_t i : order) out.push_back(history[i]);
  return out;
}

void SearchConfig::apply_budget() {
  if (!budget) return;
  const int n = static_cast<int>((static_cast<std::size_t>(*budget) + batch - 1) / batch);
  optimize_iterations = 2 * n / 5;
  explore_iterations = n - optimize_iterations;
}

void SearchConfig::check() const {
  if (explore_iterations < 0 || optimize_iterations < 0) throw ConfigError("iteration counts must be non-negative");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  if (top_k < 1) throw ConfigError("top_k must be at least 1");
  if (retrain_count < 0) throw ConfigError("retrain_count must be non-negative");
  if (retries < 0) throw ConfigError("retries must be non-negative");
  if (workers < 0) throw ConfigError("workers must be non-negative");
  if (budget && *budget < 1) throw ConfigError("budget must be at least 1");
  for (double t : {explore_temperature, optimize_temperature})
    if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("temperatures must be in [0, 2]");
  train.check();
}

json to_json(const SearchConfig& c) {
  return {{"explore_iterations", c.explore_iterations},
          {"optimize_iterations", c.optimize_iterations},
          {"batch", c.batch},
          {"top_k", c.top_k},
          {"retrain_count", c.retrain_count},
          {"seed", c.seed},
          {"workers", c.workers},
          {"retries", c.retries},
          {"explore_temperature", c.explore_temperature},
          {"optimize_temperature", c.optimize_temperature},
          {"budget", c.budget ? json(*c.budget) : json(nullptr)},
          {"ablate", ablation_names(c.ablation)},
          {"train", to_json(c.train)}};
}

SearchConfig search_config_from_json(const json& j, SearchConfig c) {
  if (!j.is_object()) throw ConfigError("search config must be an object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "explore_iterations") c.explore_iterations = v.get<int>();
      else if (key == "optimize_iterations") c.optimize_iterations = v.get<int>();
      else if (key == "batch") c.batch = v.get<std::size_t>();
      else if (key == "top_k") c.top_k = v.get<std::size_t>();
      else if (key == "retrain_count") c.retrain_count = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "retries") c.retries = v.get<int>();
      else if (key == "explore_temperature") c.explore_temperature = v.get<double>();
      else if (key == "optimize_temperature") c.optimize_temperature = v.get<double>();
      else if (key == "budget") c.budget = v.is_null() ? std::nullopt : std::optional<int>(v.get<int>());
      else if (key == "ablate") c.ablation = ablation_from_names(v.get<std::vector<std::string>>());
      else if (key == "train") c.train = train_config_from_json(v, c.train);
      else throw ConfigError("unknown search key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("search." + key + ": " + e.what());
    }
  }
  c.check();
  return c;
}

std::string to_string(StageCursor c) {
  switch (c) {
    case StageCursor::exploration: return "exploration";
    case StageCursor::optimization: return "optimization";
    case StageCursor::selection: return "selection";
    case StageCursor::done: return "done";
  }
  return "?";
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::aborted: return "aborted";
  }
  return "?";
}

namespace {

StageCursor cursor_from_string(const std::string& s) {
  for (StageCursor c : {StageCursor::exploration, StageCursor::optimization, StageCursor::selection, StageCursor::done})
    if (to_string(c) == s) return c;
  throw ConfigError("unknown stage cursor '" + s + "'");
}

RunStatus status_from_string(const std::string& s) {
  for (RunStatus r : {RunStatus::running, RunStatus::done, RunStatus::aborted})
    if (to_string(r) == s) return r;
  throw ConfigError("unknown run status '" + s + "'");
}

json to_json(const IterationStat& s) {
  return {{"iteration", s.iteration}, {"stage", to_string(s.stage)}, {"proposed", s.proposed},
          {"new_records", s.new_records}, {"repeats", s.repeats}, {"rejects", s.rejects},
          {"best_so_far", s.best_so_far}, {"mean", s.mean}, {"variance", s.variance}};
}

IterationStat iteration_stat_from_json(const json& j) {
  IterationStat s;
  s.iteration = j.at("iteration").get<int>();
  s.stage = stage_kind_from_string(j.at("stage").get<std::string>());
  s.proposed = j.at("proposed").get<int>();
  s.new_records = j.at("new_records").get<int>();
  s.repeats = j.at("repeats").get<int>();
  s.rejects = j.at("rejects").get<int>();
  s.best_so_far = j.at("best_so_far").get<double>();
  s.mean = j.at("mean").get<double>();
  s.variance = j.at("variance").get<double>();
  return s;
}

}  // namespace

const TrialRecord* SearchRun::find(const std::string& text) const {
  for (const auto& r : history)
    if (r.text == text) return &r;
  return nullptr;
}

SearchRun new_search_run(SearchSpace space, std::string controller, SearchConfig config) {
  config.apply_budget();
  config.check();
  SearchRun run;
  run.space = std::move(space);
  run.controller = std::move(controller);
  run.config = std::move(config);
  return run;
}

json to_json(const SearchRun& r) {
  json history = json::array(), series = json::array(), retrain = json::array();
  for (const auto& t : r.history) history.push_back(to_json(t));
  for (const auto& s : r.series) series.push_back(to_json(s));
  for (const auto& e : r.retrain)
    retrain.push_back({{"arch", e.text}, {"val", e.val}, {"test", e.test}, {"mean_val", e.mean_val}, {"mean_test", e.mean_test}});
  return {{"format", "hgnas-search-run"},
          {"version", 1},
          {"space", to_json(r.space)},
          {"controller", r.controller},
          {"config", to_json(r.config)},
          {"cursor", to_string(r.cursor)},
          {"next_iteration", r.next_iteration},
          {"status", to_string(r.status)},
          {"abort_reason", r.abort_reason},
          {"pending_notes", r.pending_notes},
          {"controller_state", r.controller_state},
          {"evaluations", r.evaluations},
          {"cache_hits", r.cache_hits},
          {"history", history},
          {"series", series},
          {"retrain", retrain},
          {"best", r.best ? json{{"arch", encode(*r.best)}, {"val", r.best_val}, {"test", r.best_test}} : json(nullptr)}};
}

SearchRun search_run_from_json(const json& j) {
  if (j.value("format", "") != "hgnas-search-run") throw ConfigError("not a search run document");
  SearchRun r;
  r.space = space_from_json(j.at("space"));
  r.controller = j.at("controller").get<std::string>();
  r.config = search_config_from_json(j.at("config"));
  r.cursor = cursor_from_string(j.at("cursor").get<std::string>());
  r.next_iteration = j.at("next_iteration").get<int>();
  r.status = status_from_string(j.at("status").get<std::string>());
  r.abort_reason = j.value("abort_reason", std::string());
  r.pending_notes = j.value("pending_notes", std::vector<std::string>{});
  r.controller_state = j.value("controller_state", json::object());
  r.evaluations = j.value("evaluations", 0);
  r.cache_hits = j.value("cache_hits", 0);
  for (const auto& t : j.at("history")) r.history.push_back(trial_record_from_json(t, r.space));
  for (const auto& s : j.at("series")) r.series.push_back(iteration_stat_from_json(s));
  for (const auto& e : j.at("retrain")) {
    RetrainEntry x;
    x.text = e.at("arch").get<std::string>();
    x.arch = decode(x.text, r.space);
    x.val = e.at("val").get<std::vector<double>>();
    x.test = e.at("test").get<std::vector<double>>();
    x.mean_val = e.at("mean_val").get<double>();
    x.mean_test = e.at("mean_test").get<double>();
    r.retrain.push_back(std::move(x));
  }
  if (!j.at("best").is_null()) {
    r.best = decode(j.at("best").at("arch").get<std::string>(), r.space);
    r.best_val = j.at("best").at("val").get<double>();
    r.best_test = j.at("best").at("test").get<double>();
  }
  return r;
}

void persist(const SearchRun& run, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(run).dump(2) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

SearchRun resume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("cannot open run file " + path.string(), 0);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IntegrityError(path.string() + ": corrupt run file: " + e.what(), e.byte);
  }
  try {
    return search_run_from_json(j);
  } catch (const json::exception& e) {
    throw IntegrityError(path.string() + ": incomplete run file: " + e.what(), text.size());
  } catch (const DecodeError& e) {
    throw IntegrityError(path.string() + ": run history does not match its space: " + e.what(), text.size());
  } catch (const ConfigError& e) {
    throw IntegrityError(path.string() + ": " + e.what(), text.size());
  }
}

namespace {

void advance_cursor(SearchRun& run) {
  const int te = run.config.explore_iterations;
  const int to = run.config.optimize_iterations;
  if (run.cursor == StageCursor::exploration && run.next_iteration >= te) run.cursor = StageCursor::optimization;
  if (run.cursor == StageCursor::optimization && run.next_iteration >= te + to) run.cursor = StageCursor::selection;
}

void save(const SearchRun& run, const SearchHooks& hooks) {
  if (!hooks.persist_path.empty()) persist(run, hooks.persist_path);
}

void say(const SearchHooks& hooks, const std::string& line) {
  if (hooks.log) hooks.log(line);
}

void run_iteration(SearchRun& run, Controller& controller, const Evaluator& evaluate, EvalCache& cache) {
  const SearchConfig& cfg = run.config;
  const bool exploring = run.cursor == StageCursor::exploration;
  ProposalRequest req;
  req.stage = exploring ? Stage::exploration(cfg.explore_temperature) : Stage::optimization(cfg.optimize_temperature);
  req.iteration = run.next_iteration;
  req.stage_iteration = exploring ? run.next_iteration : run.next_iteration - cfg.explore_iterations;
  req.batch = cfg.batch;
  req.top_k = cfg.top_k;
  req.history = &run.history;
  req.notes = run.pending_notes;

  const Proposal p = controller.propose(req);

  IterationStat stat;
  stat.iteration = run.next_iteration;
  stat.stage = req.stage.kind;
  stat.proposed = static_cast<int>(p.archs.size());
  stat.rejects = static_cast<int>(p.rejects.size());

  std::vector<std::string> notes;
  for (const auto& r : p.rejects) notes.push_back(r.feedback_line());
  std::vector<ArchSeq> fresh;
  std::set<std::string> in_batch;
  for (const ArchSeq& a : p.archs) {
    const std::string text = encode(a);
    if (const TrialRecord* old = run.find(text)) {
      ++stat.repeats;
      ++run.cache_hits;
      notes.push_back("already evaluated: " + feedback_arch_text(*old, run.space, cfg.ablation) + " is " +
                      fixed4(old->val_metric));
    } else if (in_batch.insert(text).second) {
      fresh.push_back(a);
    }
  }

  const int before = cache.invocations();
  const auto items = evaluate_batch(fresh, evaluate, cfg.train.seed, cache, cfg.resolved_workers());
  run.evaluations += cache.invocations() - before;

  double sum = 0, sq = 0;
  for (const BatchItem& item : items) {
    TrialRecord rec;
    rec.arch = item.arch;
    rec.text = item.text;
    rec.val_metric = item.result.val_metric;
    rec.test_metric = item.result.test_metric;
    rec.failed = item.result.failed;
    rec.stage = req.stage.kind;
    rec.iteration = run.next_iteration;
    rec.source = controller.kind();
    sum += rec.val_metric;
    sq += rec.val_metric * rec.val_metric;
    run.history.push_back(std::move(rec));
  }
  stat.new_records = static_cast<int>(items.size());
  if (!items.empty()) {
    stat.mean = sum / items.size();
    stat.variance = std::max(0.0, sq / items.size() - stat.mean * stat.mean);
  }
  for (const auto& r : run.history) stat.best_so_far = std::max(stat.best_so_far, r.val_metric);
  run.series.push_back(stat);
  run.pending_notes = std::move(notes);
  ++run.next_iteration;
  run.controller_state = controller.state();
}

void select_best(SearchRun& run, const Evaluator& evaluate) {
  const SearchConfig& cfg = run.config;
  const std::vector<TrialRecord> picks = top_k(run.history, cfg.top_k, run.space);
  run.retrain.clear();
  for (const auto& p : picks) run.retrain.push_back({p.arch, p.text, {}, {}, 0, 0});
  const std::size_t reps = static_cast<std::size_t>(cfg.retrain_count);
  if (reps == 0) {
    for (std::size_t i = 0; i < picks.size(); ++i) {
      run.retrain[i].mean_val = picks[i].val_metric;
      run.retrain[i].mean_test = picks[i].test_metric;
    }
  } else {
    std::vector<TrialResult> results(picks.size() * reps);
    parallel_for(results.size(), cfg.resolved_workers(), [&](std::size_t k) {
      results[k] = guarded(evaluate, picks[k / reps].arch, cfg.train.seed + k % reps);
      if (results[k].failed) results[k].val_metric = results[k].test_metric = 0;
    });
    for (std::size_t i = 0; i < picks.size(); ++i) {
      RetrainEntry& e = run.retrain[i];
      for (std::size_t r = 0; r < reps; ++r) {
        e.val.push_back(results[i * reps + r].val_metric);
        e.test.push_back(results[i * reps + r].test_metric);
      }
      e.mean_val = std::accumulate(e.val.begin(), e.val.end(), 0.0) / reps;
      e.mean_test = std::accumulate(e.test.begin(), e.test.end(), 0.0) / reps;
    }
  }
  run.best.reset();
  for (const RetrainEntry& e : run.retrain)
    if (!run.best || ranks_before(e.mean_val, e.arch, run.best_val, *run.best, run.space)) {
      run.best = e.arch;
      run.best_val = e.mean_val;
      run.best_test = e.mean_test;
    }
}

}  // namespace

SearchRun run_search(SearchRun run, Controller& controller, const Evaluator& evaluate, const SearchHooks& hooks) {
  if (run.status == RunStatus::done) return run;
  run.status = RunStatus::running;
  run.abort_reason.clear();
  controller.restore(run.controller_state);

  EvalCache cache;
  for (const auto& r : run.history) {
    TrialResult t;
    t.val_metric = r.val_metric;
    t.test_metric = r.test_metric;
    t.failed = r.failed;
    cache.store(r.text, t);
  }

  advance_cursor(run);
  while (run.cursor == StageCursor::exploration || run.cursor == StageCursor::optimization) {
    try {
      run_iteration(run, controller, evaluate, cache);
    } catch (const ProposalAborted& e) {
      run.status = RunStatus::aborted;
      run.abort_reason = e.what();
    } catch (const ContextOverflow& e) {
      run.status = RunStatus::aborted;
      run.abort_reason = e.what();
    } catch (const TransportError& e) {
      run.status = RunStatus::aborted;
      run.abort_reason = e.what();
      save(run, hooks);
      throw;
    }
    if (run.status == RunStatus::aborted) {
      say(hooks, "iteration " + std::to_string(run.next_iteration) + " aborted: " + run.abort_reason);
      save(run, hooks);
      return run;
    }
    const IterationStat& s = run.series.back();
    say(hooks, "iteration " + std::to_string(s.iteration) + " (" + to_string(s.stage) + "): " +
                   std::to_string(s.new_records) + " new, " + std::to_string(s.repeats) + " repeated, " +
                   std::to_string(s.rejects) + " rejected, best " + fixed4(s.best_so_far));
    advance_cursor(run);
    save(run, hooks);
    if (hooks.on_iteration_end) hooks.on_iteration_end(run);
  }

  if (run.cursor == StageCursor::selection) {
    say(hooks, "retraining top " + std::to_string(std::min(run.config.top_k, run.history.size())) + " architecture(s) " +
                   std::to_string(run.config.retrain_count) + " time(s)");
    select_best(run, evaluate);
    run.cursor = StageCursor::done;
  }
  run.status = RunStatus::done;
  save(run, hooks);
  return run;
}

void write_series_csv(const SearchRun& run, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration,stage,proposed,new_records,repeats,rejects,best_so_far,mean,variance\n";
  char buf[256];
  for (const auto& s : run.series) {
    std::snprintf(buf, sizeof buf, "%d,%s,%d,%d,%d,%d,%.17g,%.17g,%.17g\n", s.iteration, to_string(s.stage).c_str(),
                  s.proposed, s.new_records, s.repeats, s.rejects, s.best_so_far, s.mean, s.variance);
    out << buf;
  }
}

}  // namespace hgnas
