#include "hgnas/cli.hpp"

#include "hgnas/controller.hpp"
#include "hgnas/dataset_io.hpp"
#include "hgnas/error.hpp"
#include "hgnas/run_config.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>

namespace hgnas {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string rank_text(double r) {
  return r == std::floor(r) ? std::to_string(static_cast<long long>(r)) : fixed(r, 1);
}

}  // namespace

std::string Report::text() const {
  std::size_t wl = 6, wa = 4;
  for (const auto& r : rows) {
    wl = std::max(wl, r.label.size());
    wa = std::max(wa, r.arch.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::string out = pad("method", wl) + "  " + pad("arch", wa) + "  " + pad("val", 7) + "  " + pad("test", 7);
  if (ranked) out += "  rank";
  out += '\n';
  for (const auto& r : rows) {
    std::string line = pad(r.label, wl) + "  " + pad(r.arch.empty() ? "-" : r.arch, wa) + "  " + pad(pct(r.val), 7) +
                       "  " + pad(pct(r.test), 7);
    if (ranked) line += "  " + (r.rank ? rank_text(*r.rank) : std::string("-"));
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::string Report::csv() const {
  std::string out = ranked ? "method,arch,val,test,rank\n" : "method,arch,val,test\n";
  for (const auto& r : rows) {
    out += "\"" + r.label + "\",\"" + r.arch + "\"," + fixed(r.val, 6) + "," + fixed(r.test, 6);
    if (ranked) out += "," + (r.rank ? fixed(*r.rank, 1) : std::string());
    out += '\n';
  }
  return out;
}

Report build_report(const std::vector<NamedRun>& runs, const OracleTable* oracle, const std::optional<MetaPath>& meta_path) {
  if (runs.empty()) throw ConfigError("report needs at least one run");
  Report rep;
  rep.ranked = oracle != nullptr;
  std::vector<std::string> groups;
  std::map<std::string, std::vector<ReportRow>> by_controller;
  for (const auto& nr : runs) {
    const SearchRun& run = nr.run;
    if (!run.best) throw ValidationError("run " + nr.name + " has no selected architecture (status " + to_string(run.status) + ")");
    if (oracle && !(run.space == oracle->space))
      throw ValidationError("run " + nr.name + " was searched in a different space than the oracle");
    ReportRow row{run.controller + " (" + nr.name + ")", encode(*run.best), run.best_val, run.best_test, std::nullopt};
    if (oracle) row.rank = static_cast<double>(rank_of(*oracle, *run.best));
    rep.rows.push_back(row);
    if (!by_controller.count(run.controller)) groups.push_back(run.controller);
    by_controller[run.controller].push_back(row);
  }
  for (const auto& g : groups) {
    const auto& rows = by_controller[g];
    ReportRow avg{g + " (avg)", "", 0, 0, std::nullopt};
    double rank = 0;
    for (const auto& r : rows) {
      avg.val += r.val / rows.size();
      avg.test += r.test / rows.size();
      if (r.rank) rank += *r.rank / rows.size();
    }
    if (oracle) avg.rank = rank;
    rep.rows.push_back(avg);
  }
  if (oracle) {
    const BaselineArchs base = baseline_archs(oracle->space, meta_path.value_or(MetaPath{}));
    auto add = [&](const std::string& label, const ArchSeq& a) {
      const OracleEntry& e = oracle->at(a);
      rep.rows.push_back({label, e.text, e.mean_val, e.mean_test, static_cast<double>(e.rank)});
    };
    add("all_relations (baseline)", base.all_relations);
    if (meta_path && !meta_path->empty()) add("meta_path (baseline)", base.meta_path);
  }
  return rep;
}

namespace {

struct Overrides {
  std::string config;
  std::string controller;
  std::string fixture;
  std::string evaluator;
  std::string oracle;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  std::optional<int> workers;
  std::optional<int> repeats;
  std::vector<std::string> ablate;
  bool resume = false;
};

RunConfig effective_config(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.controller.empty()) c.controller = o.controller;
  if (!o.fixture.empty()) c.fixture = o.fixture;
  if (!o.evaluator.empty()) c.evaluator = o.evaluator;
  if (!o.oracle.empty()) c.oracle.path = o.oracle;
  if (o.seed) {
    c.search.seed = *o.seed;
    c.search.train.seed = *o.seed;
  }
  if (o.budget) c.search.budget = *o.budget;
  if (o.workers) {
    c.search.workers = *o.workers;
    c.oracle.workers = *o.workers;
  }
  if (o.repeats) c.oracle.repeats = *o.repeats;
  if (!o.ablate.empty()) c.search.ablation = ablation_from_names(o.ablate);
  c.search.apply_budget();
  c.search.check();
  return run_config_from_json(to_json(c));  // re-validates the merged document
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

int cmd_synth(const Overrides& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("synth needs --out DIR");
  RunConfig c = effective_config(o);
  if (o.seed) c.dataset.synthetic.seed = *o.seed;
  const HeteroGraph g = synth_graph(c.dataset.synthetic.to_synth_config());
  write_dataset(g, o.out);
  out << relation_summary(g);
  out << "wrote synthetic dataset (seed " << c.dataset.synthetic.seed << ") to " << o.out << '\n';
  return exit_ok;
}

int cmd_validate(const std::string& dir, std::ostream& out, std::ostream& err) {
  std::vector<std::string> warnings;
  const HeteroGraph g = load_dataset(DatasetPaths::in_directory(dir), &warnings);
  validate(g);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << relation_summary(g);
  out << "dataset " << dir << " is valid\n";
  return exit_ok;
}

std::optional<OracleTable> maybe_oracle(const RunConfig& c, const SearchSpace& space) {
  if (c.oracle.path.empty() || !fs::exists(c.oracle.path)) return std::nullopt;
  return read_oracle_csv(c.oracle.path, space);
}

void print_baseline_ranks(const OracleTable& t, const MetaPath& mp, std::ostream& out) {
  const BaselineArchs base = baseline_archs(t.space, mp);
  out << "all_relations baseline rank: " << rank_of(t, base.all_relations) << " of " << t.entries.size() << '\n';
  if (!mp.empty()) out << "meta_path baseline rank: " << rank_of(t, base.meta_path) << " of " << t.entries.size() << '\n';
}

int cmd_oracle(const Overrides& o, std::ostream& out, std::ostream& err) {
  const RunConfig c = effective_config(o);
  if (c.space.kind != SpaceKind::benchmark) throw ConfigError("oracle builds need a benchmark-kind space");
  const fs::path csv = !o.out.empty() ? fs::path(o.out) : fs::path(c.oracle.path.empty() ? "oracle.csv" : c.oracle.path);
  const HeteroGraph g = load_graph(c.dataset);
  const SearchSpace space = build_space(g, c.space);

  OracleOptions opt;
  opt.repeats = c.oracle.repeats;
  opt.seed = c.search.train.seed;
  opt.workers = c.oracle.workers > 0 ? c.oracle.workers : default_workers();
  opt.partial_path = csv.string() + ".partial";
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  if (!o.resume) fs::remove(opt.partial_path);
  const std::size_t step = std::max<std::size_t>(1, space_size(space) / 16);
  opt.progress = [&](std::size_t done, std::size_t total) {
    if (done % step == 0 || done == total) err << "oracle: " << done << "/" << total << '\n';
  };
  const OracleTable t = build_oracle(space, training_evaluator(g, space, c.search.train), opt);
  write_oracle_csv(t, csv);
  fs::remove(opt.partial_path);
  out << "wrote " << t.entries.size() << " rows (" << t.repeats << " repeats) to " << csv.string() << '\n';
  out << "best: " << t.by_rank(1).text << " val " << fixed(t.by_rank(1).mean_val, 4) << '\n';
  print_baseline_ranks(t, c.dataset.meta_path, out);
  return exit_ok;
}

std::unique_ptr<Controller> make_controller(const RunConfig& c, const SearchSpace& space, const HeteroGraph& g,
                                            std::unique_ptr<Gateway>& gateway) {
  if (c.controller == "random") return std::make_unique<RandomController>(space, c.search.seed);
  if (c.controller == "scripted") {
    if (c.fixture.empty()) throw ConfigError("scripted controller needs a fixture");
    if (fs::path(c.fixture).extension() == ".jsonl")
      return std::make_unique<ScriptedController>(
          ScriptedController::from_transcript(space, c.fixture, c.search.ablation, c.search.retries));
    return std::make_unique<ScriptedController>(
        ScriptedController::from_file(space, c.fixture, c.search.ablation, c.search.retries));
  }
  const char* key = std::getenv(c.gateway.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw ConfigError("llm controller needs an API key in environment variable " + c.gateway.api_key_env);
  GatewayConfig gc = c.gateway;
  if (gc.log_path.empty()) gc.log_path = (fs::path(c.output) / "transcript.jsonl").string();
  gateway = std::make_unique<Gateway>(gc);
  return std::make_unique<LlmController>(*gateway, space, describe(g), c.search.ablation, c.search.retries);
}

int cmd_search(const Overrides& o, std::ostream& out, std::ostream& err) {
  RunConfig c = effective_config(o);
  if (!o.out.empty()) c.output = o.out;
  if (c.controller == "llm") {
    const char* key = std::getenv(c.gateway.api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw ConfigError("llm controller needs an API key in environment variable " + c.gateway.api_key_env);
  }
  const fs::path dir = c.output;
  const fs::path run_path = dir / "run.json";
  fs::create_directories(dir);
  write_text(dir / "effective_config.json", to_json(c).dump(2) + "\n");
  out << "effective config:\n" << to_json(c).dump(2) << '\n';

  const HeteroGraph g = load_graph(c.dataset);
  const SearchSpace space = build_space(g, c.space);
  const std::optional<OracleTable> oracle = maybe_oracle(c, space);

  Evaluator evaluate;
  if (c.evaluator == "oracle") {
    if (!oracle) throw ConfigError("oracle evaluator needs an existing oracle.path");
    evaluate = oracle_evaluator(*oracle);
  } else {
    evaluate = training_evaluator(g, space, c.search.train);
  }

  if (!o.resume && c.controller == "llm" && c.gateway.log_path.empty()) fs::remove(dir / "transcript.jsonl");
  std::unique_ptr<Gateway> gateway;
  std::unique_ptr<Controller> controller = make_controller(c, space, g, gateway);

  SearchRun run;
  if (o.resume) {
    if (!fs::exists(run_path)) throw ConfigError("nothing to resume: " + run_path.string() + " does not exist");
    run = resume(run_path);
    if (!(run.space == space)) throw ConfigError("stored run was searched in a different space");
    if (run.controller != controller->kind()) throw ConfigError("stored run used the " + run.controller + " controller");
  } else {
    run = new_search_run(space, controller->kind(), c.search);
  }

  SearchHooks hooks;
  hooks.persist_path = run_path;
  hooks.log = [&](const std::string& line) { err << line << '\n'; };
  run = run_search(std::move(run), *controller, evaluate, hooks);
  write_series_csv(run, dir / "series.csv");

  out << "status: " << to_string(run.status) << '\n';
  if (run.status == RunStatus::aborted) {
    err << "search aborted: " << run.abort_reason << '\n';
    return exit_invalid;
  }
  if (run.best) {
    out << "best: " << encode(*run.best) << '\n';
    out << "best validation: " << fixed(run.best_val, 4) << "  test: " << fixed(run.best_test, 4) << '\n';
    if (oracle) out << "oracle rank: " << rank_of(*oracle, *run.best) << " of " << oracle->entries.size() << '\n';
  }
  out << "evaluations: " << run.evaluations << " (proposals answered from history: " << run.cache_hits << ")\n";
  if (oracle) print_baseline_ranks(*oracle, c.dataset.meta_path, out);
  out << "wrote " << run_path.string() << ", " << (dir / "series.csv").string() << '\n';
  return exit_ok;
}

int cmd_report(const std::vector<std::string>& files, const std::string& oracle_path,
               const std::vector<std::string>& meta_path, const std::string& csv, std::ostream& out) {
  std::vector<NamedRun> runs;
  for (const auto& f : files) runs.push_back({fs::path(f).parent_path().filename().string().empty()
                                                  ? fs::path(f).filename().string()
                                                  : fs::path(f).parent_path().filename().string(),
                                              resume(f)});
  std::optional<OracleTable> oracle;
  if (!oracle_path.empty()) oracle = read_oracle_csv(oracle_path, runs.front().run.space);
  std::optional<MetaPath> mp;
  if (!meta_path.empty()) mp = MetaPath{meta_path};
  const Report rep = build_report(runs, oracle ? &*oracle : nullptr, mp);
  out << rep.text();
  if (!csv.empty()) write_text(csv, rep.csv());
  return exit_ok;
}

int classify(const std::exception& e, std::ostream& err) {
  err << "error: " << e.what() << '\n';
  if (dynamic_cast<const TransportError*>(&e) || dynamic_cast<const ContextOverflow*>(&e)) return exit_transport;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ValidationError*>(&e) ||
      dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const DecodeError*>(&e) ||
      dynamic_cast<const EnumerationCapExceeded*>(&e))
    return exit_invalid;
  return exit_internal;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM-guided heterogeneous GNN architecture search", "hgnas"};
  app.require_subcommand(1);
  Overrides o;
  std::string dataset_dir, oracle_path, csv;
  std::vector<std::string> run_files, meta_path;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "run configuration JSON");
    sub->add_option("--seed", o.seed, "seed for the controller and training (synth: the dataset)");
    sub->add_option("--workers", o.workers, "parallel evaluation workers");
  };
  CLI::App* synth = app.add_subcommand("synth", "write a planted-signal synthetic dataset");
  common(synth);
  synth->add_option("--out", o.out, "output directory")->required();

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a dataset directory and print relation counts");
  validate_cmd->add_option("dir", dataset_dir, "dataset directory")->required();

  CLI::App* oracle = app.add_subcommand("oracle", "exhaustively evaluate a benchmark space");
  common(oracle);
  oracle->add_option("--out", o.out, "oracle CSV path");
  oracle->add_option("--repeats", o.repeats, "training runs per architecture");
  oracle->add_flag("--resume", o.resume, "continue from the partial file of an interrupted build");

  CLI::App* search = app.add_subcommand("search", "run an architecture search");
  common(search);
  search->add_option("--controller", o.controller, "llm, random or scripted");
  search->add_option("--fixture", o.fixture, "scripted controller batches (.json) or transcript (.jsonl)");
  search->add_option("--evaluator", o.evaluator, "train or oracle");
  search->add_option("--oracle", o.oracle, "oracle CSV for ranks or lookup evaluation");
  search->add_option("--budget", o.budget, "number of proposals");
  search->add_option("--ablate", o.ablate, "no-dataset, no-operation, no-strategy");
  search->add_option("--out", o.out, "output directory");
  search->add_flag("--resume", o.resume, "continue the run stored in the output directory");

  CLI::App* report = app.add_subcommand("report", "summarise finished runs");
  report->add_option("runs", run_files, "run.json files")->required();
  report->add_option("--oracle", oracle_path, "oracle CSV for ranks");
  report->add_option("--meta-path", meta_path, "relations of the meta-path baseline, comma separated")->delimiter(',');
  report->add_option("--csv", csv, "also write the table as CSV");

  std::vector<std::string> argv_store = args;
  argv_store.insert(argv_store.begin(), "hgnas");
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? exit_ok : exit_invalid;
  }

  try {
    if (*synth) return cmd_synth(o, out);
    if (*validate_cmd) return cmd_validate(dataset_dir, out, err);
    if (*oracle) return cmd_oracle(o, out, err);
    if (*search) return cmd_search(o, out, err);
    if (*report) return cmd_report(run_files, oracle_path, meta_path, csv, out);
  } catch (const std::exception& e) {
    return classify(e, err);
  }
  return exit_internal;
}

}  // namespace hgnas
