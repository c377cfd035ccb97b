#pragma once

#include "hgnas/gateway.hpp"
#include "hgnas/graph.hpp"
#include "hgnas/orchestrator.hpp"
#include "hgnas/space.hpp"
#include "hgnas/synth.hpp"

#include <filesystem>
#include <string>

#include <json.hpp>

namespace hgnas {

struct SynthOptions {
  std::uint64_t seed = 1;
  Index authors = 60;
  Index papers = 180;
  Index subjects = 9;
  double noise = 0.05;
  double signal = 1.0;

  SynthConfig to_synth_config() const;
};

struct DatasetSource {
  std::string path;  // directory in the conventional layout; empty selects the synthetic graph
  SynthOptions synthetic;
  MetaPath meta_path{{"P-S", "S-P"}};  // used for the meta_path baseline in reports
};

struct OracleSettings {
  std::string path;  // oracle CSV: written by `oracle`, read for ranks and lookup evaluation
  int repeats = 5;
  int workers = 0;  // 0: available cores - 1
};

// Everything a command needs. Every field is optional in the file.
struct RunConfig {
  DatasetSource dataset;
  SpaceOptions space;
  SearchConfig search;
  std::string controller = "llm";  // llm | random | scripted
  std::string fixture;             // scripted: batches JSON, or a .jsonl transcript to replay
  GatewayConfig gateway;
  std::string evaluator = "train";  // train | oracle
  OracleSettings oracle;
  std::string output = "hgnas-run";
};

nlohmann::json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

HeteroGraph load_graph(const DatasetSource& source);

}  // namespace hgnas
