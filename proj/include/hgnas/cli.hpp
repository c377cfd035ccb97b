#pragma once

#include "hgnas/oracle.hpp"
#include "hgnas/orchestrator.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hgnas {

// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_invalid = 1, exit_transport = 2, exit_internal = 3 };

struct ReportRow {
  std::string label;
  std::string arch;  // empty on average rows
  double val = 0;
  double test = 0;
  std::optional<double> rank;
};

struct Report {
  std::vector<ReportRow> rows;  // per run, then one "(avg)" row per controller, then baselines
  bool ranked = false;

  // Aligned plain text; metrics as percentages with two decimals.
  std::string text() const;
  std::string csv() const;
};

struct NamedRun {
  std::string name;
  SearchRun run;
};

// With an oracle, every row carries the oracle rank of its arch and the all_relations
// (and, if given, meta_path) baselines are appended. Throws ValidationError when a run's
// space does not match the oracle.
Report build_report(const std::vector<NamedRun>& runs, const OracleTable* oracle = nullptr,
                    const std::optional<MetaPath>& meta_path = std::nullopt);

// Entry point of the `hgnas` tool; returns an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hgnas
