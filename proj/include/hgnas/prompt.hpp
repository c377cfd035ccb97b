#pragma once

#include "hgnas/dataset_io.hpp"
#include "hgnas/space.hpp"

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

enum class StageKind { exploration, optimization };

std::string to_string(StageKind s);
StageKind stage_kind_from_string(const std::string& text);

struct Stage {
  StageKind kind = StageKind::exploration;
  double temperature = 1.0;

  static Stage exploration(double temperature = 1.0) { return {StageKind::exploration, temperature}; }
  static Stage optimization(double temperature = 0.0) { return {StageKind::optimization, temperature}; }
};

struct TrialRecord {
  ArchSeq arch;
  std::string text;  // canonical encoding of arch
  double val_metric = 0;
  double test_metric = 0;
  bool failed = false;
  StageKind stage = StageKind::exploration;
  int iteration = 0;  // global, 0-based
  std::string source;

  bool operator==(const TrialRecord&) const = default;
};

nlohmann::json to_json(const TrialRecord& r);
TrialRecord trial_record_from_json(const nlohmann::json& j, const SearchSpace& space);

// Sections of the prompt that can be left out for ablations.
struct Ablation {
  bool no_dataset = false;    // dataset section dropped, relations shown as edge_1..edge_k
  bool no_operation = false;  // operators shown as bare numbers
  bool no_strategy = false;   // strategy section dropped

  TokenStyle token_style() const { return no_operation ? TokenStyle::indices : TokenStyle::names; }
  bool operator==(const Ablation&) const = default;
};

Ablation ablation_from_names(const std::vector<std::string>& names);
std::vector<std::string> ablation_names(const Ablation& a);

struct PromptBundle {
  std::string task;
  std::string dataset;
  std::string space;
  std::string strategy;
  std::string feedback;
  std::string output;  // closing output-format instruction
  Ablation ablation;

  // Enabled, non-empty sections in order task, dataset, space, strategy, feedback, output.
  std::vector<std::string> sections() const;
  std::string render() const;
};

std::string task_section();
std::string dataset_section(const DatasetDescriptor& d);
std::string space_section(const SearchSpace& s, const Ablation& ablation);
std::string strategy_section(StageKind stage);
std::string output_section(const SearchSpace& s, std::size_t batch, const Ablation& ablation);

// Canonical text of `r` as shown to the controller (index style under no_operation).
std::string feedback_arch_text(const TrialRecord& r, const SearchSpace& s, const Ablation& ablation);

// "The performance of [arch] is 0.1234" per record. Exploration: every record in discovery
// order. Optimization: the top_k records by validation metric, descending, ties by discovery.
std::vector<std::string> feedback_lines(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k,
                                        const SearchSpace& s, const Ablation& ablation = {});
std::string compose_feedback(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k,
                             const SearchSpace& s, const Ablation& ablation = {});

// `notes` are appended verbatim to the feedback section (invalid or duplicate proposals).
PromptBundle build_prompt(const SearchSpace& s, const DatasetDescriptor& d, const Stage& stage,
                          const std::vector<TrialRecord>& history, std::size_t batch, std::size_t top_k,
                          const Ablation& ablation = {}, const std::vector<std::string>& notes = {});

std::string render_prompt(const SearchSpace& s, const DatasetDescriptor& d, const Stage& stage,
                          const std::vector<TrialRecord>& history, std::size_t batch, std::size_t top_k,
                          const Ablation& ablation = {}, const std::vector<std::string>& notes = {});

enum class RejectKind { length, token, duplicate, surplus };

std::string to_string(RejectKind k);

struct Reject {
  std::string fragment;
  RejectKind kind = RejectKind::token;
  std::string reason;
  std::size_t expected = 0;  // length rejects
  std::size_t got = 0;       // length rejects
  std::size_t position = 0;  // token rejects, 0-based

  // "invalid: <fragment> (<reason>)"
  std::string feedback_line() const;
};

struct ParsedResponse {
  std::vector<ArchSeq> valid;
  std::vector<Reject> rejects;
};

// No decodable candidate in a response.
class EmptyProposal : public std::runtime_error {
 public:
  EmptyProposal(const std::string& what, std::vector<Reject> rejects)
      : std::runtime_error(what), rejects_(std::move(rejects)) {}
  const std::vector<Reject>& rejects() const { return rejects_; }

 private:
  std::vector<Reject> rejects_;
};

// Scans free text for bracketed candidates and decodes each against `s`. Repeats within the
// response and candidates beyond `batch` are rejected. Throws EmptyProposal when nothing decodes.
ParsedResponse parse_response(const std::string& text, const SearchSpace& s, std::size_t batch,
                              TokenStyle style = TokenStyle::names);

}  // namespace hgnas
