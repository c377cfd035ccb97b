#pragma once

#include "hgnas/gateway.hpp"
#include "hgnas/prompt.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hgnas {

struct ProposalRequest {
  Stage stage;
  int iteration = 0;        // global, 0-based
  int stage_iteration = 0;  // 0-based within the stage
  std::size_t batch = 20;
  std::size_t top_k = 10;
  const std::vector<TrialRecord>* history = nullptr;
  std::vector<std::string> notes;  // feedback about the previous round (invalid or repeated proposals)
};

struct Proposal {
  std::vector<ArchSeq> archs;
  std::vector<Reject> rejects;
  std::vector<std::string> notes;
  bool exhausted = false;  // the controller has nothing more to offer
  int attempts = 0;        // controller queries used
  int compactions = 0;     // ContextOverflow recoveries
};

// The controller could not produce a valid proposal within its retry budget.
class ProposalAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string kind() const = 0;
  virtual Proposal propose(const ProposalRequest& req) = 0;

  // Resume support: anything the controller must carry across a restart.
  virtual nlohmann::json state() const { return nlohmann::json::object(); }
  virtual void restore(const nlohmann::json&) {}
};

// Uniform sampling without replacement against the history and within the batch.
// Draws for iteration i come from their own stream, so a resumed run repeats them.
class RandomController : public Controller {
 public:
  RandomController(SearchSpace space, std::uint64_t seed);
  std::string kind() const override { return "random"; }
  Proposal propose(const ProposalRequest& req) override;

 private:
  SearchSpace space_;
  std::uint64_t seed_;
};

// Replays a fixture. Each entry is either a list of architecture texts (one batch) or a
// raw response string that goes through parse_response, retried like the LLM controller.
class ScriptedController : public Controller {
 public:
  ScriptedController(SearchSpace space, nlohmann::json entries, Ablation ablation = {}, int retries = 3);

  // {"batches": [...]} or a bare array of entries.
  static ScriptedController from_file(const SearchSpace& space, const std::filesystem::path& path,
                                      Ablation ablation = {}, int retries = 3);
  // Successful completions recorded by a Gateway transcript, in order.
  static ScriptedController from_transcript(const SearchSpace& space, const std::filesystem::path& path,
                                            Ablation ablation = {}, int retries = 3);

  std::string kind() const override { return "scripted"; }
  Proposal propose(const ProposalRequest& req) override;
  nlohmann::json state() const override { return {{"cursor", cursor_}}; }
  void restore(const nlohmann::json& j) override;
  std::size_t cursor() const { return cursor_; }
  std::size_t size() const { return entries_.size(); }

 private:
  SearchSpace space_;
  nlohmann::json entries_;
  Ablation ablation_;
  int retries_;
  std::size_t cursor_ = 0;
};

// Records shown after a context overflow. Optimization keeps only the top_k; exploration
// keeps the top_k plus the most recent 3 * top_k, in discovery order.
std::vector<TrialRecord> compact_history(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k);

// Renders the prompt for each request, sends it as one user message at the stage's
// temperature, and parses the reply. EmptyProposal is retried up to `retries` times with
// the reasons added to the feedback; ContextOverflow compacts the history and resends.
class LlmController : public Controller {
 public:
  LlmController(Gateway& gateway, SearchSpace space, DatasetDescriptor dataset, Ablation ablation = {},
                int retries = 3);
  std::string kind() const override { return "llm"; }
  Proposal propose(const ProposalRequest& req) override;

 private:
  Gateway& gateway_;
  SearchSpace space_;
  DatasetDescriptor dataset_;
  Ablation ablation_;
  int retries_;
};

}  // namespace hgnas
