#include "hgnas/controller.hpp"

#include "hgnas/error.hpp"
#include "hgnas/jsonl.hpp"
#include "hgnas/rng.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

namespace hgnas {

using nlohmann::json;

namespace {

ArchSeq random_arch(const SearchSpace& s, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> gnn(0, s.gnn_candidates.size() - 1);
  std::uniform_int_distribution<std::size_t> aggr(0, s.aggr_candidates.size() - 1);
  ArchSeq a;
  a.kind = s.kind;
  for (int l = 0; l < s.layers; ++l) {
    std::vector<GnnOp> ops;
    for (std::size_t k = 0; k < s.slots[l].size(); ++k) ops.push_back(s.gnn_candidates[gnn(rng)]);
    a.ops.push_back(std::move(ops));
    a.aggr.push_back(s.aggr_candidates[aggr(rng)]);
  }
  return a;
}

std::string exhausted_note(std::size_t n) {
  return "search space exhausted: " + std::to_string(n) + " unevaluated architecture(s) remained";
}

}  // namespace

RandomController::RandomController(SearchSpace space, std::uint64_t seed) : space_(std::move(space)), seed_(seed) {}

Proposal RandomController::propose(const ProposalRequest& req) {
  Proposal p;
  p.attempts = 1;
  std::unordered_set<std::string> seen;
  if (req.history)
    for (const auto& r : *req.history) seen.insert(r.text);
  std::mt19937_64 rng(derive_seed(derive_seed(seed_, "random-controller"), static_cast<std::uint64_t>(req.iteration)));

  const std::uint64_t size = space_size(space_);
  const bool enumerable = size <= default_enumeration_cap;
  const std::uint64_t remaining = enumerable && seen.size() < size ? size - seen.size() : (enumerable ? 0 : size);

  // Small remainder: list the unseen indices and draw from them directly.
  if (enumerable && remaining <= std::max<std::uint64_t>(4 * req.batch, size / 4)) {
    std::vector<std::uint64_t> pool;
    for (std::uint64_t i = 0; i < size; ++i)
      if (!seen.count(encode(arch_at(i, space_)))) pool.push_back(i);
    if (pool.size() <= req.batch) {
      for (std::uint64_t i : pool) p.archs.push_back(arch_at(i, space_));
      p.exhausted = true;
      p.notes.push_back(exhausted_note(pool.size()));
      return p;
    }
    for (std::size_t k = 0; k < req.batch; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
      p.archs.push_back(arch_at(pool[k], space_));
    }
    return p;
  }

  while (p.archs.size() < req.batch) {
    ArchSeq a = random_arch(space_, rng);
    if (seen.insert(encode(a)).second) p.archs.push_back(std::move(a));
  }
  return p;
}

ScriptedController::ScriptedController(SearchSpace space, json entries, Ablation ablation, int retries)
    : space_(std::move(space)), entries_(std::move(entries)), ablation_(ablation), retries_(retries) {
  if (entries_.is_object() && entries_.contains("batches")) entries_ = entries_.at("batches");
  if (!entries_.is_array()) throw ConfigError("controller script must be an array of batches");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const json& e = entries_[i];
    const bool ok = e.is_string() || (e.is_array() && std::all_of(e.begin(), e.end(), [](const json& x) {
                                        return x.is_string();
                                      }));
    if (!ok) throw ConfigError("controller script entry " + std::to_string(i) + " must be a string or a list of strings");
  }
  if (retries_ < 0) throw ConfigError("retries must be non-negative");
}

ScriptedController ScriptedController::from_file(const SearchSpace& space, const std::filesystem::path& path,
                                                 Ablation ablation, int retries) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open controller script " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("controller script " + path.string() + ": " + e.what());
  }
  return ScriptedController(space, std::move(j), ablation, retries);
}

ScriptedController ScriptedController::from_transcript(const SearchSpace& space, const std::filesystem::path& path,
                                                       Ablation ablation, int retries) {
  json entries = json::array();
  for (const json& r : read_jsonl(path, true))
    if (r.value("kind", "") == "response" && r.value("role", "") == "assistant") entries.push_back(r.at("content"));
  return ScriptedController(space, std::move(entries), ablation, retries);
}

void ScriptedController::restore(const json& j) {
  const auto c = j.value("cursor", std::size_t{0});
  if (c > entries_.size()) throw ConfigError("scripted controller cursor beyond the end of its script");
  cursor_ = c;
}

Proposal ScriptedController::propose(const ProposalRequest& req) {
  Proposal p;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (cursor_ >= entries_.size()) {
      p.exhausted = true;
      p.notes.push_back("controller script exhausted");
      return p;
    }
    const json& e = entries_[cursor_++];
    ++p.attempts;
    if (e.is_array()) {
      std::set<std::string> dup;
      for (const auto& t : e) {
        const std::string text = t.get<std::string>();
        try {
          ArchSeq a = decode(text, space_, ablation_.token_style());
          if (!dup.insert(encode(a)).second) {
            p.rejects.push_back({text, RejectKind::duplicate, "repeats an architecture earlier in this batch"});
          } else if (p.archs.size() >= req.batch) {
            p.rejects.push_back({text, RejectKind::surplus, "more than " + std::to_string(req.batch) + " architectures"});
          } else {
            p.archs.push_back(std::move(a));
          }
        } catch (const LengthError& err) {
          p.rejects.push_back({text, RejectKind::length, err.what(), err.expected(), err.got()});
        } catch (const TokenError& err) {
          p.rejects.push_back({text, RejectKind::token, err.what(), 0, 0, err.position()});
        }
      }
      if (!p.archs.empty()) return p;
      continue;
    }
    try {
      ParsedResponse parsed = parse_response(e.get<std::string>(), space_, req.batch, ablation_.token_style());
      p.archs = std::move(parsed.valid);
      p.rejects.insert(p.rejects.end(), parsed.rejects.begin(), parsed.rejects.end());
      return p;
    } catch (const EmptyProposal& err) {
      p.rejects.insert(p.rejects.end(), err.rejects().begin(), err.rejects().end());
    }
  }
  throw ProposalAborted("no valid architecture after " + std::to_string(p.attempts) + " scripted response(s)");
}

std::vector<TrialRecord> compact_history(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k) {
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return history[a].val_metric > history[b].val_metric; });
  std::vector<bool> keep(history.size(), false);
  for (std::size_t i = 0; i < std::min(top_k, order.size()); ++i) keep[order[i]] = true;
  if (stage == StageKind::exploration) {
    const std::size_t recent = std::min(history.size(), 3 * top_k);
    for (std::size_t i = history.size() - recent; i < history.size(); ++i) keep[i] = true;
  }
  std::vector<TrialRecord> out;
  for (std::size_t i = 0; i < history.size(); ++i)
    if (keep[i]) out.push_back(history[i]);
  return out;
}

LlmController::LlmController(Gateway& gateway, SearchSpace space, DatasetDescriptor dataset, Ablation ablation,
                             int retries)
    : gateway_(gateway), space_(std::move(space)), dataset_(std::move(dataset)), ablation_(ablation), retries_(retries) {
  if (retries_ < 0) throw ConfigError("retries must be non-negative");
}

Proposal LlmController::propose(const ProposalRequest& req) {
  static const std::vector<TrialRecord> empty;
  std::vector<TrialRecord> shown = req.history ? *req.history : empty;
  std::vector<std::string> notes = req.notes;
  const CallContext ctx{to_string(req.stage.kind), req.iteration};
  Proposal p;
  int failures = 0;
  while (true) {
    const std::string prompt =
        render_prompt(space_, dataset_, req.stage, shown, req.batch, req.top_k, ablation_, notes);
    std::string reply;
    ++p.attempts;
    try {
      reply = gateway_.complete("", {{"user", prompt}}, req.stage.temperature, ctx);
    } catch (const ContextOverflow&) {
      // First overflow keeps the stage's view; a second falls back to the top_k alone.
      const StageKind view = p.compactions == 0 ? req.stage.kind : StageKind::optimization;
      std::vector<TrialRecord> smaller = compact_history(shown, view, req.top_k);
      if (p.compactions >= 2 || smaller.size() == shown.size()) throw;
      shown = std::move(smaller);
      ++p.compactions;
      p.notes.push_back("context overflow: feedback compacted to " + std::to_string(shown.size()) + " record(s)");
      continue;
    }
    try {
      ParsedResponse parsed = parse_response(reply, space_, req.batch, ablation_.token_style());
      p.archs = std::move(parsed.valid);
      p.rejects.insert(p.rejects.end(), parsed.rejects.begin(), parsed.rejects.end());
      return p;
    } catch (const EmptyProposal& err) {
      p.rejects.insert(p.rejects.end(), err.rejects().begin(), err.rejects().end());
      if (++failures > retries_)
        throw ProposalAborted("no valid architecture after " + std::to_string(failures) + " response(s): " +
                              err.what());
      notes.push_back(std::string("The previous response was rejected: ") + err.what() + ".");
      for (const auto& r : err.rejects()) notes.push_back(r.feedback_line());
    }
  }
}

}  // namespace hgnas
