#include "hgnas/prompt.hpp"

#include "hgnas/error.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <regex>
#include <set>

namespace hgnas {

using nlohmann::json;

std::string to_string(StageKind s) { return s == StageKind::exploration ? "exploration" : "optimization"; }

StageKind stage_kind_from_string(const std::string& text) {
  if (text == "exploration") return StageKind::exploration;
  if (text == "optimization") return StageKind::optimization;
  throw ConfigError("unknown stage '" + text + "'");
}

json to_json(const TrialRecord& r) {
  return {{"arch", r.text},          {"val", r.val_metric}, {"test", r.test_metric}, {"failed", r.failed},
          {"stage", to_string(r.stage)}, {"iteration", r.iteration}, {"source", r.source}};
}

TrialRecord trial_record_from_json(const json& j, const SearchSpace& space) {
  TrialRecord r;
  r.text = j.at("arch").get<std::string>();
  r.arch = decode(r.text, space);
  r.val_metric = j.at("val").get<double>();
  r.test_metric = j.at("test").get<double>();
  r.failed = j.value("failed", false);
  r.stage = stage_kind_from_string(j.at("stage").get<std::string>());
  r.iteration = j.at("iteration").get<int>();
  r.source = j.value("source", std::string());
  return r;
}

Ablation ablation_from_names(const std::vector<std::string>& names) {
  Ablation a;
  for (const auto& n : names) {
    if (n == "no-dataset") a.no_dataset = true;
    else if (n == "no-operation") a.no_operation = true;
    else if (n == "no-strategy") a.no_strategy = true;
    else throw ConfigError("unknown ablation '" + n + "' (expected no-dataset, no-operation or no-strategy)");
  }
  return a;
}

std::vector<std::string> ablation_names(const Ablation& a) {
  std::vector<std::string> out;
  if (a.no_dataset) out.push_back("no-dataset");
  if (a.no_operation) out.push_back("no-operation");
  if (a.no_strategy) out.push_back("no-strategy");
  return out;
}

std::vector<std::string> PromptBundle::sections() const {
  std::vector<std::string> out;
  for (const std::string* s : {&task, &dataset, &space, &strategy, &feedback, &output})
    if (!s->empty()) out.push_back(*s);
  return out;
}

std::string PromptBundle::render() const {
  std::string out;
  for (const auto& s : sections()) {
    if (!out.empty()) out += "\n\n";
    out += s;
  }
  return out;
}

namespace {

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

std::string metric_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

std::string task_section() {
  return "Our task is heterogeneous graph neural architecture, searching for a HGNN architecture that can achieve "
         "the best performance on a downstream task.";
}

std::string dataset_section(const DatasetDescriptor& d) {
  std::vector<std::string> types, rels;
  for (std::size_t t = 0; t < d.node_types.size(); ++t)
    types.push_back(d.node_types[t] + (t < d.node_counts.size() ? ": " + std::to_string(d.node_counts[t]) : ""));
  for (const auto& r : d.relations) rels.push_back(r.name + ": " + std::to_string(r.edges));
  const bool nc = d.task == Task::node_classification;
  return "The data set is " + d.name + ", node types and numbers [" + join(types) + "], edge types and numbers [" +
         join(rels) + "]. The downstream task is " + (nc ? "NC" : "LP") + " and the target " +
         (nc ? "node" : "link") + " is " + d.target + ".";
}

std::string space_section(const SearchSpace& s, const Ablation& ablation) {
  std::function<std::string(const Slot&)> label;
  if (ablation.no_dataset) {
    auto names = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& layer : s.slots)
      for (const Slot& sl : layer)
        if (!names->count(sl.relation)) (*names)[sl.relation] = "edge_" + std::to_string(names->size() + 1);
    label = [names](const Slot& sl) { return names->at(sl.relation); };
  }
  const std::string seq = describe_positions(s, label);
  const std::string n = std::to_string(s.layers);
  if (ablation.no_operation) {
    return "The architecture of a " + n + "-layer HGNN is expressed as " + seq + ", a sequence of " +
           std::to_string(s.token_count()) + " elements. For each element in positions other than HAggr, choose a number from 0 to " +
           std::to_string(s.gnn_candidates.size() - 1) + "; for each HAggr position, choose a number from 0 to " +
           std::to_string(s.aggr_candidates.size() - 1) + ".";
  }
  std::vector<std::string> gnn, aggr;
  for (GnnOp op : s.gnn_candidates) gnn.push_back(to_string(op));
  for (Aggr a : s.aggr_candidates) aggr.push_back(to_string(a));
  std::string out = "The architecture of a " + n + "-layer HGNN is expressed as " + seq +
                    ", for each edge, you need to select one from [" + join(gnn) +
                    "], then choose an aggregate function from [" + join(aggr) + "] per layer.";
  if (std::find(s.gnn_candidates.begin(), s.gnn_candidates.end(), GnnOp::zero) != s.gnn_candidates.end())
    out += " Choosing zero for an edge means that edge passes no message in that layer.";
  return out;
}

std::string strategy_section(StageKind stage) {
  return stage == StageKind::exploration ? "Explore as many different architectures in the search space as possible."
                                         : "Analyze how to get a better architecture based on existing results.";
}

std::string output_section(const SearchSpace& s, std::size_t batch, const Ablation& ablation) {
  const std::string example = ablation.no_operation ? encode(arch_at(0, s), s, TokenStyle::indices) : encode(arch_at(0, s));
  return "Output " + std::to_string(batch) + " new architectures that are not listed above, one per line, each written as a bracketed list of " +
         std::to_string(s.token_count()) + " choices with layers separated by \"|\", for example " + example + ".";
}

std::string feedback_arch_text(const TrialRecord& r, const SearchSpace& s, const Ablation& ablation) {
  return ablation.no_operation ? encode(r.arch, s, TokenStyle::indices) : r.text;
}

std::vector<std::string> feedback_lines(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k,
                                        const SearchSpace& s, const Ablation& ablation) {
  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (stage == StageKind::optimization) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return history[a].val_metric > history[b].val_metric; });
    if (order.size() > top_k) order.resize(top_k);
  }
  std::vector<std::string> lines;
  for (std::size_t i : order)
    lines.push_back("The performance of " + feedback_arch_text(history[i], s, ablation) + " is " +
                    metric_text(history[i].val_metric));
  return lines;
}

std::string compose_feedback(const std::vector<TrialRecord>& history, StageKind stage, std::size_t top_k,
                             const SearchSpace& s, const Ablation& ablation) {
  std::string out;
  for (const auto& line : feedback_lines(history, stage, top_k, s, ablation)) {
    if (!out.empty()) out += '\n';
    out += line;
  }
  return out;
}

PromptBundle build_prompt(const SearchSpace& s, const DatasetDescriptor& d, const Stage& stage,
                          const std::vector<TrialRecord>& history, std::size_t batch, std::size_t top_k,
                          const Ablation& ablation, const std::vector<std::string>& notes) {
  PromptBundle p;
  p.ablation = ablation;
  p.task = task_section();
  if (!ablation.no_dataset) p.dataset = dataset_section(d);
  p.space = space_section(s, ablation);
  if (!ablation.no_strategy) p.strategy = strategy_section(stage.kind);
  p.feedback = compose_feedback(history, stage.kind, top_k, s, ablation);
  for (const auto& n : notes) {
    if (!p.feedback.empty()) p.feedback += '\n';
    p.feedback += n;
  }
  p.output = output_section(s, batch, ablation);
  return p;
}

std::string render_prompt(const SearchSpace& s, const DatasetDescriptor& d, const Stage& stage,
                          const std::vector<TrialRecord>& history, std::size_t batch, std::size_t top_k,
                          const Ablation& ablation, const std::vector<std::string>& notes) {
  return build_prompt(s, d, stage, history, batch, top_k, ablation, notes).render();
}

std::string to_string(RejectKind k) {
  switch (k) {
    case RejectKind::length: return "length";
    case RejectKind::token: return "token";
    case RejectKind::duplicate: return "duplicate";
    case RejectKind::surplus: return "surplus";
  }
  return "?";
}

std::string Reject::feedback_line() const { return "invalid: " + fragment + " (" + reason + ")"; }

ParsedResponse parse_response(const std::string& text, const SearchSpace& s, std::size_t batch, TokenStyle style) {
  static const std::regex bracketed(R"(\[([^\[\]]*)\])");
  ParsedResponse out;
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), bracketed); it != std::sregex_iterator(); ++it) {
    const std::string fragment = (*it)[0].str();
    Reject rej;
    rej.fragment = fragment;
    try {
      ArchSeq a = decode(fragment, s, style);
      const std::string canon = encode(a);
      if (!seen.insert(canon).second) {
        rej.kind = RejectKind::duplicate;
        rej.reason = "repeats an architecture earlier in this response";
      } else if (out.valid.size() >= batch) {
        rej.kind = RejectKind::surplus;
        rej.reason = "more than " + std::to_string(batch) + " architectures";
      } else {
        out.valid.push_back(std::move(a));
        continue;
      }
    } catch (const LengthError& e) {
      rej.kind = RejectKind::length;
      rej.reason = e.what();
      rej.expected = e.expected();
      rej.got = e.got();
    } catch (const TokenError& e) {
      rej.kind = RejectKind::token;
      rej.reason = e.what();
      rej.position = e.position();
    }
    out.rejects.push_back(std::move(rej));
  }
  if (out.valid.empty()) {
    const std::string what = out.rejects.empty() ? "response contains no bracketed architecture"
                                                 : "no valid architecture among " + std::to_string(out.rejects.size()) +
                                                       " bracketed candidate(s)";
    throw EmptyProposal(what, std::move(out.rejects));
  }
  return out;
}

}  // namespace hgnas
