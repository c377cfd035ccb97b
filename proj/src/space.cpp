#include "hgnas/space.hpp"

#include "hgnas/error.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>

namespace hgnas {

std::string to_string(GnnOp op) {
  switch (op) {
    case GnnOp::gcn: return "gcn";
    case GnnOp::gat: return "gat";
    case GnnOp::edge: return "edge";
    case GnnOp::sage: return "sage";
    case GnnOp::zero: return "zero";
  }
  return "?";
}

std::string to_string(Aggr a) {
  switch (a) {
    case Aggr::sum: return "sum";
    case Aggr::mean: return "mean";
    case Aggr::max: return "max";
    case Aggr::lstm: return "lstm";
    case Aggr::att: return "att";
  }
  return "?";
}

std::string to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::hgnas: return "hgnas";
    case SpaceKind::benchmark: return "benchmark";
    case SpaceKind::diffmg: return "diffmg";
  }
  return "?";
}

std::optional<GnnOp> gnn_op_from_string(std::string_view text) {
  for (GnnOp op : all_gnn_ops())
    if (to_string(op) == text) return op;
  return std::nullopt;
}

std::optional<Aggr> aggr_from_string(std::string_view text) {
  for (Aggr a : all_aggrs())
    if (to_string(a) == text) return a;
  return std::nullopt;
}

SpaceKind space_kind_from_string(const std::string& text) {
  for (SpaceKind k : {SpaceKind::hgnas, SpaceKind::benchmark, SpaceKind::diffmg})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown space kind '" + text + "'");
}

std::size_t SearchSpace::slot_count() const {
  std::size_t n = 0;
  for (const auto& layer : slots) n += layer.size();
  return n;
}

std::size_t SearchSpace::token_count() const { return slot_count() + slots.size(); }

std::size_t ArchSeq::active_slots() const {
  std::size_t n = 0;
  for (const auto& layer : ops)
    n += static_cast<std::size_t>(std::count_if(layer.begin(), layer.end(), [](GnnOp op) { return op != GnnOp::zero; }));
  return n;
}

SearchSpace build_space(const HeteroGraph& g, const SpaceOptions& opts) {
  if (opts.layers < 1) throw ConfigError("a search space needs at least one layer");
  const std::vector<std::string> targets = g.task_types();
  const std::set<std::string> target_set(targets.begin(), targets.end());
  if (std::none_of(g.relations.begin(), g.relations.end(),
                   [&](const Relation& r) { return target_set.count(r.dst) > 0; }))
    throw SchemaError("no relation reaches the task target");

  // reach[k]: types that can influence a task type within k further message-passing steps.
  std::vector<std::set<std::string>> reach(static_cast<std::size_t>(opts.layers));
  reach[0] = target_set;
  for (std::size_t k = 1; k < reach.size(); ++k) {
    reach[k] = reach[k - 1];
    for (const auto& r : g.relations)
      if (reach[k - 1].count(r.dst)) reach[k].insert(r.src);
  }

  SearchSpace s;
  s.layers = opts.layers;
  s.kind = opts.kind;
  if (opts.kind == SpaceKind::benchmark) {
    s.gnn_candidates = {GnnOp::gcn, GnnOp::zero};
    s.aggr_candidates = {Aggr::sum};
  } else {
    s.gnn_candidates = all_gnn_ops();
    s.aggr_candidates = all_aggrs();
  }
  for (int l = 0; l < opts.layers; ++l) {
    const auto& live = reach[static_cast<std::size_t>(opts.layers - l - 1)];
    std::vector<Slot> layer;
    for (const auto& r : g.relations)
      if (!opts.prune || live.count(r.dst)) layer.push_back({r.name, r.src, r.dst, false});
    if (opts.self_relations)
      for (const auto& t : g.node_types)
        if (!opts.prune || live.count(t)) layer.push_back({t + "-self", t, t, true});
    s.slots.push_back(std::move(layer));
  }
  return s;
}

std::uint64_t space_size(const SearchSpace& s) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t size = 1;
  auto mul = [&](std::uint64_t f) {
    if (f == 0) {
      size = 0;
      return;
    }
    size = size > kMax / f ? kMax : size * f;
  };
  for (const auto& layer : s.slots) {
    for (std::size_t i = 0; i < layer.size(); ++i) mul(s.gnn_candidates.size());
    mul(s.aggr_candidates.size());
  }
  return size;
}

namespace {

template <typename T>
std::size_t position_in(const std::vector<T>& v, T x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

std::string encode_impl(const ArchSeq& a, const SearchSpace* s, TokenStyle style) {
  std::string out = "[";
  for (std::size_t l = 0; l < a.ops.size(); ++l) {
    if (l) out += " | ";
    for (GnnOp op : a.ops[l]) {
      out += style == TokenStyle::names ? to_string(op) : std::to_string(position_in(s->gnn_candidates, op));
      out += ", ";
    }
    out += style == TokenStyle::names ? to_string(a.aggr[l])
                                      : std::to_string(position_in(s->aggr_candidates, a.aggr[l]));
  }
  return out + "]";
}

std::string trim(std::string_view v) {
  auto is_junk = [](char c) { return std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\'' || c == '`'; };
  std::size_t b = 0, e = v.size();
  while (b < e && is_junk(v[b])) ++b;
  while (e > b && is_junk(v[e - 1])) --e;
  std::string out(v.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::string_view v = text;
  auto b = v.find_first_not_of(" \t\r\n");
  auto e = v.find_last_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  v = v.substr(b, e - b + 1);
  if (!v.empty() && v.front() == '[') v.remove_prefix(1);
  if (!v.empty() && v.back() == ']') v.remove_suffix(1);
  if (v.find_first_not_of(" \t\r\n") == std::string_view::npos) return {};
  std::vector<std::string> tokens;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',' || v[i] == '|') {
      tokens.push_back(trim(v.substr(start, i - start)));
      start = i + 1;
    }
  }
  return tokens;
}

bool parse_index(const std::string& token, std::size_t& out) {
  if (token.empty() || token.size() > 6) return false;
  out = 0;
  for (char c : token) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = out * 10 + static_cast<std::size_t>(c - '0');
  }
  return true;
}

}  // namespace

std::string encode(const ArchSeq& a) { return encode_impl(a, nullptr, TokenStyle::names); }

std::string encode(const ArchSeq& a, const SearchSpace& s, TokenStyle style) {
  return encode_impl(a, &s, style);
}

LengthError::LengthError(std::size_t expected, std::size_t got, std::string text)
    : DecodeError("expected " + std::to_string(expected) + " tokens, got " + std::to_string(got), std::move(text)),
      expected_(expected),
      got_(got) {}

TokenError::TokenError(std::size_t position, std::string token, std::string reason, std::string text)
    : DecodeError("token " + std::to_string(position + 1) + " '" + token + "': " + reason, std::move(text)),
      position_(position),
      token_(std::move(token)) {}

ArchSeq decode(const std::string& text, const SearchSpace& s, TokenStyle style) {
  const std::vector<std::string> tokens = tokenize(text);
  if (tokens.size() != s.token_count()) throw LengthError(s.token_count(), tokens.size(), text);

  ArchSeq a;
  a.kind = s.kind;
  std::size_t pos = 0;
  for (const auto& layer : s.slots) {
    std::vector<GnnOp> ops;
    for (std::size_t i = 0; i < layer.size(); ++i, ++pos) {
      const std::string& tok = tokens[pos];
      std::size_t idx = 0;
      if (style == TokenStyle::indices) {
        if (!parse_index(tok, idx) || idx >= s.gnn_candidates.size())
          throw TokenError(pos, tok, "expected an operator number in 0.." + std::to_string(s.gnn_candidates.size() - 1), text);
        ops.push_back(s.gnn_candidates[idx]);
        continue;
      }
      auto op = gnn_op_from_string(tok);
      if (!op) {
        std::string reason = aggr_from_string(tok) ? "aggregator where a GNN operator was expected" : "unknown operator";
        throw TokenError(pos, tok, reason, text);
      }
      if (std::find(s.gnn_candidates.begin(), s.gnn_candidates.end(), *op) == s.gnn_candidates.end())
        throw TokenError(pos, tok, "operator not allowed in this search space", text);
      ops.push_back(*op);
    }
    const std::string& tok = tokens[pos];
    std::size_t idx = 0;
    if (style == TokenStyle::indices) {
      if (!parse_index(tok, idx) || idx >= s.aggr_candidates.size())
        throw TokenError(pos, tok, "expected an aggregator number in 0.." + std::to_string(s.aggr_candidates.size() - 1), text);
      a.aggr.push_back(s.aggr_candidates[idx]);
    } else {
      auto ag = aggr_from_string(tok);
      if (!ag) {
        std::string reason = gnn_op_from_string(tok) ? "GNN operator where an aggregator was expected" : "unknown aggregator";
        throw TokenError(pos, tok, reason, text);
      }
      if (std::find(s.aggr_candidates.begin(), s.aggr_candidates.end(), *ag) == s.aggr_candidates.end())
        throw TokenError(pos, tok, "aggregator not allowed in this search space", text);
      a.aggr.push_back(*ag);
    }
    ++pos;
    a.ops.push_back(std::move(ops));
  }
  return a;
}

void check_membership(const ArchSeq& a, const SearchSpace& s) {
  const std::string text = encode(a);
  std::size_t got = a.aggr.size();
  for (const auto& layer : a.ops) got += layer.size();
  if (a.ops.size() != s.slots.size() || a.aggr.size() != s.slots.size()) throw LengthError(s.token_count(), got, text);
  for (std::size_t l = 0; l < s.slots.size(); ++l)
    if (a.ops[l].size() != s.slots[l].size()) throw LengthError(s.token_count(), got, text);
  std::size_t pos = 0;
  for (std::size_t l = 0; l < s.slots.size(); ++l) {
    for (GnnOp op : a.ops[l]) {
      if (std::find(s.gnn_candidates.begin(), s.gnn_candidates.end(), op) == s.gnn_candidates.end())
        throw TokenError(pos, to_string(op), "operator not allowed in this search space", text);
      ++pos;
    }
    if (std::find(s.aggr_candidates.begin(), s.aggr_candidates.end(), a.aggr[l]) == s.aggr_candidates.end())
      throw TokenError(pos, to_string(a.aggr[l]), "aggregator not allowed in this search space", text);
    ++pos;
  }
}

std::uint64_t arch_index(const ArchSeq& a, const SearchSpace& s) {
  check_membership(a, s);
  std::uint64_t idx = 0;
  for (std::size_t l = 0; l < s.slots.size(); ++l) {
    for (GnnOp op : a.ops[l]) idx = idx * s.gnn_candidates.size() + position_in(s.gnn_candidates, op);
    idx = idx * s.aggr_candidates.size() + position_in(s.aggr_candidates, a.aggr[l]);
  }
  return idx;
}

ArchSeq arch_at(std::uint64_t index, const SearchSpace& s) {
  if (index >= space_size(s)) throw std::out_of_range("architecture index outside the search space");
  ArchSeq a;
  a.kind = s.kind;
  a.ops.resize(s.slots.size());
  a.aggr.resize(s.slots.size());
  // Least significant token is the last one.
  for (std::size_t l = s.slots.size(); l-- > 0;) {
    a.aggr[l] = s.aggr_candidates[index % s.aggr_candidates.size()];
    index /= s.aggr_candidates.size();
    a.ops[l].resize(s.slots[l].size());
    for (std::size_t i = s.slots[l].size(); i-- > 0;) {
      a.ops[l][i] = s.gnn_candidates[index % s.gnn_candidates.size()];
      index /= s.gnn_candidates.size();
    }
  }
  return a;
}

EnumerationCapExceeded::EnumerationCapExceeded(std::uint64_t size, std::uint64_t cap)
    : std::runtime_error("search space has " + std::to_string(size) + " architectures, above the enumeration cap of " +
                         std::to_string(cap)),
      size_(size) {}

void enumerate(const SearchSpace& s, const std::function<bool(const ArchSeq&)>& visit, std::uint64_t cap) {
  const std::uint64_t size = space_size(s);
  if (size > cap) throw EnumerationCapExceeded(size, cap);
  if (size == 0) return;
  // Odometer over candidate positions, last token fastest.
  std::vector<std::size_t> digits(s.token_count(), 0);
  std::vector<std::size_t> radix;
  for (const auto& layer : s.slots) {
    radix.insert(radix.end(), layer.size(), s.gnn_candidates.size());
    radix.push_back(s.aggr_candidates.size());
  }
  ArchSeq a = arch_at(0, s);
  for (std::uint64_t n = 0; n < size; ++n) {
    if (n > 0) {
      std::size_t p = digits.size();
      while (p-- > 0) {
        if (++digits[p] < radix[p]) break;
        digits[p] = 0;
      }
      std::size_t k = 0;
      for (std::size_t l = 0; l < s.slots.size(); ++l) {
        for (std::size_t i = 0; i < s.slots[l].size(); ++i) a.ops[l][i] = s.gnn_candidates[digits[k++]];
        a.aggr[l] = s.aggr_candidates[digits[k++]];
      }
    }
    if (!visit(a)) return;
  }
}

std::vector<ArchSeq> enumerate_all(const SearchSpace& s, std::uint64_t cap) {
  std::vector<ArchSeq> out;
  enumerate(s, [&](const ArchSeq& a) {
    out.push_back(a);
    return true;
  }, cap);
  return out;
}

BaselineArchs baseline_archs(const SearchSpace& s, const MetaPath& mp) {
  if (mp.size() > static_cast<std::size_t>(s.layers))
    throw ConfigError("meta-path of length " + std::to_string(mp.size()) + " does not fit " +
                      std::to_string(s.layers) + " layers");
  auto has = [&](GnnOp op) { return std::find(s.gnn_candidates.begin(), s.gnn_candidates.end(), op) != s.gnn_candidates.end(); };
  if (!has(GnnOp::gcn) || !has(GnnOp::zero)) throw ConfigError("baselines need gcn and zero in the candidate set");
  const Aggr aggr = std::find(s.aggr_candidates.begin(), s.aggr_candidates.end(), Aggr::sum) != s.aggr_candidates.end()
                        ? Aggr::sum
                        : s.aggr_candidates.front();
  BaselineArchs b;
  for (auto* a : {&b.all_relations, &b.meta_path}) {
    a->kind = s.kind;
    a->aggr.assign(s.slots.size(), aggr);
  }
  for (const auto& layer : s.slots) {
    b.all_relations.ops.emplace_back(layer.size(), GnnOp::gcn);
    b.meta_path.ops.emplace_back(layer.size(), GnnOp::zero);
  }
  const std::size_t offset = static_cast<std::size_t>(s.layers) - mp.size();
  for (std::size_t k = 0; k < mp.size(); ++k) {
    const auto& layer = s.slots[offset + k];
    auto it = std::find_if(layer.begin(), layer.end(), [&](const Slot& sl) { return sl.relation == mp.steps[k]; });
    if (it == layer.end())
      throw ConfigError("meta-path step " + mp.steps[k] + " has no slot in layer " + std::to_string(offset + k));
    b.meta_path.ops[offset + k][static_cast<std::size_t>(it - layer.begin())] = GnnOp::gcn;
  }
  return b;
}

std::string describe_positions(const SearchSpace& s, const std::function<std::string(const Slot&)>& label) {
  std::string out = "[";
  for (std::size_t l = 0; l < s.slots.size(); ++l) {
    if (l) out += " | ";
    for (const Slot& sl : s.slots[l]) {
      out += label ? label(sl) : sl.relation;
      out += ", ";
    }
    out += "HAggr";
  }
  return out + "]";
}

nlohmann::json to_json(const SearchSpace& s) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : s.slots) {
    nlohmann::json slots = nlohmann::json::array();
    for (const Slot& sl : layer)
      slots.push_back({{"relation", sl.relation}, {"src", sl.src}, {"dst", sl.dst}, {"self", sl.self}});
    layers.push_back(slots);
  }
  std::vector<std::string> gnn, aggr;
  for (GnnOp op : s.gnn_candidates) gnn.push_back(to_string(op));
  for (Aggr a : s.aggr_candidates) aggr.push_back(to_string(a));
  return {{"layers", s.layers}, {"kind", to_string(s.kind)}, {"slots", layers}, {"gnn_candidates", gnn},
          {"aggr_candidates", aggr}};
}

SearchSpace space_from_json(const nlohmann::json& j) {
  SearchSpace s;
  s.layers = j.at("layers").get<int>();
  s.kind = space_kind_from_string(j.at("kind").get<std::string>());
  for (const auto& layer : j.at("slots")) {
    std::vector<Slot> slots;
    for (const auto& sl : layer)
      slots.push_back({sl.at("relation").get<std::string>(), sl.at("src").get<std::string>(),
                       sl.at("dst").get<std::string>(), sl.at("self").get<bool>()});
    s.slots.push_back(std::move(slots));
  }
  for (const auto& t : j.at("gnn_candidates")) {
    auto op = gnn_op_from_string(t.get<std::string>());
    if (!op) throw ConfigError("unknown GNN operator in space: " + t.get<std::string>());
    s.gnn_candidates.push_back(*op);
  }
  for (const auto& t : j.at("aggr_candidates")) {
    auto a = aggr_from_string(t.get<std::string>());
    if (!a) throw ConfigError("unknown aggregator in space: " + t.get<std::string>());
    s.aggr_candidates.push_back(*a);
  }
  if (static_cast<std::size_t>(s.layers) != s.slots.size()) throw ConfigError("space layer count mismatch");
  return s;
}

}  // namespace hgnas
