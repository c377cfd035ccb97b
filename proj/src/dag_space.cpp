#include "hgnas/dag_space.hpp"

#include "hgnas/error.hpp"
#include "hgnas/space.hpp"

#include <algorithm>

namespace hgnas {

DagCase dag_case(int to, int from, int states) {
  if (from < 0 || from >= to || to > states) throw std::out_of_range("not an edge of the meta-structure DAG");
  if (to < states) return from == to - 1 ? DagCase::consecutive : DagCase::skip;
  return from == states - 1 ? DagCase::final_consecutive : DagCase::final_skip;
}

DagSpace build_dag_space(const HeteroGraph& g, int states, const std::string& target_type) {
  if (states < 2) throw ConfigError("a meta-structure DAG needs at least two intermediate states");
  g.require_type(target_type);
  DagSpace s;
  s.states = states;
  s.target_type = target_type;
  for (const auto& r : g.relations) {
    s.relations.push_back(r.name);
    if (r.dst == target_type) s.target_relations.push_back(r.name);
  }
  if (s.target_relations.empty()) throw SchemaError("target type " + target_type + " has no incoming relation");

  for (int j = 1; j <= states; ++j) s.edges.push_back({j - 1, j});
  for (int j = 2; j <= states; ++j)
    for (int i = 0; i < j - 1; ++i) s.edges.push_back({i, j});

  for (const DagEdge& e : s.edges) {
    std::vector<std::string> c;
    switch (dag_case(e.to, e.from, states)) {
      case DagCase::consecutive:
        c = s.relations;
        c.push_back(dag_identity);
        break;
      case DagCase::skip:
        c = s.relations;
        c.push_back(dag_identity);
        c.push_back(dag_empty);
        break;
      case DagCase::final_consecutive:
        c = s.target_relations;
        c.push_back(dag_identity);
        break;
      case DagCase::final_skip:
        c = s.target_relations;
        c.push_back(dag_identity);
        c.push_back(dag_empty);
        break;
    }
    s.candidates.push_back(std::move(c));
  }
  return s;
}

std::string encode(const DagArch& a) {
  std::string out = "[";
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (k) out += ", ";
    out += a[k];
  }
  return out + "]";
}

void check_dag_arch(const DagArch& a, const DagSpace& s) {
  const std::string text = encode(a);
  if (a.size() != s.edges.size()) throw LengthError(s.edges.size(), a.size(), text);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& c = s.candidates[k];
    if (std::find(c.begin(), c.end(), a[k]) == c.end())
      throw TokenError(k, a[k], "not allowed on " + s.edges[k].label(), text);
  }
}

DagArch decode_dag(const std::string& text, const DagSpace& s) {
  std::string_view v = text;
  auto b = v.find('[');
  auto e = v.rfind(']');
  if (b != std::string_view::npos && e != std::string_view::npos && e > b) v = v.substr(b + 1, e - b - 1);
  DagArch a;
  std::size_t start = 0;
  if (v.find_first_not_of(" \t\r\n") != std::string_view::npos) {
    for (std::size_t i = 0; i <= v.size(); ++i) {
      if (i == v.size() || v[i] == ',') {
        auto tok = v.substr(start, i - start);
        auto tb = tok.find_first_not_of(" \t\r\n\"'");
        auto te = tok.find_last_not_of(" \t\r\n\"'");
        a.emplace_back(tb == std::string_view::npos ? "" : std::string(tok.substr(tb, te - tb + 1)));
        start = i + 1;
      }
    }
  }
  check_dag_arch(a, s);
  return a;
}

namespace {

std::string join(const std::vector<std::string>& items, const char* sep = ", ") {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += sep;
    out += items[k];
  }
  return out;
}

std::string join_with_and(const std::vector<std::string>& items) {
  if (items.size() <= 1) return join(items);
  if (items.size() == 2) return items[0] + " and " + items[1];
  std::vector<std::string> head(items.begin(), items.end() - 1);
  return join(head) + ", and " + items.back();
}

}  // namespace

std::string render_dag_space(const DagSpace& s) {
  std::vector<std::string> consecutive, skips;
  std::vector<std::string> inner, last, final_skip, inner_skip;
  std::vector<std::string> inner_c, last_c, final_skip_c, inner_skip_c;
  for (std::size_t k = 0; k < s.edges.size(); ++k) {
    const DagEdge& e = s.edges[k];
    (e.from == e.to - 1 ? consecutive : skips).push_back(e.label());
    switch (dag_case(e.to, e.from, s.states)) {
      case DagCase::consecutive:
        inner.push_back(e.label());
        inner_c = s.candidates[k];
        break;
      case DagCase::final_consecutive:
        last.push_back(e.label());
        last_c = s.candidates[k];
        break;
      case DagCase::final_skip:
        final_skip.push_back(e.label());
        final_skip_c = s.candidates[k];
        break;
      case DagCase::skip:
        inner_skip.push_back(e.label());
        inner_skip_c = s.candidates[k];
        break;
    }
  }
  std::string out = "For a given meta-structure {" + join(consecutive) + "} {" + join(skips) + "}, ";
  if (!inner.empty()) out += join(inner) + " should be selected from [" + join(inner_c) + "], ";
  out += join(last) + " should be selected from [" + join(last_c) + "]";
  if (!final_skip.empty()) out += " and " + join(final_skip) + " should be selected from [" + join(final_skip_c) + "]";
  out += " because the target is " + s.target_type + ".";
  if (!inner_skip.empty()) out += " For " + join_with_and(inner_skip) + " you can choose from [" + join(inner_skip_c) + "]";
  return out;
}

}  // namespace hgnas
