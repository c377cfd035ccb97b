#include "hgnas/graph.hpp"

#include "hgnas/error.hpp"
#include "hgnas/rng.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

namespace hgnas {

std::string to_string(Task task) {
  return task == Task::node_classification ? "nc" : "lp";
}

Task task_from_string(const std::string& text) {
  if (text == "nc" || text == "NC" || text == "node_classification") return Task::node_classification;
  if (text == "lp" || text == "LP" || text == "link_prediction") return Task::link_prediction;
  throw SchemaError("unknown task '" + text + "' (expected nc or lp)");
}

std::optional<std::size_t> HeteroGraph::type_index(const std::string& type) const {
  auto it = std::find(node_types.begin(), node_types.end(), type);
  if (it == node_types.end()) return std::nullopt;
  return static_cast<std::size_t>(it - node_types.begin());
}

std::size_t HeteroGraph::require_type(const std::string& type) const {
  if (auto t = type_index(type)) return *t;
  throw SchemaError("unknown node type '" + type + "'");
}

std::optional<std::size_t> HeteroGraph::relation_index(const std::string& rel) const {
  for (std::size_t r = 0; r < relations.size(); ++r)
    if (relations[r].name == rel) return r;
  return std::nullopt;
}

std::size_t HeteroGraph::require_relation(const std::string& rel) const {
  if (auto r = relation_index(rel)) return *r;
  throw SchemaError("unknown relation '" + rel + "'");
}

std::vector<std::string> HeteroGraph::task_types() const {
  if (task == Task::node_classification) return {target_type};
  const Relation& r = relations[require_relation(target_relation)];
  if (r.src == r.dst) return {r.src};
  return {r.src, r.dst};
}

namespace {

void check_disjoint(const std::vector<Index>& a, const std::vector<Index>& b, const char* name_a,
                    const char* name_b) {
  std::unordered_set<Index> seen(a.begin(), a.end());
  std::vector<Index> overlap;
  for (Index id : b)
    if (seen.count(id)) overlap.push_back(id);
  if (overlap.empty()) return;
  std::string ids;
  for (std::size_t i = 0; i < overlap.size() && i < 10; ++i) {
    if (i) ids += ", ";
    ids += std::to_string(overlap[i]);
  }
  if (overlap.size() > 10) ids += ", ...";
  throw ValidationError(std::string("splits '") + name_a + "' and '" + name_b + "' overlap on " +
                        std::to_string(overlap.size()) + " node(s): " + ids);
}

}  // namespace

void validate(const HeteroGraph& g) {
  if (g.num_nodes.size() != g.node_types.size())
    throw ValidationError("node count list does not match node types");
  if (g.node_types.size() + g.relations.size() <= 2)
    throw ValidationError("graph is not heterogeneous: |types| + |relations| must exceed 2");
  if (g.edges.size() != g.relations.size())
    throw ValidationError("edge lists do not match relations");
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const Relation& rel = g.relations[r];
    Index ns = g.count(rel.src);
    Index nd = g.count(rel.dst);
    for (const auto& [s, d] : g.edges[r]) {
      if (s < 0 || s >= ns || d < 0 || d >= nd)
        throw ValidationError("relation " + rel.name + " has edge (" + std::to_string(s) + ", " +
                              std::to_string(d) + ") outside its endpoint types");
    }
  }
  if (!g.features.empty()) {
    if (g.features.size() != g.node_types.size())
      throw ValidationError("feature matrices do not match node types");
    for (std::size_t t = 0; t < g.node_types.size(); ++t)
      if (g.features[t].rows() != g.num_nodes[t])
        throw ValidationError("feature rows for type " + g.node_types[t] + " do not match node count");
  }
  if (g.task == Task::node_classification) {
    Index n = g.count(g.target_type);
    if (static_cast<Index>(g.labels.size()) != n)
      throw ValidationError("label vector does not cover the target type");
    for (int y : g.labels)
      if (y < -1 || y >= g.num_classes) throw ValidationError("label out of range");
    check_disjoint(g.node_split.train, g.node_split.val, "train", "val");
    check_disjoint(g.node_split.train, g.node_split.test, "train", "test");
    check_disjoint(g.node_split.val, g.node_split.test, "val", "test");
    for (const auto* part : {&g.node_split.train, &g.node_split.val, &g.node_split.test})
      for (Index id : *part)
        if (id < 0 || id >= n) throw ValidationError("split references node outside target type");
  } else {
    g.require_relation(g.target_relation);
    for (const LinkSample* s : {&g.link_split.train, &g.link_split.val, &g.link_split.test}) {
      std::set<Edge> pos(s->positives.begin(), s->positives.end());
      for (const Edge& e : s->negatives)
        if (pos.count(e)) throw ValidationError("link sample has a pair that is both positive and negative");
    }
  }
}

std::optional<std::size_t> find_reverse(const HeteroGraph& g, std::size_t r) {
  const Relation& rel = g.relations[r];
  std::set<Edge> transposed;
  for (const auto& [s, d] : g.edges[r]) transposed.emplace(d, s);
  for (std::size_t q = 0; q < g.relations.size(); ++q) {
    if (q == r && !(rel.src == rel.dst)) continue;
    const Relation& other = g.relations[q];
    if (other.src != rel.dst || other.dst != rel.src) continue;
    if (g.edges[q].size() != g.edges[r].size()) continue;
    std::set<Edge> es(g.edges[q].begin(), g.edges[q].end());
    if (es == transposed) return q;
  }
  return std::nullopt;
}

std::string reverse_name(const std::string& name) {
  auto dash = name.find('-');
  if (dash != std::string::npos && name.find('-', dash + 1) == std::string::npos)
    return name.substr(dash + 1) + "-" + name.substr(0, dash);
  return name + "_rev";
}

HeteroGraph derive_reverse_relations(HeteroGraph g) {
  std::vector<Relation> rels;
  std::vector<std::vector<Edge>> edges;
  std::vector<bool> has_reverse(g.relations.size(), false);
  for (std::size_t r = 0; r < g.relations.size(); ++r)
    has_reverse[r] = find_reverse(g, r).has_value();

  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    rels.push_back(g.relations[r]);
    edges.push_back(g.edges[r]);
    if (has_reverse[r]) continue;
    Relation rev{reverse_name(g.relations[r].name), g.relations[r].dst, g.relations[r].src};
    while (g.relation_index(rev.name) ||
           std::any_of(rels.begin(), rels.end(), [&](const Relation& x) { return x.name == rev.name; }))
      rev.name += "'";
    std::vector<Edge> t;
    t.reserve(g.edges[r].size());
    for (const auto& [s, d] : g.edges[r]) t.emplace_back(d, s);
    std::sort(t.begin(), t.end());
    rels.push_back(rev);
    edges.push_back(std::move(t));
  }
  g.relations = std::move(rels);
  g.edges = std::move(edges);
  return g;
}

void check_meta_path(const HeteroGraph& g, const MetaPath& mp) {
  for (std::size_t k = 0; k < mp.steps.size(); ++k) {
    const Relation& rel = g.relations[g.require_relation(mp.steps[k])];
    if (k > 0) {
      const Relation& prev = g.relations[g.require_relation(mp.steps[k - 1])];
      if (prev.dst != rel.src)
        throw SchemaError("meta-path is not type-consistent at step " + std::to_string(k) + ": " +
                          prev.name + " ends at " + prev.dst + " but " + rel.name + " starts at " +
                          rel.src);
    }
  }
}

std::vector<Edge> sample_negatives(const HeteroGraph& g, const std::string& relation,
                                   const std::vector<Edge>& positives, std::uint64_t seed) {
  std::size_t r = g.require_relation(relation);
  const Relation& rel = g.relations[r];
  Index ns = g.count(rel.src);
  Index nd = g.count(rel.dst);
  std::set<Edge> taken(g.edges[r].begin(), g.edges[r].end());
  taken.insert(positives.begin(), positives.end());
  auto capacity = static_cast<std::size_t>(ns * nd);
  if (taken.size() + positives.size() > capacity)
    throw ValidationError("relation " + relation + " is too dense to draw enough negatives");
  auto rng = make_rng(seed, "negatives:" + relation);
  std::uniform_int_distribution<Index> pick_s(0, ns - 1), pick_d(0, nd - 1);
  std::vector<Edge> out;
  out.reserve(positives.size());
  while (out.size() < positives.size()) {
    Edge e{pick_s(rng), pick_d(rng)};
    if (taken.insert(e).second) out.push_back(e);
  }
  return out;
}

}  // namespace hgnas
