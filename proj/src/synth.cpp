#include "hgnas/synth.hpp"

#include "hgnas/error.hpp"
#include "hgnas/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hgnas {

SynthConfig acm_like_config(std::uint64_t seed, Index authors, Index papers, Index subjects) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.types = {{"A", authors}, {"P", papers}, {"S", subjects}};
  cfg.relations = {{"A-P", "A", "P", "P", 2}, {"P-S", "P", "S", "P", 1}};
  cfg.target_type = "P";
  cfg.planted_path = MetaPath{{"P-S", "S-P"}};
  return cfg;
}

namespace {

// Relation schema with derived reverse names, used to check the planted path.
HeteroGraph schema_graph(const SynthConfig& cfg) {
  HeteroGraph g;
  for (const auto& t : cfg.types) {
    g.node_types.push_back(t.name);
    g.num_nodes.push_back(t.count);
  }
  for (const auto& r : cfg.relations) {
    g.relations.push_back({r.name, r.src, r.dst});
    g.relations.push_back({reverse_name(r.name), r.dst, r.src});
  }
  g.edges.assign(g.relations.size(), {});
  return g;
}

bool on_path(const SynthConfig& cfg, const SynthRelation& r) {
  for (const auto& step : cfg.planted_path.steps)
    if (step == r.name || step == reverse_name(r.name)) return true;
  return false;
}

bool balanced(const std::vector<int>& labels, int classes, double tol) {
  std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
  for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
  const double n = static_cast<double>(labels.size());
  for (double c : counts)
    if (std::abs(c / n - 1.0 / classes) > tol) return false;
  return true;
}

HeteroGraph generate_once(const SynthConfig& cfg, std::uint64_t seed) {
  const int C = cfg.num_classes;
  HeteroGraph g;
  g.name = "synth-" + std::to_string(seed);
  for (const auto& t : cfg.types) {
    g.node_types.push_back(t.name);
    g.num_nodes.push_back(t.count);
  }

  // Balanced communities per type.
  std::vector<std::vector<int>> community(cfg.types.size());
  for (std::size_t t = 0; t < cfg.types.size(); ++t) {
    auto& c = community[t];
    c.resize(static_cast<std::size_t>(cfg.types[t].count));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<int>(i % static_cast<std::size_t>(C));
    auto rng = make_rng(seed, "community:" + cfg.types[t].name);
    std::shuffle(c.begin(), c.end(), rng);
  }

  for (const auto& sr : cfg.relations) {
    std::size_t s = g.require_type(sr.src);
    std::size_t d = g.require_type(sr.dst);
    if (sr.anchor != sr.src && sr.anchor != sr.dst)
      throw ConfigError("relation " + sr.name + " anchors on a type it does not touch");
    const bool anchor_is_src = sr.anchor == sr.src;
    const std::size_t a = anchor_is_src ? s : d;
    const std::size_t o = anchor_is_src ? d : s;
    const Index n_other = g.num_nodes[o];
    if (sr.per_anchor > n_other) throw ConfigError("relation " + sr.name + " needs more partners than exist");
    std::vector<std::vector<Index>> by_comm(static_cast<std::size_t>(C));
    for (Index j = 0; j < n_other; ++j) by_comm[static_cast<std::size_t>(community[o][j])].push_back(j);

    const bool homophilous = on_path(cfg, sr);
    auto rng = make_rng(seed, "edges:" + sr.name);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<Index> any(0, n_other - 1);
    std::vector<Edge> edges;
    for (Index i = 0; i < g.num_nodes[a]; ++i) {
      std::set<Index> chosen;
      const auto& same = by_comm[static_cast<std::size_t>(community[a][i])];
      while (static_cast<int>(chosen.size()) < sr.per_anchor) {
        // Fall back to uniform picks once the own community is used up.
        const bool room = chosen.size() < same.size();
        if (homophilous && room && coin(rng) < cfg.homophily) {
          std::uniform_int_distribution<std::size_t> pick(0, same.size() - 1);
          chosen.insert(same[pick(rng)]);
        } else {
          chosen.insert(any(rng));
        }
      }
      for (Index j : chosen) edges.push_back(anchor_is_src ? Edge{i, j} : Edge{j, i});
    }
    std::sort(edges.begin(), edges.end());
    g.relations.push_back({sr.name, sr.src, sr.dst});
    g.edges.push_back(std::move(edges));
  }
  g = derive_reverse_relations(std::move(g));
  check_meta_path(g, cfg.planted_path);

  const std::string& source = g.relations[g.require_relation(cfg.planted_path.steps.front())].src;
  g.features.resize(g.node_types.size());
  for (std::size_t t = 0; t < g.node_types.size(); ++t) {
    const Index n = g.num_nodes[t];
    if (g.node_types[t] != source) {
      g.features[t] = MatrixXd::Ones(n, cfg.feature_dim);
      continue;
    }
    auto rng = make_rng(seed, "features:" + g.node_types[t]);
    std::normal_distribution<double> noise(0.0, 1.0);
    g.features[t].resize(n, cfg.feature_dim);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < cfg.feature_dim; ++k) g.features[t](i, k) = noise(rng);
    for (Index i = 0; i < n; ++i) g.features[t](i, community[t][static_cast<std::size_t>(i)]) += cfg.signal;
  }

  g.task = Task::node_classification;
  g.target_type = cfg.target_type;
  g.num_classes = C;
  g.labels = planted_labels(g, cfg.planted_path, C);

  auto rng = make_rng(seed, "label-noise");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> shift(1, C - 1);
  for (int& y : g.labels)
    if (coin(rng) < cfg.noise) y = (y + shift(rng)) % C;

  const Index n = g.count(g.target_type);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto split_rng = make_rng(seed, "split");
  std::shuffle(order.begin(), order.end(), split_rng);
  auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
  auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, order.size() - std::min(n_train, order.size()));
  g.node_split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  g.node_split.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                          order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  g.node_split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  for (auto* part : {&g.node_split.train, &g.node_split.val, &g.node_split.test})
    std::sort(part->begin(), part->end());
  return g;
}

}  // namespace

std::vector<int> planted_labels(const HeteroGraph& g, const MetaPath& path, int num_classes) {
  check_meta_path(g, path);
  if (path.empty()) throw SchemaError("planted path is empty");
  std::size_t first = g.require_relation(path.steps.front());
  std::size_t src_type = g.require_type(g.relations[first].src);
  MatrixXd h = g.features[src_type].leftCols(num_classes);
  for (const auto& step : path.steps) {
    std::size_t r = g.require_relation(step);
    const Relation& rel = g.relations[r];
    std::vector<double> out_deg(static_cast<std::size_t>(g.count(rel.src)), 0.0);
    std::vector<double> in_deg(static_cast<std::size_t>(g.count(rel.dst)), 0.0);
    for (const auto& [s, d] : g.edges[r]) {
      out_deg[static_cast<std::size_t>(s)] += 1.0;
      in_deg[static_cast<std::size_t>(d)] += 1.0;
    }
    MatrixXd next = MatrixXd::Zero(g.count(rel.dst), num_classes);
    for (const auto& [s, d] : g.edges[r])
      next.row(d) += h.row(s) / std::sqrt(out_deg[static_cast<std::size_t>(s)] * in_deg[static_cast<std::size_t>(d)]);
    h = std::move(next);
  }
  const Relation& last = g.relations[g.require_relation(path.steps.back())];
  if (last.dst != g.target_type && !g.target_type.empty())
    throw SchemaError("planted path must end at the target type " + g.target_type);
  std::vector<int> labels(static_cast<std::size_t>(h.rows()));
  for (Index i = 0; i < h.rows(); ++i) {
    Index best = 0;
    h.row(i).maxCoeff(&best);
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

HeteroGraph synth_graph(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw ConfigError("synthetic graph needs at least two classes");
  if (cfg.feature_dim < cfg.num_classes) throw ConfigError("feature_dim must be at least num_classes");
  if (cfg.noise < 0.0 || cfg.noise > 1.0) throw ConfigError("noise must be a probability");
  if (cfg.planted_path.empty()) throw ConfigError("planted path is empty");
  HeteroGraph schema = schema_graph(cfg);
  check_meta_path(schema, cfg.planted_path);
  if (schema.relations[schema.require_relation(cfg.planted_path.steps.back())].dst != cfg.target_type)
    throw SchemaError("planted path must end at the target type " + cfg.target_type);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    HeteroGraph g = generate_once(cfg, cfg.seed + static_cast<std::uint64_t>(attempt));
    if (balanced(g.labels, cfg.num_classes, cfg.balance_tolerance)) {
      validate(g);
      return g;
    }
  }
  throw ValidationError("could not generate a label-balanced graph within max_attempts");
}

}  // namespace hgnas
