#include "hgnas/model.hpp"

#include "hgnas/error.hpp"
#include "hgnas/rng.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace hgnas {

namespace {

constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

}  // namespace

PreparedGraph prepare(const HeteroGraph& g) {
  PreparedGraph pg;
  pg.graph = &g;
  std::set<Edge> held_out;
  std::optional<std::size_t> target, reverse;
  if (g.task == Task::link_prediction) {
    target = g.require_relation(g.target_relation);
    reverse = find_reverse(g, *target);
    for (const auto* part : {&g.link_split.val, &g.link_split.test})
      held_out.insert(part->positives.begin(), part->positives.end());
  }
  for (std::size_t r = 0; r < g.relations.size(); ++r) {
    const Relation& rel = g.relations[r];
    const Index ns = g.count(rel.src), nd = g.count(rel.dst);
    if (held_out.empty() || (r != target && r != reverse)) {
      pg.relations.push_back(Adjacency::from_edges(g.edges[r], ns, nd));
      continue;
    }
    std::vector<Edge> kept;
    for (const auto& e : g.edges[r]) {
      const Edge forward = r == target ? e : Edge{e.second, e.first};
      if (!held_out.count(forward)) kept.push_back(e);
    }
    pg.relations.push_back(Adjacency::from_edges(kept, ns, nd));
  }
  for (Index n : g.num_nodes) pg.self.push_back(Adjacency::identity(n));
  return pg;
}

std::size_t Parameters::add_glorot(const std::string& name, Index rows, Index cols, std::uint64_t seed) {
  auto rng = make_rng(seed, name);
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-bound, bound);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  names.push_back(name);
  values.push_back(std::move(m));
  return values.size() - 1;
}

std::size_t Parameters::add_zeros(const std::string& name, Index rows, Index cols) {
  names.push_back(name);
  values.push_back(MatrixXd::Zero(rows, cols));
  return values.size() - 1;
}

std::size_t Parameters::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw std::out_of_range("no parameter named " + name);
}

std::size_t Parameters::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += static_cast<std::size_t>(v.size());
  return n;
}

HgnnModel::HgnnModel(ArchSeq arch, const SearchSpace& space, const HeteroGraph& g, Index hidden_dim,
                     std::uint64_t seed)
    : arch_(std::move(arch)), space_(space), hidden_(hidden_dim) {
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  check_membership(arch_, space_);
  for (const auto& layer : space_.slots)
    for (const auto& slot : layer) {
      if (slot.self) {
        g.require_type(slot.src);
      } else if (!g.relation_index(slot.relation)) {
        throw SchemaError("architecture uses relation " + slot.relation + " which the graph does not have");
      }
    }

  for (std::size_t t = 0; t < g.node_types.size(); ++t)
    proj_.push_back(params_.add_glorot("proj:" + g.node_types[t], g.features[t].cols(), hidden_, seed));

  const Index h = hidden_;
  for (std::size_t l = 0; l < space_.slots.size(); ++l) {
    std::vector<std::size_t> w, att;
    for (std::size_t k = 0; k < space_.slots[l].size(); ++k) {
      const GnnOp op = arch_.ops[l][k];
      const std::string key = std::to_string(l) + ":" + space_.slots[l][k].relation;
      w.push_back(op == GnnOp::zero ? npos : params_.add_glorot("w:" + key, h, h, seed));
      att.push_back(op == GnnOp::gat ? params_.add_glorot("gat:" + key, 1, 2 * h, seed) : npos);
    }
    slot_w_.push_back(std::move(w));
    slot_att_.push_back(std::move(att));
    const Aggr a = arch_.aggr[l];
    const std::string key = std::to_string(l);
    lstm_wx_.push_back(a == Aggr::lstm ? params_.add_glorot("lstm_x:" + key, h, 4 * h, seed) : npos);
    lstm_wh_.push_back(a == Aggr::lstm ? params_.add_glorot("lstm_h:" + key, h, 4 * h, seed) : npos);
    att_q_.push_back(a == Aggr::att ? params_.add_glorot("att_q:" + key, h, 1, seed) : npos);
  }
  add_head(params_, g, hidden_, seed);
}

MatrixXd dropout_mask(Index rows, Index cols, double p, std::uint64_t seed, std::uint64_t layer, std::uint64_t type) {
  std::mt19937_64 rng(derive_seed(seed, layer, type));
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = keep(rng) ? scale : 0.0;
  return m;
}

std::vector<Var> HgnnModel::forward(Tape& tape, const std::vector<Var>& vars, const PreparedGraph& pg, Mode mode,
                                    double dropout, std::uint64_t dropout_seed) const {
  const HeteroGraph& g = *pg.graph;
  if (vars.size() != params_.values.size()) throw std::invalid_argument("forward: parameter count mismatch");
  const std::size_t T = g.node_types.size();

  std::vector<Var> h;
  for (std::size_t t = 0; t < T; ++t) h.push_back(ad::matmul(tape.constant(g.features[t]), vars[proj_[t]]));

  for (std::size_t l = 0; l < space_.slots.size(); ++l) {
    if (mode == Mode::train && dropout > 0)
      for (std::size_t t = 0; t < T; ++t)
        h[t] = ad::cwise_mul(h[t], tape.constant(dropout_mask(h[t].rows(), h[t].cols(), dropout, dropout_seed, l, t)));

    std::vector<std::vector<Var>> messages(T);
    for (std::size_t k = 0; k < space_.slots[l].size(); ++k) {
      const Slot& slot = space_.slots[l][k];
      const std::size_t s = g.require_type(slot.src), d = g.require_type(slot.dst);
      const Adjacency& adj = slot.self ? pg.self[s] : pg.relations[g.require_relation(slot.relation)];
      SlotParams<double> p;
      if (slot_w_[l][k] != npos) p.w = vars[slot_w_[l][k]];
      if (slot_att_[l][k] != npos) p.att = vars[slot_att_[l][k]];
      messages[d].push_back(relation_message(arch_.ops[l][k], h[s], h[d], adj, p, slot.relation));
    }

    AggrParams<double> ap;
    if (lstm_wx_[l] != npos) ap.lstm_wx = vars[lstm_wx_[l]];
    if (lstm_wh_[l] != npos) ap.lstm_wh = vars[lstm_wh_[l]];
    if (att_q_[l] != npos) ap.att_q = vars[att_q_[l]];
    const bool last = l + 1 == space_.slots.size();
    for (std::size_t t = 0; t < T; ++t) {
      if (messages[t].empty()) {
        h[t] = tape.constant(MatrixXd::Zero(g.num_nodes[t], hidden_));
        continue;
      }
      Var out = aggregate(arch_.aggr[l], messages[t], ap);
      h[t] = last ? out : ad::elu(out);
    }
  }

  std::vector<Var> reps;
  for (const auto& type : g.task_types()) reps.push_back(h[g.require_type(type)]);
  return reps;
}

void add_head(Parameters& params, const HeteroGraph& g, Index hidden_dim, std::uint64_t seed) {
  if (g.task != Task::node_classification) return;
  params.add_glorot("head:W", hidden_dim, g.num_classes, seed);
  params.add_zeros("head:b", 1, g.num_classes);
}

Var classify(const Parameters& params, const std::vector<Var>& vars, Var rep) {
  return ad::add_row(ad::matmul(rep, vars[params.index_of("head:W")]), vars[params.index_of("head:b")]);
}

}  // namespace hgnas
