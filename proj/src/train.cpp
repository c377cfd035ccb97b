#include "hgnas/error.hpp"
#include "hgnas/metrics.hpp"
#include "hgnas/model.hpp"
#include "hgnas/rng.hpp"

#include <cmath>
#include <limits>

namespace hgnas {

void TrainConfig::check() const {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (patience < 1) throw ConfigError("patience must be positive");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"dropout", c.dropout}, {"hidden_dim", c.hidden_dim},
          {"epochs", c.epochs},               {"patience", c.patience}, {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "learning_rate") c.learning_rate = value.get<double>();
    else if (key == "dropout") c.dropout = value.get<double>();
    else if (key == "hidden_dim") c.hidden_dim = value.get<Index>();
    else if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "patience") c.patience = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("unknown train config key '" + key + "'");
  }
  c.check();
  return c;
}

namespace {

struct LinkBatch {
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<double> targets;
  std::vector<int> labels;
};

LinkBatch link_batch(const LinkSample& s) {
  LinkBatch b;
  for (const auto& e : s.positives) {
    b.pairs.push_back(e);
    b.targets.push_back(1.0);
    b.labels.push_back(1);
  }
  for (const auto& e : s.negatives) {
    b.pairs.push_back(e);
    b.targets.push_back(0.0);
    b.labels.push_back(0);
  }
  return b;
}

// Maps task-type representations to the link endpoints' source and target types.
std::pair<Var, Var> link_endpoints(const std::vector<Var>& reps) {
  return {reps.front(), reps.back()};
}

class Adam {
 public:
  explicit Adam(const Parameters& p, double lr) : lr_(lr) {
    for (const auto& v : p.values) {
      m_.push_back(MatrixXd::Zero(v.rows(), v.cols()));
      v_.push_back(MatrixXd::Zero(v.rows(), v.cols()));
    }
  }

  void step(Parameters& p, const Tape& tape, const std::vector<Var>& vars) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_), c2 = 1.0 - std::pow(b2_, t_);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      if (!tape.has_grad(vars[i].id)) continue;
      const MatrixXd& g = tape.upstream(vars[i].id);
      m_[i] = b1_ * m_[i] + (1 - b1_) * g;
      v_[i] = b2_ * v_[i] + (1 - b2_) * g.cwiseAbs2();
      p.values[i].array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_;
  double b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  std::vector<MatrixXd> m_, v_;
};

}  // namespace

TrialResult fit(Parameters& params, const PreparedGraph& pg, const TrainConfig& cfg, const ForwardFn& forward) {
  cfg.check();
  const HeteroGraph& g = *pg.graph;
  const bool nc = g.task == Task::node_classification;
  if (nc && (g.node_split.train.empty() || g.node_split.val.empty() || g.node_split.test.empty()))
    throw ValidationError("node classification needs nonempty train, validation and test splits");

  LinkBatch train_links, val_links, test_links;
  if (!nc) {
    train_links = link_batch(g.link_split.train);
    val_links = link_batch(g.link_split.val);
    test_links = link_batch(g.link_split.test);
  }

  auto evaluate = [&](const std::vector<Var>& vars, const std::vector<Var>& reps, bool val) {
    if (nc) {
      const MatrixXd& logits = classify(params, vars, reps.front()).value();
      const auto& rows = val ? g.node_split.val : g.node_split.test;
      std::vector<int> pred, truth;
      for (Index i : rows) {
        Index best = 0;
        logits.row(i).maxCoeff(&best);
        pred.push_back(static_cast<int>(best));
        truth.push_back(g.labels[static_cast<std::size_t>(i)]);
      }
      return macro_f1(pred, truth, g.num_classes);
    }
    const LinkBatch& b = val ? val_links : test_links;
    auto [u, v] = link_endpoints(reps);
    const MatrixXd& s = ad::pair_dot(u, v, b.pairs).value();
    return auc(std::vector<double>(s.data(), s.data() + s.size()), b.labels);
  };

  TrialResult result;
  Adam adam(params, cfg.learning_rate);
  const std::uint64_t dropout_base = derive_seed(cfg.seed, "dropout");
  double best = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    {
      Tape tape;
      std::vector<Var> vars;
      for (const auto& v : params.values) vars.push_back(tape.variable(v));
      auto reps = forward(tape, vars, Mode::train, derive_seed(dropout_base, static_cast<std::uint64_t>(epoch)));
      Var loss;
      if (nc) {
        loss = ad::softmax_cross_entropy(classify(params, vars, reps.front()), g.labels, g.node_split.train);
      } else {
        auto [u, v] = link_endpoints(reps);
        loss = ad::bce_with_logits(ad::pair_dot(u, v, train_links.pairs), train_links.targets);
      }
      if (!std::isfinite(loss.value()(0, 0))) {
        result = TrialResult{};
        result.failed = true;
        result.epochs_run = epoch + 1;
        result.error = "non-finite loss at epoch " + std::to_string(epoch);
        return result;
      }
      tape.backward(loss);
      adam.step(params, tape, vars);
    }
    Tape tape;
    std::vector<Var> vars;
    for (const auto& v : params.values) vars.push_back(tape.constant(v));
    auto reps = forward(tape, vars, Mode::eval, 0);
    const double val = evaluate(vars, reps, true);
    result.epochs_run = epoch + 1;
    if (val > best) {
      best = val;
      since_best = 0;
      result.val_metric = val;
      result.test_metric = evaluate(vars, reps, false);
      result.best_epoch = epoch;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

TrialResult train_eval(const ArchSeq& arch, const SearchSpace& space, const PreparedGraph& pg, const TrainConfig& cfg) {
  cfg.check();
  HgnnModel model(arch, space, *pg.graph, cfg.hidden_dim, cfg.seed);
  return fit(model.parameters(), pg, cfg,
             [&](Tape& tape, const std::vector<Var>& vars, Mode mode, std::uint64_t dropout_seed) {
               return model.forward(tape, vars, pg, mode, cfg.dropout, dropout_seed);
             });
}

TrialResult train_eval(const ArchSeq& arch, const SearchSpace& space, const HeteroGraph& g, const TrainConfig& cfg) {
  const PreparedGraph pg = prepare(g);
  return train_eval(arch, space, pg, cfg);
}

}  // namespace hgnas
