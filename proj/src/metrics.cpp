#include "hgnas/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace hgnas {

double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes) {
  if (pred.size() != truth.size()) throw std::invalid_argument("macro_f1: size mismatch");
  if (pred.empty()) throw std::invalid_argument("macro_f1: empty input");
  if (num_classes < 1) throw std::invalid_argument("macro_f1: no classes");
  const auto C = static_cast<std::size_t>(num_classes);
  std::vector<double> tp(C, 0), fp(C, 0), fn(C, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i], t = truth[i];
    if (p < 0 || p >= num_classes || t < 0 || t >= num_classes)
      throw std::invalid_argument("macro_f1: class index out of range");
    if (p == t) {
      tp[static_cast<std::size_t>(p)] += 1;
    } else {
      fp[static_cast<std::size_t>(p)] += 1;
      fn[static_cast<std::size_t>(t)] += 1;
    }
  }
  double total = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const double denom = 2 * tp[c] + fp[c] + fn[c];
    total += denom > 0 ? 2 * tp[c] / denom : 0.0;
  }
  return total / static_cast<double>(C);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        rank_sum += avg_rank;
        pos += 1;
      }
    i = j;
  }
  const double neg = static_cast<double>(scores.size()) - pos;
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc: needs both positive and negative samples");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

}  // namespace hgnas
