#pragma once

#include <vector>

namespace hgnas {

// Unweighted mean of per-class F1 over classes 0..num_classes-1. A class with no true
// and no predicted instances scores 0 and still counts in the mean.
double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int num_classes);

// Mann-Whitney estimate of ROC AUC; tied scores contribute 1/2.
// Throws std::invalid_argument unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace hgnas
