#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace hgnas {

using Index = std::int64_t;

// Node-major storage: one row per node, so edge gathers read contiguous rows.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using MatrixXd = RowMatrix<double>;

}  // namespace hgnas
