#pragma once

#include <Eigen/Dense>

namespace drbf {

using Point = Eigen::VectorXd;
/// One point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

} // namespace drbf
