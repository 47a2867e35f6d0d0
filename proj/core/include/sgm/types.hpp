#pragma once

#include <Eigen/Dense>

namespace sgm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

}  // namespace sgm
