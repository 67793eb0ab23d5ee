#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace pgff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Complex = std::complex<double>;
using Sequence = std::vector<double>;

}  // namespace pgff
