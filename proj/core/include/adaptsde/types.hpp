#pragma once

#include <Eigen/Core>

#include <functional>

namespace adaptsde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Vector fields write into a caller-sized output so that hot loops do not
// allocate. `out` is never aliased with `x`.
using DriftFn = std::function<void(const Vector& x, Vector& out)>;
using DiffusionFn = std::function<void(const Vector& x, Matrix& out)>;
using JacobianFn = std::function<void(const Vector& x, Matrix& out)>;
using DensityFn = std::function<double(const Vector& x)>;
using ScalarFn = std::function<double(double)>;

}  // namespace adaptsde
