#pragma once

// Dense d x d helpers for the moderate dimensions of the target datasets.

#include <Eigen/Dense>

#include "aseg/problem.hpp"

namespace aseg {

/// Exact Hessian at x assembled row by row.
Eigen::MatrixXd dense_hessian(const Objective& obj, ConstVecView x);

/// max |eigenvalue| of a symmetric matrix.
double dense_spectral_norm(const Eigen::MatrixXd& sym);

/// Smallest eigenvalue of a symmetric matrix.
double dense_min_eigenvalue(const Eigen::MatrixXd& sym);

}  // namespace aseg
