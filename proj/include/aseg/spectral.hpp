#pragma once

#include <cmath>
#include <functional>

#include "aseg/kernels.hpp"
#include "aseg/problem.hpp"

namespace aseg {

using LinearOp = std::function<void(ConstVecView in, VecView out)>;

/// max |eigenvalue| of a symmetric operator from a Lanczos (Krylov power)
/// iteration with full reorthogonalization. Stops when the extreme Ritz
/// residual falls below tol times the estimate, or the basis spans the space.
SpectralEstimate spectral_norm(const LinearOp& op, std::size_t dim, double tol = 1e-12,
                               int max_iter = 100000);

}  // namespace aseg
