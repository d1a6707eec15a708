#pragma once

#include <Eigen/Sparse>
#include <span>
#include <vector>

#include "rfp/pde.hpp"

// Shared discretization pieces for the stationary and parabolic solvers.
namespace rfp::detail {

struct Assembled {
  Eigen::SparseMatrix<double> L;  // 1/2 Tr(D grad^2) + drift grad, closed
  std::vector<double> nodes;      // size x dim
  double max_row_abs = 0;
};

Assembled assemble(const PdeProblem& p);

// G(v_k, z_k) for every node; OpenMP across nodes when parallel.
void g_sweep(const PdeProblem& p, const std::vector<double>& nodes,
             std::span<const double> z, std::span<double> out, bool parallel);

double interp_strided(const SpatialGrid& g, std::span<const double> field,
                      int stride, int offset, std::span<const double> v);

}  // namespace rfp::detail
