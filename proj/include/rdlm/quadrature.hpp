#pragma once

#include <Eigen/Core>

namespace rdlm {

struct GaussHermiteRule {
  Eigen::VectorXd nodes;    // roots of H_n
  Eigen::VectorXd weights;  // sum to sqrt(pi)
};

// Gauss-Hermite rule for integrals against exp(-x^2), computed by
// eigendecomposition of the Jacobi matrix (Golub-Welsch).
GaussHermiteRule gauss_hermite(int n);

}  // namespace rdlm
