#pragma once

#include <Eigen/Core>

namespace rdlm {

// Symmetric positive-definite matrix of bandwidth 1, stored as its diagonal
// and first off-diagonal.
struct BandedSpd {
  Eigen::VectorXd diag;
  Eigen::VectorXd off;

  Eigen::Index dim() const { return diag.size(); }
  Eigen::MatrixXd dense() const;
};

// Lower-bidiagonal Cholesky factor of a BandedSpd with solves, the
// log-determinant, and the banded-inverse recursion for the diagonal of the
// inverse. Throws std::runtime_error if the matrix is not positive definite.
class TridiagChol {
 public:
  explicit TridiagChol(const BandedSpd& m);

  Eigen::Index dim() const { return ldiag_.size(); }
  double log_det() const { return log_det_; }  // of the factored matrix

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::VectorXd marginal_variances() const;

 private:
  Eigen::VectorXd ldiag_;
  Eigen::VectorXd lsub_;
  double log_det_ = 0.0;
};

}  // namespace rdlm
