#include "rdlm/tridiag.hpp"

#include <cmath>
#include <stdexcept>

namespace rdlm {

Eigen::MatrixXd BandedSpd::dense() const {
  const Eigen::Index n = dim();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, i) = diag[i];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    m(i, i + 1) = off[i];
    m(i + 1, i) = off[i];
  }
  return m;
}

TridiagChol::TridiagChol(const BandedSpd& m) {
  const Eigen::Index n = m.dim();
  if (n < 1) throw std::invalid_argument("TridiagChol: empty matrix");
  if (m.off.size() != n - 1)
    throw std::invalid_argument("TridiagChol: off-diagonal length mismatch");
  ldiag_.resize(n);
  lsub_.resize(n > 0 ? n - 1 : 0);
  double piv = m.diag[0];
  if (!(piv > 0.0)) throw std::runtime_error("TridiagChol: not positive definite");
  ldiag_[0] = std::sqrt(piv);
  log_det_ = std::log(piv);
  for (Eigen::Index i = 1; i < n; ++i) {
    lsub_[i - 1] = m.off[i - 1] / ldiag_[i - 1];
    piv = m.diag[i] - lsub_[i - 1] * lsub_[i - 1];
    if (!(piv > 0.0)) throw std::runtime_error("TridiagChol: not positive definite");
    ldiag_[i] = std::sqrt(piv);
    log_det_ += std::log(piv);
  }
}

Eigen::VectorXd TridiagChol::solve(const Eigen::VectorXd& rhs) const {
  const Eigen::Index n = dim();
  if (rhs.size() != n) throw std::invalid_argument("TridiagChol::solve: size mismatch");
  Eigen::VectorXd x(n);
  // L y = rhs
  x[0] = rhs[0] / ldiag_[0];
  for (Eigen::Index i = 1; i < n; ++i)
    x[i] = (rhs[i] - lsub_[i - 1] * x[i - 1]) / ldiag_[i];
  // L' x = y
  x[n - 1] /= ldiag_[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i)
    x[i] = (x[i] - lsub_[i] * x[i + 1]) / ldiag_[i];
  return x;
}

Eigen::VectorXd TridiagChol::marginal_variances() const {
  // Takahashi recursion restricted to the tridiagonal pattern.
  const Eigen::Index n = dim();
  Eigen::VectorXd var(n);
  double next_cross = 0.0;  // Sigma_{i,i+1}
  var[n - 1] = 1.0 / (ldiag_[n - 1] * ldiag_[n - 1]);
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    const double ratio = lsub_[i] / ldiag_[i];
    next_cross = -ratio * var[i + 1];
    var[i] = 1.0 / (ldiag_[i] * ldiag_[i]) - ratio * next_cross;
  }
  return var;
}

}  // namespace rdlm
