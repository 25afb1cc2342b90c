#include "rdlm/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "rdlm/parallel.hpp"

namespace rdlm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double trapezoid(const Eigen::VectorXd& x, const Eigen::VectorXd& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i)
    s += 0.5 * (f[i] + f[i + 1]) * (x[i + 1] - x[i]);
  return s;
}

// Natural cubic spline through (x, y), evaluated at q (clamped to the knot
// range). Falls back to linear interpolation below three knots.
Eigen::VectorXd spline_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& q) {
  const Eigen::Index m = x.size();
  Eigen::VectorXd out(q.size());
  if (m == 1) {
    out.setConstant(y[0]);
    return out;
  }
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(m);  // second derivatives
  if (m > 2) {
    const Eigen::Index k = m - 2;
    Eigen::VectorXd a(k), b(k), c(k), d(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double hl = x[i + 1] - x[i];
      const double hr = x[i + 2] - x[i + 1];
      a[i] = hl / 6.0;
      b[i] = (hl + hr) / 3.0;
      c[i] = hr / 6.0;
      d[i] = (y[i + 2] - y[i + 1]) / hr - (y[i + 1] - y[i]) / hl;
    }
    for (Eigen::Index i = 1; i < k; ++i) {  // Thomas elimination
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      d[i] -= w * d[i - 1];
    }
    m2[k] = d[k - 1] / b[k - 1];
    for (Eigen::Index i = k - 1; i >= 1; --i)
      m2[i] = (d[i - 1] - c[i - 1] * m2[i]) / b[i - 1];
  }
  // end slopes for linear extrapolation beyond the knots
  const double h_lo = x[1] - x[0];
  const double h_hi = x[m - 1] - x[m - 2];
  const double slope_lo = (y[1] - y[0]) / h_lo - m2[1] * h_lo / 6.0;
  const double slope_hi = (y[m - 1] - y[m - 2]) / h_hi + m2[m - 2] * h_hi / 6.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    const double t = q[j];
    if (t < x[0]) {
      out[j] = y[0] + slope_lo * (t - x[0]);
      continue;
    }
    if (t > x[m - 1]) {
      out[j] = y[m - 1] + slope_hi * (t - x[m - 1]);
      continue;
    }
    Eigen::Index i = std::upper_bound(x.data(), x.data() + m, t) - x.data();
    i = std::clamp<Eigen::Index>(i - 1, 0, m - 2);
    const double h = x[i + 1] - x[i];
    const double s = x[i + 1] - t, u = t - x[i];
    out[j] = (m2[i] * s * s * s + m2[i + 1] * u * u * u) / (6.0 * h) +
             (y[i] - m2[i] * h * h / 6.0) * (s / h) +
             (y[i + 1] - m2[i + 1] * h * h / 6.0) * (u / h);
  }
  return out;
}

struct LatticeLess {
  bool operator()(const Eigen::VectorXi& a, const Eigen::VectorXi& b) const {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                        b.data() + b.size());
  }
};

std::vector<int> free_dimensions(const AugmentedModel& model, const FitOptions& options) {
  std::vector<int> dims;
  const int g = model.precision_groups;
  for (int i = 0; i < g; ++i)
    if (!options.fixed_obs_precision) dims.push_back(i);
  if (!options.fixed_sys_precision) dims.push_back(g);
  if (model.student_t() && !options.fixed_dof) dims.push_back(g + 1);
  return dims;
}

Eigen::VectorXd initial_internal(const AugmentedModel& model, const FitOptions& options) {
  double sum = 0.0, sq = 0.0;
  int count = 0;
  for (const auto& row : model.layout) {
    if (!row.active || row.role != RowRole::observation) continue;
    sum += row.value;
    sq += row.value * row.value;
    ++count;
  }
  double var = count > 1 ? (sq - sum * sum / count) / (count - 1) : 1.0;
  if (!(var > 1e-8)) var = 1.0;
  const double start_prec = std::log(2.0 / var);

  const int g = model.precision_groups;
  Eigen::VectorXd z(model.hyper_dim());
  for (int i = 0; i < g; ++i)
    z[i] = options.fixed_obs_precision ? std::log(*options.fixed_obs_precision)
                                       : start_prec;
  z[g] = options.fixed_sys_precision ? std::log(*options.fixed_sys_precision)
                                     : start_prec;
  if (model.student_t())
    z[g + 1] = options.fixed_dof ? std::log(*options.fixed_dof - 2.0)
                                 : std::log(18.0);
  return z;
}

// Objective over the free internal coordinates. Every evaluation warm-starts
// the Newton solve from a caller-controlled anchor state; probes never move
// the anchor, so the objective stays single-valued around the current point
// even when heavy tails make the conditional multimodal.
class ModeObjective {
 public:
  ModeObjective(const AugmentedModel& model, const FitOptions& options,
                Eigen::VectorXd z_base, std::vector<int> free_dims)
      : model_(model), options_(options), z_base_(std::move(z_base)),
        free_dims_(std::move(free_dims)) {}

  Eigen::VectorXd full_z(const Eigen::VectorXd& zfree) const {
    Eigen::VectorXd z = z_base_;
    for (std::size_t i = 0; i < free_dims_.size(); ++i)
      z[free_dims_[i]] =
          std::clamp(zfree[static_cast<Eigen::Index>(i)], -kZBound, kZBound);
    return z;
  }

  // Evaluate without moving the anchor (probes, trials, hessian stencils).
  double eval(const Eigen::VectorXd& zfree, GaussianApprox* out = nullptr) {
    const Eigen::VectorXd z = full_z(zfree);
    const HyperValues h = hyper_from_internal(model_, z);
    GaussianApprox approx;
    const double lp =
        log_post_theta(model_, h, options_.newton,
                       anchor_.size() == model_.state_dim ? &anchor_ : nullptr,
                       &approx);
    newton_iterations_ += approx.newton_iterations;
    if (out) *out = std::move(approx);
    return lp;
  }

  // Evaluate and re-anchor at the solved conditional mode (accepted moves).
  double advance(const Eigen::VectorXd& zfree, GaussianApprox* out = nullptr) {
    GaussianApprox approx;
    const double lp = eval(zfree, &approx);
    anchor_ = approx.mode;
    if (out) *out = std::move(approx);
    return lp;
  }

  Eigen::VectorXd fd_gradient(const Eigen::VectorXd& zfree) {
    const double h = options_.fd_step;
    Eigen::VectorXd g(zfree.size());
    for (Eigen::Index i = 0; i < zfree.size(); ++i) {
      Eigen::VectorXd zp = zfree, zm = zfree;
      zp[i] += h;
      zm[i] -= h;
      g[i] = (eval(zp) - eval(zm)) / (2.0 * h);
    }
    return g;
  }

  void set_anchor(Eigen::VectorXd state) { anchor_ = std::move(state); }
  long long newton_iterations() const { return newton_iterations_; }

  // Bound on the mode-search coordinates: past exp(+-34) the dof offset
  // nu - 2 underflows double resolution and precisions overflow any
  // realistic scale.
  static constexpr double kZBound = 34.0;

 private:
  const AugmentedModel& model_;
  const FitOptions& options_;
  Eigen::VectorXd z_base_;
  std::vector<int> free_dims_;
  Eigen::VectorXd anchor_;
  long long newton_iterations_ = 0;
};

// BFGS ascent with finite-difference gradients and Armijo backtracking.
Eigen::VectorXd maximize_mode(ModeObjective& obj, Eigen::VectorXd z,
                              const FitOptions& options, int* iterations_out) {
  const Eigen::Index d = z.size();
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(d, d);
  double f = obj.advance(z);
  Eigen::VectorXd g = obj.fd_gradient(z);
  std::ostringstream trace;
  int iter = 0;
  for (; iter < options.max_mode_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() < options.mode_grad_tol) break;
    Eigen::VectorXd dir = hinv * g;
    if (dir.dot(g) <= 0.0) {
      hinv.setIdentity();
      dir = g;
    }
    const double slope = dir.dot(g);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd z_new;
    double f_new = 0.0;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = z + step * dir;
      f_new = obj.eval(z_new);
      if (f_new >= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    trace << "  iter " << iter << ": f=" << f << " |g|=" << g.lpNorm<Eigen::Infinity>()
          << " step=" << step << "\n";
    if (!accepted) {
      if (g.lpNorm<Eigen::Infinity>() < 1e3 * options.mode_grad_tol) break;
      throw ConvergenceError("explore_grid: mode search stalled\n" + trace.str(),
                             obj.full_z(z), iter);
    }
    obj.advance(z_new);
    const Eigen::VectorXd g_new = obj.fd_gradient(z_new);
    const Eigen::VectorXd s = z_new - z;
    const Eigen::VectorXd yv = g - g_new;  // gradient change of -f
    const double sy = s.dot(yv);
    if (sy > 1e-12) {
      const Eigen::MatrixXd left =
          Eigen::MatrixXd::Identity(d, d) - s * yv.transpose() / sy;
      hinv = left * hinv * left.transpose() + s * s.transpose() / sy;
    }
    z = z_new;
    f = f_new;
    g = g_new;
  }
  if (iter >= options.max_mode_iterations)
    throw ConvergenceError("explore_grid: mode search hit the iteration cap\n" +
                               trace.str(),
                           obj.full_z(z), iter);
  if (iterations_out) *iterations_out = iter;
  return z;
}

struct GridRecord {
  Eigen::VectorXd internal;
  double log_post = 0.0;
  GaussianApprox approx;
};

}  // namespace

double log_post_theta(const AugmentedModel& model, const HyperValues& h,
                      const NewtonOptions& newton, const Eigen::VectorXd* warm_start,
                      GaussianApprox* approx_out) {
  GaussianApprox approx = find_mode(model, h, newton, warm_start);
  const double ljoint = log_joint_at(model, h, approx.mode);
  const double lgauss =
      0.5 * approx.log_det_precision - 0.5 * model.state_dim * kLog2Pi;
  if (approx_out) *approx_out = std::move(approx);
  return ljoint - lgauss;
}

double log_post_theta(const AugmentedModel& model, const HyperPoint& h,
                      const NewtonOptions& newton) {
  return log_post_theta(model, to_hyper_values(model, h), newton);
}

std::vector<ThetaGridPoint> explore_grid(const AugmentedModel& model,
                                         const FitOptions& options,
                                         FitDiagnostics* diagnostics) {
  const std::vector<int> free_dims = free_dimensions(model, options);
  const int nf = static_cast<int>(free_dims.size());
  const Eigen::VectorXd z_init = initial_internal(model, options);
  ModeObjective obj(model, options, z_init, free_dims);

  auto warn = [&](const std::string& msg) {
    if (diagnostics) diagnostics->warnings.push_back(msg);
  };

  std::map<Eigen::VectorXi, GridRecord, LatticeLess> records;

  Eigen::VectorXd z_mode_free(nf);
  for (int i = 0; i < nf; ++i) z_mode_free[i] = z_init[free_dims[i]];
  if (nf > 0) {
    int mode_iters = 0;
    z_mode_free = maximize_mode(obj, z_mode_free, options, &mode_iters);
    if (diagnostics) diagnostics->mode_search_iterations = mode_iters;
  }

  GridRecord mode_record;
  mode_record.internal = obj.full_z(z_mode_free);
  mode_record.log_post = obj.advance(z_mode_free, &mode_record.approx);
  const double lp_mode = mode_record.log_post;
  const Eigen::VectorXd mode_state = mode_record.approx.mode;
  records.emplace(Eigen::VectorXi::Zero(nf), std::move(mode_record));

  Eigen::MatrixXd axes(nf, nf);
  if (nf > 0) {
    // Standardize the axes with the finite-difference curvature at the mode.
    const double h = options.fd_step;
    Eigen::MatrixXd hess(nf, nf);
    for (int i = 0; i < nf; ++i) {
      Eigen::VectorXd zp = z_mode_free, zm = z_mode_free;
      zp[i] += h;
      zm[i] -= h;
      hess(i, i) = (obj.eval(zp) - 2.0 * lp_mode + obj.eval(zm)) / (h * h);
    }
    for (int i = 0; i < nf; ++i)
      for (int j = i + 1; j < nf; ++j) {
        Eigen::VectorXd zpp = z_mode_free, zpm = z_mode_free, zmp = z_mode_free,
                        zmm = z_mode_free;
        zpp[i] += h; zpp[j] += h;
        zpm[i] += h; zpm[j] -= h;
        zmp[i] -= h; zmp[j] += h;
        zmm[i] -= h; zmm[j] -= h;
        hess(i, j) = hess(j, i) =
            (obj.eval(zpp) - obj.eval(zpm) - obj.eval(zmp) + obj.eval(zmm)) /
            (4.0 * h * h);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(-hess);
    Eigen::VectorXd lambda = eigen.eigenvalues();
    const double floor = 1e-8 * std::max(1.0, lambda.maxCoeff());
    for (int i = 0; i < nf; ++i)
      if (!(lambda[i] > floor)) {
        lambda[i] = floor;
        warn("explore_grid: flat curvature direction clamped");
      }
    axes = eigen.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal();
  }

  // Walk each standardized axis until the density drops, then fill the box.
  Eigen::VectorXi steps_neg = Eigen::VectorXi::Zero(nf);
  Eigen::VectorXi steps_pos = Eigen::VectorXi::Zero(nf);
  const double threshold = lp_mode - options.grid_log_drop;
  for (int i = 0; i < nf; ++i) {
    for (const int dir : {+1, -1}) {
      obj.set_anchor(mode_state);
      for (int k = 1; k <= options.max_axis_steps; ++k) {
        Eigen::VectorXi lattice = Eigen::VectorXi::Zero(nf);
        lattice[i] = dir * k;
        GridRecord rec;
        const Eigen::VectorXd zfree =
            z_mode_free + axes.col(i) * (options.grid_step * dir * k);
        rec.internal = obj.full_z(zfree);
        try {
          rec.log_post = obj.advance(zfree, &rec.approx);
        } catch (const ConvergenceError&) {
          warn("explore_grid: dropped a non-converged axis point");
          break;
        }
        if (rec.log_post < threshold) break;
        (dir > 0 ? steps_pos[i] : steps_neg[i]) = k;
        records.emplace(std::move(lattice), std::move(rec));
        if (k == options.max_axis_steps)
          warn("explore_grid: axis walk hit the step cap");
      }
    }
    if (steps_pos[i] + steps_neg[i] + 1 < 3)
      warn("explore_grid: fewer than 3 grid points along an axis");
  }

  if (nf > 1) {
    // Remaining lattice tuples inside the box (at least two nonzero coords).
    std::vector<Eigen::VectorXi> candidates;
    Eigen::VectorXi tuple = -steps_neg;
    while (true) {
      int nonzero = 0;
      for (int i = 0; i < nf; ++i) nonzero += tuple[i] != 0;
      if (nonzero >= 2) candidates.push_back(tuple);
      int d = nf - 1;
      for (; d >= 0; --d) {
        if (tuple[d] < steps_pos[d]) {
          ++tuple[d];
          for (int j = d + 1; j < nf; ++j) tuple[j] = -steps_neg[j];
          break;
        }
      }
      if (d < 0) break;
    }
    std::vector<std::optional<GridRecord>> results(candidates.size());
    std::vector<char> failed(candidates.size(), 0);
    parallel_for(static_cast<int>(candidates.size()), options.threads, [&](int c) {
      const Eigen::VectorXi& lat = candidates[static_cast<std::size_t>(c)];
      Eigen::VectorXd zfree = z_mode_free;
      for (int i = 0; i < nf; ++i)
        zfree += axes.col(i) * (options.grid_step * lat[i]);
      ModeObjective local(model, options, z_init, free_dims);
      local.set_anchor(mode_state);
      GridRecord rec;
      rec.internal = local.full_z(zfree);
      try {
        rec.log_post = local.eval(zfree, &rec.approx);
      } catch (const ConvergenceError&) {
        failed[static_cast<std::size_t>(c)] = 1;
        return;
      }
      if (rec.log_post >= threshold)
        results[static_cast<std::size_t>(c)] = std::move(rec);
    });
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (failed[c]) warn("explore_grid: dropped a non-converged box point");
      if (results[c]) records.emplace(candidates[c], std::move(*results[c]));
    }
  }

  std::vector<ThetaGridPoint> grid;
  grid.reserve(records.size());
  double lp_max = -std::numeric_limits<double>::infinity();
  for (const auto& [lattice, rec] : records) lp_max = std::max(lp_max, rec.log_post);
  double total = 0.0;
  for (auto& [lattice, rec] : records) {
    ThetaGridPoint point;
    point.lattice = lattice;
    point.internal = rec.internal;
    point.h = hyper_from_internal(model, rec.internal);
    point.log_post_unnorm = rec.log_post;
    point.weight = std::exp(rec.log_post - lp_max);
    point.approx = std::move(rec.approx);
    total += point.weight;
    grid.push_back(std::move(point));
  }
  for (auto& point : grid) point.weight /= total;
  if (diagnostics) {
    diagnostics->grid_size = static_cast<int>(grid.size());
    diagnostics->newton_iterations += obj.newton_iterations();
  }
  return grid;
}

const ThetaGridPoint& grid_mode(const std::vector<ThetaGridPoint>& grid) {
  for (const auto& point : grid)
    if (point.lattice.isZero()) return point;
  throw std::logic_error("grid_mode: no lattice origin in grid");
}

namespace {

double mixture_cdf(const std::vector<ThetaGridPoint>& grid, int t, double x) {
  double c = 0.0;
  for (const auto& point : grid)
    c += point.weight * normal_cdf((x - point.approx.mode[t]) /
                                   std::sqrt(point.approx.marginal_variances[t]));
  return c;
}

double mixture_quantile(const std::vector<ThetaGridPoint>& grid, int t, double prob,
                        double lo, double hi) {
  for (int i = 0; i < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    (mixture_cdf(grid, t, mid) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::vector<PosteriorMarginal> state_marginals(const std::vector<ThetaGridPoint>& grid,
                                               int points) {
  if (grid.empty()) throw std::invalid_argument("state_marginals: empty grid");
  if (points < 2) throw std::invalid_argument("state_marginals: need >= 2 points");
  const int n = static_cast<int>(grid.front().approx.mode.size());
  std::vector<PosteriorMarginal> out(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    double mean = 0.0, second = 0.0;
    for (const auto& point : grid) {
      const double m = point.approx.mode[t];
      mean += point.weight * m;
      second += point.weight * (point.approx.marginal_variances[t] + m * m);
    }
    const double var = std::max(second - mean * mean, 1e-300);
    const double sd = std::sqrt(var);

    PosteriorMarginal marg;
    marg.mean = mean;
    marg.sd = sd;
    marg.support.resize(points);
    marg.density.resize(points);
    const double lo = mean - 6.0 * sd, hi = mean + 6.0 * sd;
    for (int j = 0; j < points; ++j)
      marg.support[j] = lo + (hi - lo) * j / (points - 1);
    for (int j = 0; j < points; ++j) {
      double f = 0.0;
      for (const auto& point : grid) {
        const double v = point.approx.marginal_variances[t];
        const double r = marg.support[j] - point.approx.mode[t];
        f += point.weight * std::exp(-0.5 * r * r / v) / std::sqrt(2.0 * std::numbers::pi * v);
      }
      marg.density[j] = f;
    }
    const double integral = trapezoid(marg.support, marg.density);
    if (integral > 0.0) marg.density /= integral;

    const double qlo = mean - 10.0 * sd, qhi = mean + 10.0 * sd;
    marg.q025 = mixture_quantile(grid, t, 0.025, qlo, qhi);
    marg.median = mixture_quantile(grid, t, 0.5, qlo, qhi);
    marg.q975 = mixture_quantile(grid, t, 0.975, qlo, qhi);
    out[static_cast<std::size_t>(t)] = std::move(marg);
  }
  return out;
}

void summarize_density(PosteriorMarginal& marginal) {
  const Eigen::VectorXd& x = marginal.support;
  Eigen::VectorXd& f = marginal.density;
  const double total = trapezoid(x, f);
  if (!(total > 0.0)) throw std::runtime_error("summarize_density: zero mass");
  f /= total;
  Eigen::VectorXd cum(x.size());
  cum[0] = 0.0;
  double mean = 0.0, second = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double dx = x[i + 1] - x[i];
    cum[i + 1] = cum[i] + 0.5 * (f[i] + f[i + 1]) * dx;
    mean += 0.5 * (x[i] * f[i] + x[i + 1] * f[i + 1]) * dx;
    second += 0.5 * (x[i] * x[i] * f[i] + x[i + 1] * x[i + 1] * f[i + 1]) * dx;
  }
  marginal.mean = mean;
  marginal.sd = std::sqrt(std::max(0.0, second - mean * mean));
  auto quantile = [&](double prob) {
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      if (cum[i + 1] >= prob) {
        const double seg = cum[i + 1] - cum[i];
        const double w = seg > 0.0 ? (prob - cum[i]) / seg : 0.0;
        return x[i] + w * (x[i + 1] - x[i]);
      }
    }
    return x[x.size() - 1];
  };
  marginal.q025 = quantile(0.025);
  marginal.median = quantile(0.5);
  marginal.q975 = quantile(0.975);
}

std::vector<std::string> hyper_names(const AugmentedModel& model) {
  std::vector<std::string> names;
  const int g = model.precision_groups;
  for (int i = 0; i < g; ++i)
    names.push_back(g == 1 ? "obs_precision"
                           : "obs_precision[" + std::to_string(i) + "]");
  names.push_back("sys_precision");
  if (model.student_t()) names.push_back("dof");
  return names;
}

std::vector<PosteriorMarginal> hyper_marginals(const AugmentedModel& model,
                                               const std::vector<ThetaGridPoint>& grid) {
  if (grid.empty()) throw std::invalid_argument("hyper_marginals: empty grid");
  const int dim = model.hyper_dim();
  const int g = model.precision_groups;
  const int nf = static_cast<int>(grid.front().lattice.size());

  auto to_natural = [&](int axis, double z) {
    return axis <= g ? std::exp(z) : 2.0 + std::exp(z);
  };
  auto natural_jacobian = [&](int axis, double nat) {
    return axis <= g ? nat : nat - 2.0;  // d(natural)/dz
  };

  std::vector<PosteriorMarginal> out(static_cast<std::size_t>(dim));
  for (int s = 0; s < dim; ++s) {
    double zmin = std::numeric_limits<double>::infinity();
    double zmax = -zmin;
    for (const auto& point : grid) {
      zmin = std::min(zmin, point.internal[s]);
      zmax = std::max(zmax, point.internal[s]);
    }
    PosteriorMarginal marg;
    if (zmax - zmin < 1e-12) {  // the grid never moves this coordinate
      const double value = to_natural(s, grid.front().internal[s]);
      marg.support = Eigen::VectorXd::Constant(1, value);
      marg.density = Eigen::VectorXd::Constant(1, 1.0);
      marg.mean = marg.median = marg.q025 = marg.q975 = value;
      marg.sd = 0.0;
      marg.degenerate = true;
      out[static_cast<std::size_t>(s)] = std::move(marg);
      continue;
    }

    // Collapse grid mass onto this internal coordinate.
    std::vector<double> knot_z, knot_mass;
    if (nf == 1) {
      // One explored axis: the projected points are the lattice itself.
      std::vector<std::pair<double, double>> pts;
      for (const auto& point : grid) pts.emplace_back(point.internal[s], point.weight);
      std::sort(pts.begin(), pts.end());
      for (const auto& [z, w] : pts) {
        knot_z.push_back(z);
        knot_mass.push_back(w);
      }
    } else {
      int bins = 0;
      for (int c = 0; c < nf; ++c) {
        std::vector<int> vals;
        for (const auto& point : grid) vals.push_back(point.lattice[c]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        bins = std::max(bins, static_cast<int>(vals.size()));
      }
      bins = std::max(bins, 5);
      knot_z.resize(static_cast<std::size_t>(bins));
      knot_mass.assign(static_cast<std::size_t>(bins), 0.0);
      const double span = zmax - zmin;
      for (int b = 0; b < bins; ++b)
        knot_z[static_cast<std::size_t>(b)] = zmin + span * b / (bins - 1);
      for (const auto& point : grid) {  // linear mass assignment
        const double pos = (point.internal[s] - zmin) / span * (bins - 1);
        const int lo = std::clamp(static_cast<int>(std::floor(pos)), 0, bins - 2);
        const double t = pos - lo;
        knot_mass[static_cast<std::size_t>(lo)] += point.weight * (1.0 - t);
        knot_mass[static_cast<std::size_t>(lo) + 1] += point.weight * t;
      }
    }

    const double spacing = knot_z.size() > 1 ? knot_z[1] - knot_z[0] : 1.0;
    Eigen::VectorXd kz(knot_z.size()), klog(knot_z.size());
    Eigen::Index kept = 0;
    for (std::size_t i = 0; i < knot_z.size(); ++i) {
      if (knot_mass[i] <= 0.0) continue;
      kz[kept] = knot_z[i];
      klog[kept] = std::log(knot_mass[i] / spacing);
      ++kept;
    }
    kz.conservativeResize(kept);
    klog.conservativeResize(kept);
    if (kept < 2) {  // all mass collapsed onto one knot
      const double value = to_natural(s, kz[0]);
      marg.support = Eigen::VectorXd::Constant(1, value);
      marg.density = Eigen::VectorXd::Constant(1, 1.0);
      marg.mean = marg.median = marg.q025 = marg.q975 = value;
      marg.sd = 0.0;
      marg.degenerate = true;
      out[static_cast<std::size_t>(s)] = std::move(marg);
      continue;
    }

    // Extend past the outermost knots with the quadratic through the three
    // end knots: the posterior is near-Gaussian in internal coordinates, so
    // its log tail continues quadratically rather than being cut at the
    // explored box. Falls back to linear decay, or no extension, when the
    // end shape does not decay.
    auto tail = [&](bool right) {
      const Eigen::Index e = right ? kept - 1 : 0;
      const Eigen::Index m = right ? kept - 2 : 1;
      const double slope_lin = (klog[e] - klog[m]) / (kz[e] - kz[m]);
      double c2 = 0.0;
      if (kept >= 3) {
        const Eigen::Index f = right ? kept - 3 : 2;
        const double h1 = kz[m] - kz[f], h2 = kz[e] - kz[m];
        const double s1 = (klog[m] - klog[f]) / h1;
        const double s2 = (klog[e] - klog[m]) / h2;
        c2 = (s2 - s1) / (0.5 * (h1 + h2));
      }
      const double sign = right ? 1.0 : -1.0;
      // outward slope of the end-knot quadratic
      const double slope = slope_lin * sign + 0.5 * c2 * std::abs(kz[e] - kz[m]);
      return [=](double z) {
        const double d = (z - kz[e]) * sign;  // distance outward, >= 0
        if (c2 < 0.0 && slope < 0.0) return klog[e] + slope * d + 0.5 * c2 * d * d;
        if (slope < 0.0) return klog[e] + slope * d;
        return klog[e];  // non-decaying end, hold flat
      };
    };
    const auto tail_lo = tail(false);
    const auto tail_hi = tail(true);
    const double step_out = (kz[kept - 1] - kz[0]) / (kept - 1);
    const double z_lo = kz[0] - 3.0 * step_out;
    const double z_hi = kz[kept - 1] + 3.0 * step_out;
    const int fine = 201;
    Eigen::VectorXd zq(fine);
    for (int j = 0; j < fine; ++j)
      zq[j] = z_lo + (z_hi - z_lo) * j / (fine - 1);
    Eigen::VectorXd logf = spline_eval(kz, klog, zq);
    for (int j = 0; j < fine; ++j) {
      if (zq[j] < kz[0]) logf[j] = tail_lo(zq[j]);
      if (zq[j] > kz[kept - 1]) logf[j] = tail_hi(zq[j]);
    }

    marg.support.resize(fine);
    marg.density.resize(fine);
    for (int j = 0; j < fine; ++j) {
      const double nat = to_natural(s, zq[j]);
      marg.support[j] = nat;
      marg.density[j] = std::exp(logf[j]) / natural_jacobian(s, nat);
    }
    summarize_density(marg);
    out[static_cast<std::size_t>(s)] = std::move(marg);
  }
  return out;
}

FitResult fit_model(const AugmentedModel& model, const FitOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  FitResult result;
  for (std::size_t i = 0; i < model.layout.size(); ++i)
    if (model.layout[i].role == RowRole::observation && !model.layout[i].active)
      result.diagnostics.masked_indices.push_back(model.layout[i].state_hi);
  result.grid = explore_grid(model, options, &result.diagnostics);
  result.state_marginals = state_marginals(result.grid, options.marginal_points);
  result.hyper_marginals = hyper_marginals(model, result.grid);
  result.hyper_names = hyper_names(model);
  for (const auto& point : result.grid)
    result.diagnostics.newton_iterations += point.approx.newton_iterations;
  result.diagnostics.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

FitResult fit(const DlmSpec& spec, const FitOptions& options) {
  return fit_model(build_augmented(spec, options.epsilon), options);
}

}  // namespace rdlm
