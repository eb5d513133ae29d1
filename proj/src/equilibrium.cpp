#include "penning/equilibrium.hpp"

#include "penning/constants.hpp"
#include "penning/rng.hpp"

#include <boost/math/special_functions/ellint_1.hpp>
#include <boost/math/special_functions/ellint_2.hpp>
#include <boost/math/special_functions/ellint_rd.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <random>

namespace penning {

namespace {

void check_elliptic_domain(double theta, double k) {
  if (!(theta >= 0.0 && theta <= 0.5 * constants::pi)) throw Error("elliptic amplitude must lie in [0, pi/2]");
  if (!(k >= 0.0 && k <= 1.0)) throw Error("elliptic modulus must lie in [0, 1]");
}

}  // namespace

double elliptic_F(double theta, double k) {
  check_elliptic_domain(theta, k);
  if (!(k * std::sin(theta) < 1.0)) throw Error("elliptic_F diverges for k sin(theta) = 1");
  return boost::math::ellint_1(k, theta);
}

double elliptic_E(double theta, double k) {
  check_elliptic_domain(theta, k);
  if (k == 1.0) return std::sin(theta);
  return boost::math::ellint_2(k, theta);
}

void EllipsoidShape::sort() {
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return axes[a] > axes[b]; });
}

Vec3 shape_factors(double a1, double a2, double a3) {
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0)) throw Error("semi-axes must be positive");
  const double a[3] = {a1, a2, a3};
  const double vol = a1 * a2 * a3 / 3.0;
  Vec3 f;
  for (int i = 0; i < 3; ++i) {
    const double x = a[(i + 1) % 3] * a[(i + 1) % 3];
    const double y = a[(i + 2) % 3] * a[(i + 2) % 3];
    f[i] = vol * boost::math::ellint_rd(x, y, a[i] * a[i]);
  }
  return f;
}

Vec3 shape_factors_elliptic(double a1, double a2, double a3) {
  if (!(a1 > a2 && a2 > a3 && a3 > 0.0)) throw Error("requires a1 > a2 > a3 > 0");
  const double theta = std::acos(a3 / a1);
  const double k2 = (a1 * a1 - a2 * a2) / (a1 * a1 - a3 * a3);
  const double k = std::sqrt(k2);
  const double F = elliptic_F(theta, k), E = elliptic_E(theta, k);
  const double s = std::sin(theta), s3 = s * s * s;
  const double r = a2 * a3 / (a1 * a1);
  return {r * (F - E) / (k2 * s3),
          r * (E - (1.0 - k2) * F - (a3 / a2) * k2 * s) / (k2 * (1.0 - k2) * s3),
          r * ((a2 / a3) * s - E) / ((1.0 - k2) * s3)};
}

namespace {

struct SortedCoefficients {
  Vec3 c;                     // ascending
  std::array<int, 3> axis{};  // coordinate index of each
};

SortedCoefficients sorted_coefficients(const TrapConfig& cfg) {
  const Vec3 c = confinement_coefficients(cfg);
  if (!(c.minCoeff() > 0.0)) throw Error("trap does not confine a crystal (non-positive coefficient)");
  SortedCoefficients s;
  std::iota(s.axis.begin(), s.axis.end(), 0);
  std::stable_sort(s.axis.begin(), s.axis.end(), [&](int a, int b) { return c[a] < c[b]; });
  for (int i = 0; i < 3; ++i) s.c[i] = c[s.axis[i]];
  return s;
}

// scalar root of f on (lo, hi) where f changes sign
template <class Fn>
double bracketed_root(Fn f, double lo, double hi) {
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

std::array<double, 2> ellipsoid_ratios(const TrapConfig& cfg) {
  const SortedCoefficients sc = sorted_coefficients(cfg);
  const Vec3 target = sc.c / sc.c.sum();
  const double spread = (sc.c[2] - sc.c[0]) / sc.c.sum();
  if (spread < 1e-14) return {1.0, 1.0};

  const double tiny = 1e-13;
  if (sc.c[1] - sc.c[0] <= tiny * sc.c.sum()) {
    // oblate spheroid a1 = a2
    const double r3 = bracketed_root(
        [&](double r) { return shape_factors(1.0, 1.0, r)[2] - target[2]; }, 1e-8, 1.0);
    return {1.0, r3};
  }
  if (sc.c[2] - sc.c[1] <= tiny * sc.c.sum()) {
    // prolate spheroid a2 = a3
    const double r = bracketed_root(
        [&](double r) { return shape_factors(1.0, r, r)[0] - target[0]; }, 1e-8, 1.0);
    return {r, r};
  }

  // damped Newton on the log-ratios for the first two factors (the third follows)
  Eigen::Vector2d u(0.0, 0.0);
  auto residual = [&](const Eigen::Vector2d& v) {
    const Vec3 f = shape_factors(1.0, std::exp(v[0]), std::exp(v[1]));
    return Eigen::Vector2d(f[0] - target[0], f[1] - target[1]);
  };
  // start from the spheroid with the mean planar coefficient
  u[1] = std::log(bracketed_root(
      [&](double r) { return shape_factors(1.0, 1.0, r)[2] - target[2]; }, 1e-8, 1.0));
  Eigen::Vector2d res = residual(u);
  for (int it = 0; it < 200 && res.norm() > 1e-15; ++it) {
    Eigen::Matrix2d J;
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d up = u, dn = u;
      const double h = 1e-6;
      up[j] += h;
      dn[j] -= h;
      J.col(j) = (residual(up) - residual(dn)) / (2 * h);
    }
    const Eigen::Vector2d step = J.colPivHouseholderQr().solve(-res);
    double lambda = 1.0;
    for (int k = 0; k < 40; ++k) {
      Eigen::Vector2d trial = u + lambda * step;
      trial = trial.cwiseMin(0.0);
      trial[1] = std::min(trial[1], trial[0]);
      const Eigen::Vector2d r = residual(trial);
      if (r.norm() < res.norm() || k == 39) {
        u = trial;
        res = r;
        break;
      }
      lambda *= 0.5;
    }
  }
  if (!(res.norm() < 1e-12)) throw Error("ellipsoid shape equations did not converge");
  return {std::exp(u[0]), std::exp(u[1])};
}

EllipsoidShape predicted_shape(const TrapConfig& cfg) {
  const SortedCoefficients sc = sorted_coefficients(cfg);
  const auto r = ellipsoid_ratios(cfg);
  EllipsoidShape s;
  s.axes[sc.axis[0]] = 1.0;
  s.axes[sc.axis[1]] = r[0];
  s.axes[sc.axis[2]] = r[1];
  s.order = sc.axis;
  return s;
}

double cold_fluid_density(const TrapConfig& cfg) {
  const double wr = cfg.rotation_frequency, wc = cfg.cyclotron_frequency();
  const double wp2 = 2.0 * wr * (wc - wr);
  const double q = cfg.species.charge;
  return constants::vacuum_permittivity * cfg.species.mass * wp2 / (q * q);
}

namespace {

Positions centred(const Positions& x) {
  Positions c = x;
  c.colwise() -= x.rowwise().mean();
  return c;
}

void check_not_flat(const Positions& c) {
  const Eigen::Matrix3d cov = c * c.transpose() / double(c.cols());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (!(es.eigenvalues()[0] > 1e-12 * es.eigenvalues()[2])) throw Error("degenerate (flat) configuration");
}

}  // namespace

EllipsoidShape fit_ellipsoid_scale(const Positions& x, const EllipsoidShape& shape) {
  if (x.cols() < 4) throw Error("ellipsoid fit needs at least 4 points");
  const Positions c = centred(x);
  check_not_flat(c);
  double outer = 0.0;
  for (Eigen::Index i = 0; i < c.cols(); ++i)
    outer = std::max(outer, c.col(i).cwiseQuotient(shape.axes).norm());
  EllipsoidShape fitted = shape;
  fitted.axes = shape.axes * outer;
  fitted.sort();
  return fitted;
}

EllipsoidShape fit_ellipsoid_moments(const Positions& x) {
  if (x.cols() < 4) throw Error("ellipsoid fit needs at least 4 points");
  const Positions c = centred(x);
  check_not_flat(c);
  EllipsoidShape s;
  s.axes = (5.0 * c.array().square().rowwise().mean()).sqrt();
  s.sort();
  return s;
}

double rotating_energy(const Positions& x, const TrapConfig& cfg, const CoulombSettings& coulomb,
                       Eigen::Matrix3Xd* gradient) {
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(x.cols());
  Eigen::Matrix3Xd field;
  if (x.cols() > 1) {
    FieldResult f = coulomb_solve(ChargeSystem::identical(x, cfg.species.charge), coulomb);
    phi = std::move(f.phi);
    field = std::move(f.E);
  }
  if (gradient) {
    *gradient = rotating_trap_gradient(x, cfg);
    if (x.cols() > 1) *gradient -= cfg.species.charge * field;
  }
  return rotating_potential_energy(x, cfg, phi);
}

namespace {

// natural units: length l with m omega_z^2 l^3 = k q^2, energy m omega_z^2 l^2
struct Units {
  double length, energy, force;
  explicit Units(const TrapConfig& cfg) {
    const double m = cfg.species.mass, q = cfg.species.charge, wz = cfg.axial_frequency();
    length = std::cbrt(constants::coulomb * q * q / (m * wz * wz));
    energy = m * wz * wz * length * length;
    force = energy / length;
  }
};

}  // namespace

MinimizeReport minimize_local(const Positions& seed, const TrapConfig& cfg,
                              const MinimizeOptions& options) {
  cfg.validate();
  if (!(confinement_coefficients(cfg).minCoeff() > 0.0))
    throw Error("trap does not confine a crystal (non-positive coefficient)");
  if (!seed.allFinite()) throw Error("seed positions must be finite");
  const Eigen::Index n = seed.cols();
  if (n < 1) throw Error("need at least one ion");

  const Units units(cfg);
  const double tol = options.tolerance > 0.0 ? options.tolerance / units.force : 1e-7;
  const Eigen::Index dim = 3 * n;

  auto evaluate = [&](const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    const Positions x = Eigen::Map<const Positions>(y.data(), 3, n) * units.length;
    Eigen::Matrix3Xd grad;
    const double e = rotating_energy(x, cfg, options.coulomb, &grad);
    g = Eigen::Map<const Eigen::VectorXd>(grad.data(), dim) / units.force;
    return e / units.energy;
  };

  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(seed.data(), dim) / units.length;
  Eigen::VectorXd g(dim), g_new(dim);
  double f = evaluate(y, g);

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  MinimizeReport report;
  int it = 0;
  int stalls = 0;
  for (; it < options.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      report.converged = true;
      break;
    }
    // two-loop recursion
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(S.size());
    for (int k = int(S.size()) - 1; k >= 0; --k) {
      alpha[k] = rho[k] * S[k].dot(d);
      d -= alpha[k] * Y[k];
    }
    if (!S.empty()) d *= S.back().dot(Y.back()) / Y.back().squaredNorm();
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * Y[k].dot(d);
      d += (alpha[k] - beta) * S[k];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -g;
      slope = -g.squaredNorm();
    }
    // never move an ion by more than a fraction of the natural spacing in one step
    double step = std::min(1.0, 0.2 / d.lpNorm<Eigen::Infinity>());
    const double noise = 1e-13 * std::max(1.0, std::abs(f));
    Eigen::VectorXd y_new;
    double f_new = f;
    bool accepted = false;
    for (int k = 0; k < 50; ++k) {
      y_new = y + step * d;
      f_new = evaluate(y_new, g_new);
      if (f_new <= f + 1e-4 * step * slope + noise) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (++stalls > 3) break;
      S.clear();
      Y.clear();
      rho.clear();
      continue;
    }
    const Eigen::VectorXd s = y_new - y;
    const Eigen::VectorXd yy = g_new - g;
    const double sy = s.dot(yy);
    if (sy > 1e-12 * s.norm() * yy.norm()) {
      S.push_back(s);
      Y.push_back(yy);
      rho.push_back(1.0 / sy);
      if (int(S.size()) > options.history) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    y = y_new;
    f = f_new;
    g = g_new;
  }
  if (!report.converged && g.lpNorm<Eigen::Infinity>() <= tol) report.converged = true;

  report.x = Eigen::Map<const Positions>(y.data(), 3, n) * units.length;
  report.energy = f * units.energy;
  report.gradient_norm = g.lpNorm<Eigen::Infinity>() * units.force;
  report.iterations = it;
  return report;
}

Positions ellipsoid_seed(int n, const TrapConfig& cfg, std::uint64_t seed) {
  if (n < 1) throw Error("need at least one ion");
  const EllipsoidShape unit = predicted_shape(cfg);
  const double volume = n / cold_fluid_density(cfg);
  const double scale = std::cbrt(volume / (4.0 / 3.0 * constants::pi * unit.axes.prod()));
  const Vec3 axes = unit.axes * scale;
  SplitMix64 rng = stream(seed, 0x5eed);
  Positions x(3, n);
  for (int i = 0; i < n;) {
    const Vec3 p(2 * rng.uniform() - 1, 2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
    if (p.squaredNorm() > 1.0) continue;
    x.col(i++) = p.cwiseProduct(axes);
  }
  return x;
}

MinimizeReport find_equilibrium(int n, const TrapConfig& cfg, int restarts, double nudge,
                                std::uint64_t seed, const MinimizeOptions& options) {
  if (restarts < 1) throw Error("restarts must be at least 1");
  if (!(nudge >= 0.0)) throw Error("nudge must be non-negative");
  MinimizeReport best = minimize_local(ellipsoid_seed(n, cfg, seed), cfg, options);
  best.restarts = 1;
  for (int r = 1; r < restarts; ++r) {
    SplitMix64 rng = stream(seed, 0x6e75, std::uint64_t(r));
    std::normal_distribution<double> gauss(0.0, nudge);
    Positions trial = best.x;
    for (Eigen::Index i = 0; i < trial.size(); ++i) trial.data()[i] += gauss(rng);
    MinimizeReport next = minimize_local(trial, cfg, options);
    if (next.energy < best.energy) {
      next.restarts = best.restarts;
      best = std::move(next);
    }
    best.restarts = r + 1;
  }
  return best;
}

}  // namespace penning
