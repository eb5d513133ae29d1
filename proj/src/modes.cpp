#include "penning/modes.hpp"

#include "penning/constants.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace penning {

Eigen::MatrixXd stiffness_matrix(const Positions& x, const TrapConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = x.cols();
  if (n < 1) throw Error("need at least one ion");
  const double m = cfg.species.mass, q = cfg.species.charge;
  const double kq2 = constants::coulomb * q * q;
  const Vec3 trap = m * std::pow(cfg.axial_frequency(), 2) * confinement_coefficients(cfg);

  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  bool coincident = false;
#pragma omp parallel for schedule(dynamic, 16) reduction(|| : coincident)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix3d diag = trap.asDiagonal();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec3 r = x.col(i) - x.col(j);
      const double r2 = r.squaredNorm();
      if (!(r2 > 0.0)) {
        coincident = true;
        continue;
      }
      const double inv5 = 1.0 / (r2 * r2 * std::sqrt(r2));
      const Eigen::Matrix3d h = kq2 * inv5 * (r2 * Eigen::Matrix3d::Identity() - 3.0 * r * r.transpose());
      diag -= h;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) K(a * n + i, b * n + j) = h(a, b);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) K(a * n + i, b * n + i) = diag(a, b);
  }
  if (coincident) throw Error("coincident ions in stiffness matrix");
  return K;
}

Eigen::MatrixXd dynamical_matrix(const Eigen::MatrixXd& K, const TrapConfig& cfg, Eigen::Index n) {
  if (K.rows() != 3 * n || K.cols() != 3 * n) throw Error("stiffness matrix has the wrong size");
  const double m = cfg.species.mass;
  const double wb = cfg.species.charge * cfg.effective_field() / m;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6 * n, 6 * n);
  D.topRightCorner(3 * n, 3 * n).setIdentity();
  D.bottomLeftCorner(3 * n, 3 * n) = -K / m;
  // m dv_x/dt = ... + q B_eff v_y, m dv_y/dt = ... - q B_eff v_x
  for (Eigen::Index i = 0; i < n; ++i) {
    D(3 * n + i, 4 * n + i) = wb;
    D(4 * n + i, 3 * n + i) = -wb;
  }
  return D;
}

MinimizeReport refine_minimum(const Positions& x0, const TrapConfig& cfg, int rounds) {
  const Eigen::Index n = x0.cols();
  const double m = cfg.species.mass, q = cfg.species.charge, wz = cfg.axial_frequency();
  const double length = std::cbrt(constants::coulomb * q * q / (m * wz * wz));
  const CoulombSettings direct{CoulombMethod::Direct};
  MinimizeOptions tight;
  tight.tolerance = 1e-11 * m * wz * wz * length;
  tight.max_iterations = 50000;

  MinimizeReport r = minimize_local(x0, cfg, tight);
  int iterations = r.iterations;
  for (int round = 0; round < rounds && r.converged; ++round) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness_matrix(r.x, cfg));
    const Eigen::VectorXd& lam = es.eigenvalues();
    if (lam[0] >= -1e-10 * lam.cwiseAbs().maxCoeff()) break;

    // a saddle: take the lowest-energy point along the negative-curvature direction
    const Eigen::VectorXd v = es.eigenvectors().col(0);
    Positions best = r.x;
    double e_best = r.energy;
    for (double t = length; t > 1e-4 * length; t *= 0.7) {
      for (double sign : {1.0, -1.0}) {
        Positions trial = r.x;
        for (int a = 0; a < 3; ++a) trial.row(a) += sign * t * v.segment(a * n, n).transpose();
        const double e = rotating_energy(trial, cfg, direct);
        if (e < e_best) {
          e_best = e;
          best = trial;
        }
      }
    }
    if (e_best >= r.energy) {
      r.converged = false;
      break;
    }
    r = minimize_local(best, cfg, tight);
    iterations += r.iterations;
  }
  if (r.converged) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stiffness_matrix(r.x, cfg), Eigen::EigenvaluesOnly);
    r.converged = es.eigenvalues()[0] >= -1e-10 * es.eigenvalues().cwiseAbs().maxCoeff();
  }
  r.iterations = iterations;
  return r;
}

const char* branch_name(Branch b) {
  switch (b) {
    case Branch::ExB: return "ExB";
    case Branch::Axial: return "axial";
    case Branch::Cyclotron: return "cyclotron";
  }
  return "?";
}

double mode_energy_ratio(const Eigen::VectorXcd& u, const Eigen::MatrixXd& K, double mass) {
  const Eigen::Index h = u.size() / 2;
  if (u.size() != 2 * K.rows()) throw Error("mode vector does not match stiffness matrix");
  const Eigen::VectorXcd ur = u.head(h), uv = u.tail(h);
  const double kinetic = mass * uv.squaredNorm();
  if (!(kinetic > 0.0)) throw Error("mode has no velocity part");
  const double potential = (ur.adjoint() * K * ur)(0, 0).real();
  return potential / kinetic;
}

double axial_fraction(const Eigen::VectorXcd& u) {
  const Eigen::Index h = u.size() / 2;
  if (u.size() % 6 != 0) throw Error("mode vector length must be a multiple of 6");
  const Eigen::VectorXcd ur = u.head(h);
  const double total = ur.squaredNorm();
  if (!(total > 0.0)) throw Error("mode has no position part");
  return ur.tail(h / 3).squaredNorm() / total;
}

ModeSpectrum eigenmodes(const Eigen::MatrixXd& D, const Eigen::MatrixXd& K, double mass,
                        const ModeOptions& options) {
  const Eigen::Index dim = D.rows();
  if (D.cols() != dim || dim % 6 != 0 || K.rows() * 2 != dim) throw Error("matrix sizes do not match");
  const Eigen::Index h = dim / 2;

  // time in units of 1/w0 and velocities in units of w0: a similarity transform that
  // balances the blocks
  const double w0 = std::sqrt(std::max(K.diagonal().cwiseAbs().maxCoeff() / mass, 1e-300));
  Eigen::MatrixXd S = D / w0;
  S.topRightCorner(h, h) = D.topRightCorner(h, h);
  S.bottomLeftCorner(h, h) = D.bottomLeftCorner(h, h) / (w0 * w0);

  Eigen::EigenSolver<Eigen::MatrixXd> solver(S, true);
  if (solver.info() != Eigen::Success) throw Error("eigen-decomposition failed");
  const Eigen::VectorXcd lambda = solver.eigenvalues();
  const Eigen::MatrixXcd vec = solver.eigenvectors();
  const double scale = lambda.cwiseAbs().maxCoeff();

  std::vector<std::complex<double>> growing;
  std::vector<Eigen::Index> keep;
  int zero = 0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const std::complex<double> l = lambda[k];
    if (std::abs(l) <= options.zero_tolerance * scale) {
      ++zero;
      continue;
    }
    if (l.real() > options.growth_tolerance * scale) growing.push_back(l * w0);
    if (l.imag() < 0.0) keep.push_back(k);  // lambda = -i omega with omega > 0
  }
  if (!growing.empty()) {
    const std::string what = "unstable equilibrium: " + std::to_string(growing.size()) + " growing modes";
    throw UnstableEquilibrium(what, std::move(growing));
  }
  std::sort(keep.begin(), keep.end(),
            [&](Eigen::Index a, Eigen::Index b) { return lambda[a].imag() > lambda[b].imag(); });

  ModeSpectrum s;
  s.ions = h / 3;
  s.zero_modes = zero / 2;
  const Eigen::Index modes = Eigen::Index(keep.size());
  s.omega.resize(modes);
  s.vectors.resize(dim, modes);
  s.energy_ratio.resize(modes);
  s.axial_fraction.resize(modes);
  for (Eigen::Index c = 0; c < modes; ++c) {
    const Eigen::Index k = keep[c];
    s.omega[c] = -lambda[k].imag() * w0;
    Eigen::VectorXcd u = vec.col(k);
    u.tail(h) *= w0;  // back to physical velocities
    const double nv = u.tail(h).norm();
    s.vectors.col(c) = u / nv;
    s.energy_ratio[c] = mode_energy_ratio(s.vectors.col(c), K, mass);
    s.axial_fraction[c] = axial_fraction(s.vectors.col(c));
  }
  classify_branches(s);
  return s;
}

ModeSpectrum normal_modes(const Positions& x_rot, const TrapConfig& cfg, const ModeOptions& options) {
  const Eigen::MatrixXd K = stiffness_matrix(x_rot, cfg);
  return eigenmodes(dynamical_matrix(K, cfg, x_rot.cols()), K, cfg.species.mass, options);
}

void classify_branches(ModeSpectrum& s, double threshold) {
  const Eigen::Index n = s.size();
  s.branch.assign(std::size_t(n), Branch::ExB);
  s.branch_separation = std::numeric_limits<double>::infinity();
  s.branches_resolved = true;
  if (n < 3) {
    for (Eigen::Index k = 0; k < n; ++k) s.branch[std::size_t(k)] = Branch(k);
    return;
  }
  const std::size_t N = std::size_t(n);
  std::vector<Eigen::Index> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return s.omega[a] < s.omega[b]; });
  std::vector<double> y(N), p1(N + 1, 0.0), p2(N + 1, 0.0);
  for (std::size_t k = 0; k < y.size(); ++k) {
    y[k] = std::log(s.omega[order[k]]);
    p1[k + 1] = p1[k] + y[k];
    p2[k + 1] = p2[k] + y[k] * y[k];
  }
  // sum of squared deviations of y[a, b)
  auto sse = [&](std::size_t a, std::size_t b) {
    const double c = double(b - a), s1 = p1[b] - p1[a];
    return std::max(0.0, p2[b] - p2[a] - s1 * s1 / c);
  };
  double best = std::numeric_limits<double>::infinity();
  std::size_t c1 = 1, c2 = 2;
  for (std::size_t i = 1; i + 1 < N; ++i) {
    const double left = sse(0, i);
    for (std::size_t j = i + 1; j < N; ++j) {
      const double total = left + sse(i, j) + sse(j, N);
      if (total < best) {
        best = total;
        c1 = i;
        c2 = j;
      }
    }
  }
  for (std::size_t k = 0; k < N; ++k)
    s.branch[std::size_t(order[k])] = k < c1 ? Branch::ExB : (k < c2 ? Branch::Axial : Branch::Cyclotron);

  // gap at each boundary over the mean level spacing inside the adjacent groups
  auto spacing = [&](std::size_t a, std::size_t b) { return b - a > 1 ? (y[b - 1] - y[a]) / double(b - a - 1) : 0.0; };
  auto score = [](double gap, double a, double b) {
    const double w = std::max(a, b);
    return w > 0.0 ? gap / w : std::numeric_limits<double>::infinity();
  };
  const double s0 = spacing(0, c1), s1 = spacing(c1, c2), s2 = spacing(c2, N);
  s.branch_separation = std::min(score(y[c1] - y[c1 - 1], s0, s1), score(y[c2] - y[c2 - 1], s1, s2));
  s.branches_resolved = s.branch_separation > threshold;
}

}  // namespace penning
