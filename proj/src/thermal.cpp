#include "penning/thermal.hpp"

#include "penning/constants.hpp"

#include <cmath>
#include <random>

namespace penning {

void ThermalInitConfig::validate() const {
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) throw Error("temperature must be non-negative");
  if (!(step > 0.0) || !std::isfinite(step)) throw Error("displacement scale must be positive");
  if (scans < 1) throw Error("need at least one scan");
}

Velocities sample_velocities(Eigen::Index n, double temperature, double mass, SplitMix64& rng) {
  if (!(temperature >= 0.0)) throw Error("temperature must be non-negative");
  if (!(mass > 0.0)) throw Error("mass must be positive");
  Velocities v = Velocities::Zero(3, n);
  if (temperature == 0.0) return v;
  // m v^2 / k T is chi-squared with three degrees of freedom
  std::chi_squared_distribution<double> chi2(3.0);
  const double scale = std::sqrt(constants::boltzmann * temperature / mass);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double speed = scale * std::sqrt(chi2(rng));
    v.col(i) = speed * random_unit_vector(rng);
  }
  return v;
}

IonState thermal_state(const Positions& x_rot, const Velocities& v_rot, double t, const TrapConfig& cfg) {
  if (x_rot.cols() != v_rot.cols()) throw Error("positions and velocities differ in size");
  RotatingState r{x_rot, v_rot};
  return from_rotating_frame(r, t, cfg);
}

MetropolisReport metropolis_positions(const Positions& x_eq, const TrapConfig& cfg,
                                      const ThermalInitConfig& init, const ScanObserver& observer) {
  init.validate();
  cfg.validate();
  if (!x_eq.allFinite()) throw Error("positions must be finite");
  const Eigen::Index n = x_eq.cols();
  const double kq2 = constants::coulomb * cfg.species.charge * cfg.species.charge;
  const Vec3 trap = 0.5 * cfg.species.mass * std::pow(cfg.axial_frequency(), 2) * confinement_coefficients(cfg);
  const double kT = constants::boltzmann * init.temperature;

  // coordinates as rows for a vectorisable pair loop
  Eigen::ArrayXd X = x_eq.row(0).transpose(), Y = x_eq.row(1).transpose(), Z = x_eq.row(2).transpose();
  auto coulomb_at = [&](Eigen::Index i, double px, double py, double pz) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dx = X[j] - px, dy = Y[j] - py, dz = Z[j] - pz;
      const double r2 = dx * dx + dy * dy + dz * dz;
      s += j == i ? 0.0 : 1.0 / std::sqrt(r2);
    }
    return kq2 * s;
  };
  auto trap_at = [&](double px, double py, double pz) {
    return trap.x() * px * px + trap.y() * py * py + trap.z() * pz * pz;
  };

  SplitMix64 rng = stream(init.seed, 0x6d65747270ULL);
  MetropolisReport report;
  long accepted = 0;
  double change = 0.0;
  Positions snapshot;
  for (int scan = 0; scan < init.scans; ++scan) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 d = init.step * rng.uniform() * random_unit_vector(rng);
      const double ox = X[i], oy = Y[i], oz = Z[i];
      const double nx = ox + d.x(), ny = oy + d.y(), nz = oz + d.z();
      const double de = trap_at(nx, ny, nz) - trap_at(ox, oy, oz) + coulomb_at(i, nx, ny, nz) - coulomb_at(i, ox, oy, oz);
      const double u = rng.uniform();
      const bool accept = de < 0.0 || (kT > 0.0 && u < std::exp(-de / kT));
      if (accept) {
        X[i] = nx;
        Y[i] = ny;
        Z[i] = nz;
        change += de;
        ++accepted;
      }
    }
    if (observer) {
      snapshot.resize(3, n);
      snapshot.row(0) = X.transpose();
      snapshot.row(1) = Y.transpose();
      snapshot.row(2) = Z.transpose();
      observer(snapshot, change, scan);
    }
  }
  report.x.resize(3, n);
  report.x.row(0) = X.transpose();
  report.x.row(1) = Y.transpose();
  report.x.row(2) = Z.transpose();
  report.energy_change = change;
  report.acceptance = n > 0 ? double(accepted) / (double(n) * init.scans) : 0.0;
  return report;
}

TemperatureAccumulator::TemperatureAccumulator(const TrapConfig& cfg, Eigen::Index n) : cfg_(cfg), n_(n) {
  if (n < 1) throw Error("need at least one ion");
}

void TemperatureAccumulator::reset() {
  samples_ = 0;
  sum_vz2_ = sum_vp2_ = sum_pe_ = 0.0;
  lowest_.resize(3, 0);
}

void TemperatureAccumulator::add(const IonState& lab, double potential_energy) {
  add_rotating(to_rotating_frame(lab, cfg_), potential_energy, lab.t);
}

void TemperatureAccumulator::add_rotating(const RotatingState& s, double potential_energy, double t) {
  if (s.x.cols() != n_ || s.v.cols() != n_) throw Error("sample has the wrong number of ions");
  sum_vz2_ += s.v.row(2).squaredNorm();
  sum_vp2_ += s.v.topRows<2>().squaredNorm();
  sum_pe_ += potential_energy;
  if (samples_ == 0) t_first_ = t;
  t_last_ = t;
  if (samples_ == 0 || potential_energy < lowest_energy_) {
    lowest_energy_ = potential_energy;
    lowest_ = s.x;
  }
  ++samples_;
}

TemperatureReport TemperatureAccumulator::report(double reference_energy) const {
  if (samples_ == 0) throw Error("temperature window is empty");
  const double m = cfg_.species.mass, kN = constants::boltzmann * double(n_), w = 1.0 / samples_;
  TemperatureReport r;
  r.samples = samples_;
  r.window = t_last_ - t_first_;
  r.axial = m * sum_vz2_ * w / kN;
  r.planar = m * sum_vp2_ * w / (2.0 * kN);
  r.potential = 2.0 / 3.0 * (sum_pe_ * w - reference_energy) / kN;
  r.negative_potential = r.potential < 0.0 || lowest_energy_ < reference_energy;
  return r;
}

void DisplacementAccumulator::add(const Positions& x) {
  if (samples_ == 0) {
    origin_ = x;
    sum_ = Eigen::Matrix3Xd::Zero(3, x.cols());
    sum2_ = Eigen::VectorXd::Zero(x.cols());
  } else if (x.cols() != origin_.cols()) {
    throw Error("sample has the wrong number of ions");
  }
  // offsets from the first sample keep the variance free of cancellation
  const Eigen::Matrix3Xd d = x - origin_;
  sum_ += d;
  sum2_ += d.colwise().squaredNorm().transpose();
  ++samples_;
}

Eigen::VectorXd DisplacementAccumulator::rms() const {
  if (samples_ == 0) throw Error("displacement window is empty");
  const double w = 1.0 / samples_;
  const Eigen::VectorXd mean2 = (sum_ * w).colwise().squaredNorm().transpose();
  return (sum2_ * w - mean2).cwiseMax(0.0).cwiseSqrt();
}

double position_error(const Positions& a, const Positions& b) {
  if (a.cols() != b.cols()) throw Error("position sets differ in size");
  const double ref = b.squaredNorm();
  if (!(ref > 0.0)) throw Error("reference positions are all at the origin");
  return std::sqrt((a - b).squaredNorm() / ref);
}

std::vector<double> position_error(const std::vector<Positions>& a, const std::vector<Positions>& b) {
  if (a.size() != b.size()) throw Error("trajectories have different lengths");
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out[k] = position_error(a[k], b[k]);
  return out;
}

std::vector<double> energy_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("energy series have different lengths");
  std::vector<double> out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (b[k] == 0.0) throw Error("reference energy is zero");
    out[k] = std::abs(a[k] - b[k]) / std::abs(b[k]);
  }
  return out;
}

double interparticle_spacing(double volume, Eigen::Index n) {
  if (!(volume > 0.0) || n < 1) throw Error("need a positive volume and ion count");
  return std::cbrt(3.0 * volume / (4.0 * constants::pi * double(n)));
}

}  // namespace penning
