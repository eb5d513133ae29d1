// End-to-end acceptance run. Prints one PASS/FAIL line per criterion; arguments select
// a subset (e.g. `acceptance 3 7`). Exit status is non-zero when any selected criterion fails.

#include "penning/commands.hpp"
#include "penning/config.hpp"
#include "penning/constants.hpp"
#include "penning/cooltheory.hpp"
#include "penning/coulomb.hpp"
#include "penning/equilibrium.hpp"
#include "penning/fmm.hpp"
#include "penning/integrator.hpp"
#include "penning/lasers.hpp"
#include "penning/modes.hpp"
#include "penning/simulation.hpp"
#include "penning/thermal.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace penning;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMHz = constants::two_pi * 1e6;

struct Outcome {
  bool pass = false;
  std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) { std::printf("    %s\n", s.c_str()); std::fflush(stdout); }

TrapConfig trap_for(double target_beta, double delta) {
  TrapConfig cfg = TrapConfig::defaults();
  cfg.wall_strength = delta;
  cfg.rotation_frequency = rotation_for_beta(cfg, target_beta);
  return cfg;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("penning_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Config for an N = 200 cooling run at 10 mK lasting at least `duration`, split into
// `rows` diagnostics windows. At this size direct summation is the faster Coulomb solver.
RunConfig cooling_config(double duration, int rows, double wall, const fs::path& out) {
  json doc = {{"seed", 1},
              {"trap", {{"wall_strength", wall}}},
              {"init", {{"ions", 200}, {"thermal", {{"temperature_mK", 10.0}, {"scans", 2000}}}}},
              {"output", {{"directory", out.string()}, {"sample_stride", 20}}}};
  const double dt = parse_config(doc).step.dt;
  const auto per_row = std::uint64_t(std::ceil(duration / dt / rows / 20.0)) * 20;
  doc["output"]["diagnostic_stride"] = per_row;
  doc["integration"] = {{"n_steps", per_row * std::uint64_t(rows)}, {"coulomb", "direct"}};
  return parse_config(doc);
}

// ---------------------------------------------------------------------------------------
// 1. FMM potential error against an independent long-double pair sum.

Outcome fmm_correctness() {
  const auto t_start = std::chrono::steady_clock::now();
  const TrapConfig trap = TrapConfig::defaults();
  const int n = 10000;
  const ChargeSystem sys = ChargeSystem::identical(uniform_sphere(n, sphere_radius(n, trap), 1), trap.species.charge);

  std::vector<long double> ref(n, 0.0L);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const long double dx = sys.x(0, i) - sys.x(0, j), dy = sys.x(1, i) - sys.x(1, j), dz = sys.x(2, i) - sys.x(2, j);
      const long double inv = 1.0L / std::sqrt(dx * dx + dy * dy + dz * dz);
      ref[i] += sys.q[j] * inv;
      ref[j] += sys.q[i] * inv;
    }
  long double norm = 0.0L;
  for (auto& r : ref) {
    r *= constants::coulomb;
    norm += r * r;
  }

  bool ok = true;
  std::string worst;
  for (double eps : {1e-3, 1e-5, 1e-7, 1e-9}) {
    FmmOptions o;
    o.epsilon = eps;
    const auto t0 = std::chrono::steady_clock::now();
    const FieldResult f = fmm_solve(sys, o);
    const double t = seconds_since(t0);
    long double diff = 0.0L;
    for (int i = 0; i < n; ++i) diff += (f.phi[i] - ref[i]) * (f.phi[i] - ref[i]);
    const double err = double(std::sqrt(diff / norm));
    ok &= err < eps;
    note(fmt("eps %.0e  p %2d  Error_pot %.3e  (%.2f s)", eps, fmm_order(eps), err, t));
    worst += fmt("%s%.1e", worst.empty() ? "" : ", ", err);
  }
  const double total = seconds_since(t_start);
  ok &= total < 300.0;
  return {ok, fmt("N=1e4 Error_pot [%s] each below eps; %.1f s total", worst.c_str(), total)};
}

// ---------------------------------------------------------------------------------------
// 2. Scaling of one Coulomb evaluation with N.

Outcome fmm_scaling() {
  BenchConfig b;
  for (int k = 8; k <= 17; ++k) b.sizes.push_back(1 << k);
  b.epsilon = 1e-7;
  b.repeats = 3;
  b.direct_max = 1 << 14;
  b.leaf_min = 64;
  const auto rows = coulomb_bench(b, TrapConfig::defaults(), 1);

  std::vector<double> nf, tf, nd, td;
  std::map<int, double> direct_time;
  for (const auto& r : rows) {
    note(fmt("%-6s N %6d  %.4e s%s", r.method.c_str(), r.n, r.wall_time,
             r.method == "fmm" && std::isfinite(r.error_pot) ? fmt("  Error_pot %.1e", r.error_pot).c_str() : ""));
    if (r.method == "direct") {
      nd.push_back(r.n);
      td.push_back(r.wall_time);
      direct_time[r.n] = r.wall_time;
    } else if (r.n >= 1024) {
      nf.push_back(r.n);
      tf.push_back(r.wall_time);
    }
  }
  int crossover = 0;
  for (const auto& r : rows)
    if (r.method == "fmm" && direct_time.count(r.n) && r.wall_time < direct_time[r.n]) {
      crossover = r.n;
      break;
    }
  const double sf = loglog_slope(nf, tf), sd = loglog_slope(nd, td);
  const bool slope_f = sf >= 0.9 && sf <= 1.2, slope_d = sd >= 1.9 && sd <= 2.1;
  const bool cross = crossover > 0 && crossover <= 3000;
  note(fmt("fmm slope %.3f [0.9, 1.2] %s; direct slope %.3f [1.9, 2.1] %s; crossover %s (needs <= 3e3) %s", sf,
           slope_f ? "ok" : "out", sd, slope_d ? "ok" : "out",
           crossover ? std::to_string(crossover).c_str() : "none up to 16384", cross ? "ok" : "out"));
  return {slope_f && slope_d && cross,
          fmt("fmm slope %.3f, direct slope %.3f, crossover %s", sf, sd,
              crossover ? std::to_string(crossover).c_str() : "not reached by N=16384")};
}

// ---------------------------------------------------------------------------------------
// 3. Energy conservation and FMM-vs-direct trajectory divergence.

Outcome energy_conservation() {
  const TrapConfig trap = TrapConfig::defaults();
  const int n = 100;
  const MinimizeReport eq = find_equilibrium(n, trap, 1, 0.0, 3);
  ThermalInitConfig th;
  th.temperature = 0.01;
  th.seed = 3;
  const MetropolisReport mp = metropolis_positions(eq.x, trap, th);
  SplitMix64 rng = stream(3, 0x76);
  const IonState s0 = thermal_state(mp.x, sample_velocities(n, 0.01, trap.species.mass, rng), 0.0, trap);

  auto energy = [&](const IonState& s) {
    return energy_report(s, trap, direct_solve(ChargeSystem::identical(s.x, trap.species.charge)).phi).total;
  };
  struct Track {
    std::vector<Positions> x;
    std::vector<double> sampled;  // every 100 steps, with x
    std::vector<double> e;        // every step
  };
  auto integrate = [&](CoulombMethod method) {
    StepConfig sc;
    sc.dt = default_time_step(trap);
    sc.coulomb.method = method;
    sc.coulomb.epsilon = 1e-7;
    sc.coulomb.leaf_min = 8;  // deep enough that N = 100 uses far-field expansions
    Track tr;
    IonState s = s0;
    run(s, trap, sc, {}, 10000, [&](const IonState& st, std::uint64_t k) {
      if (k % 100 == 0) {
        tr.x.push_back(st.x);
        tr.sampled.push_back(energy(st));
      }
      tr.e.push_back(energy(st));
    });
    return tr;
  };
  const Track fmm = integrate(CoulombMethod::Fmm), dir = integrate(CoulombMethod::Direct);

  // Drift is the secular change: mean energy over the last 1000 steps against the first
  // 1000. The envelope is the largest excursion from E(0), which includes the bounded
  // splitting oscillation.
  auto drift_of = [](const std::vector<double>& e) {
    const std::size_t w = 1000;
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
      a += e[k] / w;
      b += e[e.size() - w + k] / w;
    }
    return std::abs(b - a) / std::abs(e[0]);
  };
  auto envelope_of = [](const std::vector<double>& e) {
    double m = 0.0;
    for (double v : e) m = std::max(m, std::abs(v - e[0]) / std::abs(e[0]));
    return m;
  };
  const double drift = drift_of(fmm.e), drift_direct = drift_of(dir.e);
  const auto err_en = energy_error(fmm.sampled, dir.sampled);
  const auto err_pos = position_error(fmm.x, dir.x);
  const double max_en = *std::max_element(err_en.begin(), err_en.end());
  for (std::size_t k = 0; k < err_pos.size(); k += 20)
    note(fmt("step %5zu  Error_pos %.3e  Error_en %.3e", k * 100, err_pos[k], err_en[k]));
  const double first = err_pos[1], last = err_pos.back();
  note(fmt("energy drift fmm %.3e, direct %.3e; envelope fmm %.3e, direct %.3e", drift, drift_direct,
           envelope_of(fmm.e), envelope_of(dir.e)));
  const bool grows = first > 0.0 && last > 10.0 * first;
  const bool ok = drift < 1e-6 && max_en < 1e-6 && grows;
  return {ok, fmt("drift %.2e (envelope %.2e), max Error_en %.2e, Error_pos %.1e -> %.1e", drift, envelope_of(fmm.e),
                  max_en, first, last)};
}

// ---------------------------------------------------------------------------------------
// 4. Single-ion analytic orbit and the N = 1 mode quartic.

Outcome single_ion() {
  // Without the wall, w = x + i y satisfies w'' = (wz^2 / 2) w - i wc w', so
  // w = A e^{-i w+ t} + B e^{-i w- t} with w+- the two roots of w^2 - wc w + wz^2 / 2 = 0.
  TrapConfig trap = TrapConfig::defaults();
  trap.wall_strength = 0.0;
  const double wc = trap.cyclotron_frequency(), wz = trap.axial_frequency();
  const double disc = std::sqrt(wc * wc - 2.0 * wz * wz);
  const double wp = 0.5 * (wc + disc), wm = 0.5 * (wc - disc);
  using C = std::complex<double>;
  const C I(0.0, 1.0);
  const Vec3 x0(15e-6, 8e-6, -6e-6), v0(40.0, -25.0, 18.0);
  const C w0(x0.x(), x0.y()), u0(v0.x(), v0.y());
  const C A = (I * u0 - wm * w0) / (wp - wm), B = w0 - A;
  auto exact = [&](double t) {
    const C w = A * std::exp(-I * wp * t) + B * std::exp(-I * wm * t);
    return Vec3(w.real(), w.imag(), x0.z() * std::cos(wz * t) + v0.z() / wz * std::sin(wz * t));
  };
  const double period = constants::two_pi / wc;
  auto orbit_error = [&](int steps_per_period) {
    StepConfig sc;
    sc.dt = period / steps_per_period;
    IonState s;
    s.x = x0;
    s.v = v0;
    double worst = 0.0, scale = 0.0;
    run(s, trap, sc, {}, std::uint64_t(100) * steps_per_period, [&](const IonState& st, std::uint64_t) {
      const Vec3 e = exact(st.t);
      worst = std::max(worst, (st.x.col(0) - e).norm());
      scale = std::max(scale, e.norm());
    }, steps_per_period / 40);
    return worst / scale;
  };
  const double e40 = orbit_error(40), e80 = orbit_error(80), e2560 = orbit_error(2560);
  note(fmt("100 cyclotron periods: error %.3e at T_c/40, %.3e at T_c/80 (ratio %.2f), %.3e at T_c/2560", e40, e80,
           e40 / e80, e2560));

  // Rotating-frame single ion with the wall: x'' = -a x + W y', y'' = -b y - W x',
  // a = wz^2 (beta + delta/2), b = wz^2 (beta - delta/2), W = q B_eff / m.
  const TrapConfig cfg = TrapConfig::defaults();
  const double wr = cfg.rotation_frequency, wz1 = cfg.axial_frequency(), w_c = cfg.cyclotron_frequency();
  const double bt = wr * (w_c - wr) / (wz1 * wz1) - 0.5, d = cfg.wall_strength;
  const double a = wz1 * wz1 * (bt + d / 2), b = wz1 * wz1 * (bt - d / 2);
  const double W = w_c - 2.0 * wr;
  const double sum = a + b + W * W, root = std::sqrt(sum * sum - 4.0 * a * b);
  std::array<double, 3> expect{std::sqrt((sum - root) / 2), wz1, std::sqrt((sum + root) / 2)};
  std::sort(expect.begin(), expect.end());
  const ModeSpectrum s = normal_modes(Positions::Zero(3, 1), cfg);
  double mode_err = s.size() == 3 ? 0.0 : 1.0;
  for (int k = 0; k < 3 && s.size() == 3; ++k) mode_err = std::max(mode_err, std::abs(s.omega[k] / expect[k] - 1.0));
  note(fmt("N=1 modes %.10e %.10e %.10e rad/s, max relative error %.2e", expect[0], expect[1], expect[2], mode_err));

  const bool ok = e2560 < 1e-6 && mode_err < 1e-10;
  return {ok, fmt("orbit error %.2e at dt=T_c/2560 (second order: x%.2f per halving); N=1 modes %.1e", e2560,
                  e40 / e80, mode_err)};
}

// ---------------------------------------------------------------------------------------
// 5. Crystal shape against a uniformly charged ellipsoid in equilibrium with the trap.

// Depolarisation integrals A_i = int_0^inf ds / ((a_i^2 + s) sqrt(prod (a_j^2 + s))).
Vec3 depolarisation(const Vec3& a) {
  boost::math::quadrature::exp_sinh<double> integrator;
  Vec3 out;
  for (int i = 0; i < 3; ++i)
    out[i] = integrator.integrate([&](double s) {
      return 1.0 / ((a[i] * a[i] + s) * std::sqrt((a[0] * a[0] + s) * (a[1] * a[1] + s) * (a[2] * a[2] + s)));
    });
  return out;
}

// Semi-axis ratios (a2/a1, a3/a1), sorted, of the ellipsoid whose space-charge field
// balances confinement C: A_i proportional to C_i.
std::array<double, 2> ellipsoid_oracle(const Vec3& c) {
  Eigen::Vector2d u(0.0, 0.0);  // log(a_x / a_z), log(a_y / a_z)
  auto residual = [&](const Eigen::Vector2d& v) {
    const Vec3 A = depolarisation(Vec3(std::exp(v[0]), std::exp(v[1]), 1.0));
    return Eigen::Vector2d(std::log(A[0] / A[2]) - std::log(c[0] / c[2]), std::log(A[1] / A[2]) - std::log(c[1] / c[2]));
  };
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector2d r = residual(u);
    if (r.norm() < 1e-13) break;
    Eigen::Matrix2d J;
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d up = u, um = u;
      up[k] += h;
      um[k] -= h;
      J.col(k) = (residual(up) - residual(um)) / (2 * h);
    }
    Eigen::Vector2d step = -(J.inverse() * r);
    if (step.norm() > 0.5) step *= 0.5 / step.norm();
    u += step;
  }
  std::array<double, 3> ax{std::exp(u[0]), std::exp(u[1]), 1.0};
  std::sort(ax.rbegin(), ax.rend());
  return {ax[1] / ax[0], ax[2] / ax[0]};
}

Outcome equilibrium_shape() {
  bool ok = true;
  std::string summary;
  for (double b : {0.5, 1.0, 2.0}) {
    const TrapConfig trap = trap_for(b, 1e-3 * b);
    const MinimizeReport eq = find_equilibrium(500, trap, 1, 0.0, 5);
    const EllipsoidShape fit = fit_ellipsoid_moments(eq.x);
    const std::array<double, 2> fitted{fit.sorted(1) / fit.sorted(0), fit.sorted(2) / fit.sorted(0)};
    const std::array<double, 2> oracle = ellipsoid_oracle(confinement_coefficients(trap));
    const std::array<double, 2> lib = ellipsoid_ratios(trap);
    double dev = 0.0;
    for (int k = 0; k < 2; ++k) dev = std::max(dev, std::abs(fitted[k] / oracle[k] - 1.0));
    ok &= eq.converged && dev < 0.05;
    note(fmt("beta %.1f  w_r/2pi %.4f MHz  fitted %.4f %.4f  oracle %.4f %.4f  library %.4f %.4f  deviation %.2f%%%s", b,
             trap.rotation_frequency / kMHz, fitted[0], fitted[1], oracle[0], oracle[1], lib[0], lib[1], 100 * dev,
             eq.converged ? "" : "  (not converged)"));
    summary += fmt("%sbeta=%.1f %.1f%%", summary.empty() ? "" : ", ", b, 100 * dev);
  }
  return {ok, "N=500 aspect ratios vs uniform ellipsoid: " + summary};
}

// ---------------------------------------------------------------------------------------
// 6. Mode branches and the analytic Hessian at N = 200.

Outcome mode_diagnostics() {
  const TrapConfig trap = TrapConfig::defaults();
  const int n = 200;
  const MinimizeReport eq = refine_minimum(find_equilibrium(n, trap, 3, 1e-7, 1).x, trap);
  if (!eq.converged) return {false, "N=200 equilibrium did not converge"};
  const ModeSpectrum s = normal_modes(eq.x, trap);
  std::vector<double> exb_r, cyc_r, cyc_f;
  int counts[3] = {0, 0, 0};
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    counts[int(s.branch[k])]++;
    if (s.branch[k] == Branch::ExB) exb_r.push_back(s.energy_ratio[k]);
    if (s.branch[k] == Branch::Cyclotron) {
      cyc_r.push_back(s.energy_ratio[k]);
      cyc_f.push_back(s.axial_fraction[k]);
    }
  }
  const double m_exb = exb_r.empty() ? 0 : median(exb_r), m_cyc = cyc_r.empty() ? 1e9 : median(cyc_r);
  const double m_fz = cyc_f.empty() ? 1e9 : median(cyc_f);
  note(fmt("modes %lld (zero %d): ExB %d, axial %d, cyclotron %d; separation %.2f (resolved above 2)",
           (long long)s.size(), s.zero_modes, counts[0], counts[1], counts[2], s.branch_separation));
  note(fmt("median R_n ExB %.3f, cyclotron %.3e; median cyclotron f_z %.3e", m_exb, m_cyc, m_fz));

  const Eigen::MatrixXd K = stiffness_matrix(eq.x, trap);
  const CoulombSettings direct{CoulombMethod::Direct};
  const double h = 1e-9;
  double worst = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < n; ++i) {
      Positions xp = eq.x, xm = eq.x;
      xp(a, i) += h;
      xm(a, i) -= h;
      Eigen::Matrix3Xd gp, gm;
      rotating_energy(xp, trap, direct, &gp);
      rotating_energy(xm, trap, direct, &gm);
      const Eigen::Matrix3Xd col = (gp - gm) / (2 * h);
      for (int bb = 0; bb < 3; ++bb)
        for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(K(bb * n + j, a * n + i) - col(bb, j)));
    }
  const double hess = worst / K.cwiseAbs().maxCoeff();
  note(fmt("max |K - finite-difference Hessian| / max |K| = %.2e", hess));

  const bool ok = s.branches_resolved && counts[0] > 0 && counts[1] > 0 && counts[2] > 0 && m_fz < 0.05 &&
                  m_exb > 1.0 && m_cyc < 1.0 && hess < 1e-6;
  return {ok, fmt("branches %d/%d/%d resolved=%s, cyclotron f_z %.1e, R_n ExB %.2f cyclotron %.1e, Hessian %.1e",
                  counts[0], counts[1], counts[2], s.branches_resolved ? "yes" : "no", m_fz, m_exb, m_cyc, hess)};
}

// ---------------------------------------------------------------------------------------
// 7. Laser cooling of a near-spherical N = 200 crystal over 1 ms.

Outcome cooling() {
  const RunConfig cfg = cooling_config(1e-3, 40, 0.1, scratch_dir("cooling"));
  note(fmt("wall_strength 0.1, dt %.3e s, %llu steps", cfg.step.dt, (unsigned long long)cfg.n_steps));
  const CrystalStart start = prepare_crystal(cfg);
  const auto beams = standard_setup(cfg.cooling, cfg.trap.rotation_frequency);
  const CoolingTrace tr = run_cooling(cfg, beams, start);
  const double duration = double(cfg.n_steps) * cfg.step.dt;

  auto window = [&](double DiagnosticRow::*f, double t0, double t1) {
    double sum = 0.0;
    int k = 0;
    for (const auto& r : tr.rows)
      if (r.t > t0 * (1 + 1e-12) && r.t <= t1 * (1 + 1e-12)) {
        sum += r.*f;
        ++k;
      }
    return sum / k;
  };
  note(fmt("t=0: T_ax %.3f mK, T_perp %.3f mK, T_pe %.3f mK", 1e3 * tr.rows[0].axial, 1e3 * tr.rows[0].planar,
           1e3 * tr.rows[0].potential));
  for (int w = 0; w < 8; ++w) {
    const double t0 = duration * w / 8, t1 = duration * (w + 1) / 8;
    note(fmt("%4.0f-%4.0f us: T_ax %.3f  T_perp %.3f  T_pe %.3f mK", 1e6 * t0, 1e6 * t1,
             1e3 * window(&DiagnosticRow::axial, t0, t1), 1e3 * window(&DiagnosticRow::planar, t0, t1),
             1e3 * window(&DiagnosticRow::potential, t0, t1)));
  }
  std::array<double, 4> perp, pe;
  for (int w = 0; w < 4; ++w) {
    perp[w] = window(&DiagnosticRow::planar, duration * w / 4, duration * (w + 1) / 4);
    pe[w] = window(&DiagnosticRow::potential, duration * w / 4, duration * (w + 1) / 4);
  }
  const double t_ax = window(&DiagnosticRow::axial, 0.75 * duration, duration);
  bool perp_down = true, pe_down = true;
  for (int w = 1; w < 4; ++w) {
    perp_down &= perp[w] < perp[w - 1];
    pe_down &= pe[w] < pe[w - 1];
  }
  const bool ok = t_ax < 1e-3 && perp_down && perp[3] < 5e-3 && pe_down;
  return {ok, fmt("last 250 us: T_ax %.3f mK; T_perp quarters %.2f %.2f %.2f %.2f mK; T_pe quarters %.2f %.2f %.2f %.2f mK",
                  1e3 * t_ax, 1e3 * perp[0], 1e3 * perp[1], 1e3 * perp[2], 1e3 * perp[3], 1e3 * pe[0], 1e3 * pe[1],
                  1e3 * pe[2], 1e3 * pe[3])};
}

// ---------------------------------------------------------------------------------------
// 8. Simulated steady-state T_perp against the cooling theory on a 4 x 4 grid.

Outcome theory_crosscheck() {
  const RunConfig cfg = cooling_config(1e-3, 8, 0.1, scratch_dir("scan"));
  const CrystalStart start = prepare_crystal(cfg);
  const ScanResult res = cooling_scan(cfg, start);
  const auto& ws = res.theory.waists;
  const auto& ds = res.theory.detunings;

  bool ok = true;
  int compared = 0;
  double worst = 1.0;
  std::size_t md_i = 0, md_j = 0, th_i = 0, th_j = 0;
  double md_min = 1e9, th_min = 1e9;
  note("w_y um  Delta MHz   MD T_perp   theory    ratio  settled");
  for (std::size_t i = 0; i < ws.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const ScanCell& c = res.cell(i, j);
      const auto& th = res.theory.value(i, j);
      std::string ratio = "   -";
      if (th) {
        const double r = c.planar / *th;
        ratio = fmt("%6.2f", r);
        if (c.settled) {
          ++compared;
          ok &= r >= 0.5 && r <= 2.0;
          worst = std::max({worst, r, 1.0 / r});
        }
        if (*th < th_min) th_min = *th, th_i = i, th_j = j;
      }
      if (c.planar < md_min) md_min = c.planar, md_i = i, md_j = j;
      note(fmt("%6.2f  %9.1f  %8.3f mK  %s  %s  %s", 1e6 * ws[i], ds[j] / kMHz, 1e3 * c.planar,
               th ? fmt("%8.3f mK", 1e3 * *th).c_str() : "      none", ratio.c_str(), c.settled ? "yes" : "no"));
    }
  const int dist = int(std::max(std::abs(long(md_i) - long(th_i)), std::abs(long(md_j) - long(th_j))));
  note(fmt("minimum: MD at (%.1f um, %.0f MHz), theory at (%.1f um, %.0f MHz), %d cell(s) apart", 1e6 * ws[md_i],
           ds[md_j] / kMHz, 1e6 * ws[th_i], ds[th_j] / kMHz, dist));
  ok &= dist <= 1 && compared > 0;
  return {ok, fmt("%d settled cells compared, worst factor %.2f (limit 2); minima %d cell(s) apart", compared, worst, dist)};
}

// ---------------------------------------------------------------------------------------
// 9. Sampling statistics.

Outcome statistics() {
  bool ok = true;
  auto check = [&](const std::string& what, double value, double expect, double sigma) {
    const double z = (value - expect) / sigma;
    ok &= std::abs(z) < 5.0;
    note(fmt("%-34s %.6e vs %.6e  (%+.2f sigma)", what.c_str(), value, expect, z));
  };
  const double mass = IonSpecies::beryllium9().mass;

  {  // Maxwell-Boltzmann moments
    const double T = 0.01, u = constants::boltzmann * T / mass;
    const int n = 1000000;
    SplitMix64 rng(101);
    const Velocities v = sample_velocities(n, T, mass, rng);
    for (int a = 0; a < 3; ++a) {
      const double m2 = v.row(a).squaredNorm() / n, m4 = v.row(a).array().pow(4).sum() / n;
      check(fmt("MB <v_%c^2>", "xyz"[a]), m2, u, std::sqrt(2.0 * u * u / n));
      check(fmt("MB <v_%c^4>", "xyz"[a]), m4, 3 * u * u, std::sqrt(96.0 * u * u * u * u / n));
    }
    const double speed = v.colwise().norm().mean();
    check("MB <|v|>", speed, std::sqrt(8.0 * u / constants::pi), std::sqrt((3.0 - 8.0 / constants::pi) * u / n));
  }
  {  // Poisson photon counts
    for (double mu : {0.02, 3.0}) {
      SplitMix64 rng(202);
      const int n = 1000000;
      double s1 = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const double k = sample_photons(mu, rng);
        s1 += k;
        s2 += k * k;
      }
      const double mean = s1 / n, var = s2 / n - mean * mean;
      check(fmt("Poisson mean (mu=%g)", mu), mean, mu, std::sqrt(mu / n));
      check(fmt("Poisson variance (mu=%g)", mu), var, mu, std::sqrt((mu + 2 * mu * mu) / n));
    }
  }
  {  // emission direction of recoil kicks
    BeamConfig beam;
    beam.direction = Vec3::UnitX();
    beam.wavenumber = constants::two_pi / constants::beryllium_wavelength;
    beam.linewidth = constants::beryllium_linewidth;
    const double dv = constants::hbar * beam.wavenumber / mass;
    SplitMix64 rng(303);
    const int n = 1000000;
    std::array<long, 8> bins{};
    Vec3 s1 = Vec3::Zero(), s2 = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
      const Vec3 e = (recoil_kick(beam, 1, mass, rng) - dv * beam.direction) / dv;
      bins[(e.x() > 0) + 2 * (e.y() > 0) + 4 * (e.z() > 0)]++;
      s1 += e;
      s2 += e.cwiseProduct(e);
    }
    double chi2 = 0.0;
    for (long c : bins) chi2 += (c - n / 8.0) * (c - n / 8.0) / (n / 8.0);
    check("emission octant chi^2 (7 dof)", chi2, 7.0, std::sqrt(14.0));
    for (int a = 0; a < 3; ++a) {
      check(fmt("emission <e_%c>", "xyz"[a]), s1[a] / n, 0.0, std::sqrt(1.0 / 3.0 / n));
      check(fmt("emission <e_%c^2>", "xyz"[a]), s2[a] / n, 1.0 / 3.0, std::sqrt(4.0 / 45.0 / n));
    }
  }
  {  // Metropolis equipartition for one ion: each quadratic term holds k T / 2
    const TrapConfig trap = TrapConfig::defaults();
    ThermalInitConfig init;
    init.temperature = 0.01;
    init.step = 1e-6;
    init.scans = 402000;
    init.seed = 404;
    const Vec3 k = trap.species.mass * std::pow(trap.axial_frequency(), 2) * confinement_coefficients(trap);
    const int batches = 200, burn = 2000, per = (init.scans - burn) / batches;
    std::vector<Vec3> batch(batches, Vec3::Zero());
    metropolis_positions(Positions::Zero(3, 1), trap, init, [&](const Positions& x, double, int scan) {
      if (scan < burn) return;
      const int b = (scan - burn) / per;
      if (b < batches) batch[b] += 0.5 * k.cwiseProduct(x.col(0).cwiseProduct(x.col(0))) / per;
    });
    const double half_kt = 0.5 * constants::boltzmann * init.temperature;
    for (int a = 0; a < 3; ++a) {
      double m = 0.0, v = 0.0;
      for (const auto& e : batch) m += e[a] / batches;
      for (const auto& e : batch) v += (e[a] - m) * (e[a] - m) / (batches - 1);
      check(fmt("Metropolis <k_%c x^2 / 2> (batch means)", "xyz"[a]), m, half_kt, std::sqrt(v / batches));
    }
  }
  return {ok, "MB moments, Poisson mean/variance, emission isotropy, Metropolis equipartition within 5 sigma"};
}

// ---------------------------------------------------------------------------------------
// 10. Bit-identical output for repeated deterministic runs.

Outcome determinism() {
  const json doc = {{"seed", 7},
                    {"init", {{"ions", 100}, {"thermal", {{"temperature_mK", 10.0}, {"scans", 200}}}}},
                    {"integration", {{"n_steps", 3000}, {"leaf_min", 16}}},
                    {"output", {{"diagnostic_stride", 300}, {"sample_stride", 20}}}};
  const RunConfig base = parse_config(doc);
  auto slurp = [](const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  std::vector<std::string> csv, sidecar;
  for (const auto& [tag, seed] : std::vector<std::pair<std::string, std::uint64_t>>{{"a", 7}, {"b", 7}, {"c", 8}}) {
    const fs::path out = scratch_dir("determinism_" + tag);
    cmd_simulate(with_overrides(base, seed, true), out);
    csv.push_back(slurp(out / "diagnostics.csv"));
    sidecar.push_back(slurp(out / "diagnostics.csv.json"));
  }
  const bool same = !csv[0].empty() && csv[0] == csv[1] && sidecar[0] == sidecar[1];
  const bool differs = csv[0] != csv[2];
  note(fmt("diagnostics.csv %zu bytes; runs a/b identical: %s; seed 8 differs: %s", csv[0].size(), same ? "yes" : "no",
           differs ? "yes" : "no"));
  return {same && differs, "two deterministic simulate runs give byte-identical diagnostics CSV and sidecar"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"FMM correctness", fmm_correctness},   {"FMM scaling", fmm_scaling},
      {"energy conservation", energy_conservation}, {"single-ion oracle", single_ion},
      {"equilibrium shape", equilibrium_shape}, {"mode diagnostics", mode_diagnostics},
      {"cooling", cooling},                   {"theory cross-check", theory_crosscheck},
      {"statistical suites", statistics},     {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  std::vector<std::string> lines;
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = int(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    std::printf("[%d] %s\n", id, criteria[k].first);
    std::fflush(stdout);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string line = fmt("%s %d %s: %s (%.0f s)", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                                 o.summary.c_str(), seconds_since(t0));
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    lines.push_back(line);
    all &= o.pass;
  }
  std::printf("\nsummary\n");
  for (const auto& l : lines) std::printf("%s\n", l.c_str());
  return all ? 0 : 1;
}
