#include "doctest.h"

#include "penning/constants.hpp"
#include "penning/equilibrium.hpp"
#include "penning/thermal.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>

using namespace penning;

namespace {

TrapConfig trap(double target_beta, double delta) {
  TrapConfig cfg = TrapConfig::defaults();
  cfg.wall_strength = delta;
  cfg.rotation_frequency = rotation_for_beta(cfg, target_beta);
  return cfg;
}

// asymptotic Kolmogorov survival function
double ks_pvalue(double d, std::size_t n) {
  const double l = (std::sqrt(double(n)) + 0.12 + 0.11 / std::sqrt(double(n))) * d;
  double p = 0.0;
  for (int k = 1; k < 100; ++k) p += 2.0 * ((k & 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * l * l);
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("thermal configuration validation") {
  ThermalInitConfig c;
  CHECK_NOTHROW(c.validate());
  c.temperature = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.step = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.scans = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("Maxwell-Boltzmann velocities") {
  const double m = IonSpecies::beryllium9().mass, T = 0.01;
  SplitMix64 rng(42);
  CHECK(sample_velocities(10, 0.0, m, rng).isZero(0.0));

  const Eigen::Index n = 1000000;
  const Velocities v = sample_velocities(n, T, m, rng);
  const double u = constants::boltzmann * T / m;
  const Eigen::ArrayXd speed = v.colwise().norm().transpose().array();
  const double mean = speed.mean();
  const double mean_expect = std::sqrt(8.0 * u / constants::pi);
  const double mean_sigma = std::sqrt((3.0 - 8.0 / constants::pi) * u / double(n));
  CHECK(std::abs(mean - mean_expect) < 5.0 * mean_sigma);

  const double v2 = speed.square().mean();
  const double v2_sigma = std::sqrt(6.0 * u * u / double(n));
  CHECK(std::abs(v2 - 3.0 * u) < 5.0 * v2_sigma);

  // isotropy: each component carries a third of <v^2>, mean direction vanishes
  for (int a = 0; a < 3; ++a) {
    CHECK(std::abs(v.row(a).squaredNorm() / double(n) - u) < 5.0 * std::sqrt(2.0 * u * u / double(n)));
    CHECK(std::abs(v.row(a).mean()) < 5.0 * std::sqrt(u / double(n)));
  }
}

TEST_CASE("thermal state maps rotating-frame velocities to the lab") {
  const TrapConfig cfg = trap(1.0, 0.01);
  Positions x(3, 2);
  x << 1e-5, -2e-5, 3e-6, 4e-6, 0, 1e-6;
  const IonState lab = thermal_state(x, Velocities::Zero(3, 2), 3e-7, cfg);
  const RotatingState back = to_rotating_frame(lab, cfg);
  CHECK((back.x - x).norm() < 1e-18);
  CHECK(back.v.norm() < 1e-9);
  for (int i = 0; i < 2; ++i) CHECK((lab.v.col(i) - corotation_velocity(lab.x.col(i), cfg)).norm() < 1e-9);
}

TEST_CASE("Metropolis at zero temperature only descends") {
  const TrapConfig cfg = trap(1.0, 0.01);
  MinimizeReport eq = find_equilibrium(30, cfg, 1, 0.0, 2);
  REQUIRE(eq.converged);
  Positions start = eq.x;
  SplitMix64 rng(9);
  for (Eigen::Index i = 0; i < start.cols(); ++i) start.col(i) += 5e-7 * random_unit_vector(rng);
  const CoulombSettings direct{CoulombMethod::Direct};
  const double e0 = rotating_energy(start, cfg, direct);

  ThermalInitConfig init;
  init.scans = 50;
  init.seed = 3;
  double previous = 0.0;
  bool monotone = true;
  const MetropolisReport r = metropolis_positions(start, cfg, init, [&](const Positions&, double de, int) {
    monotone = monotone && de <= previous;
    previous = de;
  });
  CHECK(monotone);
  CHECK(r.energy_change < 0.0);
  const double e1 = rotating_energy(r.x, cfg, direct);
  CHECK(e1 <= e0);
  CHECK(e1 - e0 == doctest::Approx(r.energy_change).epsilon(1e-6));
}

TEST_CASE("Metropolis samples the Boltzmann law for a single harmonic ion") {
  const TrapConfig cfg = trap(0.8, 0.1);
  ThermalInitConfig init;
  init.temperature = 0.01;
  init.step = 1e-6;
  init.scans = 2000000;
  init.seed = 17;
  const double kT = constants::boltzmann * init.temperature;
  std::vector<double> samples;
  samples.reserve(100000);
  const MetropolisReport r = metropolis_positions(Positions::Zero(3, 1), cfg, init, [&](const Positions&, double de, int scan) {
    if (scan >= 1000 && scan % 19 == 0) samples.push_back(de / kT);
  });
  CHECK(r.acceptance > 0.1);
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= double(samples.size());
  CHECK(mean == doctest::Approx(1.5).epsilon(0.05));

  std::sort(samples.begin(), samples.end());
  double d = 0.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const double cdf = boost::math::gamma_p(1.5, samples[k]);
    d = std::max({d, std::abs(cdf - double(k) / samples.size()), std::abs(cdf - double(k + 1) / samples.size())});
  }
  CHECK(ks_pvalue(d, samples.size()) > 0.01);
}

TEST_CASE("Metropolis initialisation reaches the target potential temperature") {
  const TrapConfig cfg = trap(1.0, 0.01);
  const MinimizeReport eq = find_equilibrium(100, cfg, 1, 0.0, 6);
  REQUIRE(eq.converged);
  ThermalInitConfig init;
  init.temperature = 0.01;
  init.seed = 1;
  const MetropolisReport r = metropolis_positions(eq.x, cfg, init);
  const CoulombSettings direct{CoulombMethod::Direct};
  TemperatureAccumulator acc(cfg, 100);
  acc.add_rotating(RotatingState{r.x, Velocities::Zero(3, 100)}, rotating_energy(r.x, cfg, direct), 0.0);
  const TemperatureReport t = acc.report(eq.energy);
  CHECK(t.potential == doctest::Approx(0.01).epsilon(0.25));
  CHECK_FALSE(t.negative_potential);
}

TEST_CASE("temperature estimators") {
  const TrapConfig cfg = trap(1.0, 0.01);
  const double m = cfg.species.mass;

  SUBCASE("rigidly rotating crystal at the reference is cold") {
    const MinimizeReport eq = find_equilibrium(20, cfg, 1, 0.0, 4);
    TemperatureAccumulator acc(cfg, 20);
    double lab_planar = 0.0;
    for (int k = 0; k < 5; ++k) {
      const double t = 1e-7 * k;
      const IonState lab = thermal_state(eq.x, Velocities::Zero(3, 20), t, cfg);
      acc.add(lab, eq.energy);
      lab_planar += m * lab.v.topRows<2>().squaredNorm() / (2 * 20 * constants::boltzmann) / 5;
    }
    const TemperatureReport r = acc.report(eq.energy);
    CHECK(lab_planar > 0.1);  // a lab-frame estimate would report a hot crystal
    CHECK(r.planar < 1e-12);
    CHECK(r.axial < 1e-12);
    CHECK(std::abs(r.potential) < 1e-12);
    CHECK(r.samples == 5);
    CHECK(r.window == doctest::Approx(4e-7));
  }
  SUBCASE("constant axial velocity") {
    TemperatureAccumulator acc(cfg, 1);
    const double vz = std::sqrt(constants::boltzmann * 1e-3 / m);
    for (int k = 0; k < 3; ++k)
      acc.add_rotating(RotatingState{Positions::Zero(3, 1), Velocities(Vec3(0, 0, vz))}, 0.0, k);
    const TemperatureReport r = acc.report(0.0);
    CHECK(r.axial == doctest::Approx(1e-3).epsilon(1e-12));
    CHECK(r.planar == 0.0);
  }
  SUBCASE("Maxwell-Boltzmann ensemble") {
    const int n = 1000;
    SplitMix64 rng(77);
    TemperatureAccumulator acc(cfg, n);
    for (int k = 0; k < 10; ++k)
      acc.add_rotating(RotatingState{Positions::Zero(3, n), sample_velocities(n, 0.01, m, rng)}, 0.0, k);
    const TemperatureReport r = acc.report(0.0);
    CHECK(r.axial == doctest::Approx(0.01).epsilon(0.1));
    CHECK(r.planar == doctest::Approx(0.01).epsilon(0.1));
    // no axis bias: difference within five standard errors
    const double se = 0.01 * std::sqrt(2.0 / (10.0 * n) + 1.0 / (10.0 * n));
    CHECK(std::abs(r.axial - r.planar) < 5 * se);
  }
  SUBCASE("configurations below the reference are flagged") {
    TemperatureAccumulator acc(cfg, 1);
    acc.add_rotating(RotatingState{Positions::Zero(3, 1), Velocities::Zero(3, 1)}, -1e-25, 0.0);
    acc.add_rotating(RotatingState{Positions::Ones(3, 1), Velocities::Zero(3, 1)}, 5e-25, 1.0);
    const TemperatureReport r = acc.report(0.0);
    CHECK(r.negative_potential);
    CHECK(acc.lowest_energy() == -1e-25);
    CHECK(acc.lowest_configuration().isZero(0.0));
  }
  CHECK_THROWS_AS(TemperatureAccumulator(cfg, 3).report(0.0), Error);
  TemperatureAccumulator acc(cfg, 2);
  CHECK_THROWS_AS(acc.add_rotating(RotatingState{Positions::Zero(3, 1), Velocities::Zero(3, 1)}, 0.0, 0.0), Error);
}

TEST_CASE("rms displacement") {
  DisplacementAccumulator still;
  Positions x = Positions::Random(3, 4) * 1e-5;
  for (int k = 0; k < 3; ++k) still.add(x);
  CHECK(still.rms().isZero(1e-20));

  DisplacementAccumulator orbit;
  const double r = 3e-7;
  const Vec3 centre(2e-5, -1e-5, 4e-6);
  for (int k = 0; k < 64; ++k) {
    const double a = constants::two_pi * k / 64;
    orbit.add(Positions(centre + r * Vec3(std::cos(a), std::sin(a), 0)));
  }
  CHECK(orbit.rms()[0] == doctest::Approx(r).epsilon(1e-9));
  CHECK_THROWS_AS(DisplacementAccumulator().rms(), Error);
}

TEST_CASE("trajectory error measures") {
  const Positions a = Positions::Random(3, 50) * 1e-5;
  CHECK(position_error(a, a) == 0.0);
  const Vec3 shift(1e-7, -2e-7, 5e-8);
  const Positions b = a.colwise() + shift;
  CHECK(position_error(b, a) == doctest::Approx(std::sqrt(50 * shift.squaredNorm() / a.squaredNorm())).epsilon(1e-12));
  CHECK(position_error(std::vector<Positions>{a, b}, std::vector<Positions>{a, a})[1] == doctest::Approx(position_error(b, a)));
  CHECK_THROWS_AS(position_error(a, Positions(a.leftCols(3))), Error);
  CHECK_THROWS_AS(position_error(std::vector<Positions>{a}, std::vector<Positions>{}), Error);

  const std::vector<double> e = energy_error({1.0, 2.0, -3.0}, {1.0, 1.0, -2.0});
  CHECK(e == std::vector<double>{0.0, 1.0, 0.5});
  CHECK_THROWS_AS(energy_error({1.0}, {0.0}), Error);

  CHECK(interparticle_spacing(4.0 / 3.0 * constants::pi * 1000.0, 1000) == doctest::Approx(1.0));
}
