#include "penning/coulomb.hpp"

#include "kernels.hpp"
#include "penning/constants.hpp"
#include "penning/fmm.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace penning {

void ChargeSystem::validate() const {
  if (x.cols() < 1) throw Error("charge system must hold at least one charge");
  if (q.size() != x.cols()) throw Error("charge and position counts differ");
  if (!x.allFinite() || !q.allFinite()) throw Error("charge system contains non-finite entries");
}

ChargeSystem ChargeSystem::identical(const Positions& x, double charge) {
  return {x, Eigen::VectorXd::Constant(x.cols(), charge)};
}

namespace detail {

[[noreturn]] void throw_singular_pair(const Positions& x) {
  std::vector<Eigen::Index> order(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) order[i] = i;
  auto key = [&](Eigen::Index i) { return std::make_tuple(x(0, i), x(1, i), x(2, i)); };
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return key(a) < key(b); });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (key(order[k]) == key(order[k - 1])) {
      const auto i = std::min(order[k], order[k - 1]), j = std::max(order[k], order[k - 1]);
      throw Error("singular pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
  throw Error("singular pair");
}

}  // namespace detail

FieldResult direct_solve(const ChargeSystem& sys) {
  sys.validate();
  const std::size_t n = sys.size();
  std::vector<double> sx(n), sy(n), sz(n), sq(n);
  for (std::size_t i = 0; i < n; ++i) {
    sx[i] = sys.x(0, i);
    sy[i] = sys.x(1, i);
    sz[i] = sys.x(2, i);
    sq[i] = sys.q[i];
  }
  std::vector<double> phi(n, 0.0), gx(n, 0.0), gy(n, 0.0), gz(n, 0.0);
  const detail::SoaView all{sx.data(), sy.data(), sz.data(), sq.data(), n};
  constexpr std::size_t block = 32;
  const long nblocks = long((n + block - 1) / block);
  std::size_t zeros = 0;
#pragma omp parallel for schedule(static) reduction(+ : zeros)
  for (long b = 0; b < nblocks; ++b) {
    const std::size_t lo = std::size_t(b) * block, cnt = std::min(block, n - lo);
    zeros += detail::p2p(sx.data() + lo, sy.data() + lo, sz.data() + lo, cnt, all, phi.data() + lo,
                         gx.data() + lo, gy.data() + lo, gz.data() + lo);
  }
  if (zeros != n) detail::throw_singular_pair(sys.x);

  FieldResult r;
  r.phi.resize(n);
  r.E.resize(3, n);
  const double k = constants::coulomb;
  for (std::size_t i = 0; i < n; ++i) {
    r.phi[i] = k * phi[i];
    r.E(0, i) = k * gx[i];
    r.E(1, i) = k * gy[i];
    r.E(2, i) = k * gz[i];
  }
  return r;
}

double rel_error_pot(const FieldResult& approx, const FieldResult& reference) {
  if (approx.phi.size() != reference.phi.size()) throw Error("field results differ in size");
  const double denom = reference.phi.squaredNorm();
  if (denom == 0.0) throw Error("reference potential is identically zero");
  return std::sqrt((approx.phi - reference.phi).squaredNorm() / denom);
}

double rel_error_field(const FieldResult& approx, const FieldResult& reference) {
  if (approx.E.cols() != reference.E.cols()) throw Error("field results differ in size");
  const double denom = reference.E.squaredNorm();
  if (denom == 0.0) throw Error("reference field is identically zero");
  return std::sqrt((approx.E - reference.E).squaredNorm() / denom);
}

FieldResult coulomb_solve(const ChargeSystem& sys, const CoulombSettings& settings) {
  if (settings.method == CoulombMethod::Direct) return direct_solve(sys);
  FmmOptions opt;
  opt.epsilon = settings.epsilon;
  opt.leaf_min = settings.leaf_min;
  opt.max_depth = settings.max_depth;
  opt.deterministic = settings.deterministic;
  return fmm_solve(sys, opt);
}

}  // namespace penning
