#include "penning/harmonics.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>
#include <map>
#include <mutex>

namespace penning::harmonics {

void regular(const Eigen::Vector3d& x, int p, cplx* out) {
  const double z = x.z();
  const double r2 = x.squaredNorm();
  const cplx w(x.x(), x.y());
  out[0] = 1.0;
  for (int m = 0; m <= p; ++m) {
    if (m > 0) out[idx(m, m)] = -w / (2.0 * m) * out[idx(m - 1, m - 1)];
    if (m + 1 <= p) out[idx(m + 1, m)] = z * out[idx(m, m)];
    for (int n = m + 2; n <= p; ++n) {
      out[idx(n, m)] = ((2.0 * n - 1.0) * z * out[idx(n - 1, m)] - r2 * out[idx(n - 2, m)]) /
                       double(n * n - m * m);
    }
  }
}

void irregular(const Eigen::Vector3d& x, int p, cplx* out) {
  const double z = x.z();
  const double inv_r2 = 1.0 / x.squaredNorm();
  const cplx w(x.x(), x.y());
  out[0] = std::sqrt(inv_r2);
  for (int m = 0; m <= p; ++m) {
    if (m > 0) out[idx(m, m)] = -(2.0 * m - 1.0) * inv_r2 * w * out[idx(m - 1, m - 1)];
    if (m + 1 <= p) out[idx(m + 1, m)] = (2.0 * m + 1.0) * z * inv_r2 * out[idx(m, m)];
    for (int n = m + 2; n <= p; ++n) {
      out[idx(n, m)] = ((2.0 * n - 1.0) * z * out[idx(n - 1, m)] -
                        double((n + m - 1) * (n - m - 1)) * out[idx(n - 2, m)]) *
                       inv_r2;
    }
  }
}

double racah_factor(int n, int m) {
  return std::exp(0.5L * (std::lgamma(static_cast<long double>(n + m + 1)) +
                          std::lgamma(static_cast<long double>(n - m + 1))));
}

Eigen::MatrixXd wigner_d(int l, double beta) {
  const int dim = 2 * l + 1;
  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(dim, dim);
  const double ll = double(l) * (l + 1);
  for (int m = -l; m <= l; ++m) {
    const int i = m + l;
    if (m + 1 <= l) gen(i + 1, i) = -0.5 * beta * std::sqrt(ll - double(m) * (m + 1));
    if (m - 1 >= -l) gen(i - 1, i) = 0.5 * beta * std::sqrt(ll - double(m) * (m - 1));
  }
  return gen.exp();
}

AxisRotation::AxisRotation(int p, double theta) : p_(p) {
  offset_.resize(p + 2);
  offset_[0] = 0;
  for (int l = 0; l <= p; ++l) offset_[l + 1] = offset_[l] + (l + 1) * (l + 1) + l * l;
  for (auto& b : blocks_) b.assign(offset_[p + 1], 0.0);

  for (int l = 0; l <= p; ++l) {
    const Eigen::MatrixXd d_fwd = wigner_d(l, -theta);
    const Eigen::MatrixXd d_back = d_fwd.transpose();
    Eigen::VectorXd norm(l + 1);
    for (int m = 0; m <= l; ++m) norm[m] = racah_factor(l, m);

    for (int kind = 0; kind < 4; ++kind) {
      const Eigen::MatrixXd& d = (kind == MultipoleForward || kind == LocalForward) ? d_fwd : d_back;
      const bool multipole = kind == MultipoleForward || kind == MultipoleBack;
      // element (m, m') of N^-1 d N (multipole) or N d N^-1 (local)
      auto t = [&](int m, int mp) {
        const double scale = multipole ? norm[std::abs(mp)] / norm[m] : norm[m] / norm[std::abs(mp)];
        return d(m + l, mp + l) * scale;
      };
      double* re = blocks_[kind].data() + offset_[l];
      double* im = re + (l + 1) * (l + 1);
      for (int m = 0; m <= l; ++m) {
        re[m * (l + 1)] = t(m, 0);
        for (int mp = 1; mp <= l; ++mp) {
          const double sign = (mp & 1) ? -1.0 : 1.0;
          re[m * (l + 1) + mp] = t(m, mp) + sign * t(m, -mp);
          if (m >= 1) im[(m - 1) * l + (mp - 1)] = t(m, mp) - sign * t(m, -mp);
        }
      }
    }
  }
}

std::shared_ptr<const AxisRotation> AxisRotation::get(int p, double theta) {
  static std::mutex mutex;
  static std::map<std::pair<int, std::uint64_t>, std::shared_ptr<const AxisRotation>> cache;
  const auto key = std::make_pair(p, std::bit_cast<std::uint64_t>(theta));
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto rot = std::make_shared<const AxisRotation>(p, theta);
  cache.emplace(key, rot);
  return rot;
}

void AxisRotation::apply(Kind kind, const cplx* in, cplx* out) const {
  const std::vector<double>& blocks = blocks_[kind];
  for (int l = 0; l <= p_; ++l) {
    const double* re = blocks.data() + offset_[l];
    const double* im = re + (l + 1) * (l + 1);
    const cplx* x = in + idx(l, 0);
    cplx* y = out + idx(l, 0);
    for (int m = 0; m <= l; ++m) {
      double sr = 0.0;
      const double* row = re + m * (l + 1);
      for (int mp = 0; mp <= l; ++mp) sr += row[mp] * x[mp].real();
      double si = 0.0;
      if (m >= 1) {
        const double* irow = im + (m - 1) * l;
        for (int mp = 1; mp <= l; ++mp) si += irow[mp - 1] * x[mp].imag();
      }
      y[m] = cplx(sr, si);
    }
  }
}

void AxisRotation::apply_batch(Kind kind, const double* re_in, const double* im_in,
                               double* re_out, double* im_out, int cols) const {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const std::vector<double>& blocks = blocks_[kind];
  for (int l = 0; l <= p_; ++l) {
    const double* re = blocks.data() + offset_[l];
    const double* im = re + (l + 1) * (l + 1);
    const std::ptrdiff_t row = std::ptrdiff_t(idx(l, 0)) * cols;
    Eigen::Map<const RowMat> P(re, l + 1, l + 1);
    Eigen::Map<RowMat>(re_out + row, l + 1, cols).noalias() =
        P * Eigen::Map<const RowMat>(re_in + row, l + 1, cols);
    std::fill(im_out + row, im_out + row + cols, 0.0);
    if (l == 0) continue;
    Eigen::Map<const RowMat> Q(im, l, l);
    Eigen::Map<RowMat>(im_out + row + cols, l, cols).noalias() =
        Q * Eigen::Map<const RowMat>(im_in + row + cols, l, cols);
  }
}

Direction direction_of(const Eigen::Vector3d& v) {
  Direction d;
  const double rho = std::hypot(v.x(), v.y());
  d.length = std::hypot(rho, v.z());
  d.theta = std::atan2(rho, v.z());
  if (rho > 0.0) {
    d.cos_phi = v.x() / rho;
    d.sin_phi = v.y() / rho;
  }
  return d;
}

void Workspace::resize(int p) {
  const std::size_t n = coeff_count(p + 1);
  if (a.size() < n) {
    a.resize(n);
    b.resize(n);
  }
  if (phase.size() < std::size_t(p + 2)) phase.resize(p + 2);
  if (table.size() < std::size_t(2 * p + 2)) table.resize(2 * p + 2);
}

void p2m(const Eigen::Vector3d& rel, double q, int p, cplx* M, Workspace& ws) {
  ws.resize(p);
  regular(rel, p, ws.a.data());
  const int count = coeff_count(p);
  for (int i = 0; i < count; ++i) M[i] += q * std::conj(ws.a[i]);
}

void p2l(const Eigen::Vector3d& rel, double q, int p, cplx* L, Workspace& ws) {
  ws.resize(p);
  irregular(rel, p, ws.a.data());
  const int count = coeff_count(p);
  for (int i = 0; i < count; ++i) L[i] += q * std::conj(ws.a[i]);
}

namespace {

void fill_phase(const Direction& dir, int p, cplx* phase) {
  const cplx e(dir.cos_phi, dir.sin_phi);
  phase[0] = 1.0;
  for (int m = 1; m <= p; ++m) phase[m] = phase[m - 1] * e;
}

// a[n,m] = in[n,m] e^{i m phi}
void rotate_z_forward(const cplx* in, const cplx* phase, int p, cplx* a) {
  for (int n = 0; n <= p; ++n)
    for (int m = 0; m <= n; ++m) a[idx(n, m)] = in[idx(n, m)] * phase[m];
}

// out[n,m] += b[n,m] e^{-i m phi}
void rotate_z_back_add(const cplx* b, const cplx* phase, int p, cplx* out) {
  for (int n = 0; n <= p; ++n)
    for (int m = 0; m <= n; ++m) out[idx(n, m)] += b[idx(n, m)] * std::conj(phase[m]);
}

const AxisRotation& rotation_for(const Direction& dir, int p, const AxisRotation* rot,
                                 std::shared_ptr<const AxisRotation>& hold) {
  if (rot && rot->order() == p) return *rot;
  hold = AxisRotation::get(p, dir.theta);
  return *hold;
}

}  // namespace

void m2m(const cplx* M, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot) {
  ws.resize(p);
  const Direction dir = direction_of(shift);
  std::shared_ptr<const AxisRotation> hold;
  const AxisRotation& r = rotation_for(dir, p, rot, hold);
  fill_phase(dir, p, ws.phase.data());
  rotate_z_forward(M, ws.phase.data(), p, ws.a.data());
  r.apply(AxisRotation::MultipoleForward, ws.a.data(), ws.b.data());

  double* power = ws.table.data();  // t^a / a!
  power[0] = 1.0;
  for (int a = 1; a <= p; ++a) power[a] = power[a - 1] * dir.length / a;
  cplx* shifted = ws.a.data();
  for (int n = 0; n <= p; ++n)
    for (int m = 0; m <= n; ++m) {
      cplx s = 0.0;
      for (int a = 0; a <= n - m; ++a) s += ws.b[idx(n - a, m)] * power[a];
      shifted[idx(n, m)] = s;
    }
  r.apply(AxisRotation::MultipoleBack, shifted, ws.b.data());
  rotate_z_back_add(ws.b.data(), ws.phase.data(), p, out);
}

void m2l(const cplx* M, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot) {
  ws.resize(p);
  const Direction dir = direction_of(shift);
  std::shared_ptr<const AxisRotation> hold;
  const AxisRotation& r = rotation_for(dir, p, rot, hold);
  fill_phase(dir, p, ws.phase.data());
  rotate_z_forward(M, ws.phase.data(), p, ws.a.data());
  r.apply(AxisRotation::MultipoleForward, ws.a.data(), ws.b.data());

  double* fact = ws.table.data();  // k! / d^{k+1}
  const double inv_d = 1.0 / dir.length;
  fact[0] = inv_d;
  for (int k = 1; k <= 2 * p; ++k) fact[k] = fact[k - 1] * k * inv_d;
  cplx* local = ws.a.data();
  for (int j = 0; j <= p; ++j)
    for (int k = 0; k <= j; ++k) {
      cplx s = 0.0;
      for (int n = k; n <= p; ++n) s += ws.b[idx(n, k)] * fact[n + j];
      local[idx(j, k)] = ((j + k) & 1) ? -s : s;
    }
  r.apply(AxisRotation::LocalBack, local, ws.b.data());
  rotate_z_back_add(ws.b.data(), ws.phase.data(), p, out);
}

void l2l(const cplx* L, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot) {
  ws.resize(p);
  const Direction dir = direction_of(shift);
  std::shared_ptr<const AxisRotation> hold;
  const AxisRotation& r = rotation_for(dir, p, rot, hold);
  fill_phase(dir, p, ws.phase.data());
  rotate_z_forward(L, ws.phase.data(), p, ws.a.data());
  r.apply(AxisRotation::LocalForward, ws.a.data(), ws.b.data());

  double* power = ws.table.data();
  power[0] = 1.0;
  for (int a = 1; a <= p; ++a) power[a] = power[a - 1] * dir.length / a;
  cplx* shifted = ws.a.data();
  for (int j = 0; j <= p; ++j)
    for (int k = 0; k <= j; ++k) {
      cplx s = 0.0;
      for (int a = 0; a <= p - j; ++a) s += ws.b[idx(j + a, k)] * power[a];
      shifted[idx(j, k)] = s;
    }
  r.apply(AxisRotation::LocalBack, shifted, ws.b.data());
  rotate_z_back_add(ws.b.data(), ws.phase.data(), p, out);
}

double l2p(const cplx* L, const Eigen::Vector3d& rel, int p, Eigen::Vector3d* grad,
           Workspace& ws) {
  ws.resize(p);
  cplx* R = ws.a.data();
  regular(rel, p, R);
  double phi = 0.0;
  for (int n = 0; n <= p; ++n) {
    double s = (L[idx(n, 0)] * R[idx(n, 0)]).real();
    for (int m = 1; m <= n; ++m) s += 2.0 * (L[idx(n, m)] * R[idx(n, m)]).real();
    phi += s;
  }
  if (grad) {
    double dz = 0.0;
    cplx g = 0.0;
    for (int n = 0; n < p; ++n) {
      dz += (L[idx(n + 1, 0)] * R[idx(n, 0)]).real();
      for (int m = 1; m <= n; ++m) dz += 2.0 * (L[idx(n + 1, m)] * R[idx(n, m)]).real();
      for (int m = 1; m <= n; ++m) g += L[idx(n + 1, m - 1)] * R[idx(n, m)];
      for (int k = 0; k <= n; ++k) g -= std::conj(L[idx(n + 1, k + 1)] * R[idx(n, k)]);
    }
    *grad = Eigen::Vector3d(g.real(), g.imag(), dz);
  }
  return phi;
}

double m2p(const cplx* M, const Eigen::Vector3d& rel, int p, Eigen::Vector3d* grad,
           Workspace& ws) {
  ws.resize(p);
  cplx* I = ws.a.data();
  irregular(rel, p + 1, I);
  double phi = 0.0;
  for (int n = 0; n <= p; ++n) {
    double s = (M[idx(n, 0)] * I[idx(n, 0)]).real();
    for (int m = 1; m <= n; ++m) s += 2.0 * (M[idx(n, m)] * I[idx(n, m)]).real();
    phi += s;
  }
  if (grad) {
    double dz = 0.0;
    cplx g = 0.0;
    for (int n = 0; n <= p; ++n) {
      dz -= (M[idx(n, 0)] * I[idx(n + 1, 0)]).real();
      for (int m = 1; m <= n; ++m) dz -= 2.0 * (M[idx(n, m)] * I[idx(n + 1, m)]).real();
      for (int m = 0; m <= n; ++m) g += M[idx(n, m)] * I[idx(n + 1, m + 1)];
      for (int k = 1; k <= n; ++k) g -= std::conj(M[idx(n, k)] * I[idx(n + 1, k - 1)]);
    }
    *grad = Eigen::Vector3d(g.real(), g.imag(), dz);
  }
  return phi;
}

}  // namespace penning::harmonics
