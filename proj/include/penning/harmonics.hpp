#pragma once

// Low-level solid-harmonic kernels shared by the expansion API and the FMM.
//
// Coefficients live in the factorial-scaled basis
//   R_n^m(x) = r^n P_n^m(cos t) e^{i m p} / (n+m)!
//   I_n^m(x) = (n-m)! P_n^m(cos t) e^{i m p} / r^{n+1}
// (Condon-Shortley phase), for which
//   1/|x - a| = sum_{n,m} conj(R_n^m(a)) I_n^m(x),   |a| < |x|.
// Only m >= 0 is stored; X_n^{-m} = (-1)^m conj(X_n^m) for real charges.

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <vector>

namespace penning::harmonics {

using cplx = std::complex<double>;

inline int coeff_count(int p) { return (p + 1) * (p + 2) / 2; }
inline int idx(int n, int m) { return n * (n + 1) / 2 + m; }

/// R_n^m(x) for 0 <= m <= n <= p.
void regular(const Eigen::Vector3d& x, int p, cplx* out);
/// I_n^m(x) for 0 <= m <= n <= p. x must be non-zero.
void irregular(const Eigen::Vector3d& x, int p, cplx* out);

/// Full-m accessor honouring the conjugate symmetry.
inline cplx get(const cplx* c, int n, int m) {
  if (m >= 0) return c[idx(n, m)];
  const cplx v = std::conj(c[idx(n, -m)]);
  return (m & 1) ? -v : v;
}

/// Wigner small-d matrix d^l(beta), indices m, m' in [-l, l] shifted by l.
Eigen::MatrixXd wigner_d(int l, double beta);

/// Precomputed rotations taking a vector with polar angle theta onto +z and back, for
/// multipole- and local-type coefficients. Shared through a process-wide cache.
class AxisRotation {
 public:
  enum Kind { MultipoleForward = 0, MultipoleBack = 1, LocalForward = 2, LocalBack = 3 };

  AxisRotation(int p, double theta);
  static std::shared_ptr<const AxisRotation> get(int p, double theta);

  int order() const { return p_; }
  /// out = rotated(in) for coefficients up to order p (no azimuthal phase).
  void apply(Kind kind, const cplx* in, cplx* out) const;
  /// Same map on a batch stored coefficient-major: row idx(n, m) holds `cols` values, real
  /// and imaginary parts in separate arrays.
  void apply_batch(Kind kind, const double* re_in, const double* im_in, double* re_out,
                   double* im_out, int cols) const;

 private:
  int p_;
  // per kind, per l: real block (l+1)^2 then imaginary block l^2
  std::vector<double> blocks_[4];
  std::vector<int> offset_;
};

/// Direction of a shift vector: polar angle theta and the azimuthal phase.
struct Direction {
  double length = 0.0;
  double theta = 0.0;
  double cos_phi = 1.0;
  double sin_phi = 0.0;
};
Direction direction_of(const Eigen::Vector3d& v);

/// Scratch space for the shift operators (sized for order p).
struct Workspace {
  explicit Workspace(int p = 0) { resize(p); }
  void resize(int p);
  std::vector<cplx> a, b, phase;
  std::vector<double> table;
};

// All operators accumulate into their output.

/// M += q conj R(rel), rel = source - center.
void p2m(const Eigen::Vector3d& rel, double q, int p, cplx* M, Workspace& ws);
/// L += q conj I(rel), rel = source - center.
void p2l(const Eigen::Vector3d& rel, double q, int p, cplx* L, Workspace& ws);

/// Parent multipole += translated child multipole; shift = child center - parent center.
void m2m(const cplx* M, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot = nullptr);
/// Local += converted multipole; shift = target center - source center.
void m2l(const cplx* M, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot = nullptr);
/// Child local += translated parent local; shift = child center - parent center.
void l2l(const cplx* L, const Eigen::Vector3d& shift, int p, cplx* out, Workspace& ws,
         const AxisRotation* rot = nullptr);

/// Potential of a multipole expansion at rel = target - center, and its gradient.
double m2p(const cplx* M, const Eigen::Vector3d& rel, int p, Eigen::Vector3d* grad,
           Workspace& ws);
/// Potential of a local expansion at rel = target - center, and its gradient.
double l2p(const cplx* L, const Eigen::Vector3d& rel, int p, Eigen::Vector3d* grad,
           Workspace& ws);

/// sqrt((n+m)! (n-m)!), the factor between the scaled and Racah-normalised bases.
double racah_factor(int n, int m);

}  // namespace penning::harmonics
