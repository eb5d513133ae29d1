#pragma once

#include <cstddef>

namespace penning::detail {

/// Structure-of-arrays view of charges.
struct SoaView {
  const double* x;
  const double* y;
  const double* z;
  const double* q;
  std::size_t n;
};

/// Accumulates phi_i += sum_j q_j / r_ij and g_i += sum_j q_j (x_i - x_j) / r_ij^3 for every
/// target i. Pairs at zero distance are skipped and counted; the count is returned.
std::size_t p2p(const double* tx, const double* ty, const double* tz, std::size_t nt,
                const SoaView& src, double* phi, double* gx, double* gy, double* gz);

}  // namespace penning::detail
