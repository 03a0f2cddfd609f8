#pragma once

// Truncated backpropagation through time for the sequence-to-one SRN.
//
// Deltas are row vectors, delta(k) = dE/da(k). With T the final step:
//
//   delta(T)   = (output_delta w_out^T) * f'(a(T))
//   delta(T-n) = delta(T-n+1) w_rec^T diag(f'(a(T-n)))     n = 1..h
//
// deltas[n] holds delta(T-n). When h == T the deepest entry is the delta at
// the initial state (step 0), which carries no weight gradient.

#include <cstddef>
#include <utility>
#include <vector>

#include "srnreg/linalg.hpp"
#include "srnreg/model.hpp"

namespace srnreg {

/// One array per parameter block, shaped like SrnParams.
struct Grads {
  Mat w_in;
  Mat w_rec;
  Mat w_out;
  Vec b;

  static Grads zeros_like(const SrnParams& p);
  bool operator==(const Grads&) const = default;
};

void axpy(double alpha, const Grads& x, Grads& y);
void scale(Grads& g, double s);
bool all_finite(const Grads& g);

struct BpttConfig {
  std::size_t h = 1;  // truncation depth, 1 <= h <= T
};

struct BpttResult {
  std::vector<Vec> deltas;          // deltas[n] = delta(T - n), n = 0..h
  Grads grads;
  std::vector<double> delta_norms;  // ||deltas[n]||
  // Frobenius norms of the per-step contributions to dE/dw_in and dE/dw_rec.
  std::vector<double> gw_in_norms;
  std::vector<double> gw_rec_norms;
};

/// Recurrent Jacobian as used by the row-vector recursion: w_rec^T diag(fprime).
Mat jacobian(const SrnParams& params, const Vec& fprime_n);

BpttResult backward(const SrnParams& params, const ForwardTrace& trace, const Vec& output_delta,
                    BpttConfig cfg);

std::vector<std::pair<std::size_t, double>> delta_norm_profile(const BpttResult& result);

}  // namespace srnreg
