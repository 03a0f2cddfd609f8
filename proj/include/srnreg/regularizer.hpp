#pragma once

// Sampling-based gradient-norm regularization.
//
// For a truncation depth h let S(w_rec) = 1/2 ||delta(T-h)||^2 where the deep
// delta is the product
//
//   g = delta(T-h)^T = D_{T-h} w_rec D_{T-h+1} w_rec ... D_{T-1} w_rec delta(T)^T
//
// with D_n = diag(f'(a(n))). The first-order change of S along a recurrent
// correction dw_rec is dS = (g, dg), where dg is the same product summed over
// the h ways of replacing one w_rec factor by dw_rec. D_n and delta(T) are held
// at their current values: dS is the derivative of the product with respect to
// its explicit w_rec factors.
//
// A minibatch is used for training or skipped according to dS and the
// Q-factor Q = log10(||delta(T)|| / ||delta(T-h)||):
//
//   |dS| > r0                                   -> RejectLargeDs
//   q in [q_min, q_max]                         -> Accept
//   (q < q_min and dS > 0) or (q > q_max and dS < 0) -> Accept
//   otherwise                                   -> RejectQDirection
//
// where q is the gate input (see QOrientation).

#include <cstddef>
#include <string>
#include <vector>

#include "srnreg/bptt.hpp"
#include "srnreg/linalg.hpp"
#include "srnreg/model.hpp"
#include "srnreg/tasks.hpp"

namespace srnreg {

enum class Decision { Accept, RejectLargeDs, RejectQDirection };

std::string to_string(Decision d);
Decision parse_decision(std::string_view s);

/// Which log-ratio is handed to the gate.
///
/// TopOverDeep feeds Q = log10(||delta(T)|| / ||delta(T-h)||) unchanged. With
/// that orientation a vanishing deep gradient gives q > q_max, and the gate
/// then only accepts dS < 0, shrinking the deep gradient further.
/// DeepOverTop feeds -Q, so q < q_min means the deep gradient has vanished and
/// only norm-increasing (dS > 0) batches pass. This is the default.
enum class QOrientation { DeepOverTop, TopOverDeep };

std::string to_string(QOrientation o);
QOrientation parse_q_orientation(std::string_view s);

/// r0 is either absolute or a multiple of the current S.
enum class R0Mode { Relative, Absolute };

std::string to_string(R0Mode m);
R0Mode parse_r0_mode(std::string_view s);

struct RegConfig {
  double q_min = -1.0;
  double q_max = 1.0;
  double r0 = 0.5;
  R0Mode r0_mode = R0Mode::Relative;
  std::size_t h = 1;
  QOrientation orientation = QOrientation::DeepOverTop;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double threshold(double S) const { return r0_mode == R0Mode::Relative ? r0 * S : r0; }
  double gate_q(double q) const { return orientation == QOrientation::DeepOverTop ? -q : q; }
};

struct RegReport {
  Vec g;
  Vec dg;
  double dS = 0.0;
  double S = 0.0;
  double q = 0.0;          // log10(||delta(T)|| / ||delta(T-h)||), batch-mean norms
  double norm_top = 0.0;   // mean ||delta(T)||
  double norm_deep = 0.0;  // mean ||delta(T-h)||
  double r0 = 0.0;         // threshold actually applied
  Decision decision = Decision::Accept;
};

/// g = delta(T-h)^T from the product form. h = 0 returns delta_top.
Vec compute_g(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top, std::size_t h);

/// Directional differential of g along dw_rec (h >= 1).
Vec compute_dg(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top,
               const Mat& dw_rec, std::size_t h);

struct GdG {
  Vec g;
  Vec dg;
};
/// Both vectors in one forward-mode sweep over the trace.
GdG compute_g_dg(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top,
                 const Mat& dw_rec, std::size_t h);

/// log10(norm_top / norm_deep). A zero deep norm gives +inf and a zero top
/// norm -inf (both zero: +inf); never NaN.
double q_factor(double norm_top, double norm_deep);

/// Pure gate on the gate-oriented q. A NaN dS is treated as too large.
Decision gate(double dS, double q, double r0, double q_min, double q_max);
Decision gate(double dS, double q, const RegConfig& cfg, double S);

/// Forward + backward for every sequence of a minibatch.
struct BatchPass {
  std::vector<ForwardTrace> traces;
  std::vector<LossResult> losses;
  std::vector<BpttResult> results;
  Grads mean_grads;
  double mean_loss = 0.0;
  std::size_t correct = 0;
};

BatchPass run_batch(const SrnParams& params, const SequenceBatch& batch, std::size_t h);

RegReport evaluate_minibatch(const BatchPass& pass, const SrnParams& params, const RegConfig& cfg,
                             const Mat& candidate_dw_rec);
RegReport evaluate_minibatch(const SrnParams& params, const SequenceBatch& batch,
                             const RegConfig& cfg, const Mat& candidate_dw_rec);

}  // namespace srnreg
