#include "srnreg/regularizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "srnreg/io.hpp"

namespace srnreg {

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Accept: return "accept";
    case Decision::RejectLargeDs: return "reject_large_ds";
    case Decision::RejectQDirection: return "reject_q_direction";
  }
  return "?";
}

Decision parse_decision(std::string_view s) {
  if (s == "accept") return Decision::Accept;
  if (s == "reject_large_ds") return Decision::RejectLargeDs;
  if (s == "reject_q_direction") return Decision::RejectQDirection;
  throw ParseError("unknown decision '" + std::string(s) + "'");
}

std::string to_string(QOrientation o) {
  return o == QOrientation::DeepOverTop ? "deep_over_top" : "top_over_deep";
}

QOrientation parse_q_orientation(std::string_view s) {
  if (s == "deep_over_top") return QOrientation::DeepOverTop;
  if (s == "top_over_deep") return QOrientation::TopOverDeep;
  throw ParseError("unknown q orientation '" + std::string(s) + "' (expected deep_over_top|top_over_deep)");
}

std::string to_string(R0Mode m) { return m == R0Mode::Relative ? "relative" : "absolute"; }

R0Mode parse_r0_mode(std::string_view s) {
  if (s == "relative") return R0Mode::Relative;
  if (s == "absolute") return R0Mode::Absolute;
  throw ParseError("unknown r0 mode '" + std::string(s) + "' (expected relative|absolute)");
}

void RegConfig::validate() const {
  if (!(q_min < q_max)) throw std::invalid_argument("qmin must be < qmax");
  if (!(r0 > 0.0)) throw std::invalid_argument("r0 must be > 0");
  if (h < 1) throw std::invalid_argument("h must be >= 1");
}

namespace {

void check_common(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top,
                  std::size_t h) {
  if (delta_top.size() != params.n_hid()) {
    throw DimensionError("regularizer: delta_top length " + std::to_string(delta_top.size()) +
                         " vs n_hid " + std::to_string(params.n_hid()));
  }
  if (h > trace.steps()) {
    throw std::invalid_argument("regularizer: h=" + std::to_string(h) + " exceeds T=" +
                                std::to_string(trace.steps()));
  }
}

}  // namespace

GdG compute_g_dg(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top,
                 const Mat& dw_rec, std::size_t h) {
  check_common(params, trace, delta_top, h);
  if (dw_rec.rows() != params.w_rec.rows() || dw_rec.cols() != params.w_rec.cols()) {
    throw DimensionError("compute_dg: dw_rec " + shape_str(dw_rec) + " vs w_rec " +
                         shape_str(params.w_rec));
  }
  // Column-vector products w v are evaluated as v^T w^T (row form).
  const std::size_t T = trace.steps();
  const Mat w_t = transpose(params.w_rec);
  const Mat dw_t = transpose(dw_rec);
  Vec v = delta_top;
  Vec dv(v.size());
  for (std::size_t n = 1; n <= h; ++n) {
    const Vec& d = trace.fprime[T - n];
    Vec next_dv = row_vec_mat(dv, w_t);
    axpy(1.0, row_vec_mat(v, dw_t), next_dv);
    dv = hadamard(next_dv, d);
    v = hadamard(row_vec_mat(v, w_t), d);
  }
  return {std::move(v), std::move(dv)};
}

Vec compute_g(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top, std::size_t h) {
  check_common(params, trace, delta_top, h);
  const std::size_t T = trace.steps();
  Vec v = delta_top;
  for (std::size_t n = 1; n <= h; ++n) v = hadamard(trace.fprime[T - n], mat_vec(params.w_rec, v));
  return v;
}

Vec compute_dg(const SrnParams& params, const ForwardTrace& trace, const Vec& delta_top,
               const Mat& dw_rec, std::size_t h) {
  if (h < 1) throw std::invalid_argument("compute_dg: h must be >= 1");
  return compute_g_dg(params, trace, delta_top, dw_rec, h).dg;
}

double q_factor(double norm_top, double norm_deep) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!(norm_deep > 0.0)) return inf;
  if (!(norm_top > 0.0)) return -inf;
  return std::log10(norm_top / norm_deep);
}

Decision gate(double dS, double q, double r0, double q_min, double q_max) {
  if (!(std::abs(dS) <= r0)) return Decision::RejectLargeDs;
  if (q >= q_min && q <= q_max) return Decision::Accept;
  if ((q < q_min && dS > 0.0) || (q > q_max && dS < 0.0)) return Decision::Accept;
  return Decision::RejectQDirection;
}

Decision gate(double dS, double q, const RegConfig& cfg, double S) {
  return gate(dS, q, cfg.threshold(S), cfg.q_min, cfg.q_max);
}

BatchPass run_batch(const SrnParams& params, const SequenceBatch& batch, std::size_t h) {
  if (batch.size() == 0) throw std::invalid_argument("run_batch: empty batch");
  BatchPass pass;
  pass.mean_grads = Grads::zeros_like(params);
  pass.traces.reserve(batch.size());
  pass.losses.reserve(batch.size());
  pass.results.reserve(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardTrace tr = forward(params, batch.inputs[i]);
    LossResult lr = output_loss(tr, batch.targets[i], batch.spec.loss, batch.spec.success_tolerance);
    BpttResult br = backward(params, tr, lr.output_delta, BpttConfig{h});
    axpy(inv_n, br.grads, pass.mean_grads);
    pass.mean_loss += inv_n * lr.loss;
    if (lr.correct) ++pass.correct;
    pass.traces.push_back(std::move(tr));
    pass.losses.push_back(std::move(lr));
    pass.results.push_back(std::move(br));
  }
  return pass;
}

RegReport evaluate_minibatch(const BatchPass& pass, const SrnParams& params, const RegConfig& cfg,
                             const Mat& candidate_dw_rec) {
  const std::size_t n = pass.traces.size();
  if (n == 0) throw std::invalid_argument("evaluate_minibatch: empty batch");
  const std::size_t h = cfg.h;
  const double inv_n = 1.0 / static_cast<double>(n);
  RegReport r;
  r.g = Vec(params.n_hid());
  r.dg = Vec(params.n_hid());
  for (std::size_t i = 0; i < n; ++i) {
    const BpttResult& br = pass.results[i];
    if (br.deltas.size() <= h) {
      throw std::invalid_argument("evaluate_minibatch: batch pass computed depth " +
                                  std::to_string(br.deltas.size() - 1) + " < h=" + std::to_string(h));
    }
    r.norm_top += inv_n * br.delta_norms[0];
    r.norm_deep += inv_n * br.delta_norms[h];
    GdG gd = compute_g_dg(params, pass.traces[i], br.deltas[0], candidate_dw_rec, h);
    axpy(inv_n, gd.g, r.g);
    axpy(inv_n, gd.dg, r.dg);
  }
  r.S = 0.5 * dot(r.g, r.g);
  r.dS = dot(r.g, r.dg);
  r.q = q_factor(r.norm_top, r.norm_deep);
  r.r0 = cfg.threshold(r.S);
  r.decision = gate(r.dS, cfg.gate_q(r.q), cfg, r.S);
  return r;
}

RegReport evaluate_minibatch(const SrnParams& params, const SequenceBatch& batch,
                             const RegConfig& cfg, const Mat& candidate_dw_rec) {
  return evaluate_minibatch(run_batch(params, batch, cfg.h), params, cfg, candidate_dw_rec);
}

}  // namespace srnreg
