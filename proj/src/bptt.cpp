#include "srnreg/bptt.hpp"

#include <string>

namespace srnreg {

Grads Grads::zeros_like(const SrnParams& p) {
  return Grads{Mat(p.w_in.rows(), p.w_in.cols()), Mat(p.w_rec.rows(), p.w_rec.cols()),
               Mat(p.w_out.rows(), p.w_out.cols()), Vec(p.b.size())};
}

void axpy(double alpha, const Grads& x, Grads& y) {
  axpy(alpha, x.w_in, y.w_in);
  axpy(alpha, x.w_rec, y.w_rec);
  axpy(alpha, x.w_out, y.w_out);
  axpy(alpha, x.b, y.b);
}

void scale(Grads& g, double s) {
  for (Mat* m : {&g.w_in, &g.w_rec, &g.w_out})
    for (double& x : m->span()) x *= s;
  for (double& x : g.b) x *= s;
}

bool all_finite(const Grads& g) {
  return all_finite(g.w_in.span()) && all_finite(g.w_rec.span()) && all_finite(g.w_out.span()) &&
         all_finite(g.b.span());
}

Mat jacobian(const SrnParams& params, const Vec& fprime_n) {
  return scale_cols_by(transpose(params.w_rec), fprime_n);
}

BpttResult backward(const SrnParams& params, const ForwardTrace& trace, const Vec& output_delta,
                    BpttConfig cfg) {
  const std::size_t T = trace.steps();
  if (cfg.h < 1 || cfg.h > T) {
    throw std::invalid_argument("backward: truncation depth h=" + std::to_string(cfg.h) +
                                " outside [1, T=" + std::to_string(T) + "]");
  }
  if (output_delta.size() != params.n_out()) {
    throw DimensionError("backward: output_delta length " + std::to_string(output_delta.size()) +
                         " vs n_out " + std::to_string(params.n_out()));
  }

  BpttResult r;
  r.grads = Grads::zeros_like(params);
  r.deltas.reserve(cfg.h + 1);

  add_outer(1.0, trace.z[T], output_delta, r.grads.w_out);

  // delta w_rec^T diag(f') is evaluated as (delta w_rec^T) * f' without forming the Jacobian.
  const Mat w_rec_t = transpose(params.w_rec);
  Vec delta = hadamard(mat_vec(params.w_out, output_delta), trace.fprime[T]);
  for (std::size_t n = 0; n <= cfg.h; ++n) {
    const std::size_t step = T - n;
    if (n > 0) delta = hadamard(row_vec_mat(delta, w_rec_t), trace.fprime[step]);
    if (!all_finite(delta.span())) {
      throw NumericalError("backward: non-finite delta at depth " + std::to_string(n));
    }
    const double dn = norm2(delta);
    r.delta_norms.push_back(dn);
    if (step >= 1) {
      add_outer(1.0, trace.u[step], delta, r.grads.w_in);
      add_outer(1.0, trace.z[step - 1], delta, r.grads.w_rec);
      axpy(1.0, delta, r.grads.b);
      r.gw_in_norms.push_back(norm2(trace.u[step]) * dn);
      r.gw_rec_norms.push_back(norm2(trace.z[step - 1]) * dn);
    } else {
      r.gw_in_norms.push_back(0.0);
      r.gw_rec_norms.push_back(0.0);
    }
    r.deltas.push_back(delta);
  }
  return r;
}

std::vector<std::pair<std::size_t, double>> delta_norm_profile(const BpttResult& result) {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(result.delta_norms.size());
  for (std::size_t n = 0; n < result.delta_norms.size(); ++n) out.emplace_back(n, result.delta_norms[n]);
  return out;
}

}  // namespace srnreg
