#include "srnreg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace srnreg {

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
  if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("mu must be in [0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch must be >= 1");
  if (iters_per_epoch < 1) throw std::invalid_argument("iters must be >= 1");
  if (n_hid < 1) throw std::invalid_argument("hidden must be >= 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (max_consecutive_rejects < 1) throw std::invalid_argument("max-rejects must be >= 1");
  if (sizes.train < batch_size) throw std::invalid_argument("train size must be >= batch");
  if (sizes.valid < 1) throw std::invalid_argument("valid size must be >= 1");
  if (sizes.test < 1) throw std::invalid_argument("test size must be >= 1");
  RegConfig r = reg;
  r.h = std::max<std::size_t>(1, r.h);
  r.validate();
}

TrainState make_state(const SrnParams& initial) {
  TrainState s;
  s.params = initial;
  s.velocity = Grads::zeros_like(initial);
  s.best_params = initial;
  return s;
}

namespace {

void momentum_update(const Mat& v, const Mat& g, double mu, double alpha, Mat& out) {
  auto vs = v.span();
  auto gs = g.span();
  auto os = out.span();
  for (std::size_t i = 0; i < vs.size(); ++i) os[i] = mu * vs[i] - alpha * gs[i];
}

void momentum_update(const Vec& v, const Vec& g, double mu, double alpha, Vec& out) {
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = mu * v[i] - alpha * g[i];
}

}  // namespace

Mat candidate_update(const TrainState& state, const Grads& grads, const TrainConfig& cfg) {
  Mat dw(state.velocity.w_rec.rows(), state.velocity.w_rec.cols());
  momentum_update(state.velocity.w_rec, grads.w_rec, cfg.mu, cfg.alpha, dw);
  return dw;
}

Grads sgd_step(TrainState& state, const Grads& grads, const TrainConfig& cfg) {
  Grads next = Grads::zeros_like(state.params);
  momentum_update(state.velocity.w_in, grads.w_in, cfg.mu, cfg.alpha, next.w_in);
  momentum_update(state.velocity.w_rec, grads.w_rec, cfg.mu, cfg.alpha, next.w_rec);
  momentum_update(state.velocity.w_out, grads.w_out, cfg.mu, cfg.alpha, next.w_out);
  momentum_update(state.velocity.b, grads.b, cfg.mu, cfg.alpha, next.b);
  if (!all_finite(next)) {
    throw NumericalError("sgd_step: non-finite update at iteration " + std::to_string(state.iter));
  }
  SrnParams p = state.params;
  axpy(1.0, next.w_in, p.w_in);
  axpy(1.0, next.w_rec, p.w_rec);
  axpy(1.0, next.w_out, p.w_out);
  axpy(1.0, next.b, p.b);
  if (!all_finite(p.w_in.span()) || !all_finite(p.w_rec.span()) || !all_finite(p.w_out.span()) ||
      !all_finite(p.b.span())) {
    throw NumericalError("sgd_step: non-finite weights at iteration " + std::to_string(state.iter));
  }
  state.params = std::move(p);
  state.velocity = next;
  return next;
}

IterationRecord train_iteration(TrainState& state, const SequenceBatch& batch,
                                const TrainConfig& cfg, bool force) {
  const std::size_t h = cfg.depth(batch.spec.T);
  RegConfig reg = cfg.reg;
  reg.h = h;

  BatchPass pass = run_batch(state.params, batch, h);
  const Mat dw_rec = candidate_update(state, pass.mean_grads, cfg);

  IterationRecord rec;
  rec.iter = state.iter;
  rec.epoch = state.epoch + 1;
  rec.loss = pass.mean_loss;
  rec.report = evaluate_minibatch(pass, state.params, reg, dw_rec);
  rec.gnorm_in = norm2(pass.mean_grads.w_in);
  rec.gnorm_rec = norm2(pass.mean_grads.w_rec);
  rec.gnorm_out = norm2(pass.mean_grads.w_out);
  rec.gnorm_b = norm2(pass.mean_grads.b);

  const double inv_n = 1.0 / static_cast<double>(pass.results.size());
  std::vector<double> acts;
  acts.reserve(pass.results.size() * batch.spec.T * state.params.n_hid());
  for (std::size_t i = 0; i < pass.results.size(); ++i) {
    const auto& norms = pass.results[i].delta_norms;
    rec.delta_d0 += inv_n * norms[0];
    rec.delta_dmid += inv_n * norms[h / 2];
    rec.delta_dh += inv_n * norms[h];
    const ForwardTrace& tr = pass.traces[i];
    for (std::size_t k = 1; k <= tr.steps(); ++k) acts.insert(acts.end(), tr.a[k].begin(), tr.a[k].end());
  }
  if (!acts.empty()) {
    rec.act_mean = std::accumulate(acts.begin(), acts.end(), 0.0) / static_cast<double>(acts.size());
    const std::size_t mid = acts.size() / 2;
    std::nth_element(acts.begin(), acts.begin() + static_cast<std::ptrdiff_t>(mid), acts.end());
    double median = acts[mid];
    if (acts.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(acts.begin(), acts.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    rec.act_median = median;
  }

  const bool gate_ok = !cfg.reg_enabled || rec.report.decision == Decision::Accept;
  rec.forced = !gate_ok && force;
  rec.applied = gate_ok || force;
  if (rec.applied) {
    sgd_step(state, pass.mean_grads, cfg);
    ++state.corrections;
  }
  ++state.iter;
  return rec;
}

double evaluate(const SrnParams& params, const SequenceBatch& batch) {
  if (batch.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardTrace tr = forward(params, batch.inputs[i]);
    if (output_loss(tr, batch.targets[i], batch.spec.loss, batch.spec.success_tolerance).correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

BatchPool::BatchPool(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(batch_size), rng_(seed) {
  if (n == 0 || batch_size == 0) throw std::invalid_argument("BatchPool: empty pool");
}

void BatchPool::refill() {
  std::vector<std::size_t> perm(n_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n_ - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<std::int64_t>(i)));
    std::swap(perm[i], perm[j]);
  }
  for (std::size_t start = 0; start + batch_size_ <= n_; start += batch_size_) {
    queue_.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                        perm.begin() + static_cast<std::ptrdiff_t>(start + batch_size_));
  }
}

std::vector<std::size_t> BatchPool::next() {
  if (queue_.empty()) refill();
  std::vector<std::size_t> idx = std::move(queue_.front());
  queue_.pop_front();
  return idx;
}

TrainResult train(const TrainConfig& cfg, const Splits& data, const SrnParams& initial,
                  TrainObserver* observer) {
  cfg.validate();
  const std::size_t T = data.train.spec.T;
  if (cfg.depth(T) > T) {
    throw std::invalid_argument("h=" + std::to_string(cfg.h) + " exceeds T=" + std::to_string(T));
  }
  TrainState state = make_state(initial);
  TrainResult result;

  result.initial_valid_accuracy = evaluate(state.params, data.valid);
  state.best_valid_accuracy = result.initial_valid_accuracy;
  state.best_params = state.params;

  BatchPool pool(data.train.size(), cfg.batch_size, cfg.order_seed);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    EpochRecord er;
    er.epoch = e + 1;
    std::size_t consecutive = 0;
    while (er.corrections < cfg.iters_per_epoch) {
      std::vector<std::size_t> idx = pool.next();
      const bool force = consecutive >= cfg.max_consecutive_rejects;
      IterationRecord rec;
      try {
        rec = train_iteration(state, data.train.select(idx), cfg, force);
      } catch (const NumericalError& e) {
        const std::string what = e.what();
        if (what.find("iteration") != std::string::npos) throw;
        throw NumericalError(what + " (iteration " + std::to_string(state.iter) + ", epoch " +
                             std::to_string(er.epoch) + ")");
      }
      ++er.draws;
      if (rec.forced) {
        er.starved = true;
        ++result.forced;
        if (observer) {
          observer->on_warning("starvation: " + std::to_string(consecutive) +
                               " consecutive rejects in epoch " + std::to_string(er.epoch) +
                               ", forced iteration " + std::to_string(rec.iter) + ", epoch ends with " +
                               std::to_string(er.corrections + 1) + " of " +
                               std::to_string(cfg.iters_per_epoch) + " corrections");
        }
      }
      if (rec.applied) {
        ++er.corrections;
        consecutive = 0;
      } else {
        ++consecutive;
        ++result.rejects;
        pool.requeue(std::move(idx));
      }
      if (observer) observer->on_iteration(rec);
      // a starved epoch ends after its fallback update
      if (rec.forced) break;
    }
    ++state.epoch;
    er.valid_accuracy = evaluate(state.params, data.valid);
    if (er.valid_accuracy > state.best_valid_accuracy) {
      state.best_valid_accuracy = er.valid_accuracy;
      state.best_params = state.params;
      state.best_epoch = state.epoch;
    }
    er.best_valid_accuracy = state.best_valid_accuracy;
    if (observer) observer->on_epoch(er);
  }

  result.best_valid_accuracy = state.best_valid_accuracy;
  result.best_epoch = state.best_epoch;
  result.test_accuracy = evaluate(state.best_params, data.test);
  result.corrections = state.corrections;
  result.draws = state.iter;
  result.best_params = std::move(state.best_params);
  result.final_params = std::move(state.params);
  return result;
}

TrainResult train(const TrainConfig& cfg, const TaskSpec& spec, TrainObserver* observer) {
  cfg.validate();
  const Splits data = make_splits(spec, cfg.data_seed, cfg.sizes);
  const SrnParams initial = init_gaussian(spec.n_in, cfg.n_hid, spec.n_out, cfg.sigma, cfg.init_seed,
                                          spec.output, cfg.sigma_kind);
  return train(cfg, data, initial, observer);
}

}  // namespace srnreg
