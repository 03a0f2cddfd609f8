#pragma once

// SGD with heavy-ball momentum and optional minibatch gating.
//
//   v <- mu v - alpha g
//   w <- w + v
//
// An epoch ends after `iters_per_epoch` applied corrections. A minibatch the
// gate rejects leaves parameters and velocity untouched and is re-queued at
// the back of the batch pool, so it can be drawn again later.

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "srnreg/bptt.hpp"
#include "srnreg/model.hpp"
#include "srnreg/regularizer.hpp"
#include "srnreg/rng.hpp"
#include "srnreg/tasks.hpp"

namespace srnreg {

struct TrainConfig {
  double alpha = 3e-4;
  double mu = 0.9;
  std::size_t batch_size = 10;
  std::size_t epochs = 2000;
  std::size_t iters_per_epoch = 50;
  std::size_t n_hid = 100;
  std::size_t h = 0;  // 0 = full sequence length
  bool reg_enabled = true;
  RegConfig reg;
  double sigma = 0.01;
  SigmaKind sigma_kind = SigmaKind::Variance;
  std::uint64_t init_seed = 1;
  std::uint64_t data_seed = 1;
  std::uint64_t order_seed = 1;  // minibatch order
  std::size_t max_consecutive_rejects = 200;
  SplitSizes sizes;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  std::size_t depth(std::size_t T) const { return h == 0 ? T : h; }
};

struct TrainState {
  SrnParams params;
  Grads velocity;
  std::size_t iter = 0;   // minibatch draws so far
  std::size_t epoch = 0;  // completed epochs
  std::size_t corrections = 0;
  SrnParams best_params;
  double best_valid_accuracy = -1.0;
  std::size_t best_epoch = 0;
};

TrainState make_state(const SrnParams& initial);

/// Heavy-ball step on every block; returns the applied update.
Grads sgd_step(TrainState& state, const Grads& grads, const TrainConfig& cfg);

/// The recurrent update sgd_step would apply, without touching state.
Mat candidate_update(const TrainState& state, const Grads& grads, const TrainConfig& cfg);

/// Everything known about one minibatch draw.
struct IterationRecord {
  std::size_t iter = 0;
  std::size_t epoch = 0;  // 1-based epoch the draw belongs to
  double loss = 0.0;
  RegReport report;
  bool applied = false;
  bool forced = false;  // accepted by the starvation guard despite the gate
  double gnorm_in = 0.0, gnorm_rec = 0.0, gnorm_out = 0.0, gnorm_b = 0.0;
  // batch means of ||delta(T - n)|| at n = 0, h/2, h
  double delta_d0 = 0.0, delta_dmid = 0.0, delta_dh = 0.0;
  // statistics of a(k) over all hidden units and steps of the batch
  double act_mean = 0.0, act_median = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t corrections = 0;
  std::size_t draws = 0;
  double valid_accuracy = 0.0;
  double best_valid_accuracy = 0.0;
  bool starved = false;
};

class TrainObserver {
 public:
  virtual ~TrainObserver() = default;
  virtual void on_iteration(const IterationRecord&) {}
  virtual void on_epoch(const EpochRecord&) {}
  virtual void on_warning(const std::string&) {}
};

/// One gated SGD iteration on `batch`. When `force` is set the update is
/// applied even if the gate rejects it.
IterationRecord train_iteration(TrainState& state, const SequenceBatch& batch,
                                const TrainConfig& cfg, bool force = false);

/// Fraction of sequences whose output meets the task's success criterion.
double evaluate(const SrnParams& params, const SequenceBatch& batch);

/// Shuffled pool of minibatch index lists with re-queueing.
class BatchPool {
 public:
  BatchPool(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::size_t> next();
  void requeue(std::vector<std::size_t> idx) { queue_.push_back(std::move(idx)); }
  std::size_t pending() const { return queue_.size(); }

 private:
  void refill();

  std::size_t n_;
  std::size_t batch_size_;
  Rng rng_;
  std::deque<std::vector<std::size_t>> queue_;
};

struct TrainResult {
  double initial_valid_accuracy = 0.0;
  double best_valid_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t corrections = 0;
  std::size_t draws = 0;
  std::size_t rejects = 0;
  std::size_t forced = 0;
  SrnParams best_params;
  SrnParams final_params;
};

/// Full protocol on pre-generated splits, starting from `initial`.
TrainResult train(const TrainConfig& cfg, const Splits& data, const SrnParams& initial,
                  TrainObserver* observer = nullptr);

/// Generates splits and initial weights from the config seeds, then trains.
TrainResult train(const TrainConfig& cfg, const TaskSpec& spec, TrainObserver* observer = nullptr);

}  // namespace srnreg
