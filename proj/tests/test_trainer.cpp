#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "srnreg/diagnostics.hpp"
#include "srnreg/trainer.hpp"
#include "support.hpp"

using namespace srnreg;
using namespace srnreg::testing;

namespace {

Grads filled(const SrnParams& p, double x) {
  Grads g = Grads::zeros_like(p);
  for (Mat* m : {&g.w_in, &g.w_rec, &g.w_out})
    for (double& v : m->span()) v = x;
  for (double& v : g.b) v = x;
  return g;
}

TrainConfig small_config() {
  TrainConfig c;
  c.alpha = 1e-2;
  c.batch_size = 5;
  c.epochs = 3;
  c.iters_per_epoch = 4;
  c.n_hid = 6;
  c.sigma = 0.05;
  c.sizes = {100, 40, 60};
  return c;
}

struct Collect : TrainObserver {
  std::vector<IterationRecord> iters;
  std::vector<EpochRecord> epochs;
  std::vector<std::string> warnings;
  void on_iteration(const IterationRecord& r) override { iters.push_back(r); }
  void on_epoch(const EpochRecord& r) override { epochs.push_back(r); }
  void on_warning(const std::string& w) override { warnings.push_back(w); }
};

}  // namespace

TEST(SgdStep, PlainSgdWithoutMomentum) {
  SrnParams p = make_zero_params(1, 1, 1, OutputActivation::Linear);
  TrainState s = make_state(p);
  TrainConfig c;
  c.mu = 0.0;
  c.alpha = 0.25;
  Grads dw = sgd_step(s, filled(p, 2.0), c);
  EXPECT_EQ(dw.w_rec(0, 0), -0.5);
  EXPECT_EQ(s.params.w_in(0, 0), -0.5);
  EXPECT_EQ(s.params.b[0], -0.5);
}

TEST(SgdStep, TwoHandComputedSteps) {
  SrnParams p = make_zero_params(1, 1, 1, OutputActivation::Linear);
  TrainState s = make_state(p);
  TrainConfig c;
  c.alpha = 0.1;
  c.mu = 0.9;
  Grads one = filled(p, 1.0);
  EXPECT_DOUBLE_EQ(sgd_step(s, one, c).w_rec(0, 0), -0.1);
  EXPECT_DOUBLE_EQ(sgd_step(s, one, c).w_rec(0, 0), -0.19);
  EXPECT_DOUBLE_EQ(s.params.w_rec(0, 0), -0.29);
  EXPECT_DOUBLE_EQ(s.velocity.w_out(0, 0), -0.19);
}

TEST(SgdStep, VelocityDecaysGeometrically) {
  SrnParams p = make_zero_params(1, 1, 1, OutputActivation::Linear);
  TrainState s = make_state(p);
  TrainConfig c;
  c.alpha = 1.0;
  c.mu = 0.5;
  sgd_step(s, filled(p, 1.0), c);
  Grads zero = filled(p, 0.0);
  for (int k = 1; k <= 5; ++k) {
    sgd_step(s, zero, c);
    EXPECT_DOUBLE_EQ(s.velocity.w_rec(0, 0), -std::pow(0.5, k));
  }
}

TEST(SgdStep, NonFiniteUpdateNamesIteration) {
  SrnParams p = make_zero_params(1, 1, 1, OutputActivation::Linear);
  TrainState s = make_state(p);
  s.iter = 17;
  TrainConfig c;
  try {
    sgd_step(s, filled(p, std::nan("")), c);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("17"), std::string::npos);
  }
  EXPECT_EQ(s.params, p);
}

TEST(CandidateUpdate, MatchesSgdStepWithoutMutation) {
  Rng rng(1);
  SrnParams p = random_params(rng, 2, 3, 1, 0.5, OutputActivation::Linear);
  TrainState s = make_state(p);
  TrainConfig c;
  c.alpha = 0.05;
  Grads g = Grads::zeros_like(p);
  g.w_rec = random_mat(rng, 3, 3, 1.0);
  sgd_step(s, g, c);  // non-zero velocity
  g.w_rec = random_mat(rng, 3, 3, 1.0);
  const TrainState before = s;
  Mat cand = candidate_update(s, g, c);
  EXPECT_EQ(s.params, before.params);
  EXPECT_EQ(s.velocity, before.velocity);
  EXPECT_EQ(cand, sgd_step(s, g, c).w_rec);
}

TEST(TrainIteration, RegDisabledAlwaysApplies) {
  SequenceBatch data = gen_adding(12, 30, 1);
  TrainConfig c = small_config();
  c.reg_enabled = false;
  c.reg.r0_mode = R0Mode::Absolute;
  c.reg.r0 = 1e-300;  // would reject everything if consulted
  TrainState s = make_state(init_gaussian(2, 6, 1, 0.05, 2, OutputActivation::Linear, SigmaKind::Variance));
  for (std::size_t k = 0; k < 5; ++k) {
    IterationRecord r = train_iteration(s, data.select({k, k + 5, k + 10}), c);
    EXPECT_TRUE(r.applied);
    EXPECT_FALSE(r.forced);
  }
  EXPECT_EQ(s.corrections, 5u);
  EXPECT_EQ(s.iter, 5u);
}

TEST(TrainIteration, RejectionLeavesStateBitIdentical) {
  SequenceBatch data = gen_adding(12, 10, 3);
  TrainConfig c = small_config();
  c.reg.r0_mode = R0Mode::Absolute;
  c.reg.r0 = 1e-300;
  TrainState s = make_state(init_gaussian(2, 6, 1, 0.05, 2, OutputActivation::Linear, SigmaKind::Variance));
  sgd_step(s, filled(s.params, 0.1), c);  // make the candidate momentum-dependent
  const TrainState before = s;
  IterationRecord r = train_iteration(s, data.select({0, 1, 2}), c);
  ASSERT_EQ(r.report.decision, Decision::RejectLargeDs);
  EXPECT_FALSE(r.applied);
  EXPECT_EQ(s.params, before.params);
  EXPECT_EQ(s.velocity, before.velocity);
  EXPECT_EQ(s.corrections, before.corrections);
  EXPECT_EQ(s.iter, before.iter + 1);
}

TEST(TrainIteration, ForcedAcceptEqualsSgdOracle) {
  SequenceBatch data = gen_adding(12, 10, 3);
  TrainConfig c = small_config();
  c.reg.r0_mode = R0Mode::Absolute;
  c.reg.r0 = 1e-300;
  TrainState s = make_state(init_gaussian(2, 6, 1, 0.05, 2, OutputActivation::Linear, SigmaKind::Variance));
  SequenceBatch b = data.select({4, 5, 6});
  TrainState oracle = s;
  BatchPass pass = run_batch(s.params, b, c.depth(12));
  sgd_step(oracle, pass.mean_grads, c);
  IterationRecord r = train_iteration(s, b, c, true);
  EXPECT_TRUE(r.applied);
  EXPECT_TRUE(r.forced);
  EXPECT_EQ(s.params, oracle.params);
  EXPECT_EQ(s.velocity, oracle.velocity);
}

TEST(TrainIteration, RecordCarriesDiagnostics) {
  SequenceBatch data = gen_temporal_order(20, 10, 4, 2);
  TrainConfig c = small_config();
  c.h = 10;
  TrainState s = make_state(init_gaussian(6, 6, 4, 0.05, 2, OutputActivation::Softmax, SigmaKind::Variance));
  SequenceBatch b = data.select({0, 1});
  BatchPass pass = run_batch(s.params, b, 10);
  IterationRecord r = train_iteration(s, b, c);
  EXPECT_EQ(r.report.decision, gate(r.report.dS, c.reg.gate_q(r.report.q), c.reg, r.report.S));
  EXPECT_DOUBLE_EQ(r.delta_d0, 0.5 * (pass.results[0].delta_norms[0] + pass.results[1].delta_norms[0]));
  EXPECT_DOUBLE_EQ(r.delta_dmid, 0.5 * (pass.results[0].delta_norms[5] + pass.results[1].delta_norms[5]));
  EXPECT_DOUBLE_EQ(r.delta_dh, 0.5 * (pass.results[0].delta_norms[10] + pass.results[1].delta_norms[10]));
  EXPECT_EQ(r.report.norm_top, r.delta_d0);
  EXPECT_DOUBLE_EQ(r.loss, pass.mean_loss);
  EXPECT_DOUBLE_EQ(r.gnorm_rec, norm2(pass.mean_grads.w_rec));
  std::vector<double> acts;
  for (const auto& tr : pass.traces)
    for (std::size_t k = 1; k <= 20; ++k) acts.insert(acts.end(), tr.a[k].begin(), tr.a[k].end());
  std::sort(acts.begin(), acts.end());
  EXPECT_DOUBLE_EQ(r.act_median, 0.5 * (acts[acts.size() / 2 - 1] + acts[acts.size() / 2]));
  double mean = 0.0;
  for (double a : acts) mean += a;
  EXPECT_NEAR(r.act_mean, mean / acts.size(), 1e-15);
}

TEST(Evaluate, PerfectAndConstantPredictors) {
  SrnParams p = init_gaussian(6, 5, 4, 0.5, 3, OutputActivation::Softmax);
  SequenceBatch b = gen_temporal_order(20, 200, 5, 2);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const Vec y = forward(p, b.inputs[i]).y;
    b.targets[i] = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  }
  EXPECT_EQ(evaluate(p, b), 1.0);

  SrnParams zero = make_zero_params(6, 5, 4, OutputActivation::Softmax);
  SequenceBatch big = gen_temporal_order(20, 20000, 6, 2);
  const double acc = evaluate(zero, big);
  EXPECT_NEAR(acc, 0.25, 3.0 * std::sqrt(0.25 * 0.75 / 20000));

  SrnParams untrained = init_gaussian(2, 10, 1, 0.01, 7, OutputActivation::Linear, SigmaKind::Variance);
  EXPECT_LT(evaluate(untrained, gen_adding(50, 2000, 8)), 0.05);
}

TEST(BatchPool, CoversEveryIndexAndRequeuesAtBack) {
  BatchPool pool(23, 5, 1);
  std::set<std::size_t> seen;
  std::vector<std::size_t> first = pool.next();
  for (std::size_t i : first) seen.insert(i);
  EXPECT_EQ(pool.pending(), 3u);  // partial final chunk dropped
  pool.requeue(first);
  for (int k = 0; k < 3; ++k)
    for (std::size_t i : pool.next()) seen.insert(i);
  EXPECT_EQ(pool.next(), first);
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_THROW(BatchPool(0, 1, 1), std::invalid_argument);
}

TEST(Train, ZeroEpochsReturnsInitialAccuracies) {
  TrainConfig c = small_config();
  c.epochs = 0;
  TaskSpec spec = make_task_spec(TaskKind::TemporalOrder, 20);
  Splits d = make_splits(spec, 1, c.sizes);
  SrnParams init = init_gaussian(6, 6, 4, 0.05, 2, OutputActivation::Softmax, SigmaKind::Variance);
  TrainResult r = train(c, d, init);
  EXPECT_EQ(r.initial_valid_accuracy, evaluate(init, d.valid));
  EXPECT_EQ(r.best_valid_accuracy, r.initial_valid_accuracy);
  EXPECT_EQ(r.test_accuracy, evaluate(init, d.test));
  EXPECT_EQ(r.best_params, init);
  EXPECT_EQ(r.draws, 0u);
}

TEST(Train, EpochAccountingAndDeterminism) {
  TrainConfig c = small_config();
  TaskSpec spec = make_task_spec(TaskKind::TemporalOrder, 20);
  Collect a, b;
  TrainResult ra = train(c, spec, &a);
  TrainResult rb = train(c, spec, &b);
  EXPECT_EQ(ra.final_params, rb.final_params);
  EXPECT_EQ(ra.test_accuracy, rb.test_accuracy);
  ASSERT_EQ(a.epochs.size(), 3u);
  std::size_t applied = 0;
  for (const auto& r : a.iters) applied += r.applied;
  EXPECT_EQ(applied, ra.corrections);
  EXPECT_EQ(ra.corrections, 12u);
  EXPECT_EQ(a.iters.size(), ra.draws);
  EXPECT_EQ(ra.draws, ra.corrections + ra.rejects);
  double best = -1.0;
  for (const auto& e : a.epochs) {
    EXPECT_EQ(e.corrections, 4u);
    EXPECT_GE(e.best_valid_accuracy, best);
    best = e.best_valid_accuracy;
  }
  for (std::size_t i = 0; i < a.iters.size(); ++i) EXPECT_EQ(a.iters[i].iter, i);
}

TEST(Train, StarvationForcesOneUpdateAndEndsTheEpoch) {
  TrainConfig c = small_config();
  c.epochs = 2;
  c.iters_per_epoch = 2;
  c.max_consecutive_rejects = 3;
  c.reg.r0_mode = R0Mode::Absolute;
  c.reg.r0 = 1e-300;  // every draw is rejected
  Collect obs;
  TrainResult r = train(c, make_task_spec(TaskKind::Adding, 12), &obs);
  // per epoch: 3 rejects, 1 fallback update, then the epoch ends short
  EXPECT_EQ(r.corrections, 2u);
  EXPECT_EQ(r.forced, 2u);
  EXPECT_EQ(r.rejects, 6u);
  EXPECT_EQ(r.draws, 8u);
  ASSERT_EQ(obs.epochs.size(), 2u);
  for (const EpochRecord& e : obs.epochs) {
    EXPECT_TRUE(e.starved);
    EXPECT_EQ(e.corrections, 1u);
    EXPECT_EQ(e.draws, 4u);
  }
  EXPECT_TRUE(obs.iters[3].forced);
  EXPECT_TRUE(obs.iters[3].applied);
  EXPECT_FALSE(obs.iters[4].applied);
  ASSERT_EQ(obs.warnings.size(), 2u);
  EXPECT_NE(obs.warnings[0].find("starvation"), std::string::npos);
  EXPECT_NE(obs.warnings[0].find("1 of 2 corrections"), std::string::npos) << obs.warnings[0];
}

TEST(Train, ConfigValidationNamesField) {
  auto msg = [](TrainConfig c) {
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  TrainConfig c;
  EXPECT_EQ(msg(c), "");
  c.alpha = 0;
  EXPECT_NE(msg(c).find("alpha"), std::string::npos);
  c = TrainConfig{};
  c.mu = 1.0;
  EXPECT_NE(msg(c).find("mu"), std::string::npos);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_NE(msg(c).find("batch"), std::string::npos);
  c = TrainConfig{};
  c.reg.q_max = -2;
  EXPECT_NE(msg(c).find("qmin"), std::string::npos);
  c = TrainConfig{};
  c.h = 30;
  EXPECT_THROW(train(c, make_task_spec(TaskKind::Adding, 20)), std::invalid_argument);
}

TEST(Train, GateAuditOverMetricsLog) {
  auto dir = scratch_dir("audit");
  TrainConfig c = small_config();
  c.epochs = 4;
  c.alpha = 0.05;
  c.h = 15;
  {
    MetricsRecorder m(dir / "metrics.csv", dir / "epochs.csv");
    train(c, make_task_spec(TaskKind::TemporalOrder, 20), &m);
  }
  GateAudit a = audit_gate_log(dir / "metrics.csv", c.reg);
  EXPECT_GT(a.rows, 0u);
  EXPECT_GT(a.accepts, 0u);
  EXPECT_EQ(a.violations, 0u);
  RegConfig other = c.reg;
  other.orientation = QOrientation::TopOverDeep;
  EXPECT_GT(audit_gate_log(dir / "metrics.csv", other).violations, 0u);
}
