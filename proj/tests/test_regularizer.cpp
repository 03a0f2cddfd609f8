#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "srnreg/regularizer.hpp"

using namespace srnreg;
using namespace srnreg::testing;

namespace {

struct Case {
  SrnParams p;
  ForwardTrace tr;
  BpttResult br;
};

Case make_case(Rng& rng, std::size_t n_hid, std::size_t T, double scale) {
  Case c;
  c.p = random_params(rng, 2, n_hid, 2, scale, OutputActivation::Linear);
  c.tr = forward(c.p, random_seq(rng, T, 2));
  LossResult lr = output_loss(c.tr, random_target(rng, c.p), LossKind::Mse, 0.04);
  c.br = backward(c.p, c.tr, lr.output_delta, BpttConfig{T});
  return c;
}

void expect_vec_near(const Vec& a, const Vec& b, double rel) {
  ASSERT_EQ(a.size(), b.size());
  const double scale = std::max(norm2(a), norm2(b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(std::abs(a[i] - b[i]), rel * scale) << i;
}

}  // namespace

TEST(ComputeG, EmptyProductIsTopDelta) {
  Rng rng(1);
  Case c = make_case(rng, 4, 6, 0.7);
  EXPECT_EQ(compute_g(c.p, c.tr, c.br.deltas[0], 0), c.br.deltas[0]);
}

TEST(ComputeG, SeveredRecurrenceGivesZero) {
  Rng rng(2);
  Case c = make_case(rng, 4, 6, 0.7);
  c.p.w_rec = Mat(4, 4);
  EXPECT_EQ(compute_g(c.p, c.tr, c.br.deltas[0], 3), Vec(4));
}

TEST(ComputeG, EqualsBpttDeltaAtDepth) {
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    Case c = make_case(rng, 5, 10, 0.9);
    for (std::size_t h = 1; h <= 10; ++h) {
      expect_vec_near(compute_g(c.p, c.tr, c.br.deltas[0], h), c.br.deltas[h], 1e-12);
      expect_vec_near(compute_g_dg(c.p, c.tr, c.br.deltas[0], Mat(5, 5), h).g, c.br.deltas[h], 1e-12);
    }
  }
}

TEST(ComputeG, MatchesExplicitProduct) {
  Rng rng(4);
  Case c = make_case(rng, 4, 7, 0.8);
  for (std::size_t h = 1; h <= 7; ++h)
    expect_vec_near(compute_g(c.p, c.tr, c.br.deltas[0], h), g_oracle(c.p.w_rec, c.tr, c.br.deltas[0], h), 1e-12);
}

TEST(ComputeDg, ZeroDirectionAndSingleTerm) {
  Rng rng(5);
  Case c = make_case(rng, 4, 6, 0.8);
  const Vec& top = c.br.deltas[0];
  EXPECT_EQ(compute_dg(c.p, c.tr, top, Mat(4, 4), 4), Vec(4));
  Mat dw = random_mat(rng, 4, 4, 1.0);
  // h = 1: the single factor D w_rec with w_rec replaced by dw
  Vec one = hadamard(c.tr.fprime[5], mat_vec(dw, top));
  expect_vec_near(compute_dg(c.p, c.tr, top, dw, 1), one, 1e-14);
  EXPECT_THROW(compute_dg(c.p, c.tr, top, dw, 0), std::invalid_argument);
  EXPECT_THROW(compute_dg(c.p, c.tr, top, Mat(3, 4), 2), DimensionError);
  EXPECT_THROW(compute_g(c.p, c.tr, top, 7), std::invalid_argument);
  EXPECT_THROW(compute_g(c.p, c.tr, Vec(3), 1), DimensionError);
}

TEST(ComputeDg, MatchesLiteralSum) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Case c = make_case(rng, 4, 8, 0.8);
    Mat dw = random_mat(rng, 4, 4, 1.0);
    for (std::size_t h : {1u, 2u, 5u, 8u}) {
      expect_vec_near(compute_dg(c.p, c.tr, c.br.deltas[0], dw, h),
                      dg_oracle(c.p.w_rec, dw, c.tr, c.br.deltas[0], h), 1e-12);
    }
  }
}

TEST(ComputeDg, LinearInDirection) {
  Rng rng(7);
  Case c = make_case(rng, 5, 9, 0.8);
  const Vec& top = c.br.deltas[0];
  Mat d1 = random_mat(rng, 5, 5, 1.0), d2 = random_mat(rng, 5, 5, 1.0);
  const double a = 0.7, b = -2.3;
  Vec lhs = compute_dg(c.p, c.tr, top, a * d1 + b * d2, 9);
  Vec rhs = a * compute_dg(c.p, c.tr, top, d1, 9) + b * compute_dg(c.p, c.tr, top, d2, 9);
  expect_vec_near(lhs, rhs, 1e-10);
}

TEST(DsExactness, DotMatchesFrozenCentralDifference) {
  Rng rng(8);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto n_hid = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const auto T = static_cast<std::size_t>(rng.uniform_int(2, 10));
    const auto h = static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(T)));
    Case c = make_case(rng, n_hid, T, 0.9);
    Mat dw = random_mat(rng, n_hid, n_hid, 1.0);
    GdG gd = compute_g_dg(c.p, c.tr, c.br.deltas[0], dw, h);
    const double dS = dot(gd.g, gd.dg);
    const double fd = frozen_fd_dS(c.p.w_rec, dw, c.tr, c.br.deltas[0], h, 1e-6);
    worst = std::max(worst, rel_err(dS, fd, 1e-300));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(QFactor, Examples) {
  EXPECT_EQ(q_factor(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(q_factor(1.0, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(q_factor(1e-3, 1.0), -3.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(q_factor(1.0, 0.0), inf);
  EXPECT_EQ(q_factor(0.0, 1.0), -inf);
  EXPECT_FALSE(std::isnan(q_factor(0.0, 0.0)));
  EXPECT_FALSE(std::isnan(q_factor(-1.0, 2.0)));
}

TEST(Gate, PaperExamples) {
  const double r0 = 1.0;
  EXPECT_EQ(gate(0.5, 0.5, r0, -1, 1), Decision::Accept);
  EXPECT_EQ(gate(0.5, -2, r0, -1, 1), Decision::Accept);
  EXPECT_EQ(gate(-0.5, -2, r0, -1, 1), Decision::RejectQDirection);
  for (double q : {-5.0, -1.0, 0.0, 0.3, 1.0, 5.0}) {
    EXPECT_EQ(gate(2 * r0, q, r0, -1, 1), Decision::RejectLargeDs);
    EXPECT_EQ(gate(-2 * r0, q, r0, -1, 1), Decision::RejectLargeDs);
  }
  EXPECT_EQ(gate(std::nan(""), 0.0, r0, -1, 1), Decision::RejectLargeDs);
}

TEST(Gate, ExhaustiveGrid) {
  const double eps = 1e-9, r0 = 0.25, qmin = -1, qmax = 1;
  int n = 0;
  for (double base : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (double off : {-eps, 0.0, eps}) {
      const double q = base + off;
      const int region = q < qmin ? -1 : (q > qmax ? 1 : 0);
      for (double sign : {-1.0, 0.0, 1.0}) {
        for (double mag : {0.5 * r0, r0, 2.0 * r0}) {
          const double dS = sign * mag;
          Decision want;
          if (std::abs(dS) > r0) {
            want = Decision::RejectLargeDs;
          } else if (region == 0) {
            want = Decision::Accept;
          } else if (region == -1) {
            want = sign > 0 ? Decision::Accept : Decision::RejectQDirection;
          } else {
            want = sign < 0 ? Decision::Accept : Decision::RejectQDirection;
          }
          EXPECT_EQ(gate(dS, q, r0, qmin, qmax), want) << "q=" << q << " dS=" << dS;
          ++n;
        }
      }
    }
  }
  EXPECT_EQ(n, 135);
}

TEST(Gate, InfiniteQIsOutOfRange) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(gate(0.1, -inf, 1.0, -1, 1), Decision::Accept);
  EXPECT_EQ(gate(-0.1, -inf, 1.0, -1, 1), Decision::RejectQDirection);
  EXPECT_EQ(gate(-0.1, inf, 1.0, -1, 1), Decision::Accept);
}

TEST(RegConfig, OrientationThresholdAndValidation) {
  RegConfig c;
  EXPECT_EQ(c.gate_q(2.0), -2.0);
  EXPECT_DOUBLE_EQ(c.threshold(4.0), 2.0);
  c.orientation = QOrientation::TopOverDeep;
  EXPECT_EQ(c.gate_q(2.0), 2.0);
  c.r0_mode = R0Mode::Absolute;
  EXPECT_EQ(c.threshold(4.0), 0.5);
  EXPECT_NO_THROW(c.validate());
  RegConfig bad;
  bad.q_min = 1.0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = RegConfig{};
  bad.r0 = 0.0;
  try {
    bad.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("r0"), std::string::npos);
  }
  // a vanished deep gradient reaches the gate below q_min under the default orientation
  RegConfig d;
  EXPECT_EQ(gate(0.1, d.gate_q(q_factor(1.0, 0.0)), d, 1.0), Decision::Accept);
  EXPECT_EQ(gate(-0.1, d.gate_q(q_factor(1.0, 0.0)), d, 1.0), Decision::RejectQDirection);
  for (auto o : {QOrientation::DeepOverTop, QOrientation::TopOverDeep})
    EXPECT_EQ(parse_q_orientation(to_string(o)), o);
  for (auto m : {R0Mode::Relative, R0Mode::Absolute}) EXPECT_EQ(parse_r0_mode(to_string(m)), m);
  for (auto x : {Decision::Accept, Decision::RejectLargeDs, Decision::RejectQDirection})
    EXPECT_EQ(parse_decision(to_string(x)), x);
}

TEST(EvaluateMinibatch, ZeroCandidateGivesZeroDs) {
  SequenceBatch b = gen_temporal_order(20, 5, 3, 2);
  SrnParams p = init_gaussian(6, 8, 4, 0.01, 4, OutputActivation::Softmax, SigmaKind::Variance);
  RegConfig cfg;
  cfg.h = 20;
  RegReport r = evaluate_minibatch(p, b, cfg, Mat(8, 8));
  EXPECT_EQ(r.dS, 0.0);
  EXPECT_EQ(r.dg, Vec(8));
  EXPECT_EQ(r.decision, gate(0.0, cfg.gate_q(r.q), cfg, r.S));
  EXPECT_LE(rel_err(r.S, 0.5 * norm2(r.g) * norm2(r.g)), 1e-12);
  EXPECT_EQ(r.dS, dot(r.g, r.dg));
  EXPECT_EQ(r.r0, 0.5 * r.S);
}

TEST(EvaluateMinibatch, IdenticalSequencesEqualSingle) {
  SequenceBatch one = gen_adding(15, 1, 9);
  SequenceBatch many = one.select({0, 0, 0, 0});
  Rng rng(10);
  SrnParams p = random_params(rng, 2, 5, 1, 0.6, OutputActivation::Linear);
  Mat dw = random_mat(rng, 5, 5, 1e-3);
  RegConfig cfg;
  cfg.h = 12;
  RegReport a = evaluate_minibatch(p, one, cfg, dw), b = evaluate_minibatch(p, many, cfg, dw);
  EXPECT_LE(rel_err(a.dS, b.dS), 1e-12);
  EXPECT_LE(rel_err(a.S, b.S), 1e-12);
  EXPECT_LE(std::abs(a.q - b.q), 1e-12);
  EXPECT_EQ(a.decision, b.decision);
}

TEST(EvaluateMinibatch, MeanNormsAndQ) {
  SequenceBatch b = gen_adding(12, 6, 2);
  Rng rng(11);
  SrnParams p = random_params(rng, 2, 4, 1, 0.7, OutputActivation::Linear);
  RegConfig cfg;
  cfg.h = 7;
  BatchPass pass = run_batch(p, b, 7);
  RegReport r = evaluate_minibatch(pass, p, cfg, Mat(4, 4));
  double top = 0.0, deep = 0.0;
  Vec g(4);
  for (const auto& br : pass.results) {
    top += br.delta_norms[0] / 6.0;
    deep += br.delta_norms[7] / 6.0;
    g = g + (1.0 / 6.0) * br.deltas[7];
  }
  EXPECT_LE(rel_err(r.norm_top, top), 1e-12);
  EXPECT_LE(rel_err(r.norm_deep, deep), 1e-12);
  EXPECT_LE(std::abs(r.q - std::log10(top / deep)), 1e-12);
  expect_vec_near(r.g, g, 1e-12);
  BatchPass shallow = run_batch(p, b, 3);
  EXPECT_THROW(evaluate_minibatch(shallow, p, cfg, Mat(4, 4)), std::invalid_argument);
}

TEST(SignPrediction, SignOfDsPredictsNormChange) {
  Rng rng(2024);
  int counted = 0, agree = 0;
  for (int t = 0; t < 60; ++t) {
    SignTrial s = sign_trial(rng, 0.01, 1e-5);
    if (!s.counted) continue;
    ++counted;
    if (s.agree) ++agree;
  }
  ASSERT_GE(counted, 30);
  EXPECT_GE(agree, static_cast<int>(std::ceil(0.95 * counted)));
}
