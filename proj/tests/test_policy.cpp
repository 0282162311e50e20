#include <gtest/gtest.h>

#include <cmath>

#include "rideshare/policy.hpp"

using namespace rideshare;

namespace {

Mlp random_mlp(std::vector<int> sizes, std::uint64_t seed) {
  Mlp m(std::move(sizes));
  RandomStream rng(seed);
  for (Eigen::Index k = 0; k < m.n_params(); ++k) m.params()[k] = rng.normal(0.0, 0.5);
  return m;
}

// Straight-line evaluation with explicit index loops.
std::vector<double> reference_forward(const Mlp& m, std::vector<double> x) {
  for (int k = 0; k < m.n_layers(); ++k) {
    const auto w = m.weight(k);
    const auto b = m.bias(k);
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = b[r];
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = (k + 1 < m.n_layers()) ? std::tanh(s) : s;
    }
    x = std::move(y);
  }
  return x;
}

double density(double a, double mean, double log_std) {
  const double z = std::atanh(a);
  return std::exp(gaussian_log_prob(Vector::Constant(1, z), Vector::Constant(1, mean),
                                    Vector::Constant(1, log_std)) -
                  squash_correction(Vector::Constant(1, z)));
}

}  // namespace

TEST(Mlp, ZeroParamsGiveZeroOutput) {
  Mlp m({5, 8, 3});
  EXPECT_EQ(m.forward(Vector(Vector::Random(5))), Vector(Vector::Zero(3)));
}

TEST(Mlp, IdentityLayerEchoesInput) {
  Mlp m({4, 4});
  m.weight(0) = Matrix::Identity(4, 4);
  const Vector x = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(m.forward(x), x);
}

TEST(Mlp, MatchesReferenceEvaluation) {
  const auto m = random_mlp({6, 9, 7, 3}, 4);
  RandomStream rng(8);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.normal(0.0, 1.0);
    const Vector out = m.forward(Vector(Eigen::Map<Vector>(x.data(), 6)));
    const auto ref = reference_forward(m, x);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(out[k], ref[static_cast<std::size_t>(k)], 1e-12);
  }
}

TEST(Mlp, BatchedForwardMatchesColumns) {
  const auto m = random_mlp({3, 5, 2}, 2);
  const Matrix x = Matrix::Random(3, 7);
  const Matrix y = m.forward(x);
  for (int c = 0; c < 7; ++c) EXPECT_NEAR((y.col(c) - m.forward(Vector(x.col(c)))).norm(), 0.0, 1e-14);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  auto m = random_mlp({4, 6, 5, 3}, 6);
  const Matrix x = Matrix::Random(4, 5);
  const Matrix w = Matrix::Random(3, 5);  // loss = sum(w .* out)
  Mlp::Tape tape;
  m.forward(x, &tape);
  const Vector g = m.backward(tape, w);
  const double h = 1e-5;
  Vector fd(m.n_params());
  for (Eigen::Index k = 0; k < m.n_params(); ++k) {
    const double keep = m.params()[k];
    m.params()[k] = keep + h;
    const double up = (w.array() * m.forward(x).array()).sum();
    m.params()[k] = keep - h;
    const double down = (w.array() * m.forward(x).array()).sum();
    m.params()[k] = keep;
    fd[k] = (up - down) / (2 * h);
  }
  EXPECT_LT((g - fd).norm() / fd.norm(), 1e-4);
}

TEST(Mlp, ConstantLossHasZeroGradient) {
  const auto m = random_mlp({3, 4, 2}, 1);
  Mlp::Tape tape;
  m.forward(Matrix::Random(3, 4), &tape);
  EXPECT_EQ(m.backward(tape, Matrix::Zero(2, 4)).norm(), 0.0);
}

TEST(Mlp, LinearLayerLeastSquaresGradient) {
  const auto m = random_mlp({3, 2}, 9);
  const Vector x = Vector::Random(3), y = Vector::Random(2);
  Mlp::Tape tape;
  const Matrix out = m.forward(Matrix(x), &tape);
  const Vector resid = out.col(0) - y;  // loss = 0.5 |Wx + b - y|^2
  const Vector g = m.backward(tape, resid);
  const Matrix dw = resid * x.transpose();
  EXPECT_NEAR((g.head(6) - Eigen::Map<const Vector>(dw.data(), 6)).norm(), 0.0, 1e-14);
  EXPECT_NEAR((g.tail(2) - resid).norm(), 0.0, 1e-14);
}

TEST(Mlp, OrthogonalInitIsOrthogonal) {
  Mlp m({6, 6, 2});
  RandomStream rng(3);
  m.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  const Matrix w = m.weight(0);
  EXPECT_NEAR((w.transpose() * w - 2.0 * Matrix::Identity(6, 6)).norm(), 0.0, 1e-12);
  const Matrix head = m.weight(1);
  EXPECT_NEAR((head * head.transpose() - 1e-4 * Matrix::Identity(2, 2)).norm(), 0.0, 1e-14);
}

TEST(Act, DensityIntegratesToOne) {
  RandomStream rng(31);
  for (auto [mean, log_std] : {std::pair{0.0, 0.0}, std::pair{0.7, -0.5}, std::pair{-0.3, -1.0}}) {
    constexpr int draws = 400000;
    double sum = 0.0;
    for (int k = 0; k < draws; ++k) sum += density(rng.uniform(-1.0, 1.0), mean, log_std);
    EXPECT_NEAR(2.0 * sum / draws, 1.0, 1e-2) << "mean " << mean << " log_std " << log_std;
  }
}

TEST(Act, TinyNoiseIsDeterministic) {
  PPOHyperparams hp;
  hp.hidden_sizes = {8};
  RandomStream init(2), rng(5);
  auto policy = make_policy(14, 4, hp, init);
  policy.log_std.setConstant(-40.0);
  const Vector obs = Vector::Random(14);
  const auto s = act(policy, obs, rng);
  EXPECT_NEAR((s.action - act_deterministic(policy, obs)).norm(), 0.0, 1e-15);
}

TEST(Act, SameSeedSameAction) {
  PPOHyperparams hp;
  RandomStream init(2);
  const auto policy = make_policy(14, 4, hp, init);
  const Vector obs = Vector::Random(14);
  RandomStream a(77), b(77);
  const auto x = act(policy, obs, a);
  const auto y = act(policy, obs, b);
  EXPECT_EQ(x.action, y.action);
  EXPECT_EQ(x.log_prob, y.log_prob);
}

TEST(Act, LogProbMatchesChangeOfVariables) {
  PPOHyperparams hp;
  RandomStream init(4), rng(9);
  const auto policy = make_policy(14, 4, hp, init);
  const Vector obs = Vector::Random(14);
  const auto s = act(policy, obs, rng);
  const Vector mean = policy.actor.forward(obs);
  double lp = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double sd = std::exp(policy.log_std[k]);
    const double u = (s.pre_squash[k] - mean[k]) / sd;
    lp += -0.5 * u * u - std::log(sd * std::sqrt(2 * M_PI)) - std::log(1 - std::pow(std::tanh(s.pre_squash[k]), 2));
  }
  EXPECT_NEAR(s.log_prob, lp, 1e-10);
}

TEST(Act, NonFiniteOutputIsNumericalError) {
  PPOHyperparams hp;
  RandomStream init(4), rng(9);
  auto policy = make_policy(14, 4, hp, init);
  policy.actor.params()[0] = std::nan("");
  EXPECT_THROW(act(policy, Vector::Ones(14), rng), NumericalError);
}

TEST(LogTanhJacobian, StableInTails) {
  for (double z : {-40.0, -5.0, 0.0, 0.3, 5.0, 40.0}) {
    const double ref = std::abs(z) < 10 ? std::log(1 - std::pow(std::tanh(z), 2)) : std::log(4.0) - 2 * std::abs(z);
    EXPECT_NEAR(log_tanh_jacobian(z), ref, 1e-9);
  }
}

TEST(MapAction, BoundsAndMidpoint) {
  Vector a(4);
  a << -1.0, 1.0, 0.0, 0.5;
  const auto p = map_action(a, 2, 5.0, 20.0);
  EXPECT_DOUBLE_EQ(p.rate(0, 1), 5.0);
  EXPECT_DOUBLE_EQ(p.rate(1, 0), 20.0);
  EXPECT_DOUBLE_EQ(p.commission(0, 1), 12.5);
  EXPECT_DOUBLE_EQ(p.commission(1, 0), 16.25);
  EXPECT_EQ(p.rate(0, 0), 0.0);
  EXPECT_THROW(map_action(Vector::Zero(3), 2, 5, 20), UsageError);
}
