#include "doctest.h"

#include <random>

#include "fairlab/core.hpp"
#include "oracles.hpp"

using namespace fairlab;

TEST_CASE("loss is |p - y| on [0, 1] and rejects values outside") {
  for (int i = 0; i <= 100; ++i) {
    const double p = i / 100.0;
    CHECK(loss(p, 0) == doctest::Approx(p).epsilon(1e-15));
    CHECK(loss(p, 1) == doctest::Approx(1.0 - p).epsilon(1e-15));
  }
  CHECK_THROWS_AS(loss(1.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(loss(-0.1, 1), std::invalid_argument);
}

TEST_CASE("hypothesis class validation") {
  Eigen::MatrixXd t(2, 2);
  t << 1, 0, 0, 1;
  CHECK_NOTHROW(HypothesisClass{t});
  t(0, 0) = 0.5;
  CHECK_THROWS_AS(HypothesisClass{t}, std::invalid_argument);
  t << 1, 1, 0, 0;
  CHECK_THROWS_AS(HypothesisClass{t}, std::invalid_argument);  // duplicate columns

  const HypothesisClass cls = oracle::three_point_class();
  CHECK(cls.size() == 3);
  REQUIRE(cls.constant_zero_index());
  CHECK(*cls.constant_zero_index() == 2);
  CHECK(cls.appended_zero());
}

TEST_CASE("policy validation") {
  CHECK_NOTHROW(Policy(Eigen::Vector3d(0.2, 0.3, 0.5)));
  CHECK_THROWS_AS(Policy(Eigen::Vector3d(-0.1, 0.6, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(Policy(Eigen::Vector3d(0.2, 0.3, 0.4)), std::invalid_argument);
  const Policy clipped = Policy::from_nonnegative(Eigen::Vector3d(-1e-14, 2.0, 2.0));
  CHECK(clipped[0] == 0.0);
  CHECK(clipped[1] == doctest::Approx(0.5));
  CHECK(Policy::point_mass(3, 1)[1] == 1.0);
  CHECK(Policy::uniform(4)[3] == 0.25);
}

TEST_CASE("similarity validation") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(3, 3);
  d(0, 1) = d(1, 0) = 0.5;
  CHECK_NOTHROW(SimilarityFn{d});
  Eigen::MatrixXd asym = d;
  asym(0, 1) = 0.4;
  CHECK_THROWS_AS(SimilarityFn{asym}, std::invalid_argument);
  Eigen::MatrixXd diag = d;
  diag(2, 2) = 0.1;
  CHECK_THROWS_AS(SimilarityFn{diag}, std::invalid_argument);
  Eigen::MatrixXd neg = d;
  neg(0, 2) = neg(2, 0) = -0.1;
  CHECK_THROWS_AS(SimilarityFn{neg}, std::invalid_argument);
  CHECK_THROWS_AS(SimilarityFn{Eigen::MatrixXd::Zero(2, 3)}, std::invalid_argument);
}

TEST_CASE("three-point example functionals") {
  const HypothesisClass cls = oracle::three_point_class();
  const SimilarityFn d = oracle::three_point_similarity();
  const Policy h1 = Policy::point_mass(3, 0);
  const Policy h2 = Policy::point_mass(3, 1);
  const Policy avg(Eigen::Vector3d(0.5, 0.5, 0.0));

  CHECK(predict(avg, cls, 0) == 1.0);
  CHECK(predict(avg, cls, 1) == 0.5);
  CHECK(predict(avg, cls, 2) == 0.0);
  CHECK_THROWS_AS(predict(avg, cls, 3), std::out_of_range);

  CHECK(violation(h1, cls, 0, 1, d, 0.1) == doctest::Approx(0.9));
  CHECK(violation(h1, cls, 0, 2, d, 0.1) == 0.0);  // gap 1 = d
  CHECK(violation(h2, cls, 1, 2, d, 0.1) == doctest::Approx(0.9));
  CHECK(violation(avg, cls, 0, 1, d, 0.1) == doctest::Approx(0.4));

  Batch b{{0, 1, 2}, {1, 0, 0}};
  CHECK(batch_err(h1, cls, b) == 0.0);
  CHECK(batch_err(h2, cls, b) == 1.0);
  CHECK(unfair_loss(h1, cls, b, FlaggedPair{0, 1}, d, 0.1) == 1);
  CHECK(unfair_loss(h1, cls, b, FlaggedPair{1, 0}, d, 0.1) == 1);
  CHECK(unfair_loss(h1, cls, b, std::nullopt, d, 0.1) == 0);
  CHECK(unfair_loss(h1, cls, b, FlaggedPair{0, 2}, d, 0.1) == 0);
}

TEST_CASE("signed Lagrangian penalty") {
  const HypothesisClass cls = oracle::three_point_class();
  const Batch b{{0, 1}, {1, 0}};
  const Policy h1 = Policy::point_mass(3, 0);
  // C (pi(x1) - pi(x2) - a) = 10 (1 - 0 - 0.1) = 9.
  CHECK(lagrangian(h1, cls, b, FlaggedPair{0, 1}, 10, 0.1) == doctest::Approx(9.0));
  // Reversed orientation gives a negative penalty: 10 (0 - 1 - 0.1) = -11.
  CHECK(lagrangian(h1, cls, b, FlaggedPair{1, 0}, 10, 0.1) == doctest::Approx(-11.0));
  CHECK(lagrangian(h1, cls, b, std::nullopt, 10, 0.1) == 0.0);
  CHECK_THROWS_AS(lagrangian(h1, cls, b, FlaggedPair{0, 1}, 0, 0.1), std::invalid_argument);
}

TEST_CASE("functionals agree with direct evaluation and are linear in the weights") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = std::uniform_int_distribution<Index>(2, 10)(rng);
    const Index m = std::uniform_int_distribution<Index>(2, std::min<Index>(12, (Index(1) << n)))(rng);
    const HypothesisClass cls = oracle::random_class(n, m, rng);
    const SimilarityFn d = oracle::random_similarity(n, 0.6, rng);
    const Index k = std::uniform_int_distribution<Index>(2, 6)(rng);
    const Batch b = oracle::random_batch(n, k, rng);
    const Policy p = oracle::random_policy(cls.size(), rng);
    const Policy q = oracle::random_policy(cls.size(), rng);
    const double lambda = std::uniform_real_distribution<double>(0, 1)(rng);
    const Policy mix(lambda * p.weights() + (1 - lambda) * q.weights());

    CHECK(batch_err(p, cls, b) == doctest::Approx(oracle::batch_loss(cls, p.weights(), b)).epsilon(1e-12));
    CHECK(batch_err(mix, cls, b) ==
          doctest::Approx(lambda * batch_err(p, cls, b) + (1 - lambda) * batch_err(q, cls, b)).epsilon(1e-12));

    const Index x = b.xs[0], x2 = b.xs[1];
    CHECK(violation(p, cls, x, x2, d, 0.1) == violation(p, cls, x2, x, d, 0.1));

    const AuditOutcome rho = FlaggedPair{0, 1};
    const int C = std::uniform_int_distribution<int>(1, 30)(rng);
    const double a = 0.1;
    const double L = lagrangian(p, cls, b, rho, C, a);
    const double err = batch_err(p, cls, b);
    CHECK(L >= err - C * (1 + a) - 1e-12);
    CHECK(L <= err + C * (1 - a) + 1e-12);
    CHECK(lagrangian(mix, cls, b, rho, C, a) ==
          doctest::Approx(lambda * L + (1 - lambda) * lagrangian(q, cls, b, rho, C, a)).epsilon(1e-12));

    const Eigen::VectorXd per_h = hypothesis_lagrangians(cls, b, rho, C, a);
    CHECK(per_h.dot(p.weights()) == doctest::Approx(L).epsilon(1e-12));
  }
}

TEST_CASE("penalty thresholds and config validation") {
  CHECK(minimum_penalty(PenaltyTarget::kFairness, 4, 0.2) == 25);
  CHECK(minimum_penalty(PenaltyTarget::kAccuracy, 4, 0.2) == 5);
  CHECK(minimum_penalty(PenaltyTarget::kAccuracy, 4, 0.3) == 4);

  RunConfig c = RunConfig::make(100, 4, 0.3, 0.2);
  CHECK(c.C == 25);
  CHECK(c.alpha == 0.3 - 0.2);
  CHECK_NOTHROW(c.validate(3));
  CHECK_THROWS_AS(RunConfig::make(100, 4, 0.3, 0.3).validate(3), std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::make(100, 4, 0.3, 0.5).validate(3), std::invalid_argument);
  RunConfig low = c;
  low.C = 24;
  CHECK_THROWS_AS(low.validate(3), std::invalid_argument);
  RunConfig bad_v = c;
  bad_v.dummy_v = 3;
  CHECK_THROWS_AS(bad_v.validate(3), std::invalid_argument);

  CHECK(RunConfig::make(10000, 4, 0.3, 0.2).default_q() == 1000);
  CHECK(RunConfig::make(16, 4, 0.3, 0.2).default_q() == 8);
  CHECK(RunConfig::make(1, 4, 0.3, 0.2).default_q() == 1);
}

TEST_CASE("batch and outcome validation") {
  CHECK_THROWS_AS((Batch{{0}, {1}}).validate(3), std::invalid_argument);
  CHECK_THROWS_AS((Batch{{0, 1}, {1}}).validate(3), std::invalid_argument);
  CHECK_THROWS_AS((Batch{{0, 3}, {1, 0}}).validate(3), std::invalid_argument);
  CHECK_THROWS_AS((Batch{{0, 1}, {1, 2}}).validate(3), std::invalid_argument);
  CHECK_NOTHROW((Batch{{0, 0}, {1, 0}}).validate(3));
  CHECK_THROWS_AS(validate_outcome(FlaggedPair{0, 0}, 2), std::invalid_argument);
  CHECK_THROWS_AS(validate_outcome(FlaggedPair{0, 2}, 2), std::invalid_argument);
  CHECK_NOTHROW(validate_outcome(std::nullopt, 2));
}
