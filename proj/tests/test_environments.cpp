#include "doctest.h"

#include <random>

#include "fairlab/environments.hpp"
#include "oracles.hpp"

using namespace fairlab;

namespace {

RunTrace policy_trace(const std::vector<Policy>& policies) {
  RunTrace trace;
  for (std::size_t t = 0; t < policies.size(); ++t) {
    RoundRecord r;
    r.t = Index(t) + 1;
    r.policy = policies[t];
    trace.rounds.push_back(r);
  }
  return trace;
}

}  // namespace

TEST_CASE("stochastic environment") {
  Eigen::MatrixXd joint(3, 2);
  joint << 0.1, 0.2, 0.3, 0.1, 0.25, 0.05;
  StochasticEnv a(joint, 4, 77);
  StochasticEnv b(joint, 4, 77);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(3, 2);
  const Eigen::VectorXd none;
  for (Index t = 1; t <= 5000; ++t) {
    const EnvironmentRound ra = a.next(t, none);
    const EnvironmentRound rb = b.next(t, none);
    CHECK(ra.batch.xs == rb.batch.xs);
    CHECK(ra.batch.ys == rb.batch.ys);
    CHECK_FALSE(ra.pair.has_value());
    for (std::size_t i = 0; i < 4; ++i) counts(ra.batch.xs[i], ra.batch.ys[i]) += 1;
  }
  counts /= 20000.0;
  CHECK((counts - joint).cwiseAbs().maxCoeff() < 0.02);
  CHECK(a.is_stochastic());
  CHECK(a.marginal().isApprox(Eigen::Vector3d(0.3, 0.4, 0.3)));

  Eigen::MatrixXd off = joint;
  off(0, 0) += 1e-9;
  CHECK_THROWS_AS(StochasticEnv(off, 4, 0), std::invalid_argument);
  Eigen::MatrixXd neg = joint;
  neg(0, 0) = -0.1;
  neg(0, 1) = 0.4;
  CHECK_THROWS_AS(StochasticEnv(neg, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(StochasticEnv(joint, 1, 0), std::invalid_argument);

  const StochasticEnv u = StochasticEnv::uniform(Eigen::Vector3d(1.0, 0.5, 0.0), 2, 0);
  CHECK(u.joint()(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(u.expected_loss(Eigen::Vector3d(1, 0.5, 0)) == doctest::Approx(1.0 / 6));
}

TEST_CASE("scripted environment") {
  std::vector<EnvironmentRound> rounds(2);
  rounds[0].batch = Batch{{0, 1}, {1, 0}};
  rounds[1].batch = Batch{{1, 2}, {0, 0}};
  rounds[1].pair = AuditOutcome{FlaggedPair{1, 0}};
  ScriptedEnv env(rounds);
  CHECK_FALSE(env.is_stochastic());
  CHECK(env.next(2, {}).pair == rounds[1].pair);
  CHECK(env.next(1, {}).batch.xs == rounds[0].batch.xs);
  CHECK_THROWS_AS(env.next(3, {}), std::out_of_range);
}

TEST_CASE("average policy") {
  const Policy h1 = Policy::point_mass(3, 0);
  const Policy h2 = Policy::point_mass(3, 1);
  const HypothesisClass cls = oracle::three_point_class();
  const Policy avg = average_policy(policy_trace({h1, h2}));
  CHECK(predictions(avg, cls).isApprox(Eigen::Vector3d(1, 0.5, 0)));
  CHECK(average_policy(policy_trace({h1, h2, h1, h2})) == avg);
  CHECK(average_policy(policy_trace({h2, h2, h2})) == h2);
  CHECK_THROWS_AS(average_policy(RunTrace{}), std::invalid_argument);
}

TEST_CASE("three-point beta values") {
  const HypothesisClass cls = oracle::three_point_class();
  const SimilarityFn d = oracle::three_point_similarity();
  const Eigen::Vector3d uniform = Eigen::Vector3d::Constant(1.0 / 3);
  const Eigen::VectorXd h1 = cls.table().col(0);
  const Eigen::VectorXd h2 = cls.table().col(1);
  const Eigen::VectorXd avg = 0.5 * (h1 + h2);

  const double b1 = empirical_beta(h1, uniform, d, 0.1);
  const double b2 = empirical_beta(h2, uniform, d, 0.1);
  const double ba = empirical_beta(avg, uniform, d, 0.1);
  CHECK(b1 == doctest::Approx(2.0 / 9).epsilon(1e-15));
  CHECK(b2 == doctest::Approx(2.0 / 9).epsilon(1e-15));
  CHECK(ba == doctest::Approx(4.0 / 9).epsilon(1e-15));
  CHECK(ba == b1 + b2);
  CHECK(empirical_beta(cls.table().col(2), uniform, d, 0.1) == 0.0);

  const std::vector<Eigen::VectorXd> seq{h1, h2};
  const BoundCheck cover = covering_check(seq, 1, uniform, d, 0.1);
  CHECK(cover.lhs == 0.0);  // threshold 0.6 > 0.5 gaps
  CHECK(cover.rhs == doctest::Approx(4.0 / 9));
  CHECK(cover.pass);
  const BoundCheck naive = naive_composition_check(seq, uniform, d, 0.1);
  CHECK(naive.pass);
  CHECK(naive.lhs == naive.rhs);  // tight

  const std::vector<Eigen::VectorXd> same(5, h1);
  CHECK(covering_check(same, 5, uniform, d, 0.1).lhs == 0.0);
  CHECK_THROWS_AS(covering_check(same, 6, uniform, d, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(covering_check(same, 0, uniform, d, 0.1), std::invalid_argument);
}

TEST_CASE("covering lemma and naive composition on random tuples") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = std::uniform_int_distribution<Index>(2, 10)(rng);
    const Index m = std::uniform_int_distribution<Index>(1, std::min<Index>(10, Index(1) << n))(rng);
    const HypothesisClass cls = oracle::random_class(n, m, rng);
    const SimilarityFn d = oracle::random_similarity(n, 0.5, rng);
    const Index T = std::uniform_int_distribution<Index>(1, 50)(rng);
    const Index q = std::uniform_int_distribution<Index>(1, T)(rng);
    const double a = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
    Eigen::VectorXd marginal(n);
    for (Index x = 0; x < n; ++x) marginal[x] = std::uniform_real_distribution<double>(0, 1)(rng);
    marginal /= marginal.sum();

    std::vector<Eigen::VectorXd> seq;
    double sum_beta = 0.0;
    for (Index t = 0; t < T; ++t) {
      seq.push_back(predictions(oracle::random_policy(cls.size(), rng), cls));
      const double b = empirical_beta(seq.back(), marginal, d, a);
      CHECK(b == doctest::Approx(oracle::beta(seq.back(), marginal, d, a)).epsilon(1e-14));
      sum_beta += b;
    }
    const BoundCheck cover = covering_check(seq, q, marginal, d, a);
    CHECK(cover.pass);
    CHECK(cover.rhs == doctest::Approx(sum_beta / double(q)));
    CHECK(naive_composition_check(seq, marginal, d, a).pass);
  }
}

TEST_CASE("expected loss is linear in the deployed policies") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 6;
    const HypothesisClass cls = oracle::random_class(n, 10, rng);
    Eigen::VectorXd p(n);
    for (Index x = 0; x < n; ++x) p[x] = std::uniform_real_distribution<double>(0, 1)(rng);
    const StochasticEnv env = StochasticEnv::uniform(p, 2, 0);
    std::vector<Policy> policies;
    double mean = 0.0;
    for (int t = 0; t < 40; ++t) {
      policies.push_back(oracle::random_policy(cls.size(), rng));
      mean += env.expected_loss(predictions(policies.back(), cls)) / 40.0;
    }
    const double avg = env.expected_loss(predictions(average_policy(policy_trace(policies)), cls));
    CHECK(std::abs(avg - mean) <= 1e-12);
  }
}

TEST_CASE("generalization report") {
  const HypothesisClass cls = oracle::three_point_class();
  const SimilarityFn d = oracle::three_point_similarity();
  const RunConfig rc = RunConfig::make(500, 4, 0.3, 0.2);
  const Eigen::Vector3d labels(0.9, 0.5, 0.1);

  SUBCASE("constant-zero learner") {
    ConstantZeroLearner learner(cls);
    StochasticEnv env = StochasticEnv::uniform(labels, 4, 2);
    const RunTrace trace = run_fair_online(learner, env, Auditor(rc.alpha_prime, d), cls, rc);
    const RegretReport regret = verify_bounds(cls, trace, d, rc);
    const GeneralizationReport g = generalization_report(trace, cls, rc, env, d, regret);
    CHECK(g.expected_loss_avg == doctest::Approx(0.5));  // E[y]
    CHECK(g.beta_avg == 0.0);
    CHECK(g.beta_sum == 0.0);
    CHECK(g.q == rc.default_q());
    CHECK(g.all_pass());
  }

  SUBCASE("exponential weights") {
    ExpWeightsLearner learner(cls, default_gamma(cls.size(), rc.T), rc.C + rc.k);
    StochasticEnv env = StochasticEnv::uniform(labels, 4, 2);
    const RunTrace trace = run_fair_online(learner, env, Auditor(rc.alpha_prime, d), cls, rc);
    const RegretReport regret = verify_bounds(cls, trace, d, rc);
    const GeneralizationReport g = generalization_report(trace, cls, rc, env, d, regret);
    for (const BoundCheck& c : g.checks) {
      INFO(c.name << " lhs=" << c.lhs << " rhs=" << c.rhs);
      CHECK(c.pass);
    }
    CHECK(g.threshold == doctest::Approx(0.3 + double(g.q) / 500));
  }

  SUBCASE("refuses non-i.i.d. environments") {
    std::vector<EnvironmentRound> script(rc.T);
    for (auto& r : script) r.batch = Batch{{0, 1, 2, 0}, {1, 0, 0, 1}};
    ScriptedEnv env(script);
    ConstantZeroLearner learner(cls);
    const RunTrace trace = run_fair_online(learner, env, Auditor(rc.alpha_prime, d), cls, rc);
    const RegretReport regret = verify_bounds(cls, trace, d, rc);
    CHECK_THROWS_AS(generalization_report(trace, cls, rc, env, d, regret), std::logic_error);
  }
}
