#include "fairlab/learners.hpp"

#include <stdexcept>

namespace fairlab {

Batch reduction_inflate(const Batch& batch, const AuditOutcome& rho, int C,
                        Index v) {
  if (C < 1) throw std::invalid_argument("inflation constant C must be a positive integer");
  validate_outcome(rho, batch.size());
  const Index low = rho ? batch.xs[rho->first] : v;
  const Index high = rho ? batch.xs[rho->second] : v;

  Batch inflated = batch;
  inflated.xs.reserve(batch.xs.size() + 2 * std::size_t(C));
  inflated.ys.reserve(batch.ys.size() + 2 * std::size_t(C));
  inflated.xs.insert(inflated.xs.end(), std::size_t(C), low);
  inflated.ys.insert(inflated.ys.end(), std::size_t(C), 0);
  inflated.xs.insert(inflated.xs.end(), std::size_t(C), high);
  inflated.ys.insert(inflated.ys.end(), std::size_t(C), 1);
  return inflated;
}

// --- Exponential weights -------------------------------------------------------

ExpWeightsState ExpWeightsState::uniform(Index num_hypotheses, double gamma,
                                         double loss_range) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be nonnegative");
  if (!(loss_range > 0.0)) throw std::invalid_argument("loss range must be positive");
  return {Eigen::VectorXd::Zero(num_hypotheses), gamma, loss_range};
}

Policy ExpWeightsState::policy() const {
  Eigen::VectorXd w = (log_weights.array() - log_weights.maxCoeff()).exp();
  w /= w.sum();
  return Policy(std::move(w));
}

ExpWeightsState expweights_update(ExpWeightsState state,
                                  const HypothesisClass& cls,
                                  const Batch& inflated) {
  state.log_weights -= (state.gamma / state.loss_range) * hypothesis_errors(cls, inflated);
  state.log_weights.array() -= state.log_weights.maxCoeff();
  return state;
}

double default_gamma(Index num_hypotheses, Index T) {
  return std::sqrt(std::log(double(num_hypotheses)) / double(T));
}

double expweights_regret_bound(double loss_range, Index num_hypotheses,
                               double gamma, Index T) {
  const double log_n = std::log(double(num_hypotheses));
  if (log_n == 0.0) return loss_range * gamma * double(T);
  return loss_range * (log_n / gamma + gamma * double(T));
}

ExpWeightsLearner::ExpWeightsLearner(const HypothesisClass& cls, double gamma,
                                     double loss_range)
    : cls_(&cls), state_(ExpWeightsState::uniform(cls.size(), gamma, loss_range)) {}

Policy ExpWeightsLearner::deploy(Index) { return state_.policy(); }

void ExpWeightsLearner::observe(const Batch& inflated) {
  state_ = expweights_update(std::move(state_), *cls_, inflated);
}

// --- Context-FTPL --------------------------------------------------------------

FtplState FtplState::make(const HypothesisClass& cls, const SeparatorSet& S,
                          Index dummy_v, Index batch_length, double omega,
                          std::uint64_t seed, Index mixture_samples) {
  if (!verify_separator(cls, S))
    throw std::invalid_argument("FTPL needs a verified separator set");
  if (!(omega > 0.0)) throw std::invalid_argument("omega must be positive");
  if (mixture_samples < 1) throw std::invalid_argument("mixture_samples must be at least 1");
  FtplState state;
  state.separator = lift_separator(S, dummy_v, batch_length);
  state.omega = omega;
  state.batch_length = batch_length;
  state.cumulative = Eigen::VectorXd::Zero(cls.size());
  state.mixture_samples = mixture_samples;
  state.rng.seed(seed);
  return state;
}

namespace {

double draw_laplace(std::mt19937_64& rng, double rate) {
  std::exponential_distribution<double> magnitude(rate);
  const double m = magnitude(rng);
  return (rng() & 1u) ? m : -m;
}

Index perturbed_leader(FtplState& state, const HypothesisClass& cls) {
  Eigen::VectorXd total = state.cumulative;
  if (state.perturbed()) {
    const auto& table = cls.table();
    for (const LiftedContext& context : state.separator) {
      // Coordinate 0 carries x; the remaining k' - 1 coordinates carry v.
      const double first = draw_laplace(state.rng, state.omega);
      double rest = 0.0;
      for (Index j = 1; j < context.length; ++j) rest += draw_laplace(state.rng, state.omega);
      total += first * table.row(context.x).transpose() +
               rest * table.row(context.v).transpose();
    }
  }
  Index best = 0;
  for (Index h = 1; h < total.size(); ++h)
    if (total[h] < total[best]) best = h;
  return best;
}

}  // namespace

Policy ftpl_policy(FtplState& state, const HypothesisClass& cls) {
  const Index m = cls.size();
  if (state.mixture_samples <= 1) return Policy::point_mass(m, perturbed_leader(state, cls));
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(m);
  for (Index i = 0; i < state.mixture_samples; ++i) counts[perturbed_leader(state, cls)] += 1.0;
  return Policy(counts / double(state.mixture_samples));
}

Eigen::VectorXd linear_batch_losses(const HypothesisClass& cls,
                                    const Batch& batch) {
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(cls.size());
  for (std::size_t i = 0; i < batch.xs.size(); ++i)
    losses += (1.0 - 2.0 * batch.ys[i]) * cls.table().row(batch.xs[i]).transpose();
  return losses;
}

double linear_dual_norm(const Batch& batch) {
  double zeros = 0.0;
  for (int y : batch.ys) zeros += y == 0;
  return zeros;
}

void ftpl_observe(FtplState& state, const HypothesisClass& cls,
                  const Batch& inflated) {
  state.cumulative += linear_batch_losses(cls, inflated);
  const double norm = linear_dual_norm(inflated);
  state.sum_sq_dual_norm += norm * norm;
}

double default_omega(Index separator_size, Index batch_length,
                     Index num_hypotheses, double sum_sq_estimate) {
  const double log_n = std::log(double(num_hypotheses));
  if (separator_size == 0 || log_n == 0.0 || !(sum_sq_estimate > 0.0))
    return std::numeric_limits<double>::infinity();
  const double s = double(separator_size);
  const double kp = double(batch_length);
  return std::sqrt(10.0 * std::sqrt(s * kp) * log_n / (4.0 * kp * s * sum_sq_estimate));
}

double ftpl_regret_bound(double omega, Index batch_length,
                         Index separator_size, double sum_sq_dual_norm,
                         Index num_hypotheses) {
  const double s = double(separator_size);
  const double kp = double(batch_length);
  const double log_n = std::log(double(num_hypotheses));
  const double stability = 4.0 * omega * kp * s * sum_sq_dual_norm;
  const double perturbation = 10.0 / omega * std::sqrt(s * kp) * log_n;
  // With no perturbation (omega = inf) the bound is only meaningful when it
  // is trivially zero, i.e. one hypothesis or an empty separator.
  if (!std::isfinite(omega)) return (s == 0.0 || log_n == 0.0) ? 0.0 : omega;
  return stability + perturbation;
}

double ftpl_fairness_bound(Index separator_size, int k, double epsilon,
                           Index T, Index num_hypotheses) {
  return 14.0 * std::pow(double(separator_size) * k / epsilon, 0.75) *
         std::sqrt(double(T) * std::log(double(num_hypotheses)));
}

FtplLearner::FtplLearner(const HypothesisClass& cls, FtplState state)
    : cls_(&cls), state_(std::move(state)) {}

Policy FtplLearner::deploy(Index) { return ftpl_policy(state_, *cls_); }

void FtplLearner::observe(const Batch& inflated) {
  ftpl_observe(state_, *cls_, inflated);
}

ConstantZeroLearner::ConstantZeroLearner(const HypothesisClass& cls) {
  const auto zero = cls.constant_zero_index();
  if (!zero) throw std::invalid_argument("class has no constant-zero hypothesis");
  policy_ = Policy::point_mass(cls.size(), *zero);
}

// --- Protocol ------------------------------------------------------------------

RunTrace run_fair_online(OnlineLearner& learner, Environment& environment,
                         const Auditor& auditor, const HypothesisClass& cls,
                         const RunConfig& config) {
  config.validate(cls.universe_size());
  if (auditor.tolerance() != config.alpha_prime)
    throw std::invalid_argument("auditor tolerance must equal alpha_prime");

  RunTrace trace;
  trace.rounds.reserve(static_cast<std::size_t>(config.T));
  const SimilarityFn& d = auditor.similarity();
  for (Index t = 1; t <= config.T; ++t) {
    RoundRecord record;
    record.t = t;
    record.policy = learner.deploy(t);
    const Eigen::VectorXd preds = predictions(record.policy, cls);

    EnvironmentRound arrival = environment.next(t, preds);
    arrival.batch.validate(cls.universe_size());
    if (arrival.batch.size() != config.k)
      throw std::invalid_argument("environment batch size differs from k");
    record.batch = std::move(arrival.batch);

    record.audit = auditor.audit(record.batch.xs, preds, t);
    record.env_pair = arrival.pair.value_or(record.audit);
    validate_outcome(record.env_pair, record.batch.size());

    record.err = batch_err(preds, record.batch);
    record.unfair = unfair_loss(preds, record.batch, record.env_pair, d, config.alpha_prime);
    record.lagrangian = lagrangian(preds, record.batch, record.audit, config.C, config.alpha);

    learner.observe(reduction_inflate(record.batch, record.audit, config.C, config.dummy_v));
    trace.rounds.push_back(std::move(record));
  }
  return trace;
}

}  // namespace fairlab
