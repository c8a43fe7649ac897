#ifndef FAIRLAB_EXPERIMENT_HPP
#define FAIRLAB_EXPERIMENT_HPP

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fairlab/auditor.hpp"
#include "fairlab/benchmark.hpp"
#include "fairlab/core.hpp"
#include "fairlab/environments.hpp"
#include "fairlab/hypotheses.hpp"
#include "fairlab/learners.hpp"
#include "json.hpp"

namespace fairlab {

using Json = nlohmann::json;

/// Schema or value error in a run config. `where` is a JSON pointer to the
/// offending field, or "line L, column C" for syntax errors.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Malformed artifact file (trace.csv, policies.csv, config.json).
class ArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LearnerKind { kExpWeights, kFtpl, kConstantZero };
enum class EnvironmentKind { kStochastic, kScripted };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::kExpWeights;
  std::optional<double> gamma;
  std::optional<double> omega;
  Index mixture = 1;
};

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::kStochastic;
  Eigen::MatrixXd joint;                  // stochastic
  std::vector<EnvironmentRound> rounds;   // scripted
};

struct ExperimentConfig {
  RunConfig run;  // seed is filled in per run
  HypothesisClass cls{Eigen::MatrixXd::Zero(1, 1)};
  SimilarityFn d;
  LearnerSpec learner;
  EnvironmentSpec environment;
  TieBreak tie_break = TieBreak::kMaxViolation;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs";
  Json source;  // the parsed document, echoed into artifacts
};

ExperimentConfig parse_config(const Json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct RunResult {
  RunConfig config;
  RunTrace trace;
  RegretReport regret;
  std::optional<GeneralizationReport> generalization;
  Index separator_size = 0;
  double gamma = 0.0;  // expweights only, else NaN
  double omega = 0.0;  // ftpl only, else NaN

  bool all_pass() const {
    return regret.all_pass() && (!generalization || generalization->all_pass());
  }
};

/// Runs one seed of the experiment and verifies every bound on the trace.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed);

/// Same as run_experiment with T overridden.
RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, Index T);

/// Re-runs the bound checks on a trace (possibly edited) produced by `config`.
/// Uses the environment for the generalization report when it is stochastic.
void analyse(const ExperimentConfig& config, RunResult& result);

// --- Artifacts ------------------------------------------------------------------

inline constexpr const char* kTraceHeader =
    "t,err,unfair,lagrangian,audit_rho1,audit_rho2,cum_err,cum_unfair";

/// printf("%.17g"): parses back to the identical double.
std::string format_double(double value);

std::string trace_csv(const RunTrace& trace);
std::string policies_csv(const RunTrace& trace);

struct TraceRow {
  Index t = 0;
  double err = 0.0;
  int unfair = 0;
  double lagrangian = 0.0;
  Index audit_rho1 = -1;
  Index audit_rho2 = -1;
  double cum_err = 0.0;
  Index cum_unfair = 0;
};

/// Parses trace.csv; throws ArtifactError naming the line on any defect.
std::vector<TraceRow> parse_trace_csv(const std::string& text);
std::vector<Policy> parse_policies_csv(const std::string& text, Index num_hypotheses);

Json summary_json(const ExperimentConfig& config, const RunResult& result);
/// The config document pinned to one seed, with derived fields resolved.
Json config_echo(const ExperimentConfig& config, std::uint64_t seed);

// --- Commands -------------------------------------------------------------------

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool log_policies = false;
};

/// Worker count: min(jobs, hardware threads, FAIRLAB_THREADS when set).
unsigned worker_count(std::size_t jobs);

/// Writes <out>/seed-<s>/{trace.csv, summary.json, config.json[, policies.csv]}
/// for every seed. Returns 0 when every run passes its checks, 1 when some
/// check fails, 2 on configuration or I/O errors.
int cmd_run(const std::string& config_path, const RunOptions& options,
            std::ostream& out, std::ostream& err);

/// Accepts one seed directory or a directory of them. Replays each run from
/// its config.json, substitutes the recorded CSV values (and logged policies
/// when present) and recomputes every check. Returns 0 iff everything passes,
/// 1 on failed checks, 2 on missing or corrupt artifacts.
int cmd_verify(const std::string& artifact_dir, std::ostream& out, std::ostream& err);

struct SweepRow {
  Index T = 0;
  Index cumulative_unfair = 0;
  double misclass_regret = 0.0;
  double bound = 0.0;
};

/// Runs the first configured seed at each horizon. The bound column is
/// (C+k)(ln|H|/gamma + gamma T) for exponential weights at the default gamma,
/// the FTPL fairness bound for FTPL and 0 for the constant-zero learner.
std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<Index>& horizons);
int cmd_sweep(const std::string& config_path, const std::vector<Index>& horizons,
              std::ostream& out, std::ostream& err);

}  // namespace fairlab

#endif  // FAIRLAB_EXPERIMENT_HPP
