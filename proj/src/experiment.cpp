#include "fairlab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace fairlab {

namespace fs = std::filesystem;

// --- Config parsing ----------------------------------------------------------------

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path.empty() ? "/" : path, what);
}

std::string child(const std::string& path, const std::string& key) {
  return path + "/" + key;
}
std::string child(const std::string& path, std::size_t i) {
  return path + "/" + std::to_string(i);
}

void expect_object(const Json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
}

void allow_keys(const Json& j, const std::string& path,
                std::initializer_list<const char*> keys) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(),
                     [&](const char* k) { return it.key() == k; }))
      bad(child(path, it.key()), "unknown field");
  }
}

const Json& require(const Json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(child(path, key), "missing required field");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) bad(path, "expected a finite number");
  return v;
}

std::int64_t integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const std::int64_t v = integer(j, path);
  if (v < 0) bad(path, "expected a nonnegative integer");
  return std::uint64_t(v);
}

Eigen::MatrixXd matrix(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty array of rows");
  Index cols = -1;
  Eigen::MatrixXd m;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Json& row = j[r];
    const std::string rpath = child(path, r);
    if (!row.is_array() || row.empty()) bad(rpath, "expected a nonempty array of numbers");
    if (cols < 0) {
      cols = Index(row.size());
      m.resize(Index(j.size()), cols);
    } else if (Index(row.size()) != cols) {
      bad(rpath, "row length differs from row 0");
    }
    for (std::size_t c = 0; c < row.size(); ++c) m(Index(r), Index(c)) = number(row[c], child(rpath, c));
  }
  return m;
}

Eigen::VectorXd vector(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) bad(path, "expected a nonempty array of numbers");
  Eigen::VectorXd v(Index(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[Index(i)] = number(j[i], child(path, i));
  return v;
}

/// A tagged union written as {"tag": body}. Returns the tag and its body.
std::pair<std::string, const Json*> variant(const Json& j, const std::string& path) {
  if (j.is_string()) {
    static const Json empty = Json::object();
    return {j.get<std::string>(), &empty};
  }
  if (!j.is_object() || j.size() != 1) bad(path, "expected an object with exactly one key");
  return {j.begin().key(), &j.begin().value()};
}

HypothesisClass parse_class(const Json& j, const std::string& path) {
  const auto [tag, body] = variant(j, path);
  const std::string bpath = child(path, tag);
  try {
    if (tag == "threshold") {
      const std::int64_t n = integer(*body, bpath);
      if (n < 1) bad(bpath, "threshold class needs n >= 1");
      return make_threshold_class(n);
    }
    if (tag == "table") {
      if (!body->is_array() || body->empty()) bad(bpath, "expected a nonempty array of rows");
      std::vector<std::vector<int>> rows;
      for (std::size_t r = 0; r < body->size(); ++r) {
        const Json& row = (*body)[r];
        if (!row.is_array()) bad(child(bpath, r), "expected an array of 0/1 labels");
        std::vector<int> labels;
        for (std::size_t c = 0; c < row.size(); ++c) {
          const std::int64_t v = integer(row[c], child(child(bpath, r), c));
          if (v != 0 && v != 1) bad(child(child(bpath, r), c), "labels must be 0 or 1");
          labels.push_back(int(v));
        }
        rows.push_back(std::move(labels));
      }
      return make_table_class(rows);
    }
  } catch (const std::invalid_argument& e) {
    bad(bpath, e.what());
  }
  bad(path, "unknown class kind '" + tag + "' (expected threshold or table)");
}

SimilarityFn parse_similarity(const Json& j, const std::string& path, Index n,
                              const Eigen::MatrixXd& features) {
  const auto [tag, body] = variant(j, path);
  const std::string bpath = child(path, tag);
  SimilarityFn d;
  try {
    if (tag == "table") {
      d = SimilarityFn(matrix(*body, bpath));
    } else if (tag == "mahalanobis") {
      if (features.rows() != n) bad(bpath, "needs universe.features");
      d = make_mahalanobis(features, matrix(*body, bpath));
    } else if (tag == "random") {
      expect_object(*body, bpath);
      allow_keys(*body, bpath, {"seed", "scale"});
      const std::uint64_t seed =
          body->contains("seed") ? unsigned_integer((*body)["seed"], child(bpath, "seed")) : 0;
      const double scale =
          body->contains("scale") ? number((*body)["scale"], child(bpath, "scale")) : 1.0;
      d = make_random_nonmetric(n, seed, scale);
    } else if (tag == "zero") {
      d = SimilarityFn::zeros(n);
    } else {
      bad(path, "unknown similarity kind '" + tag + "' (expected table, mahalanobis, random or zero)");
    }
  } catch (const std::invalid_argument& e) {
    bad(bpath, e.what());
  }
  if (d.size() != n) bad(bpath, "similarity size differs from the universe size");
  return d;
}

LearnerSpec parse_learner(const Json& j, const std::string& path) {
  const auto [tag, body] = variant(j, path);
  const std::string bpath = child(path, tag);
  expect_object(*body, bpath);
  LearnerSpec spec;
  if (tag == "expweights") {
    allow_keys(*body, bpath, {"gamma"});
    spec.kind = LearnerKind::kExpWeights;
    if (body->contains("gamma")) {
      spec.gamma = number((*body)["gamma"], child(bpath, "gamma"));
      if (!(*spec.gamma > 0.0)) bad(child(bpath, "gamma"), "gamma must be positive");
    }
  } else if (tag == "ftpl") {
    allow_keys(*body, bpath, {"omega", "mixture"});
    spec.kind = LearnerKind::kFtpl;
    if (body->contains("omega")) {
      spec.omega = number((*body)["omega"], child(bpath, "omega"));
      if (!(*spec.omega > 0.0)) bad(child(bpath, "omega"), "omega must be positive");
    }
    if (body->contains("mixture")) {
      spec.mixture = integer((*body)["mixture"], child(bpath, "mixture"));
      if (spec.mixture < 1) bad(child(bpath, "mixture"), "mixture must be at least 1");
    }
  } else if (tag == "constant_zero") {
    allow_keys(*body, bpath, {});
    spec.kind = LearnerKind::kConstantZero;
  } else {
    bad(path, "unknown learner '" + tag + "' (expected expweights, ftpl or constant_zero)");
  }
  return spec;
}

EnvironmentSpec parse_environment(const Json& j, const std::string& path,
                                  const RunConfig& run, Index n) {
  const auto [tag, body] = variant(j, path);
  const std::string bpath = child(path, tag);
  EnvironmentSpec spec;
  if (tag == "stochastic") {
    spec.kind = EnvironmentKind::kStochastic;
    expect_object(*body, bpath);
    allow_keys(*body, bpath, {"uniform_labels", "joint"});
    try {
      if (body->contains("uniform_labels")) {
        const std::string lpath = child(bpath, "uniform_labels");
        const Eigen::VectorXd p = vector((*body)["uniform_labels"], lpath);
        if (p.size() != n) bad(lpath, "need one label probability per instance");
        spec.joint = StochasticEnv::uniform(p, run.k, 0).joint();
      } else if (body->contains("joint")) {
        const std::string jpath = child(bpath, "joint");
        spec.joint = matrix((*body)["joint"], jpath);
        if (spec.joint.rows() != n) bad(jpath, "need one row per instance");
        StochasticEnv(spec.joint, run.k, 0);
      } else {
        bad(bpath, "expected uniform_labels or joint");
      }
    } catch (const std::invalid_argument& e) {
      bad(bpath, e.what());
    }
  } else if (tag == "scripted") {
    spec.kind = EnvironmentKind::kScripted;
    if (!body->is_array()) bad(bpath, "expected an array of rounds");
    if (Index(body->size()) < run.T)
      bad(bpath, "script has " + std::to_string(body->size()) + " rounds but T = " +
                     std::to_string(run.T));
    for (std::size_t t = 0; t < body->size(); ++t) {
      const Json& r = (*body)[t];
      const std::string rpath = child(bpath, t);
      expect_object(r, rpath);
      allow_keys(r, rpath, {"xs", "ys", "pair"});
      EnvironmentRound round;
      for (const Json& x : require(r, rpath, "xs")) round.batch.xs.push_back(integer(x, child(rpath, "xs")));
      for (const Json& y : require(r, rpath, "ys")) round.batch.ys.push_back(int(integer(y, child(rpath, "ys"))));
      try {
        round.batch.validate(n);
      } catch (const std::invalid_argument& e) {
        bad(rpath, e.what());
      }
      if (round.batch.size() != run.k) bad(rpath, "batch size differs from k");
      if (r.contains("pair")) {
        const Json& p = r["pair"];
        if (p.is_null()) {
          round.pair = AuditOutcome{};
        } else {
          if (!p.is_array() || p.size() != 2) bad(child(rpath, "pair"), "expected null or [i, j]");
          const FlaggedPair fp{integer(p[0], child(rpath, "pair")), integer(p[1], child(rpath, "pair"))};
          try {
            validate_outcome(fp, run.k);
          } catch (const std::invalid_argument& e) {
            bad(child(rpath, "pair"), e.what());
          }
          round.pair = AuditOutcome{fp};
        }
      }
      spec.rounds.push_back(std::move(round));
    }
  } else {
    bad(path, "unknown environment '" + tag + "' (expected stochastic or scripted)");
  }
  return spec;
}

Index offset_line(const std::string& text, std::size_t byte, Index* column) {
  Index line = 1;
  std::size_t line_start = 0;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      line_start = i + 1;
    }
  }
  *column = Index(byte - line_start);
  return line;
}

}  // namespace

ExperimentConfig parse_config(const Json& doc) {
  expect_object(doc, "");
  allow_keys(doc, "", {"T", "k", "alpha_prime", "epsilon", "C", "penalty_target", "delta",
                       "q", "dummy_v", "universe", "class", "similarity", "learner",
                       "environment", "auditor", "seeds", "out"});
  ExperimentConfig cfg;
  cfg.source = doc;

  RunConfig& run = cfg.run;
  run.T = integer(require(doc, "", "T"), "/T");
  if (run.T < 1) bad("/T", "T must be at least 1");
  const std::int64_t k = integer(require(doc, "", "k"), "/k");
  if (k < 2 || k > 1000000) bad("/k", "k must be at least 2");
  run.k = int(k);
  run.alpha_prime = number(require(doc, "", "alpha_prime"), "/alpha_prime");
  if (!(run.alpha_prime > 0.0)) bad("/alpha_prime", "alpha_prime must be positive");
  run.epsilon = number(require(doc, "", "epsilon"), "/epsilon");
  if (!(run.epsilon > 0.0) || !(run.epsilon < run.alpha_prime))
    bad("/epsilon", "epsilon must lie in (0, alpha_prime) so that alpha = alpha_prime - epsilon > 0");
  run.alpha = run.alpha_prime - run.epsilon;

  run.target = PenaltyTarget::kFairness;
  if (doc.contains("penalty_target")) {
    const Json& t = doc["penalty_target"];
    if (t == "fairness") run.target = PenaltyTarget::kFairness;
    else if (t == "accuracy") run.target = PenaltyTarget::kAccuracy;
    else bad("/penalty_target", "expected \"fairness\" or \"accuracy\"");
  }
  const int required = minimum_penalty(run.target, run.k, run.epsilon);
  run.C = required;
  if (doc.contains("C")) {
    const std::int64_t C = integer(doc["C"], "/C");
    if (C < required || C > std::numeric_limits<int>::max())
      bad("/C", "C must be an integer >= " + std::to_string(required) + " for this penalty target");
    run.C = int(C);
  }
  if (doc.contains("delta")) run.delta = number(doc["delta"], "/delta");
  if (!(run.delta > 0.0 && run.delta < 1.0)) bad("/delta", "delta must lie in (0, 1)");
  if (doc.contains("q")) {
    run.q = integer(doc["q"], "/q");
    if (run.q < 1 || run.q > run.T) bad("/q", "q must lie in [1, T]");
  }

  // Universe: explicit, or implied by the class.
  const HypothesisClass cls = parse_class(require(doc, "", "class"), "/class");
  Index n = cls.universe_size();
  Eigen::MatrixXd features;
  if (doc.contains("universe")) {
    const Json& u = doc["universe"];
    expect_object(u, "/universe");
    allow_keys(u, "/universe", {"n", "features"});
    if (u.contains("features")) {
      features = matrix(u["features"], "/universe/features");
      n = features.rows();
    } else {
      n = integer(require(u, "/universe", "n"), "/universe/n");
    }
    if (n != cls.universe_size())
      bad("/universe", "universe has " + std::to_string(n) + " instances but the class covers " +
                           std::to_string(cls.universe_size()));
  }
  cfg.cls = cls;

  if (doc.contains("dummy_v")) run.dummy_v = integer(doc["dummy_v"], "/dummy_v");
  if (run.dummy_v < 0 || run.dummy_v >= n) bad("/dummy_v", "dummy_v must be an instance index");

  cfg.d = doc.contains("similarity") ? parse_similarity(doc["similarity"], "/similarity", n, features)
                                     : SimilarityFn::zeros(n);
  cfg.learner = parse_learner(require(doc, "", "learner"), "/learner");
  if (cfg.learner.kind == LearnerKind::kConstantZero && !cfg.cls.contains_constant_zero())
    bad("/learner", "constant_zero needs the constant-zero hypothesis in the class");
  cfg.environment = parse_environment(require(doc, "", "environment"), "/environment", run, n);

  if (doc.contains("auditor")) {
    const Json& a = doc["auditor"];
    expect_object(a, "/auditor");
    allow_keys(a, "/auditor", {"tie_break"});
    if (a.contains("tie_break")) {
      if (!a["tie_break"].is_string()) bad("/auditor/tie_break", "expected a string");
      try {
        cfg.tie_break = parse_tie_break(a["tie_break"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        bad("/auditor/tie_break", e.what());
      }
    }
  }

  if (doc.contains("seeds")) {
    const Json& s = doc["seeds"];
    if (!s.is_array() || s.empty()) bad("/seeds", "expected a nonempty array of seeds");
    for (std::size_t i = 0; i < s.size(); ++i) cfg.seeds.push_back(unsigned_integer(s[i], child("/seeds", i)));
  } else {
    cfg.seeds = {0};
  }
  if (doc.contains("out")) {
    if (!doc["out"].is_string()) bad("/out", "expected a path string");
    cfg.out_dir = doc["out"].get<std::string>();
  }

  try {
    run.validate(n);
  } catch (const std::invalid_argument& e) {
    bad("/", e.what());
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    Index column = 0;
    const Index line = offset_line(text, e.byte == 0 ? 0 : e.byte - 1, &column);
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column + 1),
                      "JSON syntax error");
  }
  return parse_config(doc);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot write " + path.string());
  out << content;
  if (!out) throw ArtifactError("write failed for " + path.string());
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const ArtifactError& e) {
    throw ConfigError(path, "cannot read config file");
  }
  return parse_config_text(text);
}

// --- Running -----------------------------------------------------------------------

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent streams for the environment, the learner and the auditor.
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

double sum_sq_dual_norm(const RunTrace& trace, int C) {
  double total = 0.0;
  for (const RoundRecord& r : trace.rounds) {
    double zeros = C;
    for (int y : r.batch.ys) zeros += y == 0;
    total += zeros * zeros;
  }
  return total;
}

std::string learner_name(LearnerKind kind) {
  switch (kind) {
    case LearnerKind::kExpWeights: return "expweights";
    case LearnerKind::kFtpl: return "ftpl";
    case LearnerKind::kConstantZero: return "constant_zero";
  }
  return "unknown";
}

RunResult simulate(const ExperimentConfig& cfg, std::uint64_t seed, Index T) {
  RunResult result;
  RunConfig& rc = result.config;
  rc = cfg.run;
  rc.seed = seed;
  rc.T = T;
  if (rc.q > T) rc.q = 0;

  const HypothesisClass& cls = cfg.cls;
  const Index N = cls.size();
  const SeparatorSet S = find_separator(cls);
  result.separator_size = S.size();
  result.gamma = std::numeric_limits<double>::quiet_NaN();
  result.omega = std::numeric_limits<double>::quiet_NaN();

  std::unique_ptr<Environment> env;
  if (cfg.environment.kind == EnvironmentKind::kStochastic) {
    env = std::make_unique<StochasticEnv>(cfg.environment.joint, rc.k, stream_seed(seed, 1));
  } else {
    if (Index(cfg.environment.rounds.size()) < T)
      throw std::invalid_argument("scripted environment is shorter than T");
    env = std::make_unique<ScriptedEnv>(cfg.environment.rounds);
  }

  std::unique_ptr<OnlineLearner> learner;
  switch (cfg.learner.kind) {
    case LearnerKind::kExpWeights:
      result.gamma = cfg.learner.gamma.value_or(default_gamma(N, T));
      learner = std::make_unique<ExpWeightsLearner>(cls, result.gamma, double(rc.C + rc.k));
      break;
    case LearnerKind::kFtpl: {
      const Index kp = rc.k + 2 * Index(rc.C);
      const double zeros = double(rc.k + rc.C);
      result.omega = cfg.learner.omega.value_or(
          default_omega(S.size(), kp, N, double(T) * zeros * zeros));
      learner = std::make_unique<FtplLearner>(
          cls, FtplState::make(cls, S, rc.dummy_v, kp, result.omega, stream_seed(seed, 2),
                               cfg.learner.mixture));
      break;
    }
    case LearnerKind::kConstantZero:
      learner = std::make_unique<ConstantZeroLearner>(cls);
      break;
  }

  const Auditor auditor(rc.alpha_prime, cfg.d, cfg.tie_break, stream_seed(seed, 3));
  result.trace = run_fair_online(*learner, *env, auditor, cls, rc);
  return result;
}

}  // namespace

void analyse(const ExperimentConfig& cfg, RunResult& result) {
  const RunConfig& rc = result.config;
  const HypothesisClass& cls = cfg.cls;
  const Index N = cls.size();
  const Index T = result.trace.size();
  result.regret = verify_bounds(cls, result.trace, cfg.d, rc);
  auto& checks = result.regret.checks;

  if (result.regret.fair_err_opt.feasible) {
    switch (cfg.learner.kind) {
      case LearnerKind::kExpWeights:
        checks.push_back(make_check(
            "expweights_regret", result.regret.lagrangian_regret_vs_simplex,
            expweights_regret_bound(double(rc.C + rc.k), N, result.gamma, T)));
        break;
      case LearnerKind::kFtpl: {
        const Index kp = rc.k + 2 * Index(rc.C);
        checks.push_back(make_check(
            "ftpl_regret", result.regret.lagrangian_regret_vs_simplex,
            ftpl_regret_bound(result.omega, kp, result.separator_size,
                              sum_sq_dual_norm(result.trace, rc.C), N)));
        checks.push_back(make_check(
            "ftpl_fairness", double(result.regret.cumulative_unfair),
            ftpl_fairness_bound(result.separator_size, rc.k, rc.epsilon, T, N)));
        break;
      }
      case LearnerKind::kConstantZero:
        break;
    }
  }

  result.generalization.reset();
  if (cfg.environment.kind == EnvironmentKind::kStochastic && result.regret.fair_err_opt.feasible) {
    const StochasticEnv D(cfg.environment.joint, rc.k, 0);
    result.generalization = generalization_report(result.trace, cls, rc, D, cfg.d, result.regret);
  }
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed, Index T) {
  RunResult result = simulate(config, seed, T);
  analyse(config, result);
  return result;
}

RunResult run_experiment(const ExperimentConfig& config, std::uint64_t seed) {
  return run_experiment(config, seed, config.run.T);
}

// --- Artifacts ---------------------------------------------------------------------

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string trace_csv(const RunTrace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  double cum_err = 0.0;
  Index cum_unfair = 0;
  for (const RoundRecord& r : trace.rounds) {
    cum_err += r.err;
    cum_unfair += r.unfair;
    out += std::to_string(r.t);
    out += ',' + format_double(r.err);
    out += ',' + std::to_string(r.unfair);
    out += ',' + format_double(r.lagrangian);
    out += ',' + std::to_string(r.audit ? r.audit->first : -1);
    out += ',' + std::to_string(r.audit ? r.audit->second : -1);
    out += ',' + format_double(cum_err);
    out += ',' + std::to_string(cum_unfair);
    out += '\n';
  }
  return out;
}

std::string policies_csv(const RunTrace& trace) {
  std::string out = "t";
  const Index m = trace.empty() ? 0 : trace.rounds.front().policy.size();
  for (Index h = 0; h < m; ++h) out += ",w" + std::to_string(h);
  out += '\n';
  for (const RoundRecord& r : trace.rounds) {
    out += std::to_string(r.t);
    for (Index h = 0; h < m; ++h) out += ',' + format_double(r.policy[h]);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split_lines(const std::string& text, const std::string& file) {
  if (text.empty()) throw ArtifactError(file + ": empty file");
  if (text.back() != '\n')
    throw ArtifactError(file + " line " +
                        std::to_string(std::count(text.begin(), text.end(), '\n') + 1) +
                        ": truncated (last line has no terminating newline)");
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

[[noreturn]] void field_error(const std::string& file, std::size_t line,
                              const std::string& column, const std::string& what) {
  throw ArtifactError(file + " line " + std::to_string(line) + ", column " + column + ": " + what);
}

double parse_double(const std::string& s, const std::string& file, std::size_t line,
                    const std::string& column) {
  if (s.empty()) field_error(file, line, column, "empty value");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v))
    field_error(file, line, column, "not a finite number: '" + s + "'");
  return v;
}

long long parse_int(const std::string& s, const std::string& file, std::size_t line,
                    const std::string& column) {
  if (s.empty()) field_error(file, line, column, "empty value");
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE)
    field_error(file, line, column, "not an integer: '" + s + "'");
  return v;
}

}  // namespace

std::vector<TraceRow> parse_trace_csv(const std::string& text) {
  const std::string file = "trace.csv";
  const std::vector<std::string> lines = split_lines(text, file);
  if (lines.front() != kTraceHeader)
    throw ArtifactError(file + " line 1: header must be '" + std::string(kTraceHeader) + "'");
  static const char* names[] = {"t", "err", "unfair", "lagrangian", "audit_rho1",
                                "audit_rho2", "cum_err", "cum_unfair"};
  std::vector<TraceRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    const std::vector<std::string> f = split_fields(lines[i]);
    if (f.size() != 8)
      throw ArtifactError(file + " line " + std::to_string(ln) + ": expected 8 fields, found " +
                          std::to_string(f.size()));
    TraceRow row;
    row.t = parse_int(f[0], file, ln, names[0]);
    if (row.t != Index(i)) field_error(file, ln, names[0], "expected round " + std::to_string(i));
    row.err = parse_double(f[1], file, ln, names[1]);
    const long long unfair = parse_int(f[2], file, ln, names[2]);
    if (unfair != 0 && unfair != 1) field_error(file, ln, names[2], "must be 0 or 1");
    row.unfair = int(unfair);
    row.lagrangian = parse_double(f[3], file, ln, names[3]);
    row.audit_rho1 = parse_int(f[4], file, ln, names[4]);
    row.audit_rho2 = parse_int(f[5], file, ln, names[5]);
    if ((row.audit_rho1 < 0) != (row.audit_rho2 < 0) || row.audit_rho1 < -1 || row.audit_rho2 < -1)
      field_error(file, ln, names[4], "audit positions must both be -1 or both be valid");
    row.cum_err = parse_double(f[6], file, ln, names[6]);
    row.cum_unfair = parse_int(f[7], file, ln, names[7]);
    rows.push_back(row);
  }
  return rows;
}

std::vector<Policy> parse_policies_csv(const std::string& text, Index num_hypotheses) {
  const std::string file = "policies.csv";
  const std::vector<std::string> lines = split_lines(text, file);
  if (Index(split_fields(lines.front()).size()) != num_hypotheses + 1)
    throw ArtifactError(file + " line 1: expected " + std::to_string(num_hypotheses + 1) + " columns");
  std::vector<Policy> policies;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t ln = i + 1;
    const std::vector<std::string> f = split_fields(lines[i]);
    if (Index(f.size()) != num_hypotheses + 1)
      throw ArtifactError(file + " line " + std::to_string(ln) + ": expected " +
                          std::to_string(num_hypotheses + 1) + " fields");
    if (parse_int(f[0], file, ln, "t") != (long long)i)
      field_error(file, ln, "t", "expected round " + std::to_string(i));
    Eigen::VectorXd w(num_hypotheses);
    for (Index h = 0; h < num_hypotheses; ++h)
      w[h] = parse_double(f[std::size_t(h + 1)], file, ln, "w" + std::to_string(h));
    try {
      policies.emplace_back(std::move(w));
    } catch (const std::invalid_argument& e) {
      throw ArtifactError(file + " line " + std::to_string(ln) + ": " + e.what());
    }
  }
  return policies;
}

namespace {

Json checks_json(const std::vector<BoundCheck>& checks) {
  Json out = Json::array();
  for (const BoundCheck& c : checks)
    out.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"pass", c.pass}});
  return out;
}

Json weights_json(const HindsightSolution& s) {
  if (!s.feasible) return nullptr;
  return std::vector<double>(s.policy.weights().data(),
                             s.policy.weights().data() + s.policy.size());
}

}  // namespace

Json config_echo(const ExperimentConfig& config, std::uint64_t seed) {
  Json echo = config.source;
  echo.erase("out");
  echo["seeds"] = Json::array({seed});
  echo["C"] = config.run.C;
  return echo;
}

Json summary_json(const ExperimentConfig& config, const RunResult& result) {
  const RunConfig& rc = result.config;
  const RegretReport& rr = result.regret;
  Json out;
  out["seed"] = rc.seed;
  out["learner"] = learner_name(config.learner.kind);
  out["T"] = rc.T;
  out["k"] = rc.k;
  out["C"] = rc.C;
  out["alpha"] = rc.alpha;
  out["alpha_prime"] = rc.alpha_prime;
  out["epsilon"] = rc.epsilon;
  out["num_hypotheses"] = config.cls.size();
  out["separator_size"] = result.separator_size;
  out["gamma"] = std::isnan(result.gamma) ? Json(nullptr) : Json(result.gamma);
  // Infinite omega (no perturbation) has no JSON number; it is written as a string.
  if (std::isnan(result.omega)) out["omega"] = nullptr;
  else if (std::isinf(result.omega)) out["omega"] = "inf";
  else out["omega"] = result.omega;

  Json regret;
  regret["learner_err"] = rr.learner_err;
  regret["learner_lagrangian"] = rr.learner_lagrangian;
  regret["cumulative_unfair"] = rr.cumulative_unfair;
  regret["violating_rounds"] = rr.violating_round_count;
  regret["misclass_regret"] = rr.misclass_regret;
  regret["lagrangian_regret_vs_simplex"] = rr.lagrangian_regret_vs_simplex;
  regret["lagrangian_regret_vs_fair"] = rr.lagrangian_regret_vs_fair;
  regret["R"] = rr.R_value;
  regret["fair_err_policy"] = weights_json(rr.fair_err_opt);
  regret["lagrangian_fair_policy"] = weights_json(rr.lagrangian_fair_opt);
  regret["checks"] = checks_json(rr.checks);
  out["regret"] = regret;

  if (result.generalization) {
    const GeneralizationReport& g = *result.generalization;
    Json gen;
    gen["q"] = g.q;
    gen["delta"] = g.delta;
    gen["expected_loss_avg"] = g.expected_loss_avg;
    gen["fair_expected_loss"] = g.fair_expected_loss;
    gen["accuracy_bound"] = g.accuracy_bound;
    gen["threshold"] = g.threshold;
    gen["beta_avg"] = g.beta_avg;
    gen["beta_star"] = g.beta_star;
    gen["beta_sum"] = g.beta_sum;
    gen["beta_sum_bound"] = g.beta_sum_bound;
    gen["checks"] = checks_json(g.checks);
    out["generalization"] = gen;
  } else {
    out["generalization"] = nullptr;
  }
  out["pass"] = result.all_pass();
  out["config"] = config_echo(config, rc.seed);
  return out;
}

// --- Commands ----------------------------------------------------------------------

unsigned worker_count(std::size_t jobs) {
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FAIRLAB_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) workers = std::min<unsigned>(workers, unsigned(cap));
  }
  return std::max(1u, std::min<unsigned>(workers, unsigned(std::max<std::size_t>(jobs, 1))));
}

namespace {

template <typename Fn>
void parallel_for(std::size_t jobs, Fn&& fn) {
  const unsigned workers = worker_count(jobs);
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  auto loop = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void print_checks(std::ostream& out, const std::vector<BoundCheck>& checks) {
  for (const BoundCheck& c : checks)
    out << "  " << (c.pass ? "PASS " : "FAIL ") << c.name << "  lhs=" << format_double(c.lhs)
        << "  rhs=" << format_double(c.rhs) << '\n';
}

std::string seed_dir_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

}  // namespace

int cmd_run(const std::string& config_path, const RunOptions& options,
            std::ostream& out, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << '\n';
    return 2;
  }
  const std::vector<std::uint64_t> seeds =
      options.seed ? std::vector<std::uint64_t>{*options.seed} : cfg.seeds;
  const fs::path root = options.out_dir.value_or(cfg.out_dir);

  struct Outcome {
    bool ok = false;
    bool pass = false;
    std::string message;
  };
  std::vector<Outcome> outcomes(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) {
    Outcome& o = outcomes[i];
    try {
      const RunResult result = run_experiment(cfg, seeds[i]);
      const fs::path dir = root / seed_dir_name(seeds[i]);
      fs::create_directories(dir);
      write_file(dir / "trace.csv", trace_csv(result.trace));
      write_file(dir / "summary.json", summary_json(cfg, result).dump(2) + "\n");
      write_file(dir / "config.json", config_echo(cfg, seeds[i]).dump(2) + "\n");
      if (options.log_policies) write_file(dir / "policies.csv", policies_csv(result.trace));
      o.ok = true;
      o.pass = result.all_pass();
      std::ostringstream msg;
      msg << "seed " << seeds[i] << ": " << (o.pass ? "pass" : "FAIL") << "  T=" << result.config.T
          << "  unfair=" << result.regret.cumulative_unfair
          << "  misclass_regret=" << format_double(result.regret.misclass_regret)
          << "  lagrangian_regret=" << format_double(result.regret.lagrangian_regret_vs_simplex)
          << "  -> " << dir.string() << '\n';
      if (!o.pass) {
        std::ostringstream detail;
        print_checks(detail, result.regret.checks);
        if (result.generalization) print_checks(detail, result.generalization->checks);
        msg << detail.str();
      }
      o.message = msg.str();
    } catch (const std::exception& e) {
      o.message = "seed " + std::to_string(seeds[i]) + ": error: " + e.what() + "\n";
    }
  });

  int status = 0;
  for (const Outcome& o : outcomes) {
    (o.ok ? out : err) << o.message;
    if (!o.ok) status = 2;
    else if (!o.pass && status == 0) status = 1;
  }
  return status;
}

namespace {

struct VerifyOutcome {
  std::vector<BoundCheck> checks;
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
  }
};

VerifyOutcome verify_one(const fs::path& dir) {
  ExperimentConfig cfg;
  try {
    cfg = parse_config_text(read_file(dir / "config.json"));
  } catch (const ConfigError& e) {
    throw ArtifactError("config.json: " + std::string(e.what()));
  }
  if (cfg.seeds.size() != 1) throw ArtifactError("config.json must pin exactly one seed");
  const std::vector<TraceRow> rows = parse_trace_csv(read_file(dir / "trace.csv"));
  if (Index(rows.size()) != cfg.run.T)
    throw ArtifactError("trace.csv has " + std::to_string(rows.size()) + " rows but T = " +
                        std::to_string(cfg.run.T) + " (truncated?)");
  const Json recorded_summary = [&] {
    try {
      return Json::parse(read_file(dir / "summary.json"));
    } catch (const Json::parse_error& e) {
      throw ArtifactError(std::string("summary.json: ") + e.what());
    }
  }();

  RunResult result = simulate(cfg, cfg.seeds.front(), cfg.run.T);
  Index replay_mismatch = 0;
  Index cumulative_mismatch = 0;
  double cum_err = 0.0;
  Index cum_unfair = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    const TraceRow& row = rows[t];
    RoundRecord& r = result.trace.rounds[t];
    const AuditOutcome audit = row.audit_rho1 < 0 ? AuditOutcome{}
                                                  : AuditOutcome{FlaggedPair{row.audit_rho1, row.audit_rho2}};
    if (audit) {
      try {
        validate_outcome(audit, r.batch.size());
      } catch (const std::invalid_argument& e) {
        throw ArtifactError("trace.csv line " + std::to_string(t + 2) + ": " + e.what());
      }
    }
    if (row.err != r.err || row.unfair != r.unfair || row.lagrangian != r.lagrangian ||
        audit != r.audit)
      ++replay_mismatch;
    cum_err += row.err;
    cum_unfair += row.unfair;
    if (row.cum_err != cum_err || row.cum_unfair != cum_unfair) ++cumulative_mismatch;
    r.err = row.err;
    r.unfair = row.unfair;
    r.lagrangian = row.lagrangian;
    r.audit = audit;
  }

  if (fs::exists(dir / "policies.csv")) {
    const std::vector<Policy> policies =
        parse_policies_csv(read_file(dir / "policies.csv"), cfg.cls.size());
    if (policies.size() != rows.size())
      throw ArtifactError("policies.csv has " + std::to_string(policies.size()) + " rows but T = " +
                          std::to_string(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
      if (!(policies[t] == result.trace.rounds[t].policy)) ++replay_mismatch;
      result.trace.rounds[t].policy = policies[t];
    }
  }

  analyse(cfg, result);
  VerifyOutcome outcome;
  outcome.checks.push_back(make_check("replay_matches_csv", double(replay_mismatch), 0.0, 0.0));
  outcome.checks.push_back(make_check("cumulative_columns", double(cumulative_mismatch), 0.0, 0.0));
  const bool summary_ok = summary_json(cfg, result) == recorded_summary;
  outcome.checks.push_back(make_check("summary_matches", summary_ok ? 0.0 : 1.0, 0.0, 0.0));
  for (const BoundCheck& c : result.regret.checks) outcome.checks.push_back(c);
  if (result.generalization)
    for (const BoundCheck& c : result.generalization->checks) outcome.checks.push_back(c);
  return outcome;
}

}  // namespace

int cmd_verify(const std::string& artifact_dir, std::ostream& out, std::ostream& err) {
  const fs::path root(artifact_dir);
  std::vector<fs::path> dirs;
  std::error_code ec;
  if (fs::exists(root / "config.json", ec)) {
    dirs.push_back(root);
  } else if (fs::is_directory(root, ec)) {
    for (const auto& entry : fs::directory_iterator(root, ec))
      if (entry.is_directory() && fs::exists(entry.path() / "config.json")) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) {
    err << "error: no run artifacts (config.json) under " << artifact_dir << '\n';
    return 2;
  }

  int status = 0;
  for (const fs::path& dir : dirs) {
    try {
      const VerifyOutcome v = verify_one(dir);
      out << dir.string() << ": " << (v.all_pass() ? "pass" : "FAIL") << '\n';
      print_checks(out, v.checks);
      if (!v.all_pass() && status == 0) status = 1;
    } catch (const std::exception& e) {
      err << dir.string() << ": error: " << e.what() << '\n';
      status = 2;
    }
  }
  return status;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, const std::vector<Index>& horizons) {
  std::vector<SweepRow> rows(horizons.size());
  const std::uint64_t seed = config.seeds.front();
  parallel_for(horizons.size(), [&](std::size_t i) {
    const Index T = horizons[i];
    if (T < 1) throw std::invalid_argument("horizon must be positive");
    const RunResult result = run_experiment(config, seed, T);
    SweepRow& row = rows[i];
    row.T = T;
    row.cumulative_unfair = result.regret.cumulative_unfair;
    row.misclass_regret = result.regret.misclass_regret;
    const Index N = config.cls.size();
    switch (config.learner.kind) {
      case LearnerKind::kExpWeights:
        row.bound = expweights_regret_bound(double(result.config.C + result.config.k), N,
                                            result.gamma, T);
        break;
      case LearnerKind::kFtpl:
        row.bound = ftpl_fairness_bound(result.separator_size, result.config.k,
                                        result.config.epsilon, T, N);
        break;
      case LearnerKind::kConstantZero:
        row.bound = 0.0;
        break;
    }
  });
  return rows;
}

int cmd_sweep(const std::string& config_path, const std::vector<Index>& horizons,
              std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = load_config(config_path);
    for (Index T : horizons)
      if (T < 1) throw std::invalid_argument("horizons must be positive");
    const std::vector<SweepRow> rows = sweep(cfg, horizons);
    out << "T,cum_unfair,misclass_regret,bound\n";
    for (const SweepRow& r : rows)
      out << r.T << ',' << r.cumulative_unfair << ',' << format_double(r.misclass_regret) << ','
          << format_double(r.bound) << '\n';
    return 0;
  } catch (const ConfigError& e) {
    err << "config error at " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return 2;
}

}  // namespace fairlab
