// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any fails.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "fairlab/experiment.hpp"
#include "oracles.hpp"

using namespace fairlab;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 20;
constexpr Index kT = 5000;

Json base_config(Index T) {
  return Json{{"T", T}, {"k", 4}, {"alpha_prime", 0.3}, {"epsilon", 0.2}, {"C", 25},
              {"auditor", {{"tie_break", "max-violation"}}}};
}

Json three_point(Index T, const Json& learner) {
  Json doc = base_config(T);
  doc["class"] = {{"table", {{1, 0, 0}, {1, 1, 0}}}};
  doc["similarity"] = {{"table", {{0, 0, 1}, {0, 0, 0}, {1, 0, 0}}}};
  doc["learner"] = learner;
  doc["environment"] = {{"stochastic", {{"uniform_labels", {0.9, 0.5, 0.1}}}}};
  return doc;
}

// n = 12, |H| = 32 including the zero hypothesis, random non-metric d.
Json random_universe(Index T, const Json& learner) {
  std::mt19937_64 rng(314);
  const HypothesisClass cls = oracle::random_class(12, 32, rng);
  Json rows = Json::array();
  for (Index h = 0; h + 1 < cls.size(); ++h) {
    Json row = Json::array();
    for (Index x = 0; x < 12; ++x) row.push_back(cls.predict(h, x) > 0.5 ? 1 : 0);
    rows.push_back(row);
  }
  Json labels = Json::array();
  for (Index x = 0; x < 12; ++x) labels.push_back(std::uniform_real_distribution<double>(0, 1)(rng));
  Json doc = base_config(T);
  doc["class"] = {{"table", rows}};
  doc["similarity"] = {{"random", {{"seed", 17}, {"scale", 0.5}}}};
  doc["learner"] = learner;
  doc["environment"] = {{"stochastic", {{"uniform_labels", labels}}}};
  return doc;
}

const BoundCheck* find_check(const RunResult& r, const std::string& name) {
  for (const BoundCheck& c : r.regret.checks)
    if (c.name == name) return &c;
  return nullptr;
}

bool checks_pass(const RunResult& r, std::initializer_list<const char*> names, std::ostringstream& why) {
  bool ok = true;
  for (const char* n : names) {
    const BoundCheck* c = find_check(r, n);
    if (!c || !c->pass) {
      ok = false;
      why << " " << n << (c ? " lhs=" + format_double(c->lhs) + " rhs=" + format_double(c->rhs) : " missing");
    }
  }
  return ok;
}

std::vector<RunResult> run_seeds(const Json& doc, int seeds) {
  const ExperimentConfig cfg = parse_config(doc);
  std::vector<RunResult> out;
  for (int s = 0; s < seeds; ++s) out.push_back(run_experiment(cfg, std::uint64_t(s)));
  return out;
}

// 1. The inflated batch reproduces Lagrangian differences exactly.
bool reduction_exact(std::ostringstream& why) {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = std::uniform_int_distribution<Index>(2, 20)(rng);
    const HypothesisClass cls =
        oracle::random_class(n, std::uniform_int_distribution<Index>(1, std::min<Index>(16, Index(1) << n))(rng), rng);
    const Index k = std::uniform_int_distribution<Index>(2, 6)(rng);
    const int C = std::uniform_int_distribution<int>(1, 30)(rng);
    const double a = std::uniform_real_distribution<double>(0.01, 0.5)(rng);
    const Batch b = oracle::random_batch(n, k, rng);
    AuditOutcome rho;
    if (std::bernoulli_distribution(0.6)(rng)) {
      const Index i = std::uniform_int_distribution<Index>(0, k - 1)(rng);
      rho = FlaggedPair{i, (i + std::uniform_int_distribution<Index>(1, k - 1)(rng)) % k};
    }
    const Eigen::VectorXd w = oracle::random_policy(cls.size(), rng).weights();
    const Eigen::VectorXd w2 = oracle::random_policy(cls.size(), rng).weights();
    auto L = [&](const Eigen::VectorXd& p) {
      double v = oracle::batch_loss(cls, p, b);
      if (rho)
        v += C * (oracle::prediction(cls, p, b.xs[rho->first]) - oracle::prediction(cls, p, b.xs[rho->second]) - a);
      return v;
    };
    const Batch inflated = reduction_inflate(b, rho, C, 0);
    const double diff = (L(w) - L(w2)) -
                        (oracle::batch_loss(cls, w, inflated) - oracle::batch_loss(cls, w2, inflated));
    worst = std::max(worst, std::abs(diff));
  }
  why << " max |diff|=" << worst;
  return worst <= 1e-9;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const std::string& title, const std::function<bool(std::ostringstream&)>& fn) {
    std::ostringstream why;
    bool ok = false;
    try {
      ok = fn(why);
    } catch (const std::exception& e) {
      why << " exception: " << e.what();
    }
    failures += ok ? 0 : 1;
    std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << title << "  " << why.str() << std::endl;
  };

  const Json expweights = {{"expweights", Json::object()}};
  const Json ftpl = {{"ftpl", Json::object()}};
  std::vector<RunResult> ew_three, ew_random;

  report(1, "reduction exactness", reduction_exact);

  report(2, "exponential weights Lagrangian regret bound", [&](std::ostringstream& why) {
    ew_three = run_seeds(three_point(kT, expweights), kSeeds);
    ew_random = run_seeds(random_universe(kT, expweights), kSeeds);
    bool ok = true;
    double worst = -1e300;
    for (const auto* runs : {&ew_three, &ew_random})
      for (const RunResult& r : *runs) {
        const double N = double(r.trace.rounds.front().policy.size());
        const double bound = 2.0 * (25 + 4) * std::sqrt(double(kT) * std::log(N));
        worst = std::max(worst, r.regret.lagrangian_regret_vs_simplex / bound);
        ok = ok && r.regret.lagrangian_regret_vs_simplex <= bound + kBoundTolerance;
        ok = ok && find_check(r, "expweights_regret") && find_check(r, "expweights_regret")->pass;
      }
    why << " max regret/bound=" << worst;
    return ok;
  });

  report(3, "Lagrangian dominates unfairness plus misclassification regret", [&](std::ostringstream& why) {
    bool ok = !ew_three.empty();
    for (const auto* runs : {&ew_three, &ew_random})
      for (const RunResult& r : *runs) ok = checks_pass(r, {"lagrangian_dominates", "misclass_regret"}, why) && ok;
    return ok;
  });

  report(4, "fairness regret and instantaneous regret", [&](std::ostringstream& why) {
    bool ok = !ew_three.empty();
    double min_gap = 1e300;
    for (const auto* runs : {&ew_three, &ew_random})
      for (const RunResult& r : *runs) {
        ok = checks_pass(r, {"fairness_regret", "instantaneous_regret"}, why) && ok;
        if (const BoundCheck* c = find_check(r, "instantaneous_regret")) min_gap = std::min(min_gap, c->rhs);
      }
    why << " min instantaneous gap=" << min_gap;
    return ok && min_gap >= 1.0 - 1e-7;
  });

  report(5, "FTPL mean regret and mean unfairness", [&](std::ostringstream& why) {
    bool ok = true;
    for (const Json& doc : {three_point(kT, ftpl), random_universe(kT, ftpl)}) {
      const std::vector<RunResult> runs = run_seeds(doc, kSeeds);
      double regret = 0.0, regret_bound = 0.0, unfair = 0.0, unfair_bound = 0.0;
      for (const RunResult& r : runs) {
        regret += r.regret.lagrangian_regret_vs_simplex / kSeeds;
        regret_bound += find_check(r, "ftpl_regret")->rhs / kSeeds;
        unfair += double(r.regret.cumulative_unfair) / kSeeds;
        unfair_bound += find_check(r, "ftpl_fairness")->rhs / kSeeds;
      }
      why << " regret " << regret << "<=" << regret_bound << " unfair " << unfair << "<=" << unfair_bound << ";";
      ok = ok && regret <= regret_bound + kBoundTolerance && unfair <= unfair_bound + kBoundTolerance;
    }
    return ok;
  });

  report(6, "covering bound on random tuples", [&](std::ostringstream& why) {
    std::mt19937_64 rng(6);
    int failed = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const Index n = std::uniform_int_distribution<Index>(2, 10)(rng);
      const HypothesisClass cls =
          oracle::random_class(n, std::uniform_int_distribution<Index>(1, std::min<Index>(10, Index(1) << n))(rng), rng);
      const SimilarityFn d = oracle::random_similarity(n, 0.5, rng);
      const Index T = std::uniform_int_distribution<Index>(1, 50)(rng);
      const Index q = std::uniform_int_distribution<Index>(1, T)(rng);
      const double a = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
      Eigen::VectorXd marginal(n);
      for (Index x = 0; x < n; ++x) marginal[x] = std::uniform_real_distribution<double>(0.01, 1)(rng);
      marginal /= marginal.sum();
      std::vector<Eigen::VectorXd> seq;
      Eigen::VectorXd avg = Eigen::VectorXd::Zero(n);
      double sum = 0.0;
      for (Index t = 0; t < T; ++t) {
        seq.push_back(predictions(oracle::random_policy(cls.size(), rng), cls));
        avg += seq.back() / double(T);
        sum += oracle::beta(seq.back(), marginal, d, a);
      }
      const double lhs = oracle::beta(avg, marginal, d, a + double(q) / double(T));
      const BoundCheck c = covering_check(seq, q, marginal, d, a);
      if (!c.pass || lhs > sum / double(q) + 1e-12) ++failed;
    }
    why << " failed=" << failed << "/500";
    return failed == 0;
  });

  report(7, "three-point beta values", [&](std::ostringstream& why) {
    const HypothesisClass cls = oracle::three_point_class();
    const SimilarityFn d = oracle::three_point_similarity();
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(3, 1.0 / 3);
    const Eigen::VectorXd h1 = cls.table().col(0), h2 = cls.table().col(1);
    const double b1 = empirical_beta(h1, u, d, 0.1);
    const double b2 = empirical_beta(h2, u, d, 0.1);
    const double ba = empirical_beta(0.5 * (h1 + h2), u, d, 0.1);
    why << " beta(h1)=" << b1 << " beta(h2)=" << b2 << " beta(avg)=" << ba;
    return std::abs(b1 - 2.0 / 9) < 1e-15 && std::abs(b2 - 2.0 / 9) < 1e-15 &&
           std::abs(ba - 4.0 / 9) < 1e-15 && ba == b1 + b2;
  });

  report(8, "generalization at T = 10^4 (19 of 20 seeds)", [&](std::ostringstream& why) {
    const std::vector<RunResult> runs = run_seeds(three_point(10000, expweights), kSeeds);
    int passed = 0;
    for (const RunResult& r : runs) {
      const bool q_ok = r.generalization && r.generalization->q == Index(std::ceil(std::pow(10000.0, 0.75)));
      passed += (q_ok && r.generalization->all_pass()) ? 1 : 0;
    }
    why << " passed=" << passed << "/" << kSeeds;
    return passed >= 19;
  });

  report(9, "auditor soundness and completeness", [&](std::ostringstream& why) {
    std::mt19937_64 rng(9);
    int wrong = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const Index n = std::uniform_int_distribution<Index>(2, 12)(rng);
      const HypothesisClass cls = oracle::random_class(n, std::min<Index>(8, Index(1) << n), rng);
      const SimilarityFn d = oracle::random_similarity(n, 0.5, rng);
      const double tol = std::uniform_real_distribution<double>(0.01, 0.4)(rng);
      const Batch b = oracle::random_batch(n, std::uniform_int_distribution<Index>(2, 6)(rng), rng);
      const Eigen::VectorXd preds = predictions(oracle::random_policy(cls.size(), rng), cls);
      const auto truth = oracle::violating_pairs(preds, b.xs, d, tol);
      for (TieBreak tie : {TieBreak::kFirstLexicographic, TieBreak::kMaxViolation, TieBreak::kSeededRandom}) {
        const AuditOutcome out = Auditor(tol, d, tie, 3).audit(b.xs, preds, trial);
        const bool member = out && std::find(truth.begin(), truth.end(),
                                             std::pair<Index, Index>{out->first, out->second}) != truth.end();
        if (out.has_value() != !truth.empty() || (out && !member)) ++wrong;
      }
    }
    why << " disagreements=" << wrong;
    return wrong == 0;
  });

  report(10, "CLI determinism and verify exit codes", [&](std::ostringstream& why) {
    const fs::path tmp = fs::temp_directory_path() / ("fairlab-acceptance-" + std::to_string(std::random_device{}()));
    fs::create_directories(tmp);
    Json doc = three_point(1000, expweights);
    doc["seeds"] = {0, 1};
    std::ofstream(tmp / "cfg.json") << doc.dump(2);
    std::ostringstream sink;
    RunOptions a, b;
    a.out_dir = (tmp / "a").string();
    b.out_dir = (tmp / "b").string();
    const int run_a = cmd_run((tmp / "cfg.json").string(), a, sink, sink);
    const int run_b = cmd_run((tmp / "cfg.json").string(), b, sink, sink);
    auto slurp = [](const fs::path& p) {
      std::ifstream in(p, std::ios::binary);
      std::ostringstream s;
      s << in.rdbuf();
      return s.str();
    };
    bool same = true;
    for (const char* seed : {"seed-0", "seed-1"})
      for (const char* f : {"trace.csv", "summary.json", "config.json"})
        same = same && slurp(tmp / "a" / seed / f) == slurp(tmp / "b" / seed / f);
    const int verify_clean = cmd_verify((tmp / "a").string(), sink, sink);

    // Flip one unfair bit.
    const fs::path trace = tmp / "b" / "seed-0" / "trace.csv";
    std::string text = slurp(trace);
    const std::size_t line = text.find('\n') + 1;
    const std::size_t comma = text.find(',', text.find(',', line) + 1);
    text[comma - 1] = text[comma - 1] == '0' ? '1' : '0';
    std::ofstream(trace, std::ios::binary) << text;
    const int verify_flipped = cmd_verify((tmp / "b").string(), sink, sink);
    const int verify_missing = cmd_verify((tmp / "nothing").string(), sink, sink);
    fs::remove_all(tmp);
    why << " run=" << run_a << "," << run_b << " identical=" << same << " verify clean=" << verify_clean
        << " flipped=" << verify_flipped << " missing=" << verify_missing;
    return run_a == 0 && run_b == 0 && same && verify_clean == 0 && verify_flipped != 0 && verify_missing != 0;
  });

  std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
