#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "opd/envs/environment.hpp"
#include "opd/errors.hpp"
#include "opd/harness/compare.hpp"
#include "opd/harness/config.hpp"
#include "opd/harness/run.hpp"
#include "opd/rl/evaluate.hpp"
#include "support.hpp"

using namespace opd;
using namespace opd::harness;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "opd_harness_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ExperimentConfig tiny(const std::string& name, std::size_t cohort) {
  ExperimentConfig c;
  c.name = name;
  c.train.env_id = "catch";
  c.train.hidden = {16};
  c.train.budget = 400;
  c.train.eval_interval = 100;
  c.train.eval_episodes = 4;
  c.train.dqn.warmup = 64;
  c.train.dqn.batch_size = 32;
  c.cohort_size = cohort;
  c.ablation.independent = cohort == 1;
  c.smoothing_window = 3;
  return c;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("text form round-trips") {
    auto c = tiny("roundtrip", 3);
    c.seeds = {1, 5, 9};
    c.temperature = 2.5;
    c.coefficients = {1.0, 0.25, 0.1};
    c.attention = distill::AttentionMode::kEqualWeights;
    c.train.ppo.epochs = 10;
    const auto text = to_ini(c);
    const auto back = config_from_ini(IniDocument::parse(text));
    CHECK(to_ini(back) == text);
    CHECK(back.seeds == c.seeds);
    CHECK(back.temperature == 2.5);
    CHECK(back.attention == distill::AttentionMode::kEqualWeights);
  }

  TEST_CASE("parsing accepts comments and partial files") {
    const auto c = config_from_ini(IniDocument::parse(
        "# comment\n[experiment]\nname = x\nalgorithm = ppo\nenv = cartpole ; trailing\n[ppo]\nepochs = 10\n"));
    CHECK(c.name == "x");
    CHECK(c.train.algorithm == policy::Algorithm::kPpo);
    CHECK(c.train.env_id == "cartpole");
    CHECK(c.train.ppo.epochs == 10);
    CHECK(c.train.ppo.minibatch == rl::PpoOptions{}.minibatch);
  }

  TEST_CASE("malformed or unknown entries are configuration errors") {
    CHECK_THROWS_AS(IniDocument::parse("[experiment\nname = x\n"), ConfigError);
    CHECK_THROWS_AS(IniDocument::parse("[experiment]\nname\n"), ConfigError);
    CHECK_THROWS_AS(IniDocument::parse("[experiment]\nname = a\nname = b\n"), ConfigError);
    CHECK_THROWS_AS(config_from_ini(IniDocument::parse("[experiment]\nnmae = a\n")), ConfigError);
    CHECK_THROWS_AS(config_from_ini(IniDocument::parse("[exp]\nname = a\n")), ConfigError);
    CHECK_THROWS_AS(config_from_ini(IniDocument::parse("[experiment]\nbudget = lots\n")), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/opd.ini"), ConfigError);
  }

  TEST_CASE("validation rejects inconsistent settings") {
    auto c = tiny("v", 3);
    CHECK_NOTHROW(c.validate());
    c.cohort_size = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny("v", 1);
    c.cohort_size = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny("v", 3);
    c.train.env_id = "pong";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny("v", 3);
    c.temperature = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny("v", 3);
    c.seeds.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = tiny("v", 3);
    c.name = "../escape";
    CHECK_THROWS_AS(c.validate(), ConfigError);
  }

  TEST_CASE("ablation flags fold into the coefficients") {
    auto c = tiny("f", 3);
    c.ablation.no_decision_loss = true;
    auto o = c.cohort_options();
    CHECK(o.coefficients.decision == 0.0);
    CHECK(o.coefficients.feature == 1.0);
    c.ablation = {};
    c.ablation.no_feature_loss = true;
    o = c.cohort_options();
    CHECK(o.coefficients.decision == 1.0);
    CHECK(o.coefficients.feature == 0.0);
  }
}

TEST_SUITE("percent deltas") {
  TEST_CASE("table cells") {
    CHECK(format_with_delta(442, 660) == "660 (↑ 49.3%)");
    CHECK(format_with_delta(2435, 3401) == "3401 (↑ 39.7%)");
    CHECK(std::abs(percent_delta(2435, 3401) - 39.671457905544145) < 1e-9);
    CHECK(format_with_delta(500, 500) == "500 (= 0.0%)");
    CHECK(format_with_delta(0.8, 0.6) == "0.600 (↓ 25.0%)");
    CHECK(std::isnan(percent_delta(0, 1)));
    CHECK(format_with_delta(0, 1) == "1.000 (n/a)");
  }

  TEST_CASE("a negative baseline uses its magnitude") {
    CHECK(percent_delta(-0.5, 0.5) == doctest::Approx(200.0));
    CHECK(percent_delta(-0.5, -1.0) == doctest::Approx(-100.0));
  }
}

TEST_SUITE("trailing_mean") {
  TEST_CASE("examples") {
    const std::vector<double> v{1, 2, 3, 4};
    CHECK(trailing_mean(v, 2) == std::vector<double>{1, 1.5, 2.5, 3.5});
    CHECK(trailing_mean(v, 1) == v);
    CHECK(trailing_mean(v, 50) == std::vector<double>{1, 1.5, 2, 2.5});
    CHECK_THROWS_AS(trailing_mean(v, 0), ParameterError);
  }
}

TEST_SUITE("runs") {
  TEST_CASE("output root precedence") {
    ::unsetenv(kOutputRootEnv);
    CHECK(output_root(std::nullopt) == "runs");
    ::setenv(kOutputRootEnv, "/tmp/opd_env_root", 1);
    CHECK(output_root(std::nullopt) == "/tmp/opd_env_root");
    CHECK(output_root(std::string("cli_root")) == "cli_root");
    ::unsetenv(kOutputRootEnv);
  }

  TEST_CASE("an independent config with two seeds yields two runs with rewards files") {
    const auto root = scratch("independent");
    auto c = tiny("solo", 1);
    c.seeds = {0, 1};
    const auto runs = run(c, root.string());
    REQUIRE(runs.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      const fs::path dir = root / "solo" / ("seed_" + std::to_string(c.seeds[i]));
      CHECK(runs[i].dir == dir.string());
      CHECK(runs[i].members.size() == 1);
      for (const char* f : {"config.ini", "metrics.csv", "curve.csv", "summary.json", "rewards.csv"})
        CHECK(fs::exists(dir / f));
      CHECK(fs::exists(dir / "checkpoints" / "member_1.ckpt"));
      const auto rewards = slurp(dir / "rewards.csv");
      CHECK(rewards.rfind("step,mean_eval_return,max_eval_return\n", 0) == 0);
    }
  }

  TEST_CASE("a cohort run logs members one to three on every eval step") {
    const auto root = scratch("cohort");
    const auto c = tiny("trio", 3);
    const auto a = run_seed(c, 3, (root / "run").string());
    CHECK(a.members.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(a.members[i].member == i + 1);
    const auto text = slurp(root / "run" / "metrics.csv");
    CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
      const auto member = std::stoul(line.substr(line.find(',') + 1));
      CHECK(member == rows % 3 + 1);
      ++rows;
    }
    CHECK(rows == 3 * 4);  // evaluations at 100, 200, 300, 400
    CHECK_FALSE(fs::exists(root / "run" / "rewards.csv"));

    const auto back = load_run((root / "run").string());
    CHECK(back.seed == 3);
    CHECK(to_ini(back.config) == to_ini(c));
    REQUIRE(back.metrics.size() == a.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
      CHECK(back.metrics[i].eval_return_mean == a.metrics[i].eval_return_mean);
      CHECK(back.metrics[i].loss_decision == a.metrics[i].loss_decision);
    }
    CHECK(back.cohort_final_mean() == a.cohort_final_mean());
  }

  TEST_CASE("curve.csv holds the trailing mean of each member's returns") {
    const auto root = scratch("curve");
    auto c = tiny("curve", 2);
    c.smoothing_window = 2;
    const auto a = run_seed(c, 0, (root / "run").string());
    std::istringstream in(slurp(root / "run" / "curve.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,member,eval_return_mean,smoothed");
    std::vector<std::vector<double>> raw(2), smooth(2);
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(row, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 4);
      const auto m = std::stoul(cells[1]) - 1;
      raw[m].push_back(std::stod(cells[2]));
      smooth[m].push_back(std::stod(cells[3]));
    }
    for (std::size_t m = 0; m < 2; ++m) {
      const auto expected = trailing_mean(raw[m], 2);
      REQUIRE(expected.size() == smooth[m].size());
      for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(expected[i] - smooth[m][i]) < 1e-12);
    }
  }

  TEST_CASE("rerunning a seed reproduces metrics byte for byte") {
    const auto root = scratch("rerun");
    const auto c = tiny("again", 2);
    run_seed(c, 11, (root / "a").string());
    run_seed(c, 11, (root / "b").string());
    CHECK(slurp(root / "a" / "metrics.csv") == slurp(root / "b" / "metrics.csv"));
    CHECK(slurp(root / "a" / "summary.json") == slurp(root / "b" / "summary.json"));
  }

  TEST_CASE("invalid configs fail before anything is written") {
    const auto root = scratch("invalid");
    auto c = tiny("bad", 3);
    c.cohort_size = 1;
    CHECK_THROWS_AS(run(c, root.string()), ConfigError);
    CHECK_FALSE(fs::exists(root / "bad"));
  }
}

TEST_SUITE("ablation arms") {
  TEST_CASE("four arms toggle one component each") {
    const auto arms = ablation_arms(tiny("base", 3));
    REQUIRE(arms.size() == 4);
    CHECK(arms[0].name == "base_full");
    CHECK(arms[1].ablation.no_decision_loss);
    CHECK(arms[2].ablation.no_feature_loss);
    CHECK(arms[3].attention == distill::AttentionMode::kEqualWeights);
    CHECK(arms[0].attention == distill::AttentionMode::kDecisionAttention);
    CHECK_THROWS_AS(ablation_arms(tiny("solo", 1)), ConfigError);
  }
}

TEST_SUITE("compare") {
  TEST_CASE("identical runs compare with zero deltas") {
    const auto root = scratch("compare_same");
    const auto c = tiny("same", 2);
    run_seed(c, 0, (root / "a").string());
    run_seed(c, 0, (root / "b").string());
    const auto report = compare({(root / "a").string(), (root / "b").string()}, (root / "out").string());
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[1].final_delta_pct == 0.0);
    CHECK(report.rows[1].final_mean == report.rows[0].final_mean);
    CHECK(fs::exists(report.csv_path));
    CHECK(fs::exists(report.table_path));
    for (const auto& p : report.plots) CHECK(slurp(p).find("<svg") != std::string::npos);
  }

  TEST_CASE("seed directories are averaged and reported with a standard error") {
    const auto root = scratch("compare_seeds");
    auto c = tiny("seeds", 2);
    c.seeds = {0, 1, 2};
    const auto runs = run(c, root.string());
    const auto report = compare({(root / "seeds").string()}, (root / "out").string());
    REQUIRE(report.rows.size() == 1);
    const auto& row = report.rows[0];
    CHECK(row.seeds == 3);
    double mean = 0;
    for (const auto& r : runs) mean += r.cohort_final_mean() / 3.0;
    CHECK(row.final_mean == doctest::Approx(mean).epsilon(1e-12));
    double var = 0;
    for (const auto& r : runs) var += (r.cohort_final_mean() - mean) * (r.cohort_final_mean() - mean) / 2.0;
    CHECK(row.final_stderr == doctest::Approx(std::sqrt(var / 3.0)).epsilon(1e-9));
  }

  TEST_CASE("mismatched environments and empty directories are usage errors") {
    const auto root = scratch("compare_bad");
    auto c = tiny("x", 2);
    run_seed(c, 0, (root / "catch").string());
    c.train.env_id = "chain";
    c.train.budget = 200;
    run_seed(c, 0, (root / "chain").string());
    CHECK_THROWS_AS(compare({(root / "catch").string(), (root / "chain").string()}, (root / "out").string()),
                    UsageError);
    fs::create_directories(root / "empty");
    CHECK_THROWS_AS(compare({(root / "empty").string()}, (root / "out").string()), UsageError);
  }
}

TEST_SUITE("untrained policies") {
  TEST_CASE("a ball-independent policy on catch scores the uniform value") {
    // Any policy that ignores the ball catches it with probability 1/5,
    // so its expected return is 0.2 - 0.8.
    const auto env = env::make_environment("catch");
    const auto r = rl::evaluate_policy([](const std::vector<double>&) { return std::size_t{1}; }, *env, 5000, 3);
    CHECK(r.mean_return == doctest::Approx(-0.6).epsilon(0.05));
  }

  TEST_CASE("freshly initialized networks on catch score near the uniform value") {
    const auto env = env::make_environment("catch");
    double total = 0;
    const int nets = 10;
    for (int s = 0; s < nets; ++s) {
      policy::Architecture a;
      a.input_dim = env->observation_dim();
      a.action_count = env->action_count();
      a.hidden = {64, 64};
      total += rl::evaluate(policy::PolicyNetwork::init(a, static_cast<std::uint64_t>(s)), *env, 200, 100 + s).mean_return;
    }
    CHECK(std::abs(total / nets + 0.6) <= 0.1);
  }
}
