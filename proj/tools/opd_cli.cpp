// Command-line front end: train, eval, compare, ablate.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "opd/envs/environment.hpp"
#include "opd/errors.hpp"
#include "opd/harness/compare.hpp"
#include "opd/harness/config.hpp"
#include "opd/harness/run.hpp"
#include "opd/policy/network.hpp"
#include "opd/rl/evaluate.hpp"

namespace {

using nlohmann::json;

const char* kind_of(const std::exception& e) {
  if (dynamic_cast<const opd::ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const opd::UsageError*>(&e)) return "usage_error";
  if (dynamic_cast<const opd::ParameterError*>(&e)) return "parameter_error";
  if (dynamic_cast<const opd::IntegrityError*>(&e)) return "integrity_error";
  if (dynamic_cast<const opd::NumericError*>(&e)) return "numeric_error";
  return "error";
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return code;
}

json describe(const std::vector<opd::harness::RunArtifact>& runs) {
  json out = json::array();
  for (const auto& r : runs) {
    json members = json::array();
    for (const auto& m : r.members) members.push_back({{"member", m.member}, {"final_return", m.final_return}});
    out.push_back({{"dir", r.dir}, {"seed", r.seed}, {"cohort_final_mean", r.cohort_final_mean()}, {"members", members}});
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online policy distillation with decision attention"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  auto* train = app.add_subcommand("train", "train one experiment config");
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--seed", seed, "run only this seed");
  train->add_option("--out", out, "output root (default $OPD_OUTPUT_ROOT or ./runs)");

  std::string checkpoint;
  std::size_t episodes = 100;
  std::uint64_t eval_seed = 0;
  std::optional<std::string> env_override;
  auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes")->required();
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--env", env_override, "environment id, if not stored in the checkpoint");

  std::vector<std::string> dirs;
  std::optional<std::string> compare_out;
  auto* cmp = app.add_subcommand("compare", "compare runs; the first directory is the reference");
  cmp->add_option("dirs", dirs, "run or experiment directories")->required();
  cmp->add_option("--out", compare_out, "directory for comparison outputs");

  std::string ablate_config;
  std::optional<std::string> ablate_out;
  auto* abl = app.add_subcommand("ablate", "run the four ablation arms of a cohort config");
  abl->add_option("--config", ablate_config, "cohort experiment config")->required();
  abl->add_option("--out", ablate_out, "output root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage_error", e.what(), 2);
  }

  try {
    if (*train) {
      auto config = opd::harness::load_config(config_path);
      if (seed) config.seeds = {*seed};
      const auto runs = opd::harness::run(config, opd::harness::output_root(out));
      std::cout << json{{"runs", describe(runs)}}.dump(2) << std::endl;
    } else if (*eval) {
      opd::policy::CheckpointInfo info;
      const auto net = opd::policy::load_checkpoint(checkpoint, std::nullopt, &info);
      const std::string env_id = env_override ? *env_override : info.env_id;
      if (env_id.empty()) throw opd::UsageError("checkpoint stores no environment id; pass --env");
      const auto env = opd::env::make_environment(env_id);
      const auto result = opd::rl::evaluate(net, *env, episodes, eval_seed);
      std::cout << json{{"checkpoint", checkpoint},
                        {"env", env_id},
                        {"episodes", episodes},
                        {"mean_return", result.mean_return},
                        {"max_return", result.max_return}}
                       .dump(2)
                << std::endl;
    } else if (*cmp) {
      const std::string dir =
          compare_out ? *compare_out
                      : (std::filesystem::path(opd::harness::output_root(std::nullopt)) / "comparison").string();
      const auto report = opd::harness::compare(dirs, dir);
      json rows = json::array();
      for (const auto& r : report.rows)
        rows.push_back({{"label", r.label},
                        {"final", opd::harness::format_with_delta(report.rows.front().final_mean, r.final_mean)},
                        {"best", opd::harness::format_with_delta(report.rows.front().best_mean, r.best_mean)}});
      std::cout << json{{"csv", report.csv_path}, {"table", report.table_path}, {"plots", report.plots}, {"rows", rows}}
                       .dump(2)
                << std::endl;
    } else if (*abl) {
      const auto config = opd::harness::load_config(ablate_config);
      const auto result = opd::harness::ablate(config, opd::harness::output_root(ablate_out));
      json arms = json::array();
      for (const auto& a : result.arms) arms.push_back(describe(a));
      std::cout << json{{"comparison", result.comparison_dir}, {"arms", arms}}.dump(2) << std::endl;
    }
  } catch (const opd::ConfigError& e) {
    return fail(kind_of(e), e.what(), 2);
  } catch (const opd::UsageError& e) {
    return fail(kind_of(e), e.what(), 2);
  } catch (const std::exception& e) {
    return fail(kind_of(e), e.what(), 1);
  }
  return 0;
}
