#include "opd/harness/run.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "opd/errors.hpp"
#include "opd/harness/compare.hpp"
#include "opd/policy/network.hpp"

namespace opd::harness {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double RunArtifact::cohort_final_mean() const {
  if (members.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : members) s += m.final_return;
  return s / static_cast<double>(members.size());
}

double RunArtifact::cohort_best_mean() const {
  if (members.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : members) s += m.best_return;
  return s / static_cast<double>(members.size());
}

std::string output_root(const std::optional<std::string>& cli) {
  if (cli && !cli->empty()) return *cli;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

std::vector<double> trailing_mean(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ParameterError("smoothing window must be positive");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t k = lo; k <= i; ++k) s += values[k];
    out[i] = s / static_cast<double>(i + 1 - lo);
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot write " + path.string());
  f << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<MemberSummary> summarize(const std::vector<distill::MemberLogEntry>& log, std::size_t members) {
  std::vector<MemberSummary> out(members);
  for (std::size_t i = 0; i < members; ++i) {
    out[i].member = i + 1;
    out[i].best_return = -std::numeric_limits<double>::infinity();
  }
  for (const auto& e : log) {
    auto& m = out.at(e.member);
    m.final_return = e.eval_return_mean;
    m.final_max_return = e.eval_return_max;
    m.best_return = std::max(m.best_return, e.eval_return_mean);
  }
  for (auto& m : out)
    if (!std::isfinite(m.best_return)) m.best_return = 0.0;
  return out;
}

std::string metrics_csv(const std::vector<distill::MemberLogEntry>& log) {
  std::ostringstream os;
  os << kMetricsHeader << '\n';
  for (const auto& e : log) {
    os << e.step << ',' << e.member + 1 << ',' << format_real(e.eval_return_mean) << ','
       << format_real(e.eval_return_max) << ',' << format_real(e.loss_rl) << ',' << format_real(e.loss_decision)
       << ',' << format_real(e.loss_feature) << ',' << format_real(e.mean_pairwise_kl) << '\n';
  }
  return os.str();
}

std::string curve_csv(const std::vector<distill::MemberLogEntry>& log, std::size_t members, std::size_t window) {
  std::ostringstream os;
  os << "step,member,eval_return_mean,smoothed\n";
  for (std::size_t m = 0; m < members; ++m) {
    std::vector<double> raw;
    std::vector<std::int64_t> steps;
    for (const auto& e : log)
      if (e.member == m) {
        raw.push_back(e.eval_return_mean);
        steps.push_back(e.step);
      }
    const auto smooth = trailing_mean(raw, window);
    for (std::size_t i = 0; i < raw.size(); ++i)
      os << steps[i] << ',' << m + 1 << ',' << format_real(raw[i]) << ',' << format_real(smooth[i]) << '\n';
  }
  return os.str();
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double to_real(const std::string& s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc()) throw IntegrityError("malformed number in metrics.csv: " + s);
  return v;
}

}  // namespace

RunArtifact run_seed(const ExperimentConfig& config, std::uint64_t seed, const std::string& dir) {
  config.validate();
  fs::create_directories(fs::path(dir));

  RunArtifact art;
  art.dir = dir;
  art.config = config;
  art.seed = seed;
  std::vector<policy::PolicyNetwork> nets;
  const std::size_t members = config.ablation.independent ? 1 : config.cohort_size;

  if (config.ablation.independent) {
    auto result = rl::train_independent(config.train, seed);
    for (const auto& e : result.log) {
      art.metrics.push_back({e.step, 0, e.mean_return, e.max_return, e.losses.rl, 0.0, 0.0, 0.0});
    }
    nets.push_back(std::move(result.net));
    std::ostringstream rewards;
    rewards << "step,mean_eval_return,max_eval_return\n";
    for (const auto& e : result.log) rewards << e.step << ',' << format_real(e.mean_return) << ',' << format_real(e.max_return) << '\n';
    write_text(fs::path(dir) / "rewards.csv", rewards.str());
  } else {
    auto result = distill::train_cohort(config.cohort_options(), seed);
    art.metrics = std::move(result.log);
    nets = std::move(result.members);
  }
  art.members = summarize(art.metrics, members);

  const std::string ini = to_ini(config);
  write_text(fs::path(dir) / "config.ini", ini);
  write_text(fs::path(dir) / "metrics.csv", metrics_csv(art.metrics));
  write_text(fs::path(dir) / "curve.csv", curve_csv(art.metrics, members, config.smoothing_window));

  if (config.save_checkpoints) {
    fs::create_directories(fs::path(dir) / "checkpoints");
    for (std::size_t i = 0; i < nets.size(); ++i) {
      policy::save_checkpoint(nets[i], (fs::path(dir) / "checkpoints" / ("member_" + std::to_string(i + 1) + ".ckpt")).string(),
                              config.train.env_id);
    }
  }

  json summary;
  summary["name"] = config.name;
  summary["algorithm"] = policy::to_string(config.train.algorithm);
  summary["env"] = config.train.env_id;
  summary["seed"] = seed;
  summary["cohort_size"] = members;
  summary["independent"] = config.ablation.independent;
  summary["attention_mode"] = distill::to_string(config.attention);
  json ms = json::array();
  for (const auto& m : art.members) {
    ms.push_back({{"member", m.member},
                  {"final_return", m.final_return},
                  {"best_return", m.best_return},
                  {"final_max_return", m.final_max_return}});
  }
  summary["members"] = ms;
  summary["cohort_final_mean"] = art.cohort_final_mean();
  summary["cohort_best_mean"] = art.cohort_best_mean();
  json cfg = json::object();
  const auto echoed = IniDocument::parse(ini);
  for (const auto& [section, entries] : echoed.sections())
    for (const auto& [k, v] : entries) cfg[section][k] = v;
  summary["config"] = cfg;
  summary["config_ini"] = ini;
  write_text(fs::path(dir) / "summary.json", summary.dump(2) + "\n");
  return art;
}

std::vector<RunArtifact> run(const ExperimentConfig& config, const std::string& root) {
  config.validate();
  std::vector<RunArtifact> out;
  for (auto seed : config.seeds) {
    const auto dir = fs::path(root) / config.name / ("seed_" + std::to_string(seed));
    out.push_back(run_seed(config, seed, dir.string()));
  }
  return out;
}

RunArtifact load_run(const std::string& dir) {
  const fs::path base(dir);
  json summary;
  try {
    summary = json::parse(read_text(base / "summary.json"));
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable summary.json in " + dir + ": " + e.what());
  }
  RunArtifact art;
  art.dir = dir;
  art.config = config_from_ini(IniDocument::parse(summary.at("config_ini").get<std::string>()));
  art.seed = summary.at("seed").get<std::uint64_t>();
  for (const auto& m : summary.at("members")) {
    art.members.push_back({m.at("member").get<std::size_t>(), m.at("final_return").get<double>(),
                           m.at("best_return").get<double>(), m.at("final_max_return").get<double>()});
  }
  std::istringstream csv(read_text(base / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  if (line != kMetricsHeader) throw IntegrityError("unexpected metrics.csv header in " + dir);
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw IntegrityError("malformed metrics.csv row in " + dir);
    art.metrics.push_back({static_cast<std::int64_t>(to_real(c[0])), static_cast<std::size_t>(to_real(c[1])) - 1,
                           to_real(c[2]), to_real(c[3]), to_real(c[4]), to_real(c[5]), to_real(c[6]),
                           to_real(c[7])});
  }
  return art;
}

std::vector<ExperimentConfig> ablation_arms(const ExperimentConfig& base) {
  base.validate();
  if (base.ablation.independent) throw ConfigError("ablation needs a cohort configuration");
  auto arm = [&](const std::string& suffix) {
    ExperimentConfig c = base;
    c.name = base.name + "_" + suffix;
    c.ablation = {};
    c.attention = distill::AttentionMode::kDecisionAttention;
    return c;
  };
  auto full = arm("full");
  auto no_dec = arm("no_decision");
  no_dec.ablation.no_decision_loss = true;
  auto no_feat = arm("no_feature");
  no_feat.ablation.no_feature_loss = true;
  auto equal = arm("equal_weights");
  equal.attention = distill::AttentionMode::kEqualWeights;
  return {full, no_dec, no_feat, equal};
}

AblationResult ablate(const ExperimentConfig& base, const std::string& root) {
  const auto arms = ablation_arms(base);
  const fs::path dir = fs::path(root) / (base.name + "_ablation");
  AblationResult result;
  std::vector<std::string> arm_dirs;
  for (const auto& c : arms) {
    result.arms.push_back(run(c, dir.string()));
    arm_dirs.push_back((dir / c.name).string());
  }
  result.comparison_dir = (dir / "comparison").string();
  compare(arm_dirs, result.comparison_dir);
  return result;
}

}  // namespace opd::harness
