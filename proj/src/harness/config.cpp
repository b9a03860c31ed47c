#include "opd/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "opd/errors.hpp"

namespace opd::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& s) {
  Int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw ConfigError("'" + key + "' expects an integer, got '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + s + "'");
}

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

template <typename M>
Field real(const char* sec, const char* key, M member) {
  return {sec, key, [member](const ExperimentConfig& c) { return format_double(member(c)); },
          [member, key](ExperimentConfig& c, const std::string& v) { member(c) = parse_double(key, v); }};
}

template <typename Int, typename M>
Field integer(const char* sec, const char* key, M member) {
  return {sec, key, [member](const ExperimentConfig& c) { return std::to_string(member(c)); },
          [member, key](ExperimentConfig& c, const std::string& v) { member(c) = parse_int<Int>(key, v); }};
}

template <typename M>
Field boolean(const char* sec, const char* key, M member) {
  return {sec, key, [member](const ExperimentConfig& c) { return std::string(member(c) ? "true" : "false"); },
          [member, key](ExperimentConfig& c, const std::string& v) { member(c) = parse_bool(key, v); }};
}

#define OPD_REF(expr) [](auto& c) -> auto& { return expr; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"experiment", "name", [](const ExperimentConfig& c) { return c.name; },
       [](ExperimentConfig& c, const std::string& v) { c.name = v; }},
      {"experiment", "algorithm", [](const ExperimentConfig& c) { return policy::to_string(c.train.algorithm); },
       [](ExperimentConfig& c, const std::string& v) { c.train.algorithm = policy::parse_algorithm(v); }},
      {"experiment", "env", [](const ExperimentConfig& c) { return c.train.env_id; },
       [](ExperimentConfig& c, const std::string& v) { c.train.env_id = v; }},
      integer<std::size_t>("experiment", "cohort_size", OPD_REF(c.cohort_size)),
      {"experiment", "seeds",
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) s += (i ? "," : "") + std::to_string(c.seeds[i]);
         return s;
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& item : split_list(v)) c.seeds.push_back(parse_int<std::uint64_t>("seeds", item));
       }},
      integer<std::int64_t>("experiment", "budget", OPD_REF(c.train.budget)),
      integer<std::int64_t>("experiment", "eval_interval", OPD_REF(c.train.eval_interval)),
      integer<std::size_t>("experiment", "eval_episodes", OPD_REF(c.train.eval_episodes)),
      {"experiment", "attention_mode", [](const ExperimentConfig& c) { return distill::to_string(c.attention); },
       [](ExperimentConfig& c, const std::string& v) { c.attention = distill::parse_attention_mode(v); }},
      boolean("experiment", "no_decision_loss", OPD_REF(c.ablation.no_decision_loss)),
      boolean("experiment", "no_feature_loss", OPD_REF(c.ablation.no_feature_loss)),
      boolean("experiment", "independent", OPD_REF(c.ablation.independent)),
      integer<std::size_t>("experiment", "smoothing_window", OPD_REF(c.smoothing_window)),
      boolean("experiment", "save_checkpoints", OPD_REF(c.save_checkpoints)),

      real("distillation", "alpha_rl", OPD_REF(c.coefficients.rl)),
      real("distillation", "alpha_decision", OPD_REF(c.coefficients.decision)),
      real("distillation", "alpha_feature", OPD_REF(c.coefficients.feature)),
      real("distillation", "temperature", OPD_REF(c.temperature)),
      integer<std::int64_t>("distillation", "warmup", OPD_REF(c.distill_warmup)),

      {"network", "hidden",
       [](const ExperimentConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.train.hidden.size(); ++i) s += (i ? "," : "") + std::to_string(c.train.hidden[i]);
         return s;
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.train.hidden.clear();
         for (const auto& item : split_list(v)) c.train.hidden.push_back(parse_int<std::size_t>("hidden", item));
       }},

      integer<std::size_t>("env", "chain_length", OPD_REF(c.train.env.chain_length)),
      integer<std::size_t>("env", "chain_max_steps", OPD_REF(c.train.env.chain_max_steps)),
      integer<std::size_t>("env", "cartpole_max_steps", OPD_REF(c.train.env.cartpole_max_steps)),

      real("dqn", "learning_rate", OPD_REF(c.train.dqn.learning_rate)),
      real("dqn", "gamma", OPD_REF(c.train.dqn.gamma)),
      integer<std::size_t>("dqn", "batch_size", OPD_REF(c.train.dqn.batch_size)),
      integer<std::size_t>("dqn", "warmup", OPD_REF(c.train.dqn.warmup)),
      integer<std::size_t>("dqn", "buffer_capacity", OPD_REF(c.train.dqn.buffer_capacity)),
      integer<std::int64_t>("dqn", "target_sync", OPD_REF(c.train.dqn.target_sync)),
      real("dqn", "eps_start", OPD_REF(c.train.dqn.eps_start)),
      real("dqn", "eps_end", OPD_REF(c.train.dqn.eps_end)),
      integer<std::int64_t>("dqn", "eps_horizon", OPD_REF(c.train.dqn.eps_horizon)),
      real("dqn", "max_grad_norm", OPD_REF(c.train.dqn.max_grad_norm)),

      real("ppo", "learning_rate", OPD_REF(c.train.ppo.learning_rate)),
      real("ppo", "gamma", OPD_REF(c.train.ppo.gamma)),
      real("ppo", "lambda", OPD_REF(c.train.ppo.lambda)),
      integer<std::size_t>("ppo", "rollout", OPD_REF(c.train.ppo.rollout)),
      integer<std::size_t>("ppo", "epochs", OPD_REF(c.train.ppo.epochs)),
      integer<std::size_t>("ppo", "minibatch", OPD_REF(c.train.ppo.minibatch)),
      real("ppo", "clip", OPD_REF(c.train.ppo.clip)),
      real("ppo", "value_coef", OPD_REF(c.train.ppo.value_coef)),
      real("ppo", "max_grad_norm", OPD_REF(c.train.ppo.max_grad_norm)),
      boolean("ppo", "normalize_advantages", OPD_REF(c.train.ppo.normalize_advantages)),
      boolean("ppo", "anneal_lr", OPD_REF(c.train.ppo.anneal_lr)),
  };
  return table;
}

#undef OPD_REF

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      doc.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (doc.has(section, key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    doc.sections_[section][key] = trim(line.substr(eq + 1));
  }
  return doc;
}

IniDocument IniDocument::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

bool IniDocument::has(const std::string& section, const std::string& key) const {
  auto it = sections_.find(section);
  return it != sections_.end() && it->second.count(key) > 0;
}

const std::string& IniDocument::get(const std::string& section, const std::string& key) const {
  if (!has(section, key)) throw ConfigError("missing key [" + section + "] " + key);
  return sections_.at(section).at(key);
}

void IniDocument::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = value;
}

void ExperimentConfig::validate() const {
  require(!name.empty() && name.find_first_of("/\\") == std::string::npos, "experiment name must be a plain identifier");
  require(train.env_id == "catch" || train.env_id == "cartpole" || train.env_id == "chain",
          "unknown environment id '" + train.env_id + "'");
  require(train.budget > 0, "budget must be positive");
  require(train.eval_interval > 0, "eval_interval must be positive");
  require(train.eval_episodes >= 1, "eval_episodes must be at least 1");
  require(!seeds.empty(), "at least one seed is required");
  require(!train.hidden.empty(), "network.hidden needs at least one layer");
  for (auto w : train.hidden) require(w > 0, "network.hidden widths must be positive");
  require(temperature > 0.0, "temperature must be positive");
  for (double a : {coefficients.rl, coefficients.decision, coefficients.feature})
    require(a >= 0.0, "loss coefficients must be nonnegative");
  require(smoothing_window >= 1, "smoothing_window must be at least 1");
  if (ablation.independent) {
    require(cohort_size == 1, "independent runs require cohort_size = 1");
  } else {
    require(cohort_size >= 2, "cohort runs require cohort_size >= 2");
  }
  const auto& d = train.dqn;
  require(d.gamma > 0.0 && d.gamma <= 1.0, "dqn.gamma must lie in (0, 1]");
  require(d.learning_rate > 0.0, "dqn.learning_rate must be positive");
  require(d.batch_size > 0 && d.buffer_capacity > 0 && d.target_sync > 0, "dqn sizes must be positive");
  require(d.eps_start >= 0.0 && d.eps_start <= 1.0 && d.eps_end >= 0.0 && d.eps_end <= 1.0,
          "dqn epsilon bounds must lie in [0, 1]");
  const auto& p = train.ppo;
  require(p.gamma > 0.0 && p.gamma <= 1.0 && p.lambda > 0.0 && p.lambda <= 1.0, "ppo gamma/lambda must lie in (0, 1]");
  require(p.learning_rate > 0.0 && p.clip > 0.0, "ppo learning_rate and clip must be positive");
  require(p.rollout > 0 && p.epochs > 0 && p.minibatch > 0, "ppo sizes must be positive");
}

distill::CohortOptions ExperimentConfig::cohort_options() const {
  distill::CohortOptions o;
  o.train = train;
  o.members = cohort_size;
  o.coefficients = coefficients;
  if (ablation.no_decision_loss) o.coefficients.decision = 0.0;
  if (ablation.no_feature_loss) o.coefficients.feature = 0.0;
  o.temperature = temperature;
  o.attention = attention;
  o.distill_warmup = distill_warmup;
  return o;
}

ExperimentConfig config_from_ini(const IniDocument& doc) {
  ExperimentConfig c;
  for (const auto& [section, entries] : doc.sections()) {
    for (const auto& [key, value] : entries) {
      const Field* field = nullptr;
      for (const auto& f : fields())
        if (section == f.section && key == f.key) field = &f;
      if (!field) throw ConfigError("unknown config key [" + section + "] " + key);
      field->set(c, value);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) { return config_from_ini(IniDocument::load(path)); }

std::string to_ini(const ExperimentConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << f.key << " = " << f.get(config) << '\n';
  }
  return os.str();
}

}  // namespace opd::harness
