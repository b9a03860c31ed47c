#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "opd/distill/attention.hpp"
#include "opd/distill/losses.hpp"
#include "opd/envs/environment.hpp"
#include "opd/envs/tabular.hpp"
#include "opd/errors.hpp"
#include "opd/harness/compare.hpp"
#include "opd/harness/config.hpp"
#include "opd/harness/run.hpp"
#include "opd/numerics/ops.hpp"
#include "opd/policy/network.hpp"
#include "opd/rl/evaluate.hpp"

namespace py = pybind11;
using namespace opd;

namespace {

std::vector<std::span<const double>> as_spans(const std::vector<std::vector<double>>& rows) {
  return {rows.begin(), rows.end()};
}

num::Tensor as_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw UsageError("expected at least one row");
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) throw UsageError("rows differ in length");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return num::Tensor::matrix(rows.size(), rows.front().size(), std::move(flat));
}

std::vector<std::vector<double>> as_rows(const num::Tensor& t) {
  std::vector<std::vector<double>> out(t.rows());
  for (std::size_t r = 0; r < t.rows(); ++r)
    out[r].assign(t.values().begin() + r * t.cols(), t.values().begin() + (r + 1) * t.cols());
  return out;
}

py::dict artifact_dict(const harness::RunArtifact& a) {
  py::list members;
  for (const auto& m : a.members) {
    py::dict d;
    d["member"] = m.member;
    d["final_return"] = m.final_return;
    d["best_return"] = m.best_return;
    d["final_max_return"] = m.final_max_return;
    members.append(d);
  }
  py::dict d;
  d["dir"] = a.dir;
  d["seed"] = a.seed;
  d["members"] = members;
  d["cohort_final_mean"] = a.cohort_final_mean();
  d["cohort_best_mean"] = a.cohort_best_mean();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Online policy distillation with decision attention";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<UsageError>(m, "UsageError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<IntegrityError>(m, "IntegrityError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  m.def(
      "softmax",
      [](const std::vector<double>& logits, double temperature) { return num::softmax_temperature(logits, temperature); },
      py::arg("logits"), py::arg("temperature") = 1.0);

  py::class_<env::Environment>(m, "Environment")
      .def_property_readonly("id", &env::Environment::id)
      .def_property_readonly("observation_dim", &env::Environment::observation_dim)
      .def_property_readonly("action_count", &env::Environment::action_count)
      .def_property_readonly("done", &env::Environment::done)
      .def_property_readonly("observation", &env::Environment::observation)
      .def("reset", [](env::Environment& e, std::uint64_t seed) { return e.reset(seed).observation; }, py::arg("seed"))
      .def("step", [](env::Environment& e, std::size_t action) {
        auto r = e.step(action);
        return py::make_tuple(r.next_observation, r.reward, r.done, r.truncated);
      });
  m.def("make_environment", [](const std::string& id) { return env::make_environment(id); }, py::arg("env_id"));

  m.def(
      "chain_q_values",
      [](std::size_t length, double gamma, double tolerance) {
        const auto q = env::value_iteration(env::chain_mdp(length, gamma), tolerance);
        return py::make_tuple(q.q, q.greedy_policy());
      },
      py::arg("length") = 5, py::arg("gamma") = 0.9, py::arg("tolerance") = 1e-10,
      "Optimal Q-values (row-major, state by action) and the greedy policy.");

  m.def(
      "attention_weights",
      [](const std::vector<double>& student, const std::vector<std::vector<double>>& peers) {
        return distill::decision_attention_weights(student, as_spans(peers)).weights;
      },
      py::arg("student"), py::arg("peers"));
  m.def(
      "aggregate",
      [](const std::vector<std::vector<double>>& values, const std::vector<double>& weights) {
        return distill::aggregate(as_spans(values), distill::AttentionWeights{weights, 1.0});
      },
      py::arg("values"), py::arg("weights"));
  m.def(
      "kl_divergence",
      [](const std::vector<double>& target, const std::vector<double>& student) {
        return distill::kl_divergence(target, student);
      },
      py::arg("target"), py::arg("student"));

  py::class_<policy::PolicyNetwork>(m, "PolicyNetwork")
      .def(py::init([](const std::string& algorithm, std::size_t input_dim, std::size_t action_count,
                       std::vector<std::size_t> hidden, std::uint64_t seed) {
             policy::Architecture a;
             a.algorithm = policy::parse_algorithm(algorithm);
             a.input_dim = input_dim;
             a.action_count = action_count;
             a.hidden = std::move(hidden);
             return policy::PolicyNetwork::init(a, seed);
           }),
           py::arg("algorithm"), py::arg("input_dim"), py::arg("action_count"),
           py::arg("hidden") = std::vector<std::size_t>{64, 64}, py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &policy::PolicyNetwork::parameter_count)
      .def("flat_parameters", &policy::PolicyNetwork::flat_parameters)
      .def("forward",
           [](const policy::PolicyNetwork& net, const std::vector<std::vector<double>>& states) {
             num::NoGradGuard guard;
             const auto out = net.forward(as_matrix(states));
             py::dict d;
             d["decision"] = as_rows(out.decision);
             d["feature"] = as_rows(out.feature);
             if (out.value.defined()) d["value"] = std::vector<double>(out.value.values().begin(), out.value.values().end());
             return d;
           })
      .def("save", [](const policy::PolicyNetwork& net, const std::string& path,
                      const std::string& env_id) { policy::save_checkpoint(net, path, env_id); },
           py::arg("path"), py::arg("env_id") = "")
      .def_static("load", [](const std::string& path) { return policy::load_checkpoint(path); }, py::arg("path"));

  m.def(
      "evaluate",
      [](const policy::PolicyNetwork& net, const std::string& env_id, std::size_t episodes, std::uint64_t seed) {
        const auto r = rl::evaluate(net, *env::make_environment(env_id), episodes, seed);
        return py::make_tuple(r.mean_return, r.max_return);
      },
      py::arg("net"), py::arg("env_id"), py::arg("episodes") = 100, py::arg("seed") = 0);

  m.def(
      "train",
      [](const std::string& config_path, std::optional<std::vector<std::uint64_t>> seeds,
         std::optional<std::string> out) {
        auto cfg = harness::load_config(config_path);
        if (seeds) cfg.seeds = *seeds;
        py::list runs;
        for (const auto& a : harness::run(cfg, harness::output_root(out))) runs.append(artifact_dict(a));
        return runs;
      },
      py::arg("config"), py::arg("seeds") = py::none(), py::arg("out") = py::none());

  m.def(
      "compare",
      [](const std::vector<std::string>& dirs, const std::string& out) {
        const auto report = harness::compare(dirs, out);
        py::list rows;
        for (const auto& r : report.rows) {
          py::dict d;
          d["label"] = r.label;
          d["seeds"] = r.seeds;
          d["final_mean"] = r.final_mean;
          d["final_stderr"] = r.final_stderr;
          d["best_mean"] = r.best_mean;
          d["final_delta_pct"] = r.final_delta_pct;
          rows.append(d);
        }
        return rows;
      },
      py::arg("dirs"), py::arg("out"));

  m.def("format_with_delta", &harness::format_with_delta, py::arg("baseline"), py::arg("value"));
}
