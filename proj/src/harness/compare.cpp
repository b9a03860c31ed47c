#include "opd/harness/compare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "opd/errors.hpp"
#include "opd/harness/plot.hpp"
#include "opd/harness/run.hpp"

namespace opd::harness {

namespace fs = std::filesystem;

double percent_delta(double baseline, double value) {
  if (baseline == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (value - baseline) / std::abs(baseline) * 100.0;
}

namespace {

std::string format_value(double v) {
  char buf[64];
  if (std::abs(v) >= 100.0) {
    std::snprintf(buf, sizeof(buf), "%.0f", v);
  } else {
    std::snprintf(buf, sizeof(buf), "%.3f", v);
  }
  return buf;
}

}  // namespace

std::string format_with_delta(double baseline, double value) {
  const double d = percent_delta(baseline, value);
  std::string out = format_value(value);
  if (std::isnan(d)) return out + " (n/a)";
  char buf[64];
  // Round first so -0.04% prints as 0.0% rather than a falling arrow.
  const double shown = std::round(d * 10.0) / 10.0;
  if (shown == 0.0) {
    std::snprintf(buf, sizeof(buf), " (= 0.0%%)");
  } else {
    std::snprintf(buf, sizeof(buf), " (%s %.1f%%)", shown > 0 ? "\xE2\x86\x91" : "\xE2\x86\x93", std::abs(shown));
  }
  return out + buf;
}

namespace {

struct Group {
  std::string label;
  std::vector<RunArtifact> runs;
};

Group load_group(const std::string& dir) {
  const fs::path p(dir);
  if (!fs::is_directory(p)) throw UsageError("not a directory: " + dir);
  Group g;
  g.label = p.filename().string();
  if (g.label.empty()) g.label = p.parent_path().filename().string();
  if (fs::exists(p / "summary.json")) {
    g.runs.push_back(load_run(dir));
    return g;
  }
  std::vector<fs::path> seeds;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 && fs::exists(e.path() / "summary.json"))
      seeds.push_back(e.path());
  }
  std::sort(seeds.begin(), seeds.end());
  for (const auto& s : seeds) g.runs.push_back(load_run(s.string()));
  if (g.runs.empty()) throw UsageError("no runs under " + dir);
  return g;
}

// Cohort mean at each eval step of one run, in step order.
std::map<std::int64_t, double> cohort_curve(const RunArtifact& run) {
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (const auto& e : run.metrics) {
    auto& a = acc[e.step];
    a.first += e.eval_return_mean;
    a.second += 1;
  }
  std::map<std::int64_t, double> out;
  for (const auto& [step, a] : acc) out[step] = a.first / static_cast<double>(a.second);
  return out;
}

ComparisonRow summarize_group(const Group& g) {
  ComparisonRow row;
  row.label = g.label;
  const auto& first = g.runs.front().config;
  row.env = first.train.env_id;
  row.algorithm = policy::to_string(first.train.algorithm);
  row.seeds = g.runs.size();
  row.members = g.runs.front().members.size();

  std::vector<double> finals;
  double best = 0.0;
  row.member_final.assign(row.members, 0.0);
  for (const auto& r : g.runs) {
    if (r.members.size() != row.members) throw UsageError("runs in " + g.label + " differ in cohort size");
    finals.push_back(r.cohort_final_mean());
    best += r.cohort_best_mean();
    for (std::size_t m = 0; m < row.members; ++m) row.member_final[m] += r.members[m].final_return;
  }
  const double n = static_cast<double>(g.runs.size());
  for (auto& v : row.member_final) v /= n;
  double mean = 0.0;
  for (double f : finals) mean += f;
  mean /= n;
  row.final_mean = mean;
  row.best_mean = best / n;
  if (finals.size() > 1) {
    double ss = 0.0;
    for (double f : finals) ss += (f - mean) * (f - mean);
    row.final_stderr = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }

  // Average curves over the steps every seed logged.
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : g.runs)
    for (const auto& [step, v] : cohort_curve(r)) {
      acc[step].first += v;
      acc[step].second += 1;
    }
  for (const auto& [step, a] : acc) {
    if (a.second != g.runs.size()) continue;
    row.steps.push_back(static_cast<double>(step));
    row.curve.push_back(a.first / static_cast<double>(a.second));
  }
  row.smoothed = trailing_mean(row.curve, std::max<std::size_t>(1, first.smoothing_window));
  double running = -std::numeric_limits<double>::infinity();
  for (double v : row.curve) {
    running = std::max(running, v);
    row.best_curve.push_back(running);
  }
  return row;
}

std::string csv_real(double v) { return std::isnan(v) ? std::string("nan") : format_real(v); }

}  // namespace

ComparisonReport compare(const std::vector<std::string>& dirs, const std::string& out_dir) {
  if (dirs.empty()) throw UsageError("compare needs at least one run directory");
  std::vector<Group> groups;
  for (const auto& d : dirs) groups.push_back(load_group(d));

  ComparisonReport report;
  for (const auto& g : groups) report.rows.push_back(summarize_group(g));
  const auto& ref = report.rows.front();
  for (auto& row : report.rows) {
    if (row.env != ref.env)
      throw UsageError("runs use different environments: " + ref.env + " vs " + row.env);
    if (row.algorithm != ref.algorithm)
      throw UsageError("runs use different algorithms: " + ref.algorithm + " vs " + row.algorithm);
    row.final_delta_pct = percent_delta(ref.final_mean, row.final_mean);
    row.best_delta_pct = percent_delta(ref.best_mean, row.best_mean);
  }
  // Disambiguate repeated labels, e.g. two seed_0 directories.
  std::map<std::string, int> seen;
  for (auto& row : report.rows)
    if (++seen[row.label] > 1) row.label += "#" + std::to_string(seen[row.label]);

  const fs::path out(out_dir);
  fs::create_directories(out);

  std::size_t max_members = 0;
  for (const auto& r : report.rows) max_members = std::max(max_members, r.members);

  report.csv_path = (out / "comparison.csv").string();
  {
    std::ofstream f(report.csv_path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + report.csv_path);
    f << "label,env,algorithm,seeds,members,final_mean,final_stderr,best_mean,final_delta_pct,best_delta_pct,"
         "final_cell,best_cell";
    for (std::size_t m = 0; m < max_members; ++m) f << ",member_" << m + 1 << "_final";
    f << '\n';
    for (const auto& r : report.rows) {
      f << r.label << ',' << r.env << ',' << r.algorithm << ',' << r.seeds << ',' << r.members << ','
        << csv_real(r.final_mean) << ',' << csv_real(r.final_stderr) << ',' << csv_real(r.best_mean) << ','
        << csv_real(r.final_delta_pct) << ',' << csv_real(r.best_delta_pct) << ','
        << format_with_delta(ref.final_mean, r.final_mean) << ',' << format_with_delta(ref.best_mean, r.best_mean);
      for (std::size_t m = 0; m < max_members; ++m) {
        f << ',';
        if (m < r.members) f << csv_real(r.member_final[m]);
      }
      f << '\n';
    }
  }

  report.curves_path = (out / "curves.csv").string();
  {
    std::ofstream f(report.curves_path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + report.curves_path);
    f << "label,step,cohort_mean,smoothed,best\n";
    for (const auto& r : report.rows)
      for (std::size_t i = 0; i < r.steps.size(); ++i)
        f << r.label << ',' << static_cast<std::int64_t>(r.steps[i]) << ',' << csv_real(r.curve[i]) << ','
          << csv_real(r.smoothed[i]) << ',' << csv_real(r.best_curve[i]) << '\n';
  }

  report.table_path = (out / "table.md").string();
  {
    std::ofstream f(report.table_path, std::ios::binary);
    if (!f) throw UsageError("cannot write " + report.table_path);
    f << "| run | seeds | final (mean of members) | best | final stderr |\n|---|---|---|---|---|\n";
    for (const auto& r : report.rows) {
      f << "| " << r.label << " | " << r.seeds << " | " << format_with_delta(ref.final_mean, r.final_mean) << " | "
        << format_with_delta(ref.best_mean, r.best_mean) << " | " << format_value(r.final_stderr) << " |\n";
    }
    f << "\nPer-member final returns\n\n| run | member | final |\n|---|---|---|\n";
    for (const auto& r : report.rows)
      for (std::size_t m = 0; m < r.members; ++m)
        f << "| " << r.label << " | " << m + 1 << " | " << format_value(r.member_final[m]) << " |\n";
  }

  const std::string title = ref.algorithm + " on " + ref.env;
  auto plot = [&](const std::string& file, const std::string& what, auto pick) {
    std::vector<Series> series;
    for (const auto& r : report.rows) series.push_back({r.label, r.steps, pick(r)});
    const auto path = (out / file).string();
    write_line_plot_svg(path, title + ": " + what, "environment steps", "eval return", series);
    report.plots.push_back(path);
  };
  plot("curves.svg", "cohort mean return", [](const ComparisonRow& r) { return r.curve; });
  plot("smoothed.svg", "smoothed cohort mean return", [](const ComparisonRow& r) { return r.smoothed; });
  plot("best.svg", "best cohort mean return so far", [](const ComparisonRow& r) { return r.best_curve; });
  return report;
}

}  // namespace opd::harness
