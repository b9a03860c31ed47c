#pragma once

#include <string>
#include <vector>

namespace opd::harness {

/// (value - baseline) / |baseline| in percent; NaN when baseline is zero.
double percent_delta(double baseline, double value);

/// Table cell such as "660 (↑ 49.3%)".
std::string format_with_delta(double baseline, double value);

struct ComparisonRow {
  std::string label;
  std::string env;
  std::string algorithm;
  std::size_t seeds = 0;
  std::size_t members = 0;
  double final_mean = 0.0;  // mean over seeds of the cohort-mean final return
  double best_mean = 0.0;
  double final_stderr = 0.0;  // standard error over seeds
  double final_delta_pct = 0.0;
  double best_delta_pct = 0.0;
  std::vector<double> member_final;  // per member, mean over seeds
  std::vector<double> steps;
  std::vector<double> curve;     // cohort mean at each eval step, mean over seeds
  std::vector<double> smoothed;  // trailing mean of curve
  std::vector<double> best_curve;  // running maximum of curve
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;  // rows[0] is the reference
  std::string csv_path;
  std::string curves_path;
  std::string table_path;
  std::vector<std::string> plots;
};

/// Each entry is a run directory (holding summary.json) or an experiment
/// directory whose seed_* subdirectories are averaged. The first entry is the
/// reference for percentage deltas. UsageError when environments or
/// algorithms differ, or a directory holds no runs.
ComparisonReport compare(const std::vector<std::string>& dirs, const std::string& out_dir);

}  // namespace opd::harness
