#include <algorithm>
#include <iomanip>
#include <iostream>
#include <set>

#include "essl/evaluation.hpp"
#include "essl/runner.hpp"

namespace essl::run {

namespace {

/// Final value per metric: the last row where the metric is present.
std::map<std::string, double> final_metrics_of(const std::filesystem::path& dir) {
  auto rows = eval::read_metrics_csv(dir / "metrics.csv");
  if (rows.empty()) throw std::runtime_error("compare: empty metrics in " + dir.string());
  std::map<std::string, double> out;
  auto consider = [&](const char* key, double v) {
    if (std::isfinite(v)) out[key] = v;
  };
  for (const auto& r : rows) {
    consider("loss_total", r.loss_total);
    consider("loss_issl", r.loss_issl);
    consider("loss_equiv", r.loss_equiv);
    consider("invariance_measure", r.invariance_measure);
    consider("equivariance_measure", r.equivariance_measure);
    consider("knn_acc", r.knn_acc);
    consider("linear_acc", r.linear_acc);
    consider("rot_pred_acc", r.rot_pred_acc);
    consider("rel_dos_error", r.rel_dos_error);
  }
  return out;
}

}  // namespace

int compare_runs(const std::vector<std::string>& dirs, std::ostream& out) {
  if (dirs.size() < 2) {
    out << "compare needs at least two completed runs\n";
    return 2;
  }
  std::vector<std::map<std::string, double>> metrics;
  for (const auto& d : dirs) metrics.push_back(final_metrics_of(resolve_output_dir(d)));

  std::set<std::string> keys;
  for (const auto& m : metrics)
    for (const auto& [k, v] : m) keys.insert(k);

  int status = 0;
  out << std::left << std::setw(24) << "metric";
  for (const auto& d : dirs) {
    auto name = std::filesystem::path(d).filename().string();
    out << std::setw(18) << name.substr(0, 17);
  }
  out << std::setw(14) << "delta(last-first)" << "\n";
  for (const auto& k : keys) {
    out << std::setw(24) << k;
    bool all_present = true;
    for (const auto& m : metrics) {
      if (m.count(k))
        out << std::setw(18) << std::setprecision(5) << m.at(k);
      else {
        out << std::setw(18) << "absent";
        all_present = false;
      }
    }
    if (all_present)
      out << std::setw(14) << std::setprecision(5) << metrics.back().at(k) - metrics.front().at(k);
    else
      status = 1;
    out << "\n";
  }

  // Ranking view over the headline retrieval metric when every run has it.
  bool all_knn = std::all_of(metrics.begin(), metrics.end(),
                             [](const auto& m) { return m.count("knn_acc") > 0; });
  if (all_knn) {
    std::vector<size_t> order(dirs.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return metrics[a].at("knn_acc") > metrics[b].at("knn_acc");
    });
    out << "ranking by knn_acc:";
    for (size_t i : order)
      out << " " << std::filesystem::path(dirs[i]).filename().string() << "("
          << std::setprecision(4) << metrics[i].at("knn_acc") << ")";
    out << "\n";
  }
  return status;
}

}  // namespace essl::run
