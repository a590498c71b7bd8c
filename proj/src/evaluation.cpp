#include "essl/evaluation.hpp"

#include <sstream>

namespace essl::eval {

const char* kMetricsHeader =
    "epoch,step,loss_total,loss_issl,loss_equiv,lr,invariance_measure,"
    "equivariance_measure,knn_acc,linear_acc,rot_pred_acc,rel_dos_error";

namespace {

void put(std::ostream& os, double v, bool comma = true) {
  if (std::isfinite(v)) os << std::setprecision(10) << v;
  if (comma) os << ',';
}

double parse_cell(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

}  // namespace

MetricsCsv::MetricsCsv(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  os_.open(path);
  if (!os_) throw std::runtime_error("MetricsCsv: cannot open " + path.string());
  os_ << kMetricsHeader << "\n";
}

void MetricsCsv::append(const MetricsRecord& r) {
  os_ << r.epoch << ',' << r.step << ',';
  put(os_, r.loss_total);
  put(os_, r.loss_issl);
  put(os_, r.loss_equiv);
  put(os_, r.lr);
  put(os_, r.invariance_measure);
  put(os_, r.equivariance_measure);
  put(os_, r.knn_acc);
  put(os_, r.linear_acc);
  put(os_, r.rot_pred_acc);
  put(os_, r.rel_dos_error, false);
  os_ << "\n";
  os_.flush();
}

void MetricsCsv::flush() { os_.flush(); }

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_metrics_csv: missing " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader)
    throw std::runtime_error("read_metrics_csv: unexpected header in " + path.string());
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    cells.resize(12);
    MetricsRecord r;
    r.epoch = static_cast<long>(parse_cell(cells[0]));
    r.step = static_cast<long>(parse_cell(cells[1]));
    r.loss_total = parse_cell(cells[2]);
    r.loss_issl = parse_cell(cells[3]);
    r.loss_equiv = parse_cell(cells[4]);
    r.lr = parse_cell(cells[5]);
    r.invariance_measure = parse_cell(cells[6]);
    r.equivariance_measure = parse_cell(cells[7]);
    r.knn_acc = parse_cell(cells[8]);
    r.linear_acc = parse_cell(cells[9]);
    r.rot_pred_acc = parse_cell(cells[10]);
    r.rel_dos_error = parse_cell(cells[11]);
    out.push_back(r);
  }
  return out;
}

}  // namespace essl::eval
