#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "hmgp/geometry.hpp"
#include "hmgp/mle.hpp"

namespace hmgp {

// Point table backing the CSV files: header `x,y,z` (values present) or
// `x,y` (locations only).
struct PointSet {
  std::vector<Location> locations;
  Eigen::VectorXd values;  // empty when the file has no z column
  bool has_values = false;
};

struct Dataset {
  PointSet train;
  PointSet test;
};

// UTF-8, '.' decimal separator, '\n' newlines, 17 significant digits on
// write so that write-then-read round-trips values exactly.
PointSet read_points_csv(const std::string& path);
void write_points_csv(const std::string& path, const PointSet& ps);

Dataset read_dataset(const std::string& train_path, const std::string& test_path = "");
void write_dataset(const Dataset& ds, const std::string& train_path,
                   const std::string& test_path);

// Versioned `key = value` report with the iteration trace appended; carries
// everything predict needs (parameters and H-accuracy).
struct FitReportFile {
  MaternParams theta;
  ReparamPoint reparam;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  double final_sweep_delta = 0.0;
  double eps = 1e-6;
  double eta = 2.0;
  int leaf_size = 32;
  double seconds = 0.0;
  int threads = 1;
  std::vector<FitTraceEntry> trace;
};

void write_fit_report(const std::string& path, const FitReportFile& rep);
FitReportFile read_fit_report(const std::string& path);

}  // namespace hmgp
