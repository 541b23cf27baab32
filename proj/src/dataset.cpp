#include "hmgp/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hmgp {

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_field(const std::string& s, const std::string& path, int line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    throw std::runtime_error(path + ":" + std::to_string(line) + ": malformed field '" + s +
                             "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

void strip_cr(std::string& s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
}

}  // namespace

PointSet read_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header");
  strip_cr(line);
  PointSet ps;
  if (line == "x,y,z")
    ps.has_values = true;
  else if (line == "x,y")
    ps.has_values = false;
  else
    throw std::runtime_error(path + ":1: expected header 'x,y,z' or 'x,y', got '" + line +
                             "'");

  std::vector<double> zs;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != (ps.has_values ? 3u : 2u))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected " +
                               (ps.has_values ? "3" : "2") + " fields");
    Location loc;
    loc.x = parse_field(fields[0], path, lineno);
    loc.y = parse_field(fields[1], path, lineno);
    ps.locations.push_back(loc);
    if (ps.has_values) zs.push_back(parse_field(fields[2], path, lineno));
  }
  if (ps.has_values) {
    ps.values.resize(static_cast<Eigen::Index>(zs.size()));
    for (size_t i = 0; i < zs.size(); ++i) ps.values(static_cast<Eigen::Index>(i)) = zs[i];
  }
  return ps;
}

void write_points_csv(const std::string& path, const PointSet& ps) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << (ps.has_values ? "x,y,z\n" : "x,y\n");
  for (size_t i = 0; i < ps.locations.size(); ++i) {
    out << format_g17(ps.locations[i].x) << ',' << format_g17(ps.locations[i].y);
    if (ps.has_values) out << ',' << format_g17(ps.values(static_cast<Eigen::Index>(i)));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& train_path, const std::string& test_path) {
  Dataset ds;
  ds.train = read_points_csv(train_path);
  if (!test_path.empty()) ds.test = read_points_csv(test_path);
  return ds;
}

void write_dataset(const Dataset& ds, const std::string& train_path,
                   const std::string& test_path) {
  write_points_csv(train_path, ds.train);
  if (!test_path.empty()) write_points_csv(test_path, ds.test);
}

namespace {

constexpr const char* kReportHeader = "hmgp fit report v1";

}  // namespace

void write_fit_report(const std::string& path, const FitReportFile& rep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << kReportHeader << '\n';
  out << "sigma2 = " << format_g17(rep.theta.sigma2) << '\n';
  out << "ell = " << format_g17(rep.theta.ell) << '\n';
  out << "nu = " << format_g17(rep.theta.nu) << '\n';
  out << "tau2 = " << format_g17(rep.theta.tau2) << '\n';
  out << "sigma0 = " << format_g17(rep.reparam.sigma0) << '\n';
  out << "ell0 = " << format_g17(rep.reparam.ell0) << '\n';
  out << "nu0 = " << format_g17(rep.reparam.nu0) << '\n';
  out << "tau0 = " << format_g17(rep.reparam.tau0) << '\n';
  out << "loglik = " << format_g17(rep.loglik) << '\n';
  out << "iterations = " << rep.iterations << '\n';
  out << "converged = " << (rep.converged ? 1 : 0) << '\n';
  out << "final_sweep_delta = " << format_g17(rep.final_sweep_delta) << '\n';
  out << "eps = " << format_g17(rep.eps) << '\n';
  out << "eta = " << format_g17(rep.eta) << '\n';
  out << "leaf_size = " << rep.leaf_size << '\n';
  out << "threads = " << rep.threads << '\n';
  out << "seconds = " << format_g17(rep.seconds) << '\n';
  out << "trace:\n";
  out << "iter coord sigma0 ell0 nu0 tau0 loglik\n";
  for (const FitTraceEntry& t : rep.trace) {
    out << t.iteration << ' ' << t.coordinate << ' ' << format_g17(t.point.sigma0) << ' '
        << format_g17(t.point.ell0) << ' ' << format_g17(t.point.nu0) << ' '
        << format_g17(t.point.tau0) << ' ' << format_g17(t.loglik) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

FitReportFile read_fit_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  strip_cr(line);
  if (line != kReportHeader)
    throw std::runtime_error(path + ": not a fit report (bad header)");

  FitReportFile rep;
  while (std::getline(in, line)) {
    strip_cr(line);
    if (line == "trace:") break;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 3);
    const double v = std::strtod(val.c_str(), nullptr);
    if (key == "sigma2")
      rep.theta.sigma2 = v;
    else if (key == "ell")
      rep.theta.ell = v;
    else if (key == "nu")
      rep.theta.nu = v;
    else if (key == "tau2")
      rep.theta.tau2 = v;
    else if (key == "sigma0")
      rep.reparam.sigma0 = v;
    else if (key == "ell0")
      rep.reparam.ell0 = v;
    else if (key == "nu0")
      rep.reparam.nu0 = v;
    else if (key == "tau0")
      rep.reparam.tau0 = v;
    else if (key == "loglik")
      rep.loglik = v;
    else if (key == "iterations")
      rep.iterations = static_cast<int>(v);
    else if (key == "converged")
      rep.converged = v != 0.0;
    else if (key == "final_sweep_delta")
      rep.final_sweep_delta = v;
    else if (key == "eps")
      rep.eps = v;
    else if (key == "eta")
      rep.eta = v;
    else if (key == "leaf_size")
      rep.leaf_size = static_cast<int>(v);
    else if (key == "threads")
      rep.threads = static_cast<int>(v);
    else if (key == "seconds")
      rep.seconds = v;
  }
  return rep;
}

}  // namespace hmgp
