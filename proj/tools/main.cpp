// Command line front end: generate -> fit -> predict -> evaluate -> bench.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hmgp/dataset.hpp"
#include "hmgp/knn.hpp"
#include "hmgp/krige.hpp"
#include "hmgp/loglik.hpp"
#include "hmgp/metrics.hpp"
#include "hmgp/mle.hpp"
#include "hmgp/simgen.hpp"

namespace {

using namespace hmgp;

std::vector<double> parse_doubles(const std::string& csv, size_t expected,
                                  const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(std::stod(field));
  if (out.size() != expected)
    throw CLI::ValidationError(what + ": expected " + std::to_string(expected) +
                               " comma-separated values");
  return out;
}

MaternParams parse_params(const std::string& csv) {
  const auto v = parse_doubles(csv, 4, "--params");
  MaternParams p{v[0], v[1], v[2], v[3]};
  p.validate();
  return p;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Artifacts are staged as <path>.tmp and renamed on success, so an aborted
// run never leaves a partial output under the final name.
class OutputStager {
 public:
  std::string stage(const std::string& path) {
    staged_.push_back(path);
    return path + ".tmp";
  }
  void commit() {
    for (const std::string& p : staged_) std::filesystem::rename(p + ".tmp", p);
    staged_.clear();
  }
  ~OutputStager() {
    for (const std::string& p : staged_) {
      std::error_code ec;
      std::filesystem::remove(p + ".tmp", ec);
    }
  }

 private:
  std::vector<std::string> staged_;
};

void write_svg(const std::string& path, std::span<const Location> train,
               std::span<const Location> predicted) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  double lo_x = 0.0, lo_y = 0.0, hi_x = 1.0, hi_y = 1.0;
  for (const Location& p : train) {
    lo_x = std::min(lo_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_x = std::max(hi_x, p.x);
    hi_y = std::max(hi_y, p.y);
  }
  const double w = hi_x - lo_x, h = hi_y - lo_y;
  out << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='" << lo_x - 0.02 * w << ' '
      << lo_y - 0.02 * h << ' ' << 1.04 * w << ' ' << 1.04 * h << "'>\n";
  const double r = 0.004 * std::max(w, h);
  for (const Location& p : train)
    out << "<circle cx='" << p.x << "' cy='" << p.y << "' r='" << r
        << "' fill='#e8b400'/>\n";
  for (const Location& p : predicted)
    out << "<circle cx='" << p.x << "' cy='" << p.y << "' r='" << r
        << "' fill='#1f66d0'/>\n";
  out << "</svg>\n";
}

struct CommonHOpts {
  double eps = 1e-6;
  int rank = 0;  // > 0 selects fixed-rank mode
  double eta = 2.0;
  int leaf_size = 32;
  std::string form = "ldl";
  int threads = 1;

  HConfig config() const {
    HConfig cfg;
    cfg.rank = rank > 0 ? RankControl::fixed_rank(rank) : RankControl::fixed_accuracy(eps);
    cfg.eta = eta;
    cfg.leaf_size = leaf_size;
    cfg.form = form == "cholesky" ? FactorForm::Cholesky : FactorForm::Ldl;
    cfg.threads = threads;
    return cfg;
  }
};

void add_h_options(CLI::App* cmd, CommonHOpts& o) {
  cmd->add_option("--eps", o.eps, "H-accuracy for adaptive cross approximation");
  cmd->add_option("--rank", o.rank, "fixed per-block rank (overrides --eps)");
  cmd->add_option("--eta", o.eta, "admissibility parameter");
  cmd->add_option("--leaf-size", o.leaf_size, "cluster tree leaf size");
  cmd->add_option("--form", o.form, "factorization form: ldl | cholesky")
      ->check(CLI::IsMember({"ldl", "cholesky"}));
  cmd->add_option("--threads", o.threads, "assembly worker cap (0 = hardware)");
}

int cmd_generate(int n, const std::string& params_csv, const std::string& tukey_csv,
                 std::uint64_t seed, double split, const std::string& out_prefix) {
  const MaternParams p = parse_params(params_csv);
  if (n < 1) throw CLI::ValidationError("--n must be positive");
  if (split <= 0.0 || split > 1.0) throw CLI::ValidationError("--split must be in (0, 1]");

  const std::vector<Location> pts = random_locations(n, seed);
  Eigen::VectorXd z = sample_grf(pts, p, seed ^ 0x517cc1b727220a95ull);
  bool tukey = false;
  TukeyParams tp;
  if (!tukey_csv.empty()) {
    const auto v = parse_doubles(tukey_csv, 4, "--tukey");
    tp = {v[0], v[1], v[2], v[3]};
    z = tukey_gh(z, tp);
    tukey = true;
  }

  const int n_train = std::max(1, static_cast<int>(std::lround(split * n)));
  Dataset ds;
  ds.train.has_values = ds.test.has_values = true;
  ds.train.locations.assign(pts.begin(), pts.begin() + n_train);
  ds.train.values = z.head(n_train);
  ds.test.locations.assign(pts.begin() + n_train, pts.end());
  ds.test.values = z.tail(n - n_train);

  OutputStager stager;
  write_points_csv(stager.stage(out_prefix + "_train.csv"), ds.train);
  if (n > n_train) write_points_csv(stager.stage(out_prefix + "_test.csv"), ds.test);
  {
    std::ofstream meta(stager.stage(out_prefix + "_meta.txt"), std::ios::binary);
    meta << "hmgp dataset meta v1\n";
    meta << "n = " << n << "\nseed = " << seed << "\nsplit = " << g17(split) << '\n';
    meta << "sigma2 = " << g17(p.sigma2) << "\nell = " << g17(p.ell) << "\nnu = " << g17(p.nu)
         << "\ntau2 = " << g17(p.tau2) << '\n';
    if (tukey)
      meta << "tukey_xi = " << g17(tp.xi) << "\ntukey_omega = " << g17(tp.omega)
           << "\ntukey_g = " << g17(tp.g) << "\ntukey_h = " << g17(tp.h) << '\n';
  }
  stager.commit();
  std::cout << "wrote " << out_prefix << "_train.csv (" << n_train << " rows)";
  if (n > n_train) std::cout << ", " << out_prefix << "_test.csv (" << n - n_train << " rows)";
  std::cout << '\n';
  return 0;
}

int cmd_fit(const std::string& train_path, const CommonHOpts& h, const std::string& init_csv,
            double threshold, int max_iters, const std::string& out_path) {
  const PointSet train = read_points_csv(train_path);
  if (train.locations.empty()) throw std::runtime_error("empty dataset");
  if (!train.has_values) throw std::runtime_error("training file needs a z column");

  OptimizerConfig cfg;
  cfg.h = h.config();
  cfg.threshold = threshold;
  cfg.max_iters = max_iters;
  if (!init_csv.empty()) {
    const auto v = parse_doubles(init_csv, 4, "--init");
    cfg.initial = {v[0], v[1], v[2], v[3]};
  }

  const FitReport rep = fit(train.locations, train.values, cfg);

  FitReportFile file;
  file.theta = rep.theta_hat;
  file.reparam = rep.reparam_hat;
  file.loglik = rep.loglik_at_opt;
  file.iterations = rep.iterations;
  file.converged = rep.converged;
  file.final_sweep_delta = rep.final_sweep_delta;
  file.eps = cfg.h.rank.mode == RankControl::Mode::FixedAccuracy ? cfg.h.rank.eps : -1.0;
  file.eta = cfg.h.eta;
  file.leaf_size = cfg.h.leaf_size;
  file.threads = cfg.h.threads;
  file.seconds = rep.seconds;
  file.trace = rep.trace;

  OutputStager stager;
  write_fit_report(stager.stage(out_path), file);
  stager.commit();
  std::cout << "theta_hat: sigma2 = " << g17(rep.theta_hat.sigma2)
            << ", ell = " << g17(rep.theta_hat.ell) << ", nu = " << g17(rep.theta_hat.nu)
            << ", tau2 = " << g17(rep.theta_hat.tau2) << '\n';
  std::cout << "loglik = " << g17(rep.loglik_at_opt) << ", iterations = " << rep.iterations
            << (rep.converged ? ", converged" : ", iteration budget reached") << '\n';
  return 0;
}

int cmd_predict(const std::string& train_path, const std::string& test_path,
                const std::string& method, const std::string& params_csv,
                const std::string& report_path, int k, CommonHOpts h,
                const std::string& out_path, const std::string& svg_path) {
  const PointSet train = read_points_csv(train_path);
  const PointSet test = read_points_csv(test_path);
  if (train.locations.empty()) throw std::runtime_error("empty training dataset");
  if (!train.has_values) throw std::runtime_error("training file needs a z column");

  Eigen::VectorXd z2;
  if (method == "knn") {
    z2 = knn_predict(train.locations, train.values, test.locations, k);
  } else {
    MaternParams p;
    if (!report_path.empty()) {
      const FitReportFile rep = read_fit_report(report_path);
      p = rep.theta;
      if (rep.eps > 0.0) h.eps = rep.eps;
      h.eta = rep.eta;
      h.leaf_size = rep.leaf_size;
    } else if (!params_csv.empty()) {
      p = parse_params(params_csv);
    } else {
      throw CLI::ValidationError("hmle prediction needs --params or --report");
    }
    z2 = predict(train.locations, train.values, test.locations, p, h.config()).z2_hat;
  }

  PointSet out;
  out.locations = test.locations;
  out.values = z2;
  out.has_values = true;
  OutputStager stager;
  write_points_csv(stager.stage(out_path), out);
  if (!svg_path.empty()) write_svg(stager.stage(svg_path), train.locations, test.locations);
  stager.commit();
  std::cout << "wrote " << out_path << " (" << z2.size() << " predictions)\n";
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& truth_path, bool mloe,
                 const std::string& theta_true_csv, const std::string& theta_approx_csv,
                 int m_eval, std::uint64_t seed, const std::string& out_path) {
  const PointSet pred = read_points_csv(pred_path);
  const PointSet truth = read_points_csv(truth_path);
  if (!pred.has_values || !truth.has_values)
    throw std::runtime_error("evaluate needs z columns in both files");
  if (pred.locations.size() != truth.locations.size())
    throw std::runtime_error("prediction/truth row count mismatch");
  for (size_t i = 0; i < pred.locations.size(); ++i)
    if (std::abs(pred.locations[i].x - truth.locations[i].x) > 1e-12 ||
        std::abs(pred.locations[i].y - truth.locations[i].y) > 1e-12)
      throw std::runtime_error("prediction/truth locations differ at row " +
                               std::to_string(i + 2));

  const double err = rmse(pred.values, truth.values);
  double mloe_v = std::nan(""), mmom_v = std::nan("");
  int m_used = 0;
  if (mloe) {
    if (theta_true_csv.empty() || theta_approx_csv.empty())
      throw CLI::ValidationError("--mloe needs --theta-true and --theta-approx");
    MetricConfig cfg;
    cfg.M = m_eval;
    cfg.seed = seed;
    const MloeMmom mm = mloe_mmom(truth.locations, parse_params(theta_true_csv),
                                  parse_params(theta_approx_csv), cfg);
    mloe_v = mm.mloe;
    mmom_v = mm.mmom;
    m_used = std::min<int>(m_eval, static_cast<int>(truth.locations.size()));
  }

  OutputStager stager;
  {
    std::ofstream out(stager.stage(out_path), std::ios::binary);
    out << "rmse,mloe,mmom,n_t,M\n";
    out << g17(err) << ',' << g17(mloe_v) << ',' << g17(mmom_v) << ','
        << pred.values.size() << ',' << m_used << '\n';
  }
  stager.commit();
  std::cout << "rmse = " << g17(err);
  if (mloe) std::cout << ", mloe = " << g17(mloe_v) << ", mmom = " << g17(mmom_v);
  std::cout << '\n';
  return 0;
}

int cmd_tune_k(const std::string& train_path, const std::string& ks_csv, int splits,
               std::uint64_t seed, const std::string& out_path) {
  const PointSet train = read_points_csv(train_path);
  if (!train.has_values) throw std::runtime_error("training file needs a z column");
  std::vector<int> ks;
  if (ks_csv.empty()) {
    ks.resize(20);
    std::iota(ks.begin(), ks.end(), 1);
  } else {
    std::stringstream ss(ks_csv);
    std::string field;
    while (std::getline(ss, field, ',')) ks.push_back(std::stoi(field));
  }
  const SelectKResult res = select_k(train.locations, train.values, ks, splits, seed);

  OutputStager stager;
  {
    std::ofstream out(stager.stage(out_path), std::ios::binary);
    out << "k,cv_rmse,selected\n";
    for (size_t i = 0; i < res.candidates.size(); ++i)
      out << res.candidates[i] << ',' << g17(res.cv_rmse[i]) << ','
          << (res.candidates[i] == res.k ? 1 : 0) << '\n';
  }
  stager.commit();
  std::cout << "selected k = " << res.k << '\n';
  return 0;
}

int cmd_bench(const std::string& sizes_csv, const std::string& params_csv,
              const CommonHOpts& h, std::uint64_t seed, const std::string& out_path) {
  std::vector<int> sizes;
  {
    std::stringstream ss(sizes_csv);
    std::string field;
    while (std::getline(ss, field, ',')) sizes.push_back(std::stoi(field));
  }
  if (sizes.empty()) throw CLI::ValidationError("--sizes is empty");
  const MaternParams p = parse_params(params_csv);

  OutputStager stager;
  std::ofstream out(stager.stage(out_path), std::ios::binary);
  out << "n,assemble_s,factor_s,bytes,ratio,max_rank,logdet_rel_err_vs_dense\n";
  for (int n : sizes) {
    const std::vector<Location> pts = random_locations(n, seed);
    const HConfig cfg = h.config();
    const auto t0 = std::chrono::steady_clock::now();
    const AssembledCov cov = assemble_covariance(pts, p, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    const HFactor f = factorize(cov.matrix, cfg.factor_eps(), cfg.form);
    const auto t2 = std::chrono::steady_clock::now();
    const double assemble_s = std::chrono::duration<double>(t1 - t0).count();
    const double factor_s = std::chrono::duration<double>(t2 - t1).count();
    const auto storage = cov.matrix.storage();

    double logdet_err = std::nan("");
    if (n <= 4096) {
      const Eigen::MatrixXd c = cov_dense(pts, p);
      const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(c).matrixL();
      const double want = 2.0 * l.diagonal().array().log().sum();
      logdet_err = std::abs(f.log_det() - want) / std::abs(want);
    }
    out << n << ',' << g17(assemble_s) << ',' << g17(factor_s) << ',' << storage.bytes << ','
        << g17(storage.ratio) << ',' << cov.matrix.max_leaf_rank() << ',' << g17(logdet_err)
        << '\n';
    std::cout << "n = " << n << ": assemble " << assemble_s << " s, factor " << factor_s
              << " s, " << storage.bytes << " bytes (ratio " << storage.ratio << ")\n";
  }
  out.close();
  stager.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical-matrix Gaussian process toolkit"};
  app.require_subcommand(1);

  // generate
  int gen_n = 1000;
  std::string gen_params = "1.0,0.1,0.5,0.0", gen_tukey, gen_out = "dataset";
  std::uint64_t gen_seed = 0;
  double gen_split = 0.9;
  CLI::App* generate = app.add_subcommand("generate", "sample a synthetic dataset");
  generate->add_option("--n", gen_n, "number of locations")->required();
  generate->add_option("--params", gen_params, "sigma2,ell,nu,tau2")->required();
  generate->add_option("--tukey", gen_tukey, "xi,omega,g,h marginal transform");
  generate->add_option("--seed", gen_seed, "rng seed")->required();
  generate->add_option("--split", gen_split, "train fraction (default 0.9)");
  generate->add_option("--out", gen_out, "output prefix")->required();

  // fit
  std::string fit_train, fit_init, fit_out = "fit_report.txt";
  CommonHOpts fit_h;
  double fit_threshold = 1e-4;
  int fit_max_iters = 400;
  CLI::App* fit_cmd = app.add_subcommand("fit", "maximum likelihood parameter estimation");
  fit_cmd->add_option("--train", fit_train, "training CSV (x,y,z)")->required();
  fit_cmd->add_option("--init", fit_init, "initial sigma0,ell0,nu0,tau0 (default 2,2,1,15)");
  fit_cmd->add_option("--threshold", fit_threshold, "sweep improvement threshold");
  fit_cmd->add_option("--max-iters", fit_max_iters, "1-d optimization budget");
  fit_cmd->add_option("--out", fit_out, "fit report path")->required();
  add_h_options(fit_cmd, fit_h);

  // predict
  std::string pr_train, pr_test, pr_method = "hmle", pr_params, pr_report, pr_out, pr_svg;
  int pr_k = 3;
  CommonHOpts pr_h;
  CLI::App* predict_cmd = app.add_subcommand("predict", "kriging or kNN prediction");
  predict_cmd->add_option("--train", pr_train, "training CSV (x,y,z)")->required();
  predict_cmd->add_option("--test", pr_test, "locations to predict (x,y[,z])")->required();
  predict_cmd->add_option("--method", pr_method, "hmle | knn")
      ->check(CLI::IsMember({"hmle", "knn"}));
  predict_cmd->add_option("--params", pr_params, "sigma2,ell,nu,tau2");
  predict_cmd->add_option("--report", pr_report, "fit report with parameters");
  predict_cmd->add_option("--k", pr_k, "neighbor count for knn");
  predict_cmd->add_option("--out", pr_out, "prediction CSV")->required();
  predict_cmd->add_option("--svg", pr_svg, "scatter overlay (train + predicted)");
  add_h_options(predict_cmd, pr_h);

  // evaluate
  std::string ev_pred, ev_truth, ev_tt, ev_ta, ev_out = "metrics.csv";
  bool ev_mloe = false;
  int ev_m = 1000;
  std::uint64_t ev_seed = 0;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score predictions");
  evaluate_cmd->add_option("--pred", ev_pred, "prediction CSV")->required();
  evaluate_cmd->add_option("--truth", ev_truth, "ground truth CSV")->required();
  evaluate_cmd->add_flag("--mloe", ev_mloe, "also compute MLOE/MMOM");
  evaluate_cmd->add_option("--theta-true", ev_tt, "true sigma2,ell,nu,tau2");
  evaluate_cmd->add_option("--theta-approx", ev_ta, "estimated sigma2,ell,nu,tau2");
  evaluate_cmd->add_option("--M", ev_m, "MLOE/MMOM evaluation locations");
  evaluate_cmd->add_option("--seed", ev_seed, "sampling seed for MLOE/MMOM");
  evaluate_cmd->add_option("--out", ev_out, "metric CSV")->required();

  // tune-k
  std::string tk_train, tk_ks, tk_out = "tune_k.csv";
  int tk_splits = 100;
  std::uint64_t tk_seed = 0;
  CLI::App* tune_cmd = app.add_subcommand("tune-k", "cross-validate the kNN neighbor count");
  tune_cmd->add_option("--train", tk_train, "training CSV (x,y,z)")->required();
  tune_cmd->add_option("--ks", tk_ks, "candidate list, default 1..20");
  tune_cmd->add_option("--splits", tk_splits, "Monte-Carlo split count");
  tune_cmd->add_option("--seed", tk_seed, "rng seed");
  tune_cmd->add_option("--out", tk_out, "cv table CSV")->required();

  // bench
  std::string bn_sizes = "1024,2048,4096,8192", bn_params = "1.0,0.1,0.5,0.01",
              bn_out = "bench.csv";
  CommonHOpts bn_h;
  bn_h.eps = 1e-4;
  std::uint64_t bn_seed = 1;
  CLI::App* bench_cmd = app.add_subcommand("bench", "assembly/factorization timings");
  bench_cmd->add_option("--sizes", bn_sizes, "problem sizes");
  bench_cmd->add_option("--params", bn_params, "sigma2,ell,nu,tau2");
  bench_cmd->add_option("--seed", bn_seed, "rng seed");
  bench_cmd->add_option("--out", bn_out, "timing CSV")->required();
  add_h_options(bench_cmd, bn_h);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*generate)
      return cmd_generate(gen_n, gen_params, gen_tukey, gen_seed, gen_split, gen_out);
    if (*fit_cmd)
      return cmd_fit(fit_train, fit_h, fit_init, fit_threshold, fit_max_iters, fit_out);
    if (*predict_cmd)
      return cmd_predict(pr_train, pr_test, pr_method, pr_params, pr_report, pr_k, pr_h,
                         pr_out, pr_svg);
    if (*evaluate_cmd)
      return cmd_evaluate(ev_pred, ev_truth, ev_mloe, ev_tt, ev_ta, ev_m, ev_seed, ev_out);
    if (*tune_cmd) return cmd_tune_k(tk_train, tk_ks, tk_splits, tk_seed, tk_out);
    if (*bench_cmd) return cmd_bench(bn_sizes, bn_params, bn_h, bn_seed, bn_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
