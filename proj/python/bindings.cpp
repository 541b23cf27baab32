#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hmgp/knn.hpp"
#include "hmgp/krige.hpp"
#include "hmgp/loglik.hpp"
#include "hmgp/metrics.hpp"
#include "hmgp/mle.hpp"
#include "hmgp/simgen.hpp"

namespace py = pybind11;
using namespace hmgp;

namespace {

std::vector<Location> to_locations(const Eigen::MatrixXd& m) {
  if (m.cols() != 2) throw std::invalid_argument("locations must be an (n, 2) array");
  std::vector<Location> out(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[i] = {m(i, 0), m(i, 1)};
  return out;
}

Eigen::MatrixXd from_locations(const std::vector<Location>& pts) {
  Eigen::MatrixXd m(pts.size(), 2);
  for (size_t i = 0; i < pts.size(); ++i) {
    m(i, 0) = pts[i].x;
    m(i, 1) = pts[i].y;
  }
  return m;
}

HConfig make_config(double eps, int rank, double eta, int leaf_size,
                    const std::string& form, int threads) {
  HConfig cfg;
  cfg.rank = rank > 0 ? RankControl::fixed_rank(rank) : RankControl::fixed_accuracy(eps);
  cfg.eta = eta;
  cfg.leaf_size = leaf_size;
  cfg.form = form == "cholesky" ? FactorForm::Cholesky : FactorForm::Ldl;
  cfg.threads = threads;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_hmgp, m) {
  m.doc() = "Hierarchical-matrix Gaussian process toolkit";

  py::class_<MaternParams>(m, "MaternParams")
      .def(py::init<double, double, double, double>(), py::arg("sigma2"), py::arg("ell"),
           py::arg("nu"), py::arg("tau2") = 0.0)
      .def_readwrite("sigma2", &MaternParams::sigma2)
      .def_readwrite("ell", &MaternParams::ell)
      .def_readwrite("nu", &MaternParams::nu)
      .def_readwrite("tau2", &MaternParams::tau2)
      .def("__repr__", [](const MaternParams& p) {
        return "MaternParams(sigma2=" + std::to_string(p.sigma2) +
               ", ell=" + std::to_string(p.ell) + ", nu=" + std::to_string(p.nu) +
               ", tau2=" + std::to_string(p.tau2) + ")";
      });

  m.def("matern", &matern, py::arg("h"), py::arg("params"),
        "Matern covariance at distance h (nugget on the diagonal only)");
  m.def("bessel_k", &bessel_k, py::arg("nu"), py::arg("x"),
        "Modified Bessel function of the second kind");

  m.def(
      "cov_dense",
      [](const Eigen::MatrixXd& locs, const MaternParams& p) {
        const auto pts = to_locations(locs);
        return cov_dense(pts, p);
      },
      py::arg("locations"), py::arg("params"), "Dense covariance matrix (small n)");

  m.def(
      "random_locations",
      [](int n, std::uint64_t seed) { return from_locations(random_locations(n, seed)); },
      py::arg("n"), py::arg("seed"), "Uniform locations on the unit square");

  m.def(
      "sample_grf",
      [](const Eigen::MatrixXd& locs, const MaternParams& p, std::uint64_t seed) {
        const auto pts = to_locations(locs);
        return sample_grf(pts, p, seed);
      },
      py::arg("locations"), py::arg("params"), py::arg("seed"),
      "Exact Gaussian random field sample (dense Cholesky, n <= 16384)");

  m.def(
      "tukey_gh",
      [](const Eigen::VectorXd& z, double xi, double omega, double g, double h) {
        return tukey_gh(z, {xi, omega, g, h});
      },
      py::arg("z"), py::arg("xi") = 0.0, py::arg("omega") = 1.0, py::arg("g") = 0.0,
      py::arg("h") = 0.0, "Tukey g-and-h marginal transform");

  m.def(
      "loglik",
      [](const Eigen::MatrixXd& locs, const Eigen::VectorXd& z, const MaternParams& p,
         double eps, int rank, double eta, int leaf_size, const std::string& form,
         int threads) {
        const auto pts = to_locations(locs);
        const LogLikResult res =
            evaluate_loglik(pts, z, p, make_config(eps, rank, eta, leaf_size, form, threads));
        py::dict out;
        out["loglik"] = res.loglik;
        out["logdet"] = res.logdet;
        out["quad_form"] = res.quad_form;
        out["n"] = res.n;
        out["seconds"] = res.seconds;
        out["clamped"] = res.factor_status == LogLikResult::Status::Clamped;
        return out;
      },
      py::arg("locations"), py::arg("z"), py::arg("params"), py::arg("eps") = 1e-6,
      py::arg("rank") = 0, py::arg("eta") = 2.0, py::arg("leaf_size") = 32,
      py::arg("form") = "ldl", py::arg("threads") = 1,
      "Gaussian log-likelihood through the H-matrix pipeline");

  m.def(
      "fit",
      [](const Eigen::MatrixXd& locs, const Eigen::VectorXd& z,
         const std::array<double, 4>& init, double eps, double threshold, int max_iters,
         double eta, int leaf_size, int threads) {
        const auto pts = to_locations(locs);
        OptimizerConfig cfg;
        cfg.initial = {init[0], init[1], init[2], init[3]};
        cfg.threshold = threshold;
        cfg.max_iters = max_iters;
        cfg.h = make_config(eps, 0, eta, leaf_size, "ldl", threads);
        const FitReport rep = fit(pts, z, cfg);
        py::dict out;
        out["params"] = rep.theta_hat;
        out["loglik"] = rep.loglik_at_opt;
        out["iterations"] = rep.iterations;
        out["converged"] = rep.converged;
        out["final_sweep_delta"] = rep.final_sweep_delta;
        out["seconds"] = rep.seconds;
        return out;
      },
      py::arg("locations"), py::arg("z"),
      py::arg("init") = std::array<double, 4>{2.0, 2.0, 1.0, 15.0}, py::arg("eps") = 1e-6,
      py::arg("threshold") = 1e-4, py::arg("max_iters") = 400, py::arg("eta") = 2.0,
      py::arg("leaf_size") = 32, py::arg("threads") = 1,
      "Maximum likelihood estimation of the Matern parameters");

  m.def(
      "predict",
      [](const Eigen::MatrixXd& train, const Eigen::VectorXd& z, const Eigen::MatrixXd& test,
         const MaternParams& p, double eps, double eta, int leaf_size, int threads) {
        const auto tr = to_locations(train);
        const auto te = to_locations(test);
        return predict(tr, z, te, p, make_config(eps, 0, eta, leaf_size, "ldl", threads))
            .z2_hat;
      },
      py::arg("train"), py::arg("z"), py::arg("test"), py::arg("params"),
      py::arg("eps") = 1e-6, py::arg("eta") = 2.0, py::arg("leaf_size") = 32,
      py::arg("threads") = 1, "Conditional-mean kriging prediction");

  m.def(
      "kriging_variance",
      [](const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const MaternParams& p) {
        return kriging_variance_dense(to_locations(train), to_locations(test), p);
      },
      py::arg("train"), py::arg("test"), py::arg("params"),
      "Pointwise kriging variance (dense path, n <= 4096)");

  m.def(
      "knn_predict",
      [](const Eigen::MatrixXd& train, const Eigen::VectorXd& values,
         const Eigen::MatrixXd& queries, int k) {
        return knn_predict(to_locations(train), values, to_locations(queries), k);
      },
      py::arg("train"), py::arg("values"), py::arg("queries"), py::arg("k"),
      "Exact k-nearest-neighbor mean prediction");

  m.def(
      "select_k",
      [](const Eigen::MatrixXd& train, const Eigen::VectorXd& values,
         const std::vector<int>& ks, int splits, std::uint64_t seed) {
        const SelectKResult res = select_k(to_locations(train), values, ks, splits, seed);
        return py::make_tuple(res.k, res.candidates, res.cv_rmse);
      },
      py::arg("train"), py::arg("values"), py::arg("ks"), py::arg("splits") = 100,
      py::arg("seed") = 0, "Monte-Carlo cross-validated neighbor count");

  m.def("rmse", &rmse, py::arg("z_hat"), py::arg("z_true"));

  m.def(
      "mloe_mmom",
      [](const Eigen::MatrixXd& locs, const MaternParams& theta_true,
         const MaternParams& theta_approx, int M, std::uint64_t seed) {
        MetricConfig cfg;
        cfg.M = M;
        cfg.seed = seed;
        const MloeMmom res = mloe_mmom(to_locations(locs), theta_true, theta_approx, cfg);
        return py::make_tuple(res.mloe, res.mmom);
      },
      py::arg("locations"), py::arg("theta_true"), py::arg("theta_approx"),
      py::arg("M") = 1000, py::arg("seed") = 0,
      "Mean loss of efficiency and mean misspecification of the MSE");

  m.def(
      "assembly_stats",
      [](const Eigen::MatrixXd& locs, const MaternParams& p, double eps, double eta,
         int leaf_size, int threads) {
        const auto pts = to_locations(locs);
        const AssembledCov cov =
            assemble_covariance(pts, p, make_config(eps, 0, eta, leaf_size, "ldl", threads));
        const auto s = cov.matrix.storage();
        py::dict out;
        out["bytes"] = s.bytes;
        out["ratio"] = s.ratio;
        out["max_rank"] = cov.matrix.max_leaf_rank();
        return out;
      },
      py::arg("locations"), py::arg("params"), py::arg("eps") = 1e-6, py::arg("eta") = 2.0,
      py::arg("leaf_size") = 32, py::arg("threads") = 1,
      "Storage footprint of the assembled H-matrix");
}
