#pragma once

#include <Eigen/Core>
#include <span>

#include "hmgp/geometry.hpp"

namespace hmgp {

// Matern parameter vector: variance, range, smoothness, nugget.
struct MaternParams {
  double sigma2 = 1.0;
  double ell = 0.1;
  double nu = 0.5;
  double tau2 = 0.0;

  bool valid() const;
  void validate() const;  // throws std::invalid_argument
};

// Modified Bessel function of the second kind K_nu(x), nu > 0, x > 0.
// Half-integer orders short-circuit to their closed forms; everything else
// goes through the series / continued-fraction evaluation below.
double bessel_k(double nu, double x);

namespace detail {
// Series (x <= 2) / continued-fraction (x > 2) evaluation with forward
// recurrence in the order. No half-integer shortcut; kept callable so the
// generic path can be tested against the closed forms.
double bessel_k_generic(double nu, double x);
// Matern covariance forced through bessel_k_generic.
double matern_generic(double h, const MaternParams& p);
}  // namespace detail

// Matern covariance at distance h. h = 0 returns sigma2 + tau2 (the nugget
// contributes on the diagonal only).
double matern(double h, const MaternParams& p);

// Cached per-parameter evaluator used by assembly and prediction. Entries are
// indexed by original location indices; the nugget is added iff i == j.
class KernelEvaluator {
 public:
  KernelEvaluator(std::span<const Location> locations, const MaternParams& p);

  double operator()(int i, int j) const {
    if (i == j) return p_.sigma2 + p_.tau2;
    return at_distance(distance(pts_[i], pts_[j]));
  }

  // Off-diagonal covariance value at distance h >= 0; no nugget term.
  double at_distance(double h) const;

  const MaternParams& params() const { return p_; }

 private:
  std::span<const Location> pts_;
  MaternParams p_;
  double prefactor_ = 0.0;  // sigma2 * 2^(1-nu) / Gamma(nu)
  int closed_form_ = -1;    // 0,1,2 for nu = 1/2, 3/2, 5/2
  int half_order_ = -1;     // m for nu = m + 1/2
};

// Dense covariance block with entries matern(|s_rows[a] - s_cols[b]|) and the
// nugget on exact index coincidences.
Eigen::MatrixXd cov_block(std::span<const int> rows, std::span<const int> cols,
                          std::span<const Location> locations, const MaternParams& p);

// Full dense covariance matrix (test oracle and small-n paths).
Eigen::MatrixXd cov_dense(std::span<const Location> locations, const MaternParams& p);

}  // namespace hmgp
