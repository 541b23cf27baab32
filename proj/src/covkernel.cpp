#include "hmgp/covkernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hmgp {

bool MaternParams::valid() const {
  return std::isfinite(sigma2) && std::isfinite(ell) && std::isfinite(nu) &&
         std::isfinite(tau2) && sigma2 > 0.0 && ell > 0.0 && nu > 0.0 && tau2 >= 0.0;
}

void MaternParams::validate() const {
  if (!valid())
    throw std::invalid_argument(
        "invalid Matern parameters: need sigma2 > 0, ell > 0, nu > 0, tau2 >= 0");
}

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// Taylor coefficients of 1/Gamma(z) around z = 0 (c_1 z + c_2 z^2 + ...).
constexpr double kRGammaCoeff[] = {
    1.0,
    0.5772156649015328606065,
    -0.655878071520253881077,
    -0.042002635034095235529,
    0.1665386113822914895017,
    -0.04219773455554433674821,
    -0.009621971527876973562115,
    0.007218943246663099542395,
    -0.001165167591859065112114,
    -0.0002152416741149509728157,
    0.0001280502823881161861532,
    -0.00002013485478078823865569,
    -0.000001250493482142670657345,
    0.000001133027231981695882374,
    -2.05633841697760710345e-7,
    6.116095104481415817862e-9,
    5.002007644469222930056e-9,
    -1.181274570487020144588e-9,
    1.043426711691100510492e-10,
    7.78226343990507125405e-12,
    -3.696805618642205708188e-12,
    5.100370287454475979015e-13,
    -2.058326053566506783222e-14,
    -5.34812253942301798237e-15,
    1.226778628238260790159e-15,
    -1.181259301697458769514e-16,
    1.18669225475160033258e-18,
    1.412380655318031781556e-18,
};
constexpr int kNumRGammaCoeff = sizeof(kRGammaCoeff) / sizeof(kRGammaCoeff[0]);

// Temme's auxiliary gamma combinations for |mu| <= 1/2:
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
//   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
// computed from the even/odd parts of 1/Gamma(1+mu) = sum c_k mu^(k-1), which
// avoids the cancellation of forming the quotient directly near mu = 0.
void temme_gammas(double mu, double& gam1, double& gam2, double& inv_gamma_1p,
                  double& inv_gamma_1m) {
  const double mu2 = mu * mu;
  double even = 0.0, odd = 0.0;
  double p = 1.0;  // mu^(k-1) over odd k
  for (int k = 1; k + 1 <= kNumRGammaCoeff; k += 2) {
    even += kRGammaCoeff[k - 1] * p;
    odd += kRGammaCoeff[k] * p;
    p *= mu2;
  }
  gam2 = even;
  gam1 = -odd;
  inv_gamma_1p = gam2 - mu * gam1;
  inv_gamma_1m = gam2 + mu * gam1;
}

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxIter = 20000;

// K_mu(x) and K_{mu+1}(x) for x <= 2, |mu| <= 1/2 (Temme's series).
void bessel_k_series(double mu, double x, double& kmu, double& kmu1) {
  const double x2 = 0.5 * x;
  const double pimu = kPi * mu;
  const double fact = std::abs(pimu) < 1e-15 ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::abs(e) < 1e-15 ? 1.0 : std::sinh(e) / e;
  double gam1, gam2, gampl, gammi;
  temme_gammas(mu, gam1, gam2, gampl, gammi);
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  const double mu2 = mu * mu;
  for (int i = 1; i <= kMaxIter; ++i) {
    ff = (i * ff + p + q) / (i * i - mu2);
    c *= d / i;
    p /= (i - mu);
    q /= (i + mu);
    const double del = c * ff;
    sum += del;
    const double del1 = c * (p - i * ff);
    sum1 += del1;
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  kmu = sum;
  kmu1 = sum1 * (2.0 / x);
}

// K_mu(x) and K_{mu+1}(x) for x > 2, |mu| <= 1/2 (Steed's continued fraction).
void bessel_k_cf2(double mu, double x, double& kmu, double& kmu1) {
  const double mu2 = mu * mu;
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d, delh = d;
  double q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1, c = a1, a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxIter; ++i) {
    a -= 2 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h = a1 * h;
  kmu = std::sqrt(kPi / (2.0 * x)) * std::exp(-x) / s;
  kmu1 = kmu * (mu + x + 0.5 - h) / x;
}

// Forward recurrence K_{nu+1}(x) = K_{nu-1}(x) + (2 nu / x) K_nu(x), stable in
// increasing order.
double recur_up(double mu, double x, double k0, double k1, int steps) {
  const double two_over_x = 2.0 / x;
  for (int i = 1; i <= steps; ++i) {
    const double knext = (mu + i) * two_over_x * k1 + k0;
    k0 = k1;
    k1 = knext;
  }
  return k0;
}

double bessel_k_half_integer(int m, double x) {
  // K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}; higher orders by recurrence.
  const double k_half = std::sqrt(kPi / (2.0 * x)) * std::exp(-x);
  if (m == 0) return k_half;
  const double k_three_half = k_half * (1.0 + 1.0 / x);
  if (m == 1) return k_three_half;
  return recur_up(0.5, x, k_half, k_three_half, m);
}

}  // namespace

namespace detail {

double bessel_k_generic(double nu, double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel_k: x must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu) || !std::isfinite(x))
    throw std::domain_error("bessel_k: order must be positive and finite");
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;  // in [-1/2, 1/2]
  double k0, k1;
  if (x <= 2.0)
    bessel_k_series(mu, x, k0, k1);
  else
    bessel_k_cf2(mu, x, k0, k1);
  return recur_up(mu, x, k0, k1, nl);
}

double matern_generic(double h, const MaternParams& p) {
  p.validate();
  if (!(h >= 0.0) || !std::isfinite(h)) throw std::invalid_argument("matern: invalid distance");
  if (h == 0.0) return p.sigma2 + p.tau2;
  const double t = h / p.ell;
  if (t < 1e-10) return p.sigma2;
  const double pref = p.sigma2 * std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu);
  return pref * std::pow(t, p.nu) * bessel_k_generic(p.nu, t);
}

}  // namespace detail

double bessel_k(double nu, double x) {
  if (!(x > 0.0)) throw std::domain_error("bessel_k: x must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu) || !std::isfinite(x))
    throw std::domain_error("bessel_k: order must be positive and finite");
  const double half_shift = nu - 0.5;
  if (half_shift == std::floor(half_shift) && half_shift >= 0.0)
    return bessel_k_half_integer(static_cast<int>(half_shift), x);
  return detail::bessel_k_generic(nu, x);
}

double matern(double h, const MaternParams& p) {
  p.validate();
  if (!(h >= 0.0) || !std::isfinite(h)) throw std::invalid_argument("matern: invalid distance");
  if (h == 0.0) return p.sigma2 + p.tau2;
  const double t = h / p.ell;
  if (t < 1e-10) return p.sigma2;
  const double pref = p.sigma2 * std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu);
  return pref * std::pow(t, p.nu) * bessel_k(p.nu, t);
}

KernelEvaluator::KernelEvaluator(std::span<const Location> locations, const MaternParams& p)
    : pts_(locations), p_(p) {
  p.validate();
  prefactor_ = p.sigma2 * std::pow(2.0, 1.0 - p.nu) / std::tgamma(p.nu);
  if (p.nu == 0.5)
    closed_form_ = 0;
  else if (p.nu == 1.5)
    closed_form_ = 1;
  else if (p.nu == 2.5)
    closed_form_ = 2;
  const double hs = p.nu - 0.5;
  if (hs == std::floor(hs) && hs >= 0.0) half_order_ = static_cast<int>(hs);
}

double KernelEvaluator::at_distance(double h) const {
  const double t = h / p_.ell;
  if (t < 1e-10) return p_.sigma2;
  switch (closed_form_) {
    case 0:
      return p_.sigma2 * std::exp(-t);
    case 1:
      return p_.sigma2 * (1.0 + t) * std::exp(-t);
    case 2:
      return p_.sigma2 * (1.0 + t + t * t / 3.0) * std::exp(-t);
    default:
      break;
  }
  const double k = half_order_ >= 0 ? bessel_k_half_integer(half_order_, t)
                                    : detail::bessel_k_generic(p_.nu, t);
  return prefactor_ * std::pow(t, p_.nu) * k;
}

Eigen::MatrixXd cov_block(std::span<const int> rows, std::span<const int> cols,
                          std::span<const Location> locations, const MaternParams& p) {
  const KernelEvaluator k(locations, p);
  const int n = static_cast<int>(locations.size());
  for (int i : rows)
    if (i < 0 || i >= n) throw std::out_of_range("cov_block: row index out of range");
  for (int j : cols)
    if (j < 0 || j >= n) throw std::out_of_range("cov_block: col index out of range");
  Eigen::MatrixXd block(rows.size(), cols.size());
  for (size_t b = 0; b < cols.size(); ++b)
    for (size_t a = 0; a < rows.size(); ++a) block(a, b) = k(rows[a], cols[b]);
  return block;
}

Eigen::MatrixXd cov_dense(std::span<const Location> locations, const MaternParams& p) {
  const KernelEvaluator k(locations, p);
  const int n = static_cast<int>(locations.size());
  Eigen::MatrixXd c(n, n);
  for (int j = 0; j < n; ++j) {
    c(j, j) = p.sigma2 + p.tau2;
    for (int i = j + 1; i < n; ++i) {
      const double v = k(i, j);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

}  // namespace hmgp
