#include "hmgp/simgen.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace hmgp {

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("std_normal_quantile: p must be in (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                   6.7265770927008700853e+4) *
                      r +
                  4.5921953931549871457e+4) *
                     r +
                 1.3731693765509461125e+4) *
                    r +
                1.9715909503065514427e+3) *
                   r +
               1.3314166789178437745e+2) *
                  r +
              3.3871328727963666080e+0);
    const double den =
        (((((((5.226495278852545609e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) *
                 r +
             2.1213794301586595867e+4) *
                r +
            5.3941960214247511077e+3) *
               r +
           6.8718700749205790830e+2) *
              r +
          4.2313330701600911252e+1) *
             r +
         1.0);
    return num / den;
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e+0) *
                r +
            3.64784832476320460504e+0) *
               r +
           5.76949722146069140550e+0) *
              r +
          4.63033784615654529590e+0) *
             r +
         1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e+0) *
              r +
          2.05319162663775882187e+0) *
             r +
         1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e+0) *
              r +
          5.46378491116411436990e+0) *
             r +
         6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r +
              1.8463183175100546818e-5) *
                 r +
             7.868691311456132591e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
    x = num / den;
  }
  return q < 0.0 ? -x : x;
}

double uniform01(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) { return std_normal_quantile(uniform01(rng)); }

std::vector<Location> random_locations(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("random_locations: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Location> pts(n);
  for (int i = 0; i < n; ++i) {
    pts[i].x = uniform01(rng);
    pts[i].y = uniform01(rng);
  }
  return pts;
}

Eigen::VectorXd sample_grf(std::span<const Location> locations, const MaternParams& params,
                           std::uint64_t seed) {
  params.validate();
  const int n = static_cast<int>(locations.size());
  if (n < 1) throw std::invalid_argument("sample_grf: empty dataset");
  if (n > 16384) throw std::invalid_argument("sample_grf: dense sampling capped at n = 16384");

  Eigen::MatrixXd c = cov_dense(locations, params);
  Eigen::LLT<Eigen::Ref<Eigen::MatrixXd>> llt(c);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("sample_grf: covariance not SPD; increase nugget tau2");

  std::mt19937_64 rng(seed);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = standard_normal(rng);
  return llt.matrixL() * w;
}

Eigen::VectorXd tukey_gh(const Eigen::VectorXd& z, const TukeyParams& tp) {
  if (!tp.valid()) throw std::invalid_argument("tukey_gh: need omega > 0 and h >= 0");
  Eigen::VectorXd out(z.size());
  const bool g_zero = std::abs(tp.g) < 1e-10;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double zi = z(i);
    const double tail = std::exp(0.5 * tp.h * zi * zi);
    const double skew = g_zero ? zi : (std::exp(tp.g * zi) - 1.0) / tp.g;
    out(i) = tp.xi + tp.omega * skew * tail;
  }
  return out;
}

}  // namespace hmgp
