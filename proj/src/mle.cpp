#include "hmgp/mle.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hmgp {

double& ReparamPoint::operator[](int i) {
  switch (i) {
    case 0:
      return sigma0;
    case 1:
      return ell0;
    case 2:
      return nu0;
    default:
      return tau0;
  }
}

double ReparamPoint::operator[](int i) const {
  return const_cast<ReparamPoint&>(*this)[i];
}

MaternParams reparam_to_params(const ReparamPoint& p) {
  const double sigma = 2.0 * std::pow(1.1, -p.sigma0);
  const double tau = std::pow(2.0, -p.tau0);
  MaternParams out;
  out.sigma2 = sigma * sigma;
  out.ell = std::pow(1.5, -p.ell0);
  out.nu = std::pow(1.2, -p.nu0);
  out.tau2 = tau * tau;
  return out;
}

ReparamPoint params_to_reparam(const MaternParams& p) {
  p.validate();
  ReparamPoint out;
  out.sigma0 = -std::log(std::sqrt(p.sigma2) / 2.0) / std::log(1.1);
  out.ell0 = -std::log(p.ell) / std::log(1.5);
  out.nu0 = -std::log(p.nu) / std::log(1.2);
  // tau2 = 0 has no finite preimage; 2^-50 is numerically indistinguishable.
  out.tau0 = p.tau2 > 0.0 ? -std::log(std::sqrt(p.tau2)) / std::log(2.0) : 50.0;
  return out;
}

BrentResult brent_max_1d(const std::function<double(double)>& f, double lo, double hi,
                         double xtol, int max_evals) {
  if (!(lo < hi)) throw std::invalid_argument("brent_max_1d: need lo < hi");
  if (max_evals < 3) throw std::invalid_argument("brent_max_1d: max_evals too small");

  constexpr double kGolden = 0.3819660112501051;  // (3 - sqrt(5)) / 2
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  const double neg_inf = -std::numeric_limits<double>::infinity();

  int evals = 0;
  bool any_finite = false;
  auto g = [&](double t) {
    ++evals;
    const double v = f(t);
    if (std::isfinite(v)) {
      any_finite = true;
      return v;
    }
    return neg_inf;
  };

  double a = lo, b = hi;
  double x = a + kGolden * (b - a);
  double w = x, v = x;
  double fx = g(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  while (evals < max_evals) {
    const double m = 0.5 * (a + b);
    const double tol = sqrt_eps * std::abs(x) + xtol;
    if (std::abs(x - m) <= 2.0 * tol - 0.5 * (b - a)) break;

    double step = 0.0;
    bool golden = true;
    if (std::abs(e) > tol && std::isfinite(fx) && std::isfinite(fw) && std::isfinite(fv)) {
      // Parabola through (v, fv), (w, fw), (x, fx); maximization flips signs.
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        step = p / q;
        const double u_try = x + step;
        if (u_try - a < 2.0 * tol || b - u_try < 2.0 * tol)
          step = x < m ? tol : -tol;
        golden = false;
      }
    }
    if (golden) {
      e = (x < m ? b : a) - x;
      step = kGolden * e;
    }
    d = step;
    const double u = x + (std::abs(step) >= tol ? step : (step > 0.0 ? tol : -tol));
    const double fu = g(u);

    if (fu >= fx) {
      if (u < x)
        b = x;
      else
        a = x;
      v = w;
      fv = fw;
      w = x;
      fw = fx;
      x = u;
      fx = fu;
    } else {
      if (u < x)
        a = u;
      else
        b = u;
      if (fu >= fw || w == x) {
        v = w;
        fv = fw;
        w = u;
        fw = fu;
      } else if (fu >= fv || v == x || v == w) {
        v = u;
        fv = fu;
      }
    }
  }

  if (!any_finite) throw std::runtime_error("brent_max_1d: likelihood undefined on bracket");
  return {x, fx, evals};
}

FitReport fit(std::span<const Location> locations, const Eigen::VectorXd& z,
              const OptimizerConfig& cfg) {
  if (locations.empty()) throw std::invalid_argument("fit: empty dataset");
  if (z.size() != static_cast<Eigen::Index>(locations.size()))
    throw std::invalid_argument("fit: |z| != n");
  if (!(cfg.threshold > 0.0)) throw std::invalid_argument("fit: threshold must be > 0");
  if (cfg.max_iters < 1) throw std::invalid_argument("fit: max_iters must be >= 1");

  const auto t0 = std::chrono::steady_clock::now();
  const double neg_inf = -std::numeric_limits<double>::infinity();

  auto loglik_at = [&](const ReparamPoint& p) {
    try {
      return evaluate_loglik(locations, z, reparam_to_params(p), cfg.h).loglik;
    } catch (const std::exception&) {
      return neg_inf;  // infeasible probe; the search moves on
    }
  };

  FitReport rep;
  ReparamPoint point = cfg.initial;
  double current = loglik_at(point);
  bool any_success = std::isfinite(current);

  while (rep.iterations < cfg.max_iters) {
    const double sweep_start = current;
    for (int coord = 0; coord < 4 && rep.iterations < cfg.max_iters; ++coord) {
      const double center = point[coord];
      auto slice = [&](double t) {
        ReparamPoint q = point;
        q[coord] = t;
        return loglik_at(q);
      };

      double half = cfg.bracket_halfwidth;
      BrentResult best{center, current, 0};
      for (int attempt = 0; attempt <= cfg.max_bracket_expansions; ++attempt) {
        const double lo = center - half;
        const double hi = center + half;
        BrentResult res;
        try {
          res = brent_max_1d(slice, lo, hi, cfg.brent_xtol, cfg.brent_max_evals);
        } catch (const std::runtime_error&) {
          break;  // whole bracket infeasible; keep the current coordinate
        }
        best = res;
        const double edge = 4.0 * cfg.brent_xtol;
        if (res.x - lo > edge && hi - res.x > edge) break;
        half *= 2.0;
      }
      ++rep.iterations;
      if (std::isfinite(best.fx) && best.fx > current) {
        point[coord] = best.x;
        current = best.fx;
        any_success = true;
      }
      rep.trace.push_back({rep.iterations, coord, point, current});
    }
    rep.final_sweep_delta = current - sweep_start;
    if (!std::isfinite(current)) break;
    if (rep.final_sweep_delta < cfg.threshold) {
      rep.converged = true;
      break;
    }
  }

  if (!any_success)
    throw std::runtime_error("fit: likelihood evaluation failed at every probed point");

  rep.reparam_hat = point;
  rep.theta_hat = reparam_to_params(point);
  rep.loglik_at_opt = current;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace hmgp
