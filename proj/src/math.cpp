#include "jmdiag/math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace jmdiag {

double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

// Wichura (1988), algorithm AS 241, PPND16.
double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("norm_quantile: p must lie in [0,1]");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) *
                    r +
                4.5921953931549871457e4) *
                   r +
               1.3731693765509461125e4) *
                  r +
              1.9715909503065514427e3) *
                 r +
             1.3314166789178437745e2) *
                r +
            3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) *
                    r +
                2.1213794301586595867e4) *
                   r +
               5.3941960214247511077e3) *
                  r +
              6.8718700749205790830e2) *
                 r +
             4.2313330701600911252e1) *
                r +
            1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) *
                     r +
                 1.27045825245236838258e0) *
                    r +
                3.64784832476320460504e0) *
                   r +
               5.76949722146069140550e0) *
                  r +
              4.63033784615654529590e0) *
                 r +
             1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) *
                     r +
                 1.48103976427480074590e-1) *
                    r +
                6.89767334985100004550e-1) *
                   r +
               1.67638483018380384940e0) *
                  r +
              2.05319162663775882187e0) *
                 r +
             1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) *
                     r +
                 2.65321895265761230930e-2) *
                    r +
                2.96560571828504891230e-1) *
                   r +
               1.78482653991729133580e0) *
                  r +
              5.46378491116411436990e0) *
                 r +
             6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) *
                     r +
                 7.86869131145613259100e-4) *
                    r +
                1.48753612908506148525e-2) *
                   r +
               1.36929880922735805310e-1) *
                  r +
              5.99832206555887937690e-1) *
                 r +
             1.0);
  }
  return (q < 0.0) ? -value : value;
}

namespace {

// Lower incomplete gamma by series expansion, valid for x < a + 1.
double gamma_p_series(double a, double x) {
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 1; n < 500; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper incomplete gamma by Lentz continued fraction, valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p: need a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  return (x < a + 1.0) ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_q: need a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  return (x < a + 1.0) ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chisq_cdf(double x, double nu) {
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * nu, 0.5 * x);
}

namespace {

// Continued fraction for the incomplete beta (Numerical Recipes betacf).
double beta_cf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return h;
}

}  // namespace

double beta_inc(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("beta_inc: need a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double beta_quantile(double p, double a, double b) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  // Bisection to a safe bracket, then Newton refinement.
  double lo = 0.0, hi = 1.0;
  double x = a / (a + b);
  for (int i = 0; i < 200; ++i) {
    const double f = beta_inc(a, b, x) - p;
    if (f > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    // Newton step using the beta density, guarded by the bracket.
    const double ln_pdf = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          (a - 1.0) * std::log(std::max(x, 1e-300)) +
                          (b - 1.0) * std::log1p(-std::min(x, 1.0 - 1e-16));
    const double pdf = std::exp(ln_pdf);
    double next = (pdf > 0.0) ? x - f / pdf : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) < 1e-15 * (1.0 + std::fabs(x))) return next;
    x = next;
  }
  return x;
}

// Marsaglia, Tsang & Wang (2003), "Evaluating Kolmogorov's distribution".
double ks_cdf_exact(int n, double d) {
  if (n < 1) throw std::invalid_argument("ks_cdf_exact: n >= 1");
  if (d <= 0.0) return 0.0;
  if (d >= 1.0) return 1.0;
  const int k = static_cast<int>(n * d) + 1;
  const int m = 2 * k - 1;
  const double h = k - n * d;

  std::vector<double> big_h(static_cast<std::size_t>(m) * m);
  auto at = [&](std::vector<double>& mat, int i, int j) -> double& {
    return mat[static_cast<std::size_t>(i) * m + j];
  };
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) at(big_h, i, j) = (i - j + 1 < 0) ? 0.0 : 1.0;
  for (int i = 0; i < m; ++i) {
    at(big_h, i, 0) -= std::pow(h, i + 1);
    at(big_h, m - 1, i) -= std::pow(h, m - i);
  }
  at(big_h, m - 1, 0) += (2.0 * h - 1.0 > 0.0) ? std::pow(2.0 * h - 1.0, m) : 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      if (i - j + 1 > 0) {
        for (int g = 1; g <= i - j + 1; ++g) at(big_h, i, j) /= g;
      }
    }

  // Q = H^n by binary exponentiation with explicit decimal exponent tracking.
  std::vector<double> tmp(big_h.size());
  auto mat_mul = [&](const std::vector<double>& lhs, const std::vector<double>& rhs,
                     std::vector<double>& out) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int g = 0; g < m; ++g)
          s += lhs[static_cast<std::size_t>(i) * m + g] * rhs[static_cast<std::size_t>(g) * m + j];
        out[static_cast<std::size_t>(i) * m + j] = s;
      }
  };
  auto rescale = [&](std::vector<double>& mat, int& exponent10) {
    if (mat[static_cast<std::size_t>(k - 1) * m + (k - 1)] > 1e140) {
      for (double& v : mat) v *= 1e-140;
      exponent10 += 140;
    }
  };

  std::vector<double> power = big_h;
  std::vector<double> q;
  int e_power = 0;
  int e_q = 0;
  bool q_set = false;
  int exponent = n;
  while (exponent > 0) {
    if (exponent & 1) {
      if (!q_set) {
        q = power;
        e_q = e_power;
        q_set = true;
      } else {
        mat_mul(q, power, tmp);
        q.swap(tmp);
        e_q += e_power;
        rescale(q, e_q);
      }
    }
    exponent >>= 1;
    if (exponent > 0) {
      mat_mul(power, power, tmp);
      power.swap(tmp);
      e_power *= 2;
      rescale(power, e_power);
    }
  }

  double s = q[static_cast<std::size_t>(k - 1) * m + (k - 1)];
  for (int i = 1; i <= n; ++i) {
    s *= static_cast<double>(i) / n;
    if (s < 1e-140) {
      s *= 1e140;
      e_q -= 140;
    }
  }
  return s * std::pow(10.0, e_q);
}

double kolmogorov_asymptotic_sf(double t) {
  if (t <= 0.0) return 1.0;
  if (t <= 1.0) {
    // Theta-inversion form, accurate for small arguments.
    double sum = 0.0;
    const double c = -9.8696044010893586188 / (8.0 * t * t);  // -pi^2 / (8 t^2)
    for (int i = 1; i <= 20; i += 1) {
      const double term = std::exp(c * (2 * i - 1) * (2 * i - 1));
      sum += term;
      if (term < 1e-18 * sum) break;
    }
    const double cdf = std::sqrt(2.0 * 3.14159265358979323846) / t * sum;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * t * t);
    sum += (j % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

Interval clopper_pearson(int successes, int trials, double confidence) {
  if (trials <= 0 || successes < 0 || successes > trials)
    throw std::invalid_argument("clopper_pearson: need 0 <= successes <= trials, trials > 0");
  const double alpha = 1.0 - confidence;
  Interval ci;
  ci.lower = (successes == 0) ? 0.0
                              : beta_quantile(alpha / 2.0, successes, trials - successes + 1);
  ci.upper = (successes == trials)
                 ? 1.0
                 : beta_quantile(1.0 - alpha / 2.0, successes + 1, trials - successes);
  return ci;
}

double binomial_cdf(int m, int n, double p) {
  if (m < 0) return 0.0;
  if (m >= n) return 1.0;
  // P(X <= m) = I_{1-p}(n - m, m + 1)
  return beta_inc(n - m, m + 1, 1.0 - p);
}

int binomial_quantile(double prob, int n, double p) {
  for (int m = 0; m <= n; ++m) {
    if (binomial_cdf(m, n, p) >= prob) return m;
  }
  return n;
}

}  // namespace jmdiag
