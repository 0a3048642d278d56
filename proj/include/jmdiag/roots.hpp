#pragma once

#include <cmath>
#include <stdexcept>

#include "jmdiag/quadrature.hpp"

namespace jmdiag {

struct RootResult {
  double root = 0.0;
  int iterations = 0;
};

// Brent's method on a bracketing interval [a, b] with f(a) f(b) <= 0.
template <typename F>
RootResult find_root_brent(F&& f, double a, double b, double fa, double fb, double x_tol,
                           int max_iterations = 200) {
  if (fa == 0.0) return {a, 0};
  if (fb == 0.0) return {b, 0};
  if (fa * fb > 0.0) throw std::invalid_argument("find_root_brent: root not bracketed");

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 1; iter <= max_iterations; ++iter) {
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * 2.220446049250313e-16 * std::fabs(b) + 0.5 * x_tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return {b, iter};
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q), std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::fabs(d) > tol1) ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = b - a;
      e = d;
    }
  }
  throw numerical_error("find_root_brent: no convergence after the iteration limit");
}

}  // namespace jmdiag
