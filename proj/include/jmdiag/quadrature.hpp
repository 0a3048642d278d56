#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmdiag {

// Thrown when an iterative numerical procedure fails to reach its tolerance.
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1] (QUADPACK qk15).
inline constexpr double kK15Nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double kK15Weights[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double kG7Weights[4] = {0.129484966168870, 0.279705391489277,
                                         0.381830050505119, 0.417959183673469};

template <typename F>
void gauss_kronrod_15(F&& f, double a, double b, double& value, double& error) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(center - half * kK15Nodes[i]);
    fv[14 - i] = f(center + half * kK15Nodes[i]);
  }
  fv[7] = f(center);
  double kronrod = kK15Weights[7] * fv[7];
  for (int i = 0; i < 7; ++i) kronrod += kK15Weights[i] * (fv[i] + fv[14 - i]);
  double gauss = kG7Weights[3] * fv[7];
  for (int i = 0; i < 3; ++i) gauss += kG7Weights[i] * (fv[2 * i + 1] + fv[13 - 2 * i]);
  value = kronrod * half;
  error = std::fabs((kronrod - gauss) * half);
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration: repeatedly bisects the segment
// with the largest error estimate until sum(err) <= max(abs_tol, rel_tol*|I|).
// The single-panel case is allocation-free; subdivision spills to a small
// inline buffer and only then to the heap.
template <typename F>
QuadratureResult integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-8,
                                    double abs_tol = 1e-12, int max_segments = 400) {
  QuadratureResult result;
  if (a == b) return result;

  double v, e;
  detail::gauss_kronrod_15(f, a, b, v, e);
  result.evaluations = 15;
  if (e <= std::max(abs_tol, rel_tol * std::fabs(v))) {
    result.value = v;
    result.error = e;
    return result;
  }

  struct Segment {
    double a, b, value, error;
  };
  Segment inline_buffer[24];
  inline_buffer[0] = {a, b, v, e};
  std::size_t count = 1;
  std::vector<Segment> heap_buffer;
  Segment* segments = inline_buffer;

  for (;;) {
    double total = 0.0, err = 0.0;
    std::size_t worst = 0;
    for (std::size_t i = 0; i < count; ++i) {
      total += segments[i].value;
      err += segments[i].error;
      if (segments[i].error > segments[worst].error) worst = i;
    }
    const double tol = std::max(abs_tol, rel_tol * std::fabs(total));
    if (err <= tol) {
      result.value = total;
      result.error = err;
      return result;
    }
    if (static_cast<int>(count) >= max_segments) {
      result.value = total;
      result.error = err;
      result.converged = false;
      return result;
    }
    if (count == 24 && heap_buffer.empty()) {
      heap_buffer.assign(segments, segments + count);
      heap_buffer.reserve(static_cast<std::size_t>(max_segments) + 1);
      segments = heap_buffer.data();
    }
    Segment s = segments[worst];
    const double mid = 0.5 * (s.a + s.b);
    Segment left{s.a, mid, 0, 0}, right{mid, s.b, 0, 0};
    detail::gauss_kronrod_15(f, left.a, left.b, left.value, left.error);
    detail::gauss_kronrod_15(f, right.a, right.b, right.value, right.error);
    result.evaluations += 30;
    segments[worst] = left;
    if (heap_buffer.empty()) {
      segments[count++] = right;
    } else {
      heap_buffer.push_back(right);
      segments = heap_buffer.data();
      count = heap_buffer.size();
    }
  }
}

// As integrate_adaptive, but throws numerical_error on non-convergence,
// reporting the tolerance actually achieved.
template <typename F>
double integrate_or_throw(F&& f, double a, double b, double rel_tol = 1e-8,
                          double abs_tol = 1e-12, int max_segments = 400) {
  const QuadratureResult r = integrate_adaptive(f, a, b, rel_tol, abs_tol, max_segments);
  if (!r.converged) {
    throw numerical_error("quadrature did not converge on [" + std::to_string(a) + ", " +
                          std::to_string(b) + "]; achieved absolute error " +
                          std::to_string(r.error));
  }
  return r.value;
}

}  // namespace jmdiag
