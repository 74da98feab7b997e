#include <cmath>
#include <string>

#include "acervo/error.hpp"
#include "acervo/projection.hpp"

namespace acervo {

namespace {

struct Normal {
  double jtj[2][2] = {{0, 0}, {0, 0}};
  double jtr[2] = {0, 0};
  double sse = 0.0;
};

Normal normal_equations(const double* xs, const double* ys, double a, double b) {
  Normal n;
  for (std::size_t i = 0; i < kCurveSamples; ++i) {
    const double x = xs[i];
    const double p = std::pow(x, 2.0 * b);
    const double denom = 1.0 + a * p;
    const double f = 1.0 / denom;
    const double r = f - ys[i];
    const double da = -p / (denom * denom);
    const double db = -a * p * 2.0 * std::log(x) / (denom * denom);
    n.jtj[0][0] += da * da;
    n.jtj[0][1] += da * db;
    n.jtj[1][1] += db * db;
    n.jtr[0] += da * r;
    n.jtr[1] += db * r;
    n.sse += r * r;
  }
  n.jtj[1][0] = n.jtj[0][1];
  return n;
}

double sse_at(const double* xs, const double* ys, double a, double b) {
  double sse = 0.0;
  for (std::size_t i = 0; i < kCurveSamples; ++i) {
    const double r = 1.0 / (1.0 + a * std::pow(xs[i], 2.0 * b)) - ys[i];
    sse += r * r;
  }
  return sse;
}

}  // namespace

CurveFit fit_curve(double min_dist, double spread) {
  if (!(spread > 0.0) || !(min_dist >= 0.0) || !(min_dist < spread))
    throw Error(ErrorCode::invalid_argument, "fit_curve: need 0 <= min_dist < spread");

  double xs[kCurveSamples], ys[kCurveSamples];
  for (std::size_t i = 0; i < kCurveSamples; ++i) {
    xs[i] = 3.0 * spread * static_cast<double>(i + 1) / static_cast<double>(kCurveSamples);
    ys[i] = xs[i] <= min_dist ? 1.0 : std::exp(-(xs[i] - min_dist) / spread);
  }

  // Levenberg-Marquardt with a fixed schedule: 1000 iterations max, damping
  // x10 on rejection and /10 on acceptance.
  constexpr std::size_t kMaxIterations = 1000;
  double a = 1.0, b = 1.0, lambda = 1e-3;
  CurveFit fit;
  Normal n = normal_equations(xs, ys, a, b);
  for (std::size_t iter = 0; iter < kMaxIterations; ++iter) {
    fit.iterations = iter + 1;
    const double m00 = n.jtj[0][0] * (1.0 + lambda), m11 = n.jtj[1][1] * (1.0 + lambda);
    const double m01 = n.jtj[0][1];
    const double det = m00 * m11 - m01 * m01;
    if (!(std::abs(det) > 0.0)) break;
    const double step_a = -(m11 * n.jtr[0] - m01 * n.jtr[1]) / det;
    const double step_b = -(m00 * n.jtr[1] - m01 * n.jtr[0]) / det;
    const double na = a + step_a, nb = b + step_b;
    const double candidate = (na > 0.0 && nb > 0.0) ? sse_at(xs, ys, na, nb) : INFINITY;
    if (candidate < n.sse) {
      const double improvement = n.sse - candidate;
      a = na;
      b = nb;
      lambda = std::max(lambda / 10.0, 1e-12);
      n = normal_equations(xs, ys, a, b);
      if (improvement <= 1e-15 * (1.0 + n.sse) &&
          std::abs(step_a) <= 1e-12 * (1.0 + a) && std::abs(step_b) <= 1e-12 * (1.0 + b)) {
        fit.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) {
        fit.converged = true;  // no descent direction left at this precision
        break;
      }
    }
  }
  fit.a = a;
  fit.b = b;
  fit.residual = n.sse;
  return fit;
}

}  // namespace acervo
