#pragma once

// Derivative-free least-squares fit of 1 / (1 + a d^(2b)) used as a test
// oracle: grid scan followed by shrinking compass search.

#include <cmath>
#include <limits>

namespace curve_oracle {

inline double sse(double a, double b, double min_dist, double spread) {
  double s = 0.0;
  for (int i = 0; i < 300; ++i) {
    const double d = 3.0 * spread * (i + 1) / 300.0;
    const double target = d <= min_dist ? 1.0 : std::exp(-(d - min_dist) / spread);
    const double model = 1.0 / (1.0 + a * std::pow(d, 2.0 * b));
    s += (model - target) * (model - target);
  }
  return s;
}

struct Fit {
  double a;
  double b;
};

inline Fit fit(double min_dist, double spread) {
  Fit best{1.0, 1.0};
  double best_s = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 200; ++i) {
    for (int j = 1; j <= 100; ++j) {
      const double a = 0.025 * i, b = 0.03 * j;
      const double s = sse(a, b, min_dist, spread);
      if (s < best_s) {
        best_s = s;
        best = {a, b};
      }
    }
  }
  for (double step = 0.02; step > 1e-9; step *= 0.5) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (auto [da, db] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0}, {0.0, -1.0},
                            {1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}, {-1.0, 1.0}}) {
        const Fit c{best.a + da * step, best.b + db * step};
        if (c.a <= 0.0 || c.b <= 0.0) continue;
        const double s = sse(c.a, c.b, min_dist, spread);
        if (s < best_s) {
          best_s = s;
          best = c;
          moved = true;
        }
      }
    }
  }
  return best;
}

}  // namespace curve_oracle
