#pragma once

// Reference computations written independently of the library code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <torch/torch.h>

#include "svgen/geometry.hpp"

namespace oracle {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Direct evaluation of the geometric regularizer on points P_0..P_n:
/// scaled distances r_ij = |P_i - P_j| / |i - j|, per-point mean and variance
/// over the n other points, averaged over all n + 1 points.
inline double geometric_loss(const std::vector<svgen::Point>& p) {
  const int n = static_cast<int>(p.size()) - 1;
  long double total = 0;
  for (int j = 0; j <= n; ++j) {
    long double mean = 0;
    for (int i = 0; i <= n; ++i) {
      if (i == j) continue;
      const long double dx = p[i].x - p[j].x;
      const long double dy = p[i].y - p[j].y;
      mean += std::sqrt(dx * dx + dy * dy) / std::abs(i - j);
    }
    mean /= n;
    long double var = 0;
    for (int i = 0; i <= n; ++i) {
      if (i == j) continue;
      const long double dx = p[i].x - p[j].x;
      const long double dy = p[i].y - p[j].y;
      const long double r = std::sqrt(dx * dx + dy * dy) / std::abs(i - j) - mean;
      var += r * r;
    }
    total += var / n;
  }
  return static_cast<double>(total / (n + 1));
}

/// Every level tuple of the mixed-radix codebook, listed so that tuple k has
/// index k when the first digit varies fastest.
inline std::vector<std::vector<int>> enumerate_codes(const std::vector<int>& levels) {
  std::vector<std::vector<int>> out;
  std::vector<int> digits(levels.size(), 0);
  while (true) {
    out.push_back(digits);
    std::size_t k = 0;
    while (k < digits.size() && ++digits[k] == levels[k]) digits[k++] = 0;
    if (k == digits.size()) break;
  }
  return out;
}

struct GradCheck {
  int checked = 0;
  int failed = 0;
  double worst = 0.0;
};

/// Central finite differences of a scalar function against autodiff, on every
/// coordinate of `x` (double). Coordinates with |FD| <= floor are skipped.
inline GradCheck grad_check(const std::function<torch::Tensor(const torch::Tensor&)>& fn, torch::Tensor x,
                            double h = 1e-3, double tol = 1e-2, double floor = 1e-6) {
  x = x.detach().clone().to(torch::kDouble).requires_grad_(true);
  auto y = fn(x);
  y.backward();
  const auto grad = x.grad().detach().contiguous().view(-1);
  auto base = x.detach().contiguous().view(-1);
  GradCheck r;
  torch::NoGradGuard ng;
  for (int64_t i = 0; i < base.numel(); ++i) {
    auto plus = base.clone();
    auto minus = base.clone();
    plus[i] += h;
    minus[i] -= h;
    const double fp = fn(plus.view(x.sizes())).item<double>();
    const double fm = fn(minus.view(x.sizes())).item<double>();
    const double fd = (fp - fm) / (2 * h);
    if (std::abs(fd) <= floor) continue;
    const double ad = grad[i].item<double>();
    const double rel = std::abs(ad - fd) / std::max(std::abs(ad), std::abs(fd));
    ++r.checked;
    r.worst = std::max(r.worst, rel);
    if (rel >= tol) ++r.failed;
  }
  return r;
}

/// Random stroke control points [1, 3nu+1, 2] inside the central area.
inline torch::Tensor random_stroke(std::mt19937_64& rng, int nu) {
  auto t = torch::empty({1, 3 * nu + 1, 2}, torch::kDouble);
  for (int i = 0; i < 3 * nu + 1; ++i) {
    t[0][i][0] = uniform(rng, 0.2, 0.8);
    t[0][i][1] = uniform(rng, 0.2, 0.8);
  }
  return t;
}

/// Random star-shaped closed outline [1, 3nu, 2] around the patch center.
inline torch::Tensor random_shape(std::mt19937_64& rng, int nu) {
  auto t = torch::empty({1, 3 * nu, 2}, torch::kDouble);
  const double phase = uniform(rng, 0, 2 * M_PI);
  for (int i = 0; i < 3 * nu; ++i) {
    const double a = phase + 2 * M_PI * i / (3 * nu);
    const double r = uniform(rng, 0.18, 0.32);
    t[0][i][0] = 0.5 + r * std::cos(a);
    t[0][i][1] = 0.5 + r * std::sin(a);
  }
  return t;
}

/// Multi-stroke document of open polylines where consecutive strokes are
/// often (not always) close: gaps are drawn in [0, 3 * max_dist] or far.
inline svgen::VectorDocument random_chain(std::mt19937_64& rng, double max_dist) {
  using namespace svgen;
  VectorDocument doc;
  doc.canvas_size = 256;
  const int n = 2 + static_cast<int>(rng() % 5);
  Point prev_end{uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)};
  for (int s = 0; s < n; ++s) {
    const Anchor a{static_cast<int>(rng() % 256), static_cast<int>(rng() % 256)};
    const Point shift = anchor_position(a) - Point{0.5, 0.5};
    Point first;
    if (rng() % 4 == 0) {
      first = {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
    } else {
      const double gap = uniform(rng, 0.0, 3.0 * max_dist);
      const double ang = uniform(rng, 0, 2 * M_PI);
      first = prev_end + Point{gap * std::cos(ang), gap * std::sin(ang)};
    }
    std::vector<Point> canvas{first};
    const int k = 1 + static_cast<int>(rng() % 3);
    for (int i = 0; i < k; ++i) {
      canvas.push_back(canvas.back() + Point{uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)});
    }
    prev_end = canvas.back();
    if (rng() % 3 == 0) std::reverse(canvas.begin(), canvas.end());
    std::vector<Point> local;
    for (const Point p : canvas) local.push_back(p - shift);
    StrokePath path = polyline_path(local);
    path.width = uniform(rng, 0.01, 0.03);
    path.stroke_color = Rgb{uniform(rng, 0, 1), 0, 0};
    doc.strokes.push_back({path, a});
  }
  return doc;
}

/// Largest canvas-space displacement of any control point between two
/// documents with the same stroke layout.
inline double max_displacement(const svgen::VectorDocument& a, const svgen::VectorDocument& b) {
  double worst = 0;
  for (std::size_t s = 0; s < a.strokes.size(); ++s) {
    const auto pa = svgen::to_canvas(a.strokes[s].path, a.strokes[s].anchor, a.grid).control_points();
    const auto pb = svgen::to_canvas(b.strokes[s].path, b.strokes[s].anchor, b.grid).control_points();
    for (std::size_t i = 0; i < pa.size(); ++i) worst = std::max(worst, svgen::distance(pa[i], pb[i]));
  }
  return worst;
}

}  // namespace oracle
