#include "svgen/contour.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_map>

namespace svgen {

double arc_length(std::span<const Point> points) {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += distance(points[i - 1], points[i]);
  return total;
}

namespace {

enum Edge : int { kTop = 0, kRight = 1, kBottom = 2, kLeft = 3 };

// Corner bits: top-left 1, top-right 2, bottom-right 4, bottom-left 8.
// Saddles (5, 10) keep diagonal foreground pixels separate.
constexpr std::array<std::array<int, 4>, 16> kCases = {{
    {-1, -1, -1, -1},
    {kLeft, kTop, -1, -1},
    {kTop, kRight, -1, -1},
    {kLeft, kRight, -1, -1},
    {kRight, kBottom, -1, -1},
    {kLeft, kTop, kRight, kBottom},
    {kTop, kBottom, -1, -1},
    {kLeft, kBottom, -1, -1},
    {kBottom, kLeft, -1, -1},
    {kTop, kBottom, -1, -1},
    {kTop, kRight, kBottom, kLeft},
    {kRight, kBottom, -1, -1},
    {kLeft, kRight, -1, -1},
    {kTop, kRight, -1, -1},
    {kLeft, kTop, -1, -1},
    {-1, -1, -1, -1},
}};

bool point_in_polygon(Point p, const std::vector<Point>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point a = poly[i];
    const Point b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xi = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xi) inside = !inside;
    }
  }
  return inside;
}

}  // namespace

std::vector<Polyline> extract_contours(const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 2 || image.dim() == 3, "extract_contours: expected [H, W] or [C, H, W]");
  auto gray = (image.dim() == 3 ? image.mean(0) : image).to(torch::kDouble).contiguous();
  const int64_t h = gray.size(0);
  const int64_t w = gray.size(1);
  const double scale = static_cast<double>(std::max(h, w));
  auto acc = gray.accessor<double, 2>();

  // Padded grid: one background pixel on every side closes all contours.
  const int64_t ph = h + 2;
  const int64_t pw = w + 2;
  auto fg = [&](int64_t r, int64_t c) {
    if (r < 1 || c < 1 || r > h || c > w) return false;
    return acc[r - 1][c - 1] < 0.5;
  };

  // Edge ids: horizontal edge (r,c)-(r,c+1) -> 2*(r*pw+c); vertical (r,c)-(r+1,c) -> 2*(r*pw+c)+1.
  auto edge_id = [&](int64_t r, int64_t c, int e) -> int64_t {
    switch (e) {
      case kTop: return 2 * (r * pw + c);
      case kBottom: return 2 * ((r + 1) * pw + c);
      case kLeft: return 2 * (r * pw + c) + 1;
      default: return 2 * (r * pw + c + 1) + 1;
    }
  };
  auto edge_point = [&](int64_t id) {
    const int64_t cell = id / 2;
    const int64_t r = cell / pw;
    const int64_t c = cell % pw;
    double x = static_cast<double>(c);
    double y = static_cast<double>(r);
    if (id % 2 == 0) {
      x += 0.5;
    } else {
      y += 0.5;
    }
    // Padded index -> original pixel index -> normalized pixel center.
    return Point{(x - 1.0 + 0.5) / scale, (y - 1.0 + 0.5) / scale};
  };

  std::vector<std::array<int64_t, 2>> segments;
  for (int64_t r = 0; r + 1 < ph; ++r) {
    for (int64_t c = 0; c + 1 < pw; ++c) {
      const int idx = (fg(r, c) ? 1 : 0) | (fg(r, c + 1) ? 2 : 0) | (fg(r + 1, c + 1) ? 4 : 0) | (fg(r + 1, c) ? 8 : 0);
      const auto& cs = kCases[idx];
      for (int k = 0; k < 4 && cs[k] >= 0; k += 2) {
        segments.push_back({edge_id(r, c, cs[k]), edge_id(r, c, cs[k + 1])});
      }
    }
  }

  std::unordered_map<int64_t, std::vector<std::size_t>> by_edge;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    by_edge[segments[i][0]].push_back(i);
    by_edge[segments[i][1]].push_back(i);
  }

  std::vector<Polyline> contours;
  std::vector<bool> used(segments.size(), false);
  for (std::size_t s0 = 0; s0 < segments.size(); ++s0) {
    if (used[s0]) continue;
    used[s0] = true;
    Polyline line;
    line.closed = true;
    const int64_t first = segments[s0][0];
    int64_t cur = segments[s0][1];
    line.points.push_back(edge_point(first));
    while (cur != first) {
      line.points.push_back(edge_point(cur));
      std::size_t next = segments.size();
      for (std::size_t cand : by_edge[cur]) {
        if (!used[cand]) {
          next = cand;
          break;
        }
      }
      if (next == segments.size()) break;
      used[next] = true;
      cur = segments[next][0] == cur ? segments[next][1] : segments[next][0];
    }
    line.points.push_back(line.points.front());
    contours.push_back(std::move(line));
  }

  // Outer contours first: order by nesting depth, keeping scan order otherwise.
  std::vector<int> depth(contours.size(), 0);
  for (std::size_t i = 0; i < contours.size(); ++i) {
    for (std::size_t j = 0; j < contours.size(); ++j) {
      if (i != j && point_in_polygon(contours[i].points.front(), contours[j].points)) ++depth[i];
    }
  }
  std::vector<std::size_t> order(contours.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });
  std::vector<Polyline> sorted;
  sorted.reserve(contours.size());
  for (std::size_t i : order) sorted.push_back(std::move(contours[i]));
  return sorted;
}

std::vector<Polyline> split_strokes(const Polyline& line, double max_length) {
  constexpr double kEps = 1e-12;
  if (!(max_length > 0.0)) throw std::invalid_argument("split_strokes: max_length must be positive");
  if (line.points.size() < 2) return {line};

  std::vector<Polyline> pieces;
  Polyline cur;
  cur.points.push_back(line.points.front());
  double acc = 0.0;
  for (std::size_t i = 1; i < line.points.size(); ++i) {
    const Point target = line.points[i];
    Point prev = cur.points.back();
    double len = distance(prev, target);
    if (acc + len <= max_length + kEps) {
      cur.points.push_back(target);
      acc += len;
      continue;
    }
    if (acc > 0.0) {
      pieces.push_back(std::move(cur));
      cur = Polyline{};
      cur.points.push_back(prev);
      acc = 0.0;
    }
    while (len > max_length + kEps) {
      const Point q = prev + (max_length / len) * (target - prev);
      cur.points.push_back(q);
      pieces.push_back(std::move(cur));
      cur = Polyline{};
      cur.points.push_back(q);
      prev = q;
      len = distance(prev, target);
    }
    cur.points.push_back(target);
    acc = len;
  }
  if (cur.points.size() >= 2) pieces.push_back(std::move(cur));
  return pieces;
}

}  // namespace svgen
