#include "svgen/raster.hpp"

#include <ATen/Dispatch.h>
#include <ATen/Parallel.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace svgen {

void RenderConfig::validate() const {
  if (resolution < 8) throw std::invalid_argument("RenderConfig: resolution must be >= 8");
  if (!(antialias_band > 0.0)) throw std::invalid_argument("RenderConfig: antialias_band must be > 0");
  if (samples_per_segment < 8) throw std::invalid_argument("RenderConfig: samples_per_segment must be >= 8");
}

namespace {

// Smoothing length of the stroke field in pixels, and exponent of the
// power-mean minimum for fills, which keeps the fill field zero on the outline.
constexpr double kStrokeSmooth = 1.0;
constexpr double kFillPower = 2.0;
// Pixels; rounding of the stroke profile on the centerline.
constexpr double kStrokeCenter = 1.0;
// Pixels; below this distance the fill profile is quadratic.
constexpr double kFillCorner = 2.0;

template <typename T>
struct EdgeTable {
  std::vector<T> ax, ay, dx, dy, inv, len, tx, ty;

  EdgeTable(const T* p, int64_t edges)
      : ax(edges), ay(edges), dx(edges), dy(edges), inv(edges), len(edges), tx(edges), ty(edges) {
    for (int64_t e = 0; e < edges; ++e) {
      ax[e] = p[2 * e];
      ay[e] = p[2 * e + 1];
      dx[e] = p[2 * e + 2] - ax[e];
      dy[e] = p[2 * e + 3] - ay[e];
      const T len2 = dx[e] * dx[e] + dy[e] * dy[e];
      inv[e] = len2 > T(0) ? T(1) / len2 : T(0);
      len[e] = std::sqrt(len2);
      tx[e] = len[e] > T(0) ? dx[e] / len[e] : T(0);
      ty[e] = len[e] > T(0) ? dy[e] / len[e] : T(0);
    }
  }

  // Squared distance from (x, y) to edge e; `t` receives the clamped projection.
  T dist2(int64_t e, T x, T y, T& t) const {
    const T rx = x - ax[e];
    const T ry = y - ay[e];
    t = (rx * dx[e] + ry * dy[e]) * inv[e];
    t = t < T(0) ? T(0) : (t > T(1) ? T(1) : t);
    const T ex = rx - t * dx[e];
    const T ey = ry - t * dy[e];
    return ex * ex + ey * ey;
  }

  bool crosses(int64_t e, T x, T y) const {
    const T y0 = ay[e];
    const T y1 = ay[e] + dy[e];
    if ((y0 > y) == (y1 > y)) return false;
    return x < ax[e] + (y - y0) * dx[e] / dy[e];
  }
};

// Power-mean minimum of the squared edge distances d2 with weights
// w = dField/dd2_e.
template <typename T>
T soft_min(const std::vector<T>& d2, T power, std::vector<T>& w) {
  const int64_t edges = static_cast<int64_t>(d2.size());
  T best = std::numeric_limits<T>::infinity();
  int64_t arg = 0;
  for (int64_t e = 0; e < edges; ++e) {
    if (d2[e] < best) {
      best = d2[e];
      arg = e;
    }
  }
  if (best <= T(0)) {
    std::fill(w.begin(), w.end(), T(0));
    w[arg] = T(1);
    return T(0);
  }
  T s = 0;
  for (int64_t e = 0; e < edges; ++e) s += (w[e] = std::pow(best / d2[e], power));
  const T field = best * std::pow(s, -T(1) / power);
  const T ratio = field / best;
  for (int64_t e = 0; e < edges; ++e) w[e] = std::pow(ratio, power + T(1)) * std::pow(w[e], (power + T(1)) / power);
  return field;
}

// exp(z^2) erfc(z) for z beyond kErfcxSwitch.
constexpr double kErfcxSwitch = 5.0;

template <typename T>
T erfcx_tail(T z) {
  const T iz2 = T(1) / (z * z);
  return (T(1) - iz2 * (T(0.5) - iz2 * (T(0.75) - iz2 * (T(1.875) - iz2 * T(6.5625))))) / (z * T(1.7724538509055159));
}

// Gaussian of the distance to a straight edge, integrated along the edge and
// scaled by exp(m / tau); with grad, its derivatives w.r.t. both endpoints.
template <typename T>
struct EdgeKernel {
  T k = 0;
  T ga[2] = {0, 0};
  T gb[2] = {0, 0};
};

template <typename T>
EdgeKernel<T> edge_kernel(const EdgeTable<T>& tab, int64_t e, T x, T y, T m, T tau, T rt, bool grad) {
  EdgeKernel<T> out;
  const T len = tab.len[e];
  if (len < T(1e-12)) return out;
  const T tx = tab.tx[e];
  const T ty = tab.ty[e];
  const T rax = tab.ax[e] - x;
  const T ray = tab.ay[e] - y;
  const T sa = rax * tx + ray * ty;
  const T sb = sa + len;
  const T nx = rax - sa * tx;
  const T ny = ray - sa * ty;
  const T p2 = nx * nx + ny * ny;
  const T a2 = p2 + sa * sa;
  const T b2 = p2 + sb * sb;
  const T za = sa / rt;
  const T zb = sb / rt;
  const T sw = T(kErfcxSwitch);
  if (za >= sw) {
    out.k = T(0.5) * (std::exp(-(a2 - m) / tau) * erfcx_tail(za) - std::exp(-(b2 - m) / tau) * erfcx_tail(zb));
  } else if (zb <= -sw) {
    out.k = T(0.5) * (std::exp(-(b2 - m) / tau) * erfcx_tail(-zb) - std::exp(-(a2 - m) / tau) * erfcx_tail(-za));
  } else {
    // (m - p2) / tau <= kErfcxSwitch^2 here, so the prefactor stays finite
    const T e0 = std::exp(-(p2 - m) / tau);
    if (za >= T(0)) {
      out.k = e0 * T(0.5) * (std::erfc(za) - std::erfc(zb));
    } else if (zb <= T(0)) {
      out.k = e0 * T(0.5) * (std::erfc(-zb) - std::erfc(-za));
    } else {
      out.k = e0 * T(0.5) * (std::erf(zb) - std::erf(za));
    }
  }
  if (!grad) return out;
  const T norm = T(1) / std::sqrt(T(M_PI) * tau);
  const T ea = std::exp(-(a2 - m) / tau) * norm;
  const T eb = std::exp(-(b2 - m) / tau) * norm;
  const T kp = -out.k / tau;
  const T nlx = nx / len;
  const T nly = ny / len;
  out.ga[0] = kp * T(2) * nx * sb / len - eb * nlx - ea * (tx - nlx);
  out.ga[1] = kp * T(2) * ny * sb / len - eb * nly - ea * (ty - nly);
  out.gb[0] = -kp * T(2) * nx * sa / len + eb * (tx + nlx) - ea * nlx;
  out.gb[1] = -kp * T(2) * ny * sa / len + eb * (ty + nly) - ea * nly;
  return out;
}

// Edges whose nearest point is this much farther (in units of tau) than the
// overall nearest one are dropped; their share is below float precision.
constexpr double kKernelCutoff = 18.0;

// Pixels per side of the tiles used to cull far edges.
constexpr int64_t kTile = 8;

// Edges that can matter for some pixel center in [x0, x1] x [y0, y1]: all
// others are farther than the nearest edge plus the kernel cutoff everywhere
// in the tile. Distance to a segment is convex, so its maximum over the tile
// is attained at a corner.
template <typename T>
void tile_edges(const EdgeTable<T>& tab, T x0, T y0, T x1, T y1, T cut, std::vector<T>& lo,
                std::vector<int64_t>& active) {
  const int64_t edges = static_cast<int64_t>(tab.ax.size());
  T upper = std::numeric_limits<T>::infinity();
  for (int64_t e = 0; e < edges; ++e) {
    const T bx0 = std::min(tab.ax[e], tab.ax[e] + tab.dx[e]);
    const T bx1 = std::max(tab.ax[e], tab.ax[e] + tab.dx[e]);
    const T by0 = std::min(tab.ay[e], tab.ay[e] + tab.dy[e]);
    const T by1 = std::max(tab.ay[e], tab.ay[e] + tab.dy[e]);
    const T gx = std::max({T(0), bx0 - x1, x0 - bx1});
    const T gy = std::max({T(0), by0 - y1, y0 - by1});
    lo[e] = gx * gx + gy * gy;
    T t;
    const T far = std::max({tab.dist2(e, x0, y0, t), tab.dist2(e, x1, y0, t), tab.dist2(e, x0, y1, t),
                            tab.dist2(e, x1, y1, t)});
    upper = std::min(upper, far);
  }
  active.clear();
  for (int64_t e = 0; e < edges; ++e) {
    if (lo[e] <= upper + cut) active.push_back(e);
  }
}

// Calls fn(px, py, x, y, active) for every pixel, tile by tile.
template <typename T, typename Fn>
void for_each_pixel(const EdgeTable<T>& tab, int64_t res, T cut, Fn&& fn) {
  const int64_t edges = static_cast<int64_t>(tab.ax.size());
  std::vector<T> lo(edges);
  std::vector<int64_t> active;
  active.reserve(edges);
  const auto center = [res](int64_t i) { return (T(i) + T(0.5)) / T(res); };
  for (int64_t ty = 0; ty < res; ty += kTile) {
    const int64_t ty1 = std::min(ty + kTile, res);
    for (int64_t tx = 0; tx < res; tx += kTile) {
      const int64_t tx1 = std::min(tx + kTile, res);
      tile_edges(tab, center(tx), center(ty), center(tx1 - 1), center(ty1 - 1), cut, lo, active);
      for (int64_t py = ty; py < ty1; ++py) {
        for (int64_t px = tx; px < tx1; ++px) fn(px, py, center(px), center(py), active);
      }
    }
  }
}

// -tau log of the summed edge kernels: the squared distance to a straight line,
// smoothed along the polyline at the scale sqrt(tau).
template <typename T>
void stroke_forward(const T* pts, int64_t batch, int64_t n, int64_t res, T tau, T far2, T* out) {
  const int64_t edges = n - 1;
  const int64_t pixels = res * res;
  const T cut = T(kKernelCutoff) * tau;
  const T rt = std::sqrt(tau);
  at::parallel_for(0, batch, 1, [&](int64_t b0, int64_t b1) {
    std::vector<T> d2(edges);
    for (int64_t b = b0; b < b1; ++b) {
      const T* p = pts + b * n * 2;
      const EdgeTable<T> tab(p, edges);
      for_each_pixel(tab, res, cut, [&](int64_t px, int64_t py, T x, T y, const std::vector<int64_t>& active) {
        T m = std::numeric_limits<T>::infinity();
        for (int64_t e : active) {
          T t;
          d2[e] = tab.dist2(e, x, y, t);
          m = std::min(m, d2[e]);
        }
        if (m > far2) {
          out[b * pixels + py * res + px] = m;
          return;
        }
        T s = 0;
        for (int64_t e : active) {
          if (d2[e] - m > cut) continue;
          s += edge_kernel(tab, e, x, y, m, tau, rt, false).k;
        }
        out[b * pixels + py * res + px] = s > T(0) ? m - tau * std::log(s) : m;
      });
    }
  });
}

template <typename T>
void stroke_backward(const T* pts, const T* grad_out, int64_t batch, int64_t n, int64_t res, T tau, T far2,
                     T* grad_pts) {
  const int64_t edges = n - 1;
  const int64_t pixels = res * res;
  const T cut = T(kKernelCutoff) * tau;
  const T rt = std::sqrt(tau);
  at::parallel_for(0, batch, 1, [&](int64_t b0, int64_t b1) {
    std::vector<T> d2(edges);
    std::vector<EdgeKernel<T>> ker(edges);
    std::vector<double> g(n * 2);
    for (int64_t b = b0; b < b1; ++b) {
      const T* p = pts + b * n * 2;
      const EdgeTable<T> tab(p, edges);
      std::fill(g.begin(), g.end(), 0.0);
      for_each_pixel(tab, res, cut, [&](int64_t px, int64_t py, T x, T y, const std::vector<int64_t>& active) {
        const T go = grad_out[b * pixels + py * res + px];
        if (go == T(0)) return;
        T m = std::numeric_limits<T>::infinity();
        int64_t arg = 0;
        T targ = 0;
        for (int64_t e : active) {
          T t;
          d2[e] = tab.dist2(e, x, y, t);
          if (d2[e] < m) {
            m = d2[e];
            arg = e;
            targ = t;
          }
        }
        if (m > far2) {
          const double gx = 2.0 * go * (p[2 * arg] + targ * tab.dx[arg] - x);
          const double gy = 2.0 * go * (p[2 * arg + 1] + targ * tab.dy[arg] - y);
          g[2 * arg] += (1.0 - targ) * gx;
          g[2 * arg + 1] += (1.0 - targ) * gy;
          g[2 * arg + 2] += targ * gx;
          g[2 * arg + 3] += targ * gy;
          return;
        }
        T s = 0;
        for (int64_t e : active) {
          ker[e] = d2[e] - m > cut ? EdgeKernel<T>{}
                                   : edge_kernel(tab, e, x, y, m, tau, rt, true);
          s += ker[e].k;
        }
        if (!(s > T(0))) return;
        const double sc = -double(go) * double(tau) / double(s);
        for (int64_t e : active) {
          g[2 * e] += sc * ker[e].ga[0];
          g[2 * e + 1] += sc * ker[e].ga[1];
          g[2 * e + 2] += sc * ker[e].gb[0];
          g[2 * e + 3] += sc * ker[e].gb[1];
        }
      });
      for (int64_t i = 0; i < n * 2; ++i) grad_pts[b * n * 2 + i] = static_cast<T>(g[i]);
    }
  });
}

template <typename T>
void fill_forward(const T* pts, int64_t batch, int64_t n, int64_t res, T power, T* out) {
  const int64_t edges = n - 1;
  const int64_t pixels = res * res;
  at::parallel_for(0, batch, 1, [&](int64_t b0, int64_t b1) {
    std::vector<T> d2(edges), w(edges);
    for (int64_t b = b0; b < b1; ++b) {
      const EdgeTable<T> tab(pts + b * n * 2, edges);
      for (int64_t py = 0; py < res; ++py) {
        const T y = (T(py) + T(0.5)) / T(res);
        for (int64_t px = 0; px < res; ++px) {
          const T x = (T(px) + T(0.5)) / T(res);
          bool inside = false;
          for (int64_t e = 0; e < edges; ++e) {
            T t;
            d2[e] = tab.dist2(e, x, y, t);
            if (tab.crosses(e, x, y)) inside = !inside;
          }
          const T f = soft_min(d2, power, w);
          out[b * pixels + py * res + px] = inside ? f : -f;
        }
      }
    }
  });
}

template <typename T>
void fill_backward(const T* pts, const T* grad_out, int64_t batch, int64_t n, int64_t res, T power, T* grad_pts) {
  const int64_t edges = n - 1;
  const int64_t pixels = res * res;
  at::parallel_for(0, batch, 1, [&](int64_t b0, int64_t b1) {
    std::vector<T> d2(edges), tp(edges), w(edges);
    for (int64_t b = b0; b < b1; ++b) {
      const T* p = pts + b * n * 2;
      T* g = grad_pts + b * n * 2;
      const EdgeTable<T> tab(p, edges);
      for (int64_t py = 0; py < res; ++py) {
        const T y = (T(py) + T(0.5)) / T(res);
        for (int64_t px = 0; px < res; ++px) {
          const T go = grad_out[b * pixels + py * res + px];
          if (go == T(0)) continue;
          const T x = (T(px) + T(0.5)) / T(res);
          bool inside = false;
          for (int64_t e = 0; e < edges; ++e) {
            d2[e] = tab.dist2(e, x, y, tp[e]);
            if (tab.crosses(e, x, y)) inside = !inside;
          }
          soft_min(d2, power, w);
          const T sign = inside ? T(1) : T(-1);
          for (int64_t e = 0; e < edges; ++e) {
            if (w[e] == T(0)) continue;
            // d(d2_e)/dq = 2 (q - pixel) at the nearest point q; the projection
            // parameter contributes nothing (envelope theorem).
            const T t = tp[e];
            const T qx = (T(1) - t) * p[2 * e] + t * p[2 * e + 2];
            const T qy = (T(1) - t) * p[2 * e + 1] + t * p[2 * e + 3];
            const T sc = T(2) * sign * go * w[e];
            const T gx = sc * (qx - x);
            const T gy = sc * (qy - y);
            g[2 * e] += (T(1) - t) * gx;
            g[2 * e + 1] += (T(1) - t) * gy;
            g[2 * e + 2] += t * gx;
            g[2 * e + 3] += t * gy;
          }
        }
      }
    }
  });
}

double stroke_tau(int64_t res) { return kStrokeSmooth * kStrokeSmooth / (static_cast<double>(res) * res); }

class PolylineField : public torch::autograd::Function<PolylineField> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, torch::Tensor points, int64_t resolution,
                               bool fill, double far) {
    TORCH_CHECK(points.dim() == 3 && points.size(2) == 2, "polyline_field: points must be [B, N, 2]");
    TORCH_CHECK(points.size(1) >= 2, "polyline_field: need at least two vertices");
    auto pts = points.contiguous();
    const int64_t batch = pts.size(0);
    const int64_t n = pts.size(1);
    auto field = torch::empty({batch, resolution, resolution}, pts.options());
    const double tau = stroke_tau(resolution);
    AT_DISPATCH_FLOATING_TYPES(pts.scalar_type(), "polyline_field_forward", [&] {
      if (fill) {
        fill_forward<scalar_t>(pts.data_ptr<scalar_t>(), batch, n, resolution, scalar_t(kFillPower),
                               field.data_ptr<scalar_t>());
      } else {
        stroke_forward<scalar_t>(pts.data_ptr<scalar_t>(), batch, n, resolution, scalar_t(tau), scalar_t(far * far),
                                 field.data_ptr<scalar_t>());
      }
    });
    ctx->save_for_backward({pts});
    ctx->saved_data["resolution"] = resolution;
    ctx->saved_data["fill"] = fill;
    ctx->saved_data["far"] = far;
    return field;
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const auto pts = ctx->get_saved_variables()[0];
    const int64_t res = ctx->saved_data["resolution"].toInt();
    const bool fill = ctx->saved_data["fill"].toBool();
    const double far = ctx->saved_data["far"].toDouble();
    auto grad_out = grads[0].contiguous();
    auto grad_pts = torch::zeros_like(pts);
    AT_DISPATCH_FLOATING_TYPES(pts.scalar_type(), "polyline_field_backward", [&] {
      if (fill) {
        fill_backward<scalar_t>(pts.data_ptr<scalar_t>(), grad_out.data_ptr<scalar_t>(), pts.size(0), pts.size(1), res,
                                scalar_t(kFillPower), grad_pts.data_ptr<scalar_t>());
      } else {
        stroke_backward<scalar_t>(pts.data_ptr<scalar_t>(), grad_out.data_ptr<scalar_t>(), pts.size(0), pts.size(1),
                                  res, scalar_t(stroke_tau(res)), scalar_t(far * far), grad_pts.data_ptr<scalar_t>());
      }
    });
    return {grad_pts, torch::Tensor(), torch::Tensor(), torch::Tensor()};
  }
};

// White background, foreground color blended by coverage: [B,H,W] x [B,3].
torch::Tensor composite(const torch::Tensor& coverage, const torch::Tensor& color) {
  auto cov = coverage.unsqueeze(1);                    // [B,1,H,W]
  auto ink = (1.0 - color).unsqueeze(-1).unsqueeze(-1);  // [B,3,1,1]
  return 1.0 - cov * ink;
}

torch::Tensor sampled_polyline(const torch::Tensor& control, int segments, const RenderConfig& cfg) {
  auto m = bezier_sampling_matrix(segments, cfg.samples_per_segment, control.scalar_type());
  return torch::matmul(m, control);  // [B, S, 2]
}

torch::Tensor single_color(const std::optional<Rgb>& c, torch::ScalarType dtype) {
  const Rgb v = c.value_or(Rgb{0, 0, 0});
  return torch::tensor({v.r, v.g, v.b}, torch::TensorOptions().dtype(dtype)).unsqueeze(0);
}

}  // namespace

torch::Tensor polyline_field(const torch::Tensor& points, int resolution, bool fill, double far) {
  return PolylineField::apply(points, static_cast<int64_t>(resolution), fill, far);
}

torch::Tensor bezier_sampling_matrix(int segments, int samples_per_segment, torch::ScalarType dtype) {
  const int rows = segments * samples_per_segment + 1;
  const int cols = 3 * segments + 1;
  auto m = torch::zeros({rows, cols}, torch::kDouble);
  auto acc = m.accessor<double, 2>();
  acc[0][0] = 1.0;
  for (int s = 0; s < segments; ++s) {
    for (int k = 1; k <= samples_per_segment; ++k) {
      const double t = static_cast<double>(k) / samples_per_segment;
      const double u = 1.0 - t;
      const int row = s * samples_per_segment + k;
      const int c0 = 3 * s;
      acc[row][c0] = u * u * u;
      acc[row][c0 + 1] = 3 * u * u * t;
      acc[row][c0 + 2] = 3 * u * t * t;
      acc[row][c0 + 3] = t * t * t;
    }
  }
  return m.to(dtype);
}

torch::Tensor render_strokes(const torch::Tensor& control, const torch::Tensor& width, const torch::Tensor& color,
                             const RenderConfig& cfg) {
  cfg.validate();
  TORCH_CHECK(control.dim() == 3 && control.size(2) == 2 && (control.size(1) - 1) % 3 == 0,
              "render_strokes: control must be [B, 3*nu+1, 2]");
  const int segments = static_cast<int>((control.size(1) - 1) / 3);
  return render_polylines(sampled_polyline(control, segments, cfg), width, color, cfg);
}

torch::Tensor render_polylines(const torch::Tensor& points, const torch::Tensor& width, const torch::Tensor& color,
                               const RenderConfig& cfg) {
  cfg.validate();
  // (r^2 - q) / (r + rho(q)) is r - d away from the centerline and smooth on
  // it; rho is a positive square root that also accepts slightly negative q.
  // Beyond `far` the coverage rounds to zero in the working precision.
  const double tail = points.scalar_type() == torch::kDouble ? 40.0 : 20.0;
  const double far = 0.5 * width.max().item<double>() + tail * cfg.antialias_band / cfg.resolution;
  auto q = polyline_field(points, cfg.resolution, false, far);
  const double band = cfg.antialias_band / cfg.resolution;
  const double delta = kStrokeCenter / cfg.resolution;
  auto half = (0.5 * width).view({-1, 1, 1});
  auto rho = torch::sqrt(0.5 * (q + torch::sqrt(q * q + std::pow(delta, 4))));
  auto inner = (half * half - q) / (half + rho);
  return composite(torch::sigmoid(inner / band), color);
}

torch::Tensor render_shapes(const torch::Tensor& control, const torch::Tensor& color, const RenderConfig& cfg) {
  cfg.validate();
  TORCH_CHECK(control.dim() == 3 && control.size(2) == 2 && control.size(1) % 3 == 0 && control.size(1) >= 3,
              "render_shapes: control must be [B, 3*nu, 2]");
  const int segments = static_cast<int>(control.size(1) / 3);
  auto closed = torch::cat({control, control.narrow(1, 0, 1)}, 1);
  auto sd2 = polyline_field(sampled_polyline(closed, segments, cfg), cfg.resolution, true);
  const double band = cfg.antialias_band / cfg.resolution;
  // Signed distance away from the outline, s*d^2/eps near it (smooth at corners).
  const double eps = kFillCorner / cfg.resolution;
  auto signed_dist = sd2 / torch::sqrt(sd2.abs() + eps * eps);
  return composite(torch::sigmoid(signed_dist / band), color);
}

torch::Tensor control_tensor(const StrokePath& path) {
  const auto pts = path.control_points();
  auto t = torch::empty({static_cast<int64_t>(pts.size()), 2}, torch::kDouble);
  auto acc = t.accessor<double, 2>();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    acc[i][0] = pts[i].x;
    acc[i][1] = pts[i].y;
  }
  return t;
}

RasterPatch render_stroke(const StrokePath& path, const RenderConfig& cfg) {
  if (path.closed) throw std::invalid_argument("render_stroke: path must be open");
  if (path.segments.empty()) throw std::invalid_argument("render_stroke: path has no segments");
  if (!path.width || !(*path.width > 0.0)) throw std::invalid_argument("render_stroke: width must be positive");
  auto ctrl = control_tensor(path).to(torch::kFloat).unsqueeze(0);
  auto width = torch::full({1}, *path.width, torch::kFloat);
  return render_strokes(ctrl, width, single_color(path.stroke_color, torch::kFloat), cfg).squeeze(0);
}

RasterPatch render_filled(const StrokePath& path, const RenderConfig& cfg) {
  if (!path.closed) throw std::invalid_argument("render_filled: path must be closed");
  if (path.segments.empty()) throw std::invalid_argument("render_filled: path has no segments");
  StrokePath shape = path;
  if (shape.end_point() != shape.start) shape.segments.push_back(line_segment(shape.end_point(), shape.start));
  // Drop the final end point: render_shapes closes onto the start.
  auto ctrl = control_tensor(shape).to(torch::kFloat);
  ctrl = ctrl.narrow(0, 0, ctrl.size(0) - 1).unsqueeze(0);
  return render_shapes(ctrl, single_color(path.fill_color, torch::kFloat), cfg).squeeze(0);
}

RasterPatch render_document(const VectorDocument& doc, const RenderConfig& cfg, double default_width) {
  cfg.validate();
  auto canvas = torch::ones({3, cfg.resolution, cfg.resolution}, torch::kFloat);
  for (const auto& stroke : doc.strokes) {
    StrokePath global = to_canvas(stroke.path, stroke.anchor, doc.grid);
    RasterPatch img;
    if (global.closed) {
      if (!global.fill_color) global.fill_color = Rgb{0, 0, 0};
      img = render_filled(global, cfg);
    } else {
      if (!global.width) global.width = default_width;
      img = render_stroke(global, cfg);
    }
    canvas = torch::minimum(canvas, img);
  }
  return canvas;
}

}  // namespace svgen
