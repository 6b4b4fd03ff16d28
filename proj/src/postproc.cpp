#include "svgen/postproc.hpp"

#include <array>
#include <stdexcept>

namespace svgen {

PostprocMode parse_postproc_mode(std::string_view name) {
  if (name == "none") return PostprocMode::none;
  if (name == "pc" || name == "PC") return PostprocMode::pc;
  if (name == "pi" || name == "PI") return PostprocMode::pi;
  throw std::invalid_argument("unknown postproc mode: " + std::string(name));
}

std::string to_string(PostprocMode mode) {
  switch (mode) {
    case PostprocMode::none: return "none";
    case PostprocMode::pc: return "pc";
    case PostprocMode::pi: return "pi";
  }
  return "none";
}

void PostprocConfig::validate() const {
  if (!(max_dist > 0)) throw std::invalid_argument("postproc: max_dist must be positive");
}

EndpointMatch nearest_endpoints(const PlacedStroke& a, const PlacedStroke& b, int grid) {
  if (a.path.closed || b.path.closed) throw std::invalid_argument("nearest_endpoints: closed paths have no endpoints");
  const Point as = to_canvas(a.path.start, a.anchor, grid);
  const Point ae = to_canvas(a.path.end_point(), a.anchor, grid);
  const Point bs = to_canvas(b.path.start, b.anchor, grid);
  const Point be = to_canvas(b.path.end_point(), b.anchor, grid);
  const std::array<EndpointMatch, 4> candidates = {{
      {Endpoint::end, Endpoint::start, ae, bs, distance(ae, bs)},
      {Endpoint::end, Endpoint::end, ae, be, distance(ae, be)},
      {Endpoint::start, Endpoint::start, as, bs, distance(as, bs)},
      {Endpoint::start, Endpoint::end, as, be, distance(as, be)},
  }};
  EndpointMatch best = candidates[0];
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].distance < best.distance) best = candidates[i];
  }
  return best;
}

namespace {

bool within(const EndpointMatch& m, const PostprocConfig& cfg) {
  return m.distance > kCoincident && m.distance <= cfg.max_dist;
}

}  // namespace

VectorDocument path_clip(const VectorDocument& doc, const PostprocConfig& cfg) {
  cfg.validate();
  VectorDocument out = doc;
  for (std::size_t i = 1; i < out.strokes.size(); ++i) {
    const auto m = nearest_endpoints(out.strokes[i - 1], out.strokes[i], out.grid);
    if (!within(m, cfg)) continue;
    auto& b = out.strokes[i];
    auto& path = b.path;
    const Point target = to_local(m.a_point, b.anchor, out.grid);
    if (m.b_side == Endpoint::start) {
      const Point delta = target - path.start;
      path.start = target;
      path.segments.front().c1 = path.segments.front().c1 + delta;
    } else {
      auto& last = path.segments.back();
      const Point delta = target - last.end;
      last.end = target;
      last.c2 = last.c2 + delta;
    }
  }
  return out;
}

VectorDocument path_interp(const VectorDocument& doc, const PostprocConfig& cfg) {
  cfg.validate();
  VectorDocument out = doc;
  out.strokes.clear();
  for (std::size_t i = 0; i < doc.strokes.size(); ++i) {
    out.strokes.push_back(doc.strokes[i]);
    if (i + 1 == doc.strokes.size()) break;
    const auto& a = doc.strokes[i];
    const auto m = nearest_endpoints(a, doc.strokes[i + 1], doc.grid);
    if (!within(m, cfg)) continue;
    PlacedStroke connector;
    connector.anchor = a.anchor;
    connector.path.start = to_local(m.a_point, a.anchor, doc.grid);
    connector.path.segments.push_back(line_segment(connector.path.start, to_local(m.b_point, a.anchor, doc.grid)));
    connector.path.width = a.path.width;
    connector.path.stroke_color = a.path.stroke_color;
    out.strokes.push_back(std::move(connector));
  }
  return out;
}

VectorDocument postprocess(const VectorDocument& doc, const PostprocConfig& cfg) {
  switch (cfg.mode) {
    case PostprocMode::pc: return path_clip(doc, cfg);
    case PostprocMode::pi: return path_interp(doc, cfg);
    case PostprocMode::none: break;
  }
  cfg.validate();
  return doc;
}

}  // namespace svgen
