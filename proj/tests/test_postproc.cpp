#include <random>

#include "oracles.hpp"
#include "svgen/postproc.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;

namespace {

PlacedStroke canvas_line(Point a, Point b, Anchor anchor = {128, 128}) {
  const Point shift = anchor_position(anchor) - Point{0.5, 0.5};
  const std::vector<Point> pts{a - shift, b - shift};
  StrokePath p = polyline_path(pts);
  p.width = 0.02;
  return {p, anchor};
}

Point canvas_end(const PlacedStroke& s, Endpoint e) {
  const auto c = to_canvas(s.path, s.anchor);
  return e == Endpoint::start ? c.start : c.end_point();
}

}  // namespace

TEST_SUITE("postproc") {

TEST_CASE("nearest endpoints") {
  auto m = nearest_endpoints(canvas_line({0.1, 0.1}, {0.3, 0.1}), canvas_line({0.3, 0.1}, {0.5, 0.5}, {40, 90}));
  CHECK(m.a_side == Endpoint::end);
  CHECK(m.b_side == Endpoint::start);
  CHECK(m.distance == doctest::Approx(0.0).epsilon(1e-12));

  // brute force over the four pairings
  const auto a = canvas_line({0.0, 0.5}, {0.4, 0.5});
  const auto b = canvas_line({0.8, 0.5}, {0.44, 0.5}, {200, 7});
  m = nearest_endpoints(a, b);
  double best = 1e9;
  for (auto ea : {Endpoint::end, Endpoint::start}) {
    for (auto eb : {Endpoint::start, Endpoint::end}) best = std::min(best, distance(canvas_end(a, ea), canvas_end(b, eb)));
  }
  CHECK(m.a_side == Endpoint::end);
  CHECK(m.b_side == Endpoint::end);
  CHECK(m.distance == doctest::Approx(best));
  CHECK(m.distance == doctest::Approx(0.04));

  // all four pairings tie for a degenerate pair of points
  const auto dot = canvas_line({0.5, 0.5}, {0.5, 0.5});
  m = nearest_endpoints(dot, dot);
  CHECK(m.a_side == Endpoint::end);
  CHECK(m.b_side == Endpoint::start);

  StrokePath closed = polyline_path(std::vector<Point>{{0.1, 0.1}, {0.2, 0.1}, {0.1, 0.1}}, true);
  CHECK_THROWS_AS(nearest_endpoints({closed, {}}, dot), std::invalid_argument);
}

TEST_CASE("path clip thresholds") {
  PostprocConfig cfg{PostprocMode::pc, 0.05};
  VectorDocument doc;
  doc.strokes = {canvas_line({0.1, 0.5}, {0.4, 0.5}), canvas_line({0.425, 0.5}, {0.7, 0.7}, {30, 60})};
  auto out = path_clip(doc, cfg);
  CHECK(distance(canvas_end(out.strokes[0], Endpoint::end), canvas_end(out.strokes[1], Endpoint::start)) < 1e-12);
  CHECK(out.strokes[0] == doc.strokes[0]);
  CHECK(path_clip(out, cfg) == out);

  doc.strokes[1] = canvas_line({0.5, 0.5}, {0.7, 0.7}, {30, 60});
  CHECK(path_clip(doc, cfg) == doc);

  VectorDocument single;
  single.strokes = {doc.strokes[0]};
  CHECK(path_clip(single, cfg) == single);
  CHECK(path_interp(single, cfg) == single);
}

TEST_CASE("path interpolation") {
  PostprocConfig cfg{PostprocMode::pi, 0.05};
  VectorDocument doc;
  doc.strokes = {canvas_line({0.1, 0.5}, {0.4, 0.5}, {10, 10}), canvas_line({0.43, 0.5}, {0.7, 0.7}, {30, 60}),
                 canvas_line({0.9, 0.9}, {0.95, 0.95})};
  const auto out = path_interp(doc, cfg);
  REQUIRE(out.strokes.size() == 4);
  CHECK(out.strokes[0] == doc.strokes[0]);
  CHECK(out.strokes[2] == doc.strokes[1]);
  CHECK(out.strokes[3] == doc.strokes[2]);
  const auto& conn = out.strokes[1];
  CHECK(conn.path.width == doc.strokes[0].path.width);
  CHECK(distance(canvas_end(conn, Endpoint::start), canvas_end(doc.strokes[0], Endpoint::end)) < 1e-12);
  CHECK(distance(canvas_end(conn, Endpoint::end), canvas_end(doc.strokes[1], Endpoint::start)) < 1e-12);

  cfg.max_dist = 0.01;
  CHECK(path_interp(doc, cfg) == doc);
  CHECK(postprocess(doc, {PostprocMode::none, 0.01}) == doc);
  CHECK_THROWS(PostprocConfig{PostprocMode::pc, -1.0}.validate());
}

TEST_CASE("random documents keep the invariants") {
  std::mt19937_64 rng(41);
  const PostprocConfig cfg{PostprocMode::pc, 8.0 / 256.0};
  for (int t = 0; t < 50; ++t) {
    const auto doc = oracle::random_chain(rng, cfg.max_dist);
    const auto clipped = path_clip(doc, cfg);
    CHECK(oracle::max_displacement(doc, clipped) <= cfg.max_dist + 1e-12);
    CHECK(path_clip(clipped, cfg) == clipped);

    const PostprocConfig huge{PostprocMode::pc, 10.0};
    const auto all = path_clip(doc, huge);
    for (std::size_t i = 1; i < all.strokes.size(); ++i) {
      CHECK(nearest_endpoints(all.strokes[i - 1], all.strokes[i]).distance < 1e-12);
    }
  }
}

}  // TEST_SUITE
