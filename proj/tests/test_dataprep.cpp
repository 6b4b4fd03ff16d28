#include <cmath>
#include <filesystem>
#include <map>

#include "oracles.hpp"
#include "svgen/contour.hpp"
#include "svgen/corpus_io.hpp"
#include "svgen/dataprep.hpp"
#include "svgen/pipeline.hpp"
#include "svgen/raster.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;
namespace fs = std::filesystem;

namespace {

torch::Tensor disk(int res, double cx, double cy, double r_out, double r_in = -1) {
  auto img = torch::ones({res, res});
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      const double d = std::hypot((x + 0.5) / res - cx, (y + 0.5) / res - cy);
      if (d <= r_out && d > r_in) img[y][x] = 0.0;
    }
  }
  return img;
}

bool same_points(const std::vector<Point>& a, const std::vector<Point>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("dataprep") {

TEST_CASE("tile grid layout and anchors") {
  auto img = torch::ones({3, 128, 128});
  img.index_put_({torch::indexing::Slice(), torch::indexing::Slice(22, 44), torch::indexing::Slice(22, 44)}, 0.0);
  const auto tiles = tile_grid(img, 6, 6);
  REQUIRE(tiles.size() == 36);
  // 128 pads to 132, so tiles are 22 pixels wide
  const int expect = static_cast<int>(std::floor(11.0 / 132.0 * 255.0 + 0.5));
  CHECK((tiles[0].anchor == Anchor{expect, expect}));
  CHECK(expect == 21);
  CHECK(tiles[7].patch.min().item<float>() == 0.0f);
  CHECK(tiles[6].patch.min().item<float>() == 1.0f);
  CHECK(tiles[7].anchor.x == tiles[1].anchor.x);
  CHECK(tiles[7].anchor.y == tiles[6].anchor.y);

  const auto blank = tile_grid(torch::ones({3, 128, 128}));
  for (const auto& t : blank) CHECK(t.patch.min().item<float>() == 1.0f);
}

TEST_CASE("contours of disks and rings") {
  CHECK(extract_contours(torch::ones({64, 64})).empty());
  const int res = 128;
  const double r = 0.3;
  const auto outlines = extract_contours(disk(res, 0.5, 0.5, r));
  REQUIRE(outlines.size() == 1);
  CHECK(outlines[0].closed);
  for (const auto& p : outlines[0].points) {
    CHECK(std::abs(std::hypot(p.x - 0.5, p.y - 0.5) - r) * res <= 1.5);
  }
  const auto ring = extract_contours(disk(res, 0.5, 0.5, 0.35, 0.2));
  CHECK(ring.size() == 2);
}

TEST_CASE("stroke splitting") {
  Polyline shortl{{{0.1, 0.1}, {0.12, 0.1}}, false};
  auto parts = split_strokes(shortl, 0.04);
  REQUIRE(parts.size() == 1);
  CHECK(same_points(parts[0].points, shortl.points));

  Polyline line{{{0.1, 0.5}, {0.2, 0.5}}, false};
  parts = split_strokes(line, 0.04);
  CHECK(parts.size() == 3);
  double total = 0;
  for (const auto& p : parts) {
    const double len = arc_length(p.points);
    CHECK(len <= 0.04 + 1e-12);
    total += len;
  }
  CHECK(total == doctest::Approx(0.1).epsilon(1e-12));

  Polyline loop;
  loop.closed = true;
  for (int i = 0; i <= 40; ++i) {
    const double a = 2 * M_PI * (i % 40) / 40;
    loop.points.push_back({0.5 + 0.3 * std::cos(a), 0.5 + 0.3 * std::sin(a)});
  }
  parts = split_strokes(loop, 0.11);
  std::vector<Point> joined = parts[0].points;
  for (std::size_t k = 1; k < parts.size(); ++k) {
    CHECK(parts[k].points.front() == joined.back());
    joined.insert(joined.end(), parts[k].points.begin() + 1, parts[k].points.end());
  }
  CHECK(same_points(joined, loop.points));
}

TEST_CASE("centering") {
  PatchOptions opts;
  const std::vector<Point> seg{{0.45, 0.5}, {0.55, 0.5}};
  auto c = center_stroke(seg, opts);
  REQUIRE(c);
  CHECK((c->anchor == Anchor{128, 128}));
  const auto pts = c->geometry.on_curve_points();
  CHECK(pts.front().x == doctest::Approx(0.45));
  CHECK(pts.back().x == doctest::Approx(0.55));

  const std::vector<Point> moved{{0.15, 0.3}, {0.25, 0.3}};
  auto c2 = center_stroke(moved, opts);
  REQUIRE(c2);
  CHECK(c2->anchor != c->anchor);
  const auto pa = center_patch({seg, false}, opts);
  const auto pb = center_patch({moved, false}, opts);
  REQUIRE(pa);
  REQUIRE(pb);
  CHECK((pa->patch - pb->patch).abs().max().item<float>() < 1e-5f);

  const std::vector<Point> degenerate{{0.3, 0.3}, {0.3, 0.3}};
  CHECK_FALSE(center_stroke(degenerate, opts));
}

TEST_CASE("prompt templates") {
  CHECK(build_prompt(DatasetKind::mnist, {"7", {}, {}}) == "7 in black color");
  CHECK(build_prompt(DatasetKind::fonts, {{}, "A", "regular"}) == "capital a in regular font");
  CHECK(build_prompt(DatasetKind::fonts, {{}, "g", "bold"}) == "g in bold font");
  CHECK(build_prompt(DatasetKind::figr8, {"home", {}, {}}) == "home");
  CHECK_THROWS_AS(build_prompt(DatasetKind::fonts, {{}, "A", {}}), std::invalid_argument);
}

TEST_CASE("synthetic corpus determinism and balance") {
  const auto dir_a = fs::temp_directory_path() / "svgen_test_corpus_a";
  const auto dir_b = fs::temp_directory_path() / "svgen_test_corpus_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  write_corpus(dir_a, generate_synthetic_corpus(10, 1));
  write_corpus(dir_b, generate_synthetic_corpus(10, 1));
  CHECK(directory_hash(dir_a) == directory_hash(dir_b));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  const auto corpus = generate_synthetic_corpus(22, 3);
  std::map<std::string, int> counts;
  for (const auto& s : corpus) ++counts[s.label];
  const int k = static_cast<int>(synthetic_classes().size());
  for (const auto& [label, n] : counts) {
    CHECK(n >= 22 / k);
    CHECK(n <= (22 + k - 1) / k);
  }
}

TEST_CASE("patches recompose to the source") {
  SyntheticOptions opts;
  opts.colored = true;
  opts.variable_width = true;
  const auto corpus = generate_synthetic_corpus(12, 5, opts);
  for (const auto& rec : corpus) {
    VectorDocument doc;
    doc.canvas_size = rec.canvas_size;
    for (const auto& p : rec.patches) {
      REQUIRE(p.geometry);
      CHECK(p.anchor.x >= 0);
      CHECK(p.anchor.x <= 255);
      CHECK(p.anchor.y >= 0);
      CHECK(p.anchor.y <= 255);
      doc.strokes.push_back({*p.geometry, p.anchor});
    }
    const auto img = render_document(doc, {rec.canvas_size, 1.0, 24});
    CHECK(torch::mean(torch::square(img - rec.source)).item<double>() < 0.01);
  }
}

TEST_CASE("corpus files round trip") {
  const auto dir = fs::temp_directory_path() / "svgen_test_corpus_rt";
  fs::remove_all(dir);
  const auto corpus = generate_synthetic_corpus(3, 9);
  write_corpus(dir, corpus);
  const auto back = read_corpus(dir);
  REQUIRE(back.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(back[i].prompt == corpus[i].prompt);
    REQUIRE(back[i].patches.size() == corpus[i].patches.size());
    for (std::size_t k = 0; k < corpus[i].patches.size(); ++k) {
      CHECK(back[i].patches[k].anchor == corpus[i].patches[k].anchor);
      // PNG storage quantizes to 8 bits
      CHECK((back[i].patches[k].patch - corpus[i].patches[k].patch).abs().max().item<float>() <= 0.5f / 255.0f + 1e-6f);
    }
  }
  fs::remove_all(dir);
}

}  // TEST_SUITE
