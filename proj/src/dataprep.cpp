#include "svgen/dataprep.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svgen/image_io.hpp"
#include "svgen/svg_io.hpp"

namespace svgen {

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "mnist") return DatasetKind::mnist;
  if (name == "fonts") return DatasetKind::fonts;
  if (name == "figr8") return DatasetKind::figr8;
  if (name == "synthetic") return DatasetKind::synthetic;
  throw std::invalid_argument("unknown dataset: " + std::string(name));
}

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::fonts: return "fonts";
    case DatasetKind::figr8: return "figr8";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "unknown";
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

const std::string& require(const std::optional<std::string>& field, const char* name) {
  if (!field || field->empty()) throw std::invalid_argument(std::string("build_prompt: missing metadata field '") + name + "'");
  return *field;
}

// Portable uniform double in [a, b): libstdc++ distributions are not
// guaranteed stable across standard library versions.
double uniform(std::mt19937_64& rng, double a, double b) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return a + (b - a) * u;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

const std::vector<Rgb>& palette() {
  static const std::vector<Rgb> colors = {
      {0.0, 0.0, 0.0}, {0.9, 0.1, 0.1}, {0.1, 0.6, 0.2}, {0.1, 0.2, 0.9},
      {1.0, 0.55, 0.0}, {0.55, 0.1, 0.7}, {0.0, 0.55, 0.55}, {0.55, 0.3, 0.1},
  };
  return colors;
}

std::vector<Polyline> synthetic_glyph(const std::string& cls, std::mt19937_64& rng) {
  const double cx = uniform(rng, 0.4, 0.6);
  const double cy = uniform(rng, 0.4, 0.6);
  std::vector<Polyline> out;
  if (cls == "box") {
    const double hx = uniform(rng, 0.16, 0.3);
    const double hy = uniform(rng, 0.16, 0.3);
    Polyline p;
    p.closed = true;
    p.points = {{cx - hx, cy - hy}, {cx + hx, cy - hy}, {cx + hx, cy + hy}, {cx - hx, cy + hy}, {cx - hx, cy - hy}};
    out.push_back(std::move(p));
  } else if (cls == "cross") {
    const double angle = uniform(rng, 0.0, std::numbers::pi / 2);
    for (int k = 0; k < 2; ++k) {
      const double len = uniform(rng, 0.5, 0.7);
      const double a = angle + k * std::numbers::pi / 2;
      const Point d{0.5 * len * std::cos(a), 0.5 * len * std::sin(a)};
      Polyline p;
      p.points = {Point{cx, cy} - d, Point{cx, cy} + d};
      out.push_back(std::move(p));
    }
  } else if (cls == "circle") {
    const double r = uniform(rng, 0.18, 0.3);
    const double phase = uniform(rng, 0.0, 2 * std::numbers::pi);
    Polyline p;
    p.closed = true;
    constexpr int kSides = 64;
    for (int k = 0; k < kSides; ++k) {
      const double a = phase + 2 * std::numbers::pi * k / kSides;
      p.points.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    p.points.push_back(p.points.front());
    out.push_back(std::move(p));
  } else if (cls == "zigzag") {
    const int vertices = uniform_int(rng, 5, 7);
    const double amp = uniform(rng, 0.1, 0.2);
    Polyline p;
    for (int k = 0; k < vertices; ++k) {
      const double x = 0.2 + 0.6 * k / (vertices - 1);
      p.points.push_back({x, cy + (k % 2 == 0 ? -amp : amp)});
    }
    out.push_back(std::move(p));
  } else {
    throw std::invalid_argument("unknown synthetic class: " + cls);
  }
  return out;
}

torch::Tensor to_rgb(const torch::Tensor& image) {
  if (image.dim() == 2) return image.unsqueeze(0).expand({3, -1, -1}).contiguous();
  if (image.size(0) == 1) return image.expand({3, -1, -1}).contiguous();
  return image;
}

uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("IDX: truncated header");
  return (uint32_t{b[0]} << 24) | (uint32_t{b[1]} << 16) | (uint32_t{b[2]} << 8) | uint32_t{b[3]};
}

}  // namespace

std::string build_prompt(DatasetKind kind, const PromptMetadata& meta) {
  switch (kind) {
    case DatasetKind::mnist:
      return require(meta.class_label, "class") + " in black color";
    case DatasetKind::fonts: {
      const std::string& glyph = require(meta.glyph, "glyph");
      const std::string& style = require(meta.style, "style");
      const bool capital = glyph.size() == 1 && glyph[0] >= 'A' && glyph[0] <= 'Z';
      return (capital ? "capital " : "") + lower(glyph) + " in " + style + " font";
    }
    case DatasetKind::figr8:
    case DatasetKind::synthetic:
      return require(meta.class_label, "class");
  }
  throw std::invalid_argument("build_prompt: unknown dataset");
}

std::vector<PatchRecord> tile_grid(const torch::Tensor& image, int rows, int cols, const PatchOptions& opts) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("tile_grid: rows and cols must be positive");
  auto img = to_rgb(image.to(torch::kFloat));
  const int64_t h = img.size(1);
  const int64_t w = img.size(2);
  const int64_t th = (h + rows - 1) / rows;
  const int64_t tw = (w + cols - 1) / cols;
  const int64_t ph = th * rows;
  const int64_t pw = tw * cols;
  if (th > opts.patch_size || tw > opts.patch_size) throw std::invalid_argument("tile_grid: tile larger than patch");
  auto padded = torch::ones({3, ph, pw}, torch::kFloat);
  padded.narrow(1, 0, h).narrow(2, 0, w).copy_(img);

  std::vector<PatchRecord> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  const int64_t oy = (opts.patch_size - th) / 2;
  const int64_t ox = (opts.patch_size - tw) / 2;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      auto patch = torch::ones({3, opts.patch_size, opts.patch_size}, torch::kFloat);
      patch.narrow(1, oy, th).narrow(2, ox, tw).copy_(padded.narrow(1, r * th, th).narrow(2, c * tw, tw));
      const Point center{(c + 0.5) * static_cast<double>(tw) / static_cast<double>(pw),
                         (r + 0.5) * static_cast<double>(th) / static_cast<double>(ph)};
      out.push_back({patch, discretize_anchor(center, opts.grid), "", std::nullopt});
    }
  }
  return out;
}

std::optional<CenteredStroke> center_stroke(std::span<const Point> points, const PatchOptions& opts) {
  if (points.empty()) return std::nullopt;
  const bool distinct = std::any_of(points.begin(), points.end(), [&](Point p) { return p != points.front(); });
  if (!distinct) return std::nullopt;
  const BoundingBox box = bounding_box(points);
  const Point c = box.center();
  const double extent = std::max(box.width(), box.height());
  const double scale = extent > opts.safe_area ? opts.safe_area / extent : 1.0;
  std::vector<Point> local;
  local.reserve(points.size());
  for (const Point p : points) local.push_back(Point{0.5, 0.5} + scale * (p - c));
  CenteredStroke out{polyline_path(local), discretize_anchor(c, opts.grid)};
  out.geometry.width = opts.stroke_width;
  return out;
}

std::optional<PatchRecord> center_patch(const Polyline& segment, const PatchOptions& opts) {
  auto centered = center_stroke(segment.points, opts);
  if (!centered) return std::nullopt;
  const auto pts = centered->geometry.on_curve_points();
  auto img = render_polyline_batch({pts}, {opts.stroke_width}, {Rgb{}}, opts.render_config());
  return PatchRecord{img[0], centered->anchor, "", centered->geometry};
}

torch::Tensor render_polyline_batch(const std::vector<std::vector<Point>>& lines, const std::vector<double>& widths,
                                    const std::vector<Rgb>& colors, const RenderConfig& cfg) {
  const int64_t batch = static_cast<int64_t>(lines.size());
  if (batch == 0) return torch::ones({0, 3, cfg.resolution, cfg.resolution});
  std::size_t longest = 0;
  for (const auto& l : lines) longest = std::max(longest, l.size());
  // Pad by repeating the last vertex; zero-length edges do not change distances.
  auto pts = torch::empty({batch, static_cast<int64_t>(std::max<std::size_t>(longest, 2)), 2}, torch::kFloat);
  auto acc = pts.accessor<float, 3>();
  for (int64_t b = 0; b < batch; ++b) {
    const auto& l = lines[b];
    for (int64_t i = 0; i < pts.size(1); ++i) {
      const Point p = l[std::min<std::size_t>(i, l.size() - 1)];
      acc[b][i][0] = static_cast<float>(p.x);
      acc[b][i][1] = static_cast<float>(p.y);
    }
  }
  auto w = torch::empty({batch}, torch::kFloat);
  auto col = torch::empty({batch, 3}, torch::kFloat);
  for (int64_t b = 0; b < batch; ++b) {
    w[b] = widths[b];
    col[b][0] = colors[b].r;
    col[b][1] = colors[b].g;
    col[b][2] = colors[b].b;
  }
  torch::NoGradGuard no_grad;
  return render_polylines(pts, w, col, cfg);
}

SampleRecord strokes_to_sample(const StrokeSource& src, const PatchOptions& opts, PreprocessStats* stats) {
  SampleRecord rec;
  rec.source_id = src.source_id;
  rec.prompt = src.prompt;
  rec.label = src.label;

  std::vector<std::vector<Point>> lines;
  std::vector<double> widths;
  std::vector<Rgb> colors;
  for (std::size_t k = 0; k < src.outlines.size(); ++k) {
    const double width = src.widths.empty() ? opts.stroke_width : src.widths[k];
    const Rgb color = src.colors.empty() ? Rgb{} : src.colors[k];
    for (const auto& piece : split_strokes(src.outlines[k], opts.max_len_fraction)) {
      auto centered = center_stroke(piece.points, opts);
      if (!centered) {
        if (stats) ++stats->degenerate_dropped;
        continue;
      }
      centered->geometry.width = width;
      centered->geometry.stroke_color = color;
      lines.push_back(centered->geometry.on_curve_points());
      widths.push_back(width);
      colors.push_back(color);
      rec.patches.push_back({torch::Tensor(), centered->anchor, src.source_id, centered->geometry});
    }
  }
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < lines.size(); begin += kChunk) {
    const std::size_t end = std::min(lines.size(), begin + kChunk);
    std::vector<std::vector<Point>> l(lines.begin() + begin, lines.begin() + end);
    std::vector<double> w(widths.begin() + begin, widths.begin() + end);
    std::vector<Rgb> c(colors.begin() + begin, colors.begin() + end);
    auto imgs = render_polyline_batch(l, w, c, opts.render_config());
    for (std::size_t i = begin; i < end; ++i) rec.patches[i].patch = imgs[static_cast<int64_t>(i - begin)];
  }
  if (stats) {
    ++stats->samples;
    stats->patches += rec.patches.size();
  }
  return rec;
}

std::vector<SampleRecord> generate_synthetic_corpus(int n, uint64_t seed, const SyntheticOptions& opts,
                                                    PreprocessStats* stats) {
  if (n < 1) throw std::invalid_argument("generate_synthetic_corpus: n must be >= 1");
  const auto& classes = synthetic_classes();
  std::mt19937_64 rng(seed);
  std::vector<SampleRecord> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const std::string& cls = classes[i % classes.size()];
    StrokeSource src;
    char id[32];
    std::snprintf(id, sizeof id, "synthetic_%06d", i);
    src.source_id = id;
    src.label = cls;
    src.prompt = build_prompt(DatasetKind::synthetic, {cls, std::nullopt, std::nullopt});
    if (opts.indexed_prompts) src.prompt += " " + std::to_string(i);
    src.outlines = synthetic_glyph(cls, rng);
    for (std::size_t k = 0; k < src.outlines.size(); ++k) {
      src.widths.push_back(opts.variable_width ? uniform(rng, 0.015, 0.045) : opts.patch.stroke_width);
      src.colors.push_back(opts.colored ? palette()[rng() % palette().size()] : Rgb{});
    }
    SampleRecord rec = strokes_to_sample(src, opts.patch, stats);
    rec.canvas_size = opts.canvas_size;

    std::vector<std::vector<Point>> lines;
    for (const auto& o : src.outlines) lines.push_back(o.points);
    const RenderConfig canvas_cfg{opts.canvas_size, opts.patch.antialias_band, 24};
    rec.source = std::get<0>(render_polyline_batch(lines, src.widths, src.colors, canvas_cfg).min(0));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SampleRecord> load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels,
                                     std::size_t limit, const PatchOptions& opts, PreprocessStats* stats) {
  std::ifstream fi(images, std::ios::binary);
  std::ifstream fl(labels, std::ios::binary);
  if (!fi) throw std::runtime_error("cannot open " + images.string());
  if (!fl) throw std::runtime_error("cannot open " + labels.string());
  if (read_be32(fi) != 2051) throw std::runtime_error("not an IDX image file: " + images.string());
  if (read_be32(fl) != 2049) throw std::runtime_error("not an IDX label file: " + labels.string());
  const uint32_t n = read_be32(fi);
  const uint32_t rows = read_be32(fi);
  const uint32_t cols = read_be32(fi);
  const uint32_t nl = read_be32(fl);
  if (nl != n) throw std::runtime_error("IDX image/label count mismatch");
  const std::size_t count = limit > 0 ? std::min<std::size_t>(limit, n) : n;

  std::vector<SampleRecord> out;
  std::vector<uint8_t> buf(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < count; ++i) {
    fi.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    char label = 0;
    fl.read(&label, 1);
    if (!fi || !fl) throw std::runtime_error("IDX: truncated data");
    auto digit = torch::from_blob(buf.data(), {1, 1, static_cast<int64_t>(rows), static_cast<int64_t>(cols)},
                                  torch::kUInt8)
                     .to(torch::kFloat) / 255.0;
    namespace F = torch::nn::functional;
    auto up = F::interpolate(digit, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{opts.patch_size, opts.patch_size})
                                        .mode(torch::kBilinear)
                                        .align_corners(false));
    auto dark_on_white = (1.0 - up[0]).clamp(0.0, 1.0);

    SampleRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "mnist_%06zu", i);
    rec.source_id = id;
    rec.label = std::to_string(static_cast<int>(label));
    rec.prompt = build_prompt(DatasetKind::mnist, {rec.label, std::nullopt, std::nullopt});
    rec.patches = tile_grid(dark_on_white, 6, 6, opts);
    for (auto& p : rec.patches) p.source_id = rec.source_id;
    const int64_t tile = (opts.patch_size + 5) / 6;
    rec.canvas_size = static_cast<int>(tile * 6);
    auto src = torch::ones({3, rec.canvas_size, rec.canvas_size});
    src.narrow(1, 0, opts.patch_size).narrow(2, 0, opts.patch_size).copy_(to_rgb(dark_on_white));
    rec.source = src;
    if (stats) {
      ++stats->samples;
      stats->patches += rec.patches.size();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SampleRecord> load_figr8(const std::filesystem::path& root, std::size_t limit, bool invert,
                                     const PatchOptions& opts, PreprocessStats* stats) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw std::runtime_error("not a directory: " + root.string());
  std::vector<fs::path> classes;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) classes.push_back(e.path());
  }
  std::sort(classes.begin(), classes.end());
  std::vector<SampleRecord> out;
  for (const auto& dir : classes) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string cls = dir.filename().string();
    std::replace(cls.begin(), cls.end(), '_', ' ');
    for (const auto& f : files) {
      if (limit > 0 && out.size() >= limit) return out;
      auto img = read_png(f);
      if (invert) img = 1.0 - img;
      StrokeSource src;
      char id[32];
      std::snprintf(id, sizeof id, "figr8_%06zu", out.size());
      src.source_id = id;
      src.label = cls;
      src.prompt = build_prompt(DatasetKind::figr8, {cls, std::nullopt, std::nullopt});
      src.outlines = extract_contours(img);
      SampleRecord rec = strokes_to_sample(src, opts, stats);
      rec.canvas_size = static_cast<int>(std::max(img.size(1), img.size(2)));
      rec.source = img;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<SampleRecord> load_fonts(const std::filesystem::path& manifest, std::size_t limit,
                                     const PatchOptions& opts, PreprocessStats* stats) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open " + manifest.string());
  std::vector<SampleRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (limit > 0 && out.size() >= limit) break;
    const auto j = nlohmann::json::parse(line);
    std::filesystem::path svg_path = j.at("svg").get<std::string>();
    if (svg_path.is_relative()) svg_path = manifest.parent_path() / svg_path;
    std::ifstream svg_in(svg_path);
    if (!svg_in) throw std::runtime_error("cannot open " + svg_path.string());
    const std::string text((std::istreambuf_iterator<char>(svg_in)), std::istreambuf_iterator<char>());
    const VectorDocument doc = parse_svg(text, opts.grid);

    StrokeSource src;
    char id[32];
    std::snprintf(id, sizeof id, "fonts_%06zu", out.size());
    src.source_id = id;
    const PromptMetadata meta{std::nullopt, j.at("glyph").get<std::string>(), j.at("style").get<std::string>()};
    src.label = *meta.glyph;
    src.prompt = build_prompt(DatasetKind::fonts, meta);
    for (const auto& s : doc.strokes) {
      const StrokePath global = to_canvas(s.path, s.anchor, doc.grid);
      Polyline p;
      p.points = flatten(global, 16);
      p.closed = global.closed;
      if (p.closed && p.points.back() != p.points.front()) p.points.push_back(p.points.front());
      src.outlines.push_back(std::move(p));
    }
    SampleRecord rec = strokes_to_sample(src, opts, stats);
    rec.canvas_size = opts.patch_size;
    std::vector<std::vector<Point>> lines;
    for (const auto& o : src.outlines) lines.push_back(o.points);
    if (!lines.empty()) {
      const std::vector<double> widths(lines.size(), opts.stroke_width);
      const std::vector<Rgb> colors(lines.size(), Rgb{});
      rec.source = std::get<0>(render_polyline_batch(lines, widths, colors, opts.render_config()).min(0));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace svgen
