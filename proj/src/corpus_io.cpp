#include "svgen/corpus_io.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "svgen/image_io.hpp"

namespace svgen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json geometry_json(const std::optional<StrokePath>& g) {
  if (!g) return nullptr;
  json pts = json::array();
  for (const Point p : g->control_points()) pts.push_back({p.x, p.y});
  json out{{"points", pts}, {"closed", g->closed}};
  out["width"] = g->width ? json(*g->width) : json(nullptr);
  const auto& c = g->closed ? g->fill_color : g->stroke_color;
  out["color"] = c ? json{c->r, c->g, c->b} : json(nullptr);
  return out;
}

std::optional<StrokePath> geometry_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  const auto& pts = j.at("points");
  if (pts.size() < 4 || (pts.size() - 1) % 3 != 0) throw std::runtime_error("corpus: malformed geometry");
  auto pt = [&](std::size_t i) { return Point{pts[i][0].get<double>(), pts[i][1].get<double>()}; };
  StrokePath p;
  p.start = pt(0);
  for (std::size_t i = 1; i + 2 < pts.size(); i += 3) p.segments.push_back({pt(i), pt(i + 1), pt(i + 2)});
  p.closed = j.value("closed", false);
  if (j.contains("width") && !j["width"].is_null()) p.width = j["width"].get<double>();
  if (j.contains("color") && !j["color"].is_null()) {
    const Rgb c{j["color"][0].get<double>(), j["color"][1].get<double>(), j["color"][2].get<double>()};
    (p.closed ? p.fill_color : p.stroke_color) = c;
  }
  return p;
}

std::string patch_name(const std::string& id, std::size_t i) { return id + "_" + std::to_string(i) + ".png"; }

}  // namespace

void write_corpus(const fs::path& dir, const std::vector<SampleRecord>& samples) {
  fs::create_directories(dir / "sources");
  std::ofstream index(dir / "index.jsonl");
  if (!index) throw std::runtime_error("cannot write " + (dir / "index.jsonl").string());
  for (const auto& s : samples) {
    json anchors = json::array();
    json codes = json::array();
    json geometry = json::array();
    for (std::size_t i = 0; i < s.patches.size(); ++i) {
      const auto& p = s.patches[i];
      anchors.push_back({p.anchor.x, p.anchor.y});
      codes.push_back(nullptr);
      geometry.push_back(geometry_json(p.geometry));
      write_png(dir / patch_name(s.source_id, i), p.patch);
    }
    if (s.source.defined()) write_png(dir / "sources" / (s.source_id + ".png"), s.source);
    const json line{{"source_id", s.source_id}, {"prompt", s.prompt},        {"label", s.label},
                    {"canvas_size", s.canvas_size}, {"n_patches", s.patches.size()}, {"anchors", anchors},
                    {"codes", codes},           {"geometry", geometry}};
    index << line.dump() << '\n';
  }
}

std::vector<SampleRecord> read_corpus(const fs::path& dir, bool load_patches) {
  std::ifstream index(dir / "index.jsonl");
  if (!index) throw std::runtime_error("cannot open " + (dir / "index.jsonl").string());
  std::vector<SampleRecord> out;
  std::string line;
  while (std::getline(index, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    SampleRecord s;
    s.source_id = j.at("source_id").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.label = j.value("label", std::string{});
    s.canvas_size = j.value("canvas_size", 128);
    const auto& anchors = j.at("anchors");
    const std::size_t n = j.at("n_patches").get<std::size_t>();
    if (anchors.size() != n) throw std::runtime_error("corpus: anchor count mismatch for " + s.source_id);
    const json geometry = j.value("geometry", json::array());
    for (std::size_t i = 0; i < n; ++i) {
      PatchRecord p;
      p.anchor = {anchors[i][0].get<int>(), anchors[i][1].get<int>()};
      p.source_id = s.source_id;
      if (i < geometry.size()) p.geometry = geometry_from_json(geometry[i]);
      if (load_patches) p.patch = read_png(dir / patch_name(s.source_id, i));
      s.patches.push_back(std::move(p));
    }
    const fs::path src = dir / "sources" / (s.source_id + ".png");
    if (load_patches && fs::exists(src)) s.source = read_png(src);
    out.push_back(std::move(s));
  }
  return out;
}

torch::Tensor stack_patches_u8(const std::vector<SampleRecord>& samples) {
  std::vector<torch::Tensor> all;
  for (const auto& s : samples) {
    for (const auto& p : s.patches) {
      TORCH_CHECK(p.patch.defined(), "stack_patches_u8: patch image not loaded");
      all.push_back((p.patch.to(torch::kFloat).clamp(0, 1) * 255.0).round().to(torch::kUInt8));
    }
  }
  if (all.empty()) return torch::empty({0, 3, 0, 0}, torch::kUInt8);
  return torch::stack(all);
}

}  // namespace svgen
