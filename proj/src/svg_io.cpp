#include "svgen/svg_io.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <set>

namespace svgen {

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid "-0.000000" so equal documents always produce equal text.
  if (std::string_view(buf) == "-0.000000") {
    out += "0.000000";
  } else {
    out += buf;
  }
}

void append_point(std::string& out, Point p, double scale) {
  append_number(out, p.x * scale);
  out += ' ';
  append_number(out, p.y * scale);
}

std::string color_string(const std::optional<Rgb>& c) {
  if (!c) return "currentColor";
  std::string s = "rgb(";
  append_number(s, c->r * 100.0);
  s += "%,";
  append_number(s, c->g * 100.0);
  s += "%,";
  append_number(s, c->b * 100.0);
  s += "%)";
  return s;
}

// --- minimal XML scanning -------------------------------------------------

struct Element {
  std::string name;
  std::map<std::string, std::string> attrs;
};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.';
}

std::vector<Element> scan_elements(std::string_view text) {
  std::vector<Element> elements;
  std::size_t i = 0;
  while (true) {
    i = text.find('<', i);
    if (i == std::string_view::npos) break;
    if (text.compare(i, 4, "<!--") == 0) {
      const auto end = text.find("-->", i + 4);
      if (end == std::string_view::npos) throw SvgError("unterminated comment", static_cast<int>(elements.size()));
      i = end + 3;
      continue;
    }
    if (text.compare(i, 2, "<?") == 0 || text.compare(i, 2, "<!") == 0 || text.compare(i, 2, "</") == 0) {
      const auto end = text.find('>', i);
      if (end == std::string_view::npos) throw SvgError("unterminated tag", static_cast<int>(elements.size()));
      i = end + 1;
      continue;
    }
    ++i;
    Element el;
    while (i < text.size() && is_name_char(text[i])) el.name += text[i++];
    if (el.name.empty()) throw SvgError("malformed tag", static_cast<int>(elements.size()));
    while (true) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i >= text.size()) throw SvgError("unterminated tag <" + el.name + ">", static_cast<int>(elements.size()));
      if (text[i] == '>') {
        ++i;
        break;
      }
      if (text[i] == '/') {
        ++i;
        continue;
      }
      std::string key;
      while (i < text.size() && is_name_char(text[i])) key += text[i++];
      if (key.empty()) throw SvgError("malformed attribute in <" + el.name + ">", static_cast<int>(elements.size()));
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i >= text.size() || text[i] != '=') throw SvgError("attribute without value: " + key, static_cast<int>(elements.size()));
      ++i;
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      if (i >= text.size() || (text[i] != '"' && text[i] != '\'')) {
        throw SvgError("unquoted attribute: " + key, static_cast<int>(elements.size()));
      }
      const char quote = text[i++];
      const auto end = text.find(quote, i);
      if (end == std::string_view::npos) throw SvgError("unterminated attribute: " + key, static_cast<int>(elements.size()));
      el.attrs[key] = std::string(text.substr(i, end - i));
      i = end + 1;
    }
    elements.push_back(std::move(el));
  }
  return elements;
}

// --- numbers and colors ---------------------------------------------------

class NumberScanner {
 public:
  explicit NumberScanner(std::string_view s) : s_(s) {}

  void skip_separators() {
    while (pos_ < s_.size() && (std::isspace(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == ',')) ++pos_;
  }

  bool at_end() {
    skip_separators();
    return pos_ >= s_.size();
  }

  bool next_is_number() {
    skip_separators();
    if (pos_ >= s_.size()) return false;
    const char c = s_[pos_];
    return std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.';
  }

  char peek() {
    skip_separators();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  char take() { return s_[pos_++]; }

  std::optional<double> number() {
    skip_separators();
    std::size_t start = pos_;
    std::size_t p = pos_;
    if (p < s_.size() && (s_[p] == '-' || s_[p] == '+')) ++p;
    bool dot = false;
    bool digits = false;
    while (p < s_.size()) {
      const char c = s_[p];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits = true;
      } else if (c == '.' && !dot) {
        dot = true;
      } else {
        break;
      }
      ++p;
    }
    if (!digits) return std::nullopt;
    if (p < s_.size() && (s_[p] == 'e' || s_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < s_.size() && (s_[q] == '-' || s_[q] == '+')) ++q;
      if (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) {
        while (q < s_.size() && std::isdigit(static_cast<unsigned char>(s_[q]))) ++q;
        p = q;
      }
    }
    if (s_[start] == '+') ++start;
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + start, s_.data() + p, v);
    if (res.ec != std::errc()) return std::nullopt;
    pos_ = p;
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

std::optional<Rgb> parse_color(const std::string& value, int element_index) {
  std::string v;
  for (char c : value) {
    if (!std::isspace(static_cast<unsigned char>(c))) v += c;
  }
  if (v.empty() || v == "none" || v == "currentColor") return std::nullopt;
  if (v == "black") return Rgb{0, 0, 0};
  if (v == "white") return Rgb{1, 1, 1};
  if (v == "red") return Rgb{1, 0, 0};
  if (v[0] == '#') {
    auto hex = [&](std::string_view h) {
      int out = 0;
      std::from_chars(h.data(), h.data() + h.size(), out, 16);
      return out;
    };
    if (v.size() == 7) {
      return Rgb{hex(std::string_view(v).substr(1, 2)) / 255.0, hex(std::string_view(v).substr(3, 2)) / 255.0,
                 hex(std::string_view(v).substr(5, 2)) / 255.0};
    }
    if (v.size() == 4) {
      return Rgb{hex(std::string_view(v).substr(1, 1)) / 15.0, hex(std::string_view(v).substr(2, 1)) / 15.0,
                 hex(std::string_view(v).substr(3, 1)) / 15.0};
    }
  }
  if (v.rfind("rgb(", 0) == 0 && v.back() == ')') {
    std::string body = v.substr(4, v.size() - 5);
    double ch[3];
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
      const auto comma = body.find(',', pos);
      std::string part = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      const bool percent = !part.empty() && part.back() == '%';
      if (percent) part.pop_back();
      double x = 0;
      if (std::from_chars(part.data(), part.data() + part.size(), x).ec != std::errc()) {
        throw SvgError("bad color: " + value, element_index);
      }
      ch[k] = percent ? x / 100.0 : x / 255.0;
      if (comma == std::string::npos && k < 2) throw SvgError("bad color: " + value, element_index);
      pos = comma + 1;
    }
    return Rgb{ch[0], ch[1], ch[2]};
  }
  throw SvgError("unsupported color: " + value, element_index);
}

// --- path data ------------------------------------------------------------

std::vector<StrokePath> parse_path_data(std::string_view d, int element_index) {
  std::vector<StrokePath> out;
  NumberScanner sc(d);
  std::optional<StrokePath> cur;
  Point pen{0, 0};
  char cmd = '\0';

  auto need = [&]() {
    auto v = sc.number();
    if (!v) throw SvgError("malformed path data", element_index);
    return *v;
  };
  auto flush = [&]() {
    if (cur && !cur->segments.empty()) out.push_back(std::move(*cur));
    cur.reset();
  };
  auto line_to = [&](Point p) {
    if (!cur) throw SvgError("path data must start with M", element_index);
    cur->segments.push_back(line_segment(pen, p));
    pen = p;
  };

  while (!sc.at_end()) {
    if (!sc.next_is_number()) {
      cmd = sc.take();
    } else if (cmd == '\0') {
      throw SvgError("path data must start with a command", element_index);
    }
    const bool rel = std::islower(static_cast<unsigned char>(cmd));
    const Point base = rel ? pen : Point{0, 0};
    switch (cmd) {
      case 'M':
      case 'm': {
        flush();
        const double x = need();
        const double y = need();
        pen = base + Point{x, y};
        cur = StrokePath{};
        cur->start = pen;
        // Subsequent coordinate pairs are implicit line-tos.
        cmd = rel ? 'l' : 'L';
        break;
      }
      case 'L':
      case 'l': {
        const double x = need();
        const double y = need();
        line_to(base + Point{x, y});
        break;
      }
      case 'H':
      case 'h': {
        const double x = need();
        line_to({rel ? pen.x + x : x, pen.y});
        break;
      }
      case 'V':
      case 'v': {
        const double y = need();
        line_to({pen.x, rel ? pen.y + y : y});
        break;
      }
      case 'C':
      case 'c': {
        if (!cur) throw SvgError("path data must start with M", element_index);
        double v[6];
        for (double& x : v) x = need();
        const CubicSegment seg{base + Point{v[0], v[1]}, base + Point{v[2], v[3]}, base + Point{v[4], v[5]}};
        cur->segments.push_back(seg);
        pen = seg.end;
        break;
      }
      case 'Z':
      case 'z': {
        if (!cur) throw SvgError("Z without subpath", element_index);
        cur->closed = true;
        pen = cur->start;
        const Point start = cur->start;
        flush();
        // A drawing command after Z starts a new subpath at the same point.
        cur = StrokePath{};
        cur->start = start;
        cmd = '\0';
        break;
      }
      default:
        throw SvgError(std::string("unsupported path command '") + cmd + "'", element_index);
    }
  }
  flush();
  return out;
}

const std::set<std::string> kUnsupportedPrimitives = {"circle", "ellipse", "rect", "line", "polyline",
                                                      "polygon", "text", "image", "use"};

}  // namespace

std::string document_to_svg(const VectorDocument& doc) {
  const double scale = doc.canvas_size;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(doc.canvas_size) + "\" height=\"" +
         std::to_string(doc.canvas_size) + "\" viewBox=\"0 0 " + std::to_string(doc.canvas_size) + " " +
         std::to_string(doc.canvas_size) + "\" data-grid=\"" + std::to_string(doc.grid) + "\">\n";
  for (const auto& stroke : doc.strokes) {
    const StrokePath canvas = to_canvas(stroke.path, stroke.anchor, doc.grid);
    out += "  <path d=\"M ";
    append_point(out, canvas.start, scale);
    for (const auto& seg : canvas.segments) {
      out += " C ";
      append_point(out, seg.c1, scale);
      out += ' ';
      append_point(out, seg.c2, scale);
      out += ' ';
      append_point(out, seg.end, scale);
    }
    if (canvas.closed) out += " Z";
    out += "\" data-anchor=\"" + std::to_string(stroke.anchor.x) + " " + std::to_string(stroke.anchor.y) + "\"";
    if (canvas.closed) {
      out += " fill=\"" + color_string(canvas.fill_color) + "\" stroke=\"none\"";
    } else {
      out += " fill=\"none\" stroke=\"" + color_string(canvas.stroke_color) + "\"";
      out += " stroke-linecap=\"round\" stroke-linejoin=\"round\"";
    }
    if (canvas.width) {
      out += " stroke-width=\"";
      append_number(out, *canvas.width * scale);
      out += "\"";
    }
    out += "/>\n";
  }
  out += "</svg>\n";
  return out;
}

VectorDocument parse_svg(std::string_view text, int grid) {
  const auto elements = scan_elements(text);
  VectorDocument doc;
  doc.grid = grid;
  bool have_root = false;
  for (std::size_t idx = 0; idx < elements.size(); ++idx) {
    const auto& el = elements[idx];
    const int index = static_cast<int>(idx);
    if (el.name == "svg") {
      if (have_root) continue;
      have_root = true;
      if (auto it = el.attrs.find("viewBox"); it != el.attrs.end()) {
        NumberScanner sc(it->second);
        double vb[4];
        for (double& v : vb) {
          auto n = sc.number();
          if (!n) throw SvgError("malformed viewBox", index);
          v = *n;
        }
        if (vb[0] != 0.0 || vb[1] != 0.0 || vb[2] != vb[3]) throw SvgError("only square viewBox at origin supported", index);
        doc.canvas_size = static_cast<int>(vb[2]);
      } else if (auto w = el.attrs.find("width"); w != el.attrs.end()) {
        NumberScanner sc(w->second);
        auto n = sc.number();
        if (!n) throw SvgError("malformed width", index);
        doc.canvas_size = static_cast<int>(*n);
      }
      if (auto g = el.attrs.find("data-grid"); g != el.attrs.end()) {
        NumberScanner sc(g->second);
        auto n = sc.number();
        if (!n || *n < 2) throw SvgError("malformed data-grid", index);
        doc.grid = static_cast<int>(*n);
      }
      if (doc.canvas_size <= 0) throw SvgError("canvas size must be positive", index);
      continue;
    }
    if (kUnsupportedPrimitives.contains(el.name)) {
      throw SvgError("unsupported primitive <" + el.name + ">", index);
    }
    if (el.name != "path") continue;
    if (el.attrs.contains("transform")) throw SvgError("transform attribute not supported", index);
    const auto d = el.attrs.find("d");
    if (d == el.attrs.end()) continue;

    std::optional<Anchor> anchor;
    if (auto a = el.attrs.find("data-anchor"); a != el.attrs.end()) {
      NumberScanner sc(a->second);
      auto ax = sc.number();
      auto ay = sc.number();
      if (!ax || !ay) throw SvgError("malformed data-anchor", index);
      anchor = Anchor{static_cast<int>(*ax), static_cast<int>(*ay)};
      if (anchor->x < 0 || anchor->y < 0 || anchor->x >= doc.grid || anchor->y >= doc.grid) {
        throw SvgError("data-anchor outside grid", index);
      }
    }
    std::optional<Rgb> stroke_color;
    std::optional<Rgb> fill_color;
    std::optional<double> width;
    if (auto s = el.attrs.find("stroke"); s != el.attrs.end()) stroke_color = parse_color(s->second, index);
    if (auto f = el.attrs.find("fill"); f != el.attrs.end()) fill_color = parse_color(f->second, index);
    if (auto w = el.attrs.find("stroke-width"); w != el.attrs.end()) {
      NumberScanner sc(w->second);
      auto n = sc.number();
      if (!n) throw SvgError("malformed stroke-width", index);
      width = *n / doc.canvas_size;
    }

    const double inv = 1.0 / doc.canvas_size;
    for (auto& sub : parse_path_data(d->second, index)) {
      StrokePath canvas = map_points(std::move(sub), [&](Point p) { return inv * p; });
      canvas.width = width;
      if (canvas.closed) {
        canvas.fill_color = fill_color;
      } else {
        canvas.stroke_color = stroke_color;
      }
      const auto pts = canvas.control_points();
      const Anchor a = anchor ? *anchor : discretize_anchor(bounding_box(pts).center(), doc.grid);
      doc.strokes.push_back({to_local(canvas, a, doc.grid), a});
    }
  }
  if (!have_root) throw SvgError("missing <svg> root element", 0);
  return doc;
}

}  // namespace svgen
