#include "o2b/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "o2b/error.hpp"

namespace o2b::cli {

namespace {

using json = nlohmann::ordered_json;

std::string num(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string rgb(double r, double g, double b) {
  char buf[16];
  auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255)); };
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c(r), c(g), c(b));
  return buf;
}

// White at 0, red towards +1, blue towards -1.
std::string diverging(double v) {
  const double t = std::clamp(std::abs(v), 0.0, 1.0);
  return v >= 0 ? rgb(1, 1 - 0.8 * t, 1 - 0.8 * t) : rgb(1 - 0.8 * t, 1 - 0.8 * t, 1);
}

std::string sequential(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return rgb(1 - 0.1 * t, 1 - 0.55 * t, 1 - 0.9 * t);
}

std::string header(double w, double h, const json& doc) {
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (const auto it = doc.find("provenance"); it != doc.end()) {
    for (const auto& line : *it) out += "<!-- " + escape(line.get<std::string>()) + " -->\n";
  }
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, 0) + "\" height=\"" +
         num(h, 0) + "\" viewBox=\"0 0 " + num(w, 0) + " " + num(h, 0) +
         "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out;
}

std::string text(double x, double y, std::string_view s, int size, std::string_view anchor = "start",
                 double rotate = 0) {
  std::string out = "<text x=\"" + num(x, 1) + "\" y=\"" + num(y, 1) + "\" font-size=\"" +
                    std::to_string(size) + "\" text-anchor=\"" + std::string(anchor) + "\"";
  if (rotate != 0) {
    out += " transform=\"rotate(" + num(rotate, 0) + " " + num(x, 1) + " " + num(y, 1) + ")\"";
  }
  return out + ">" + escape(s) + "</text>\n";
}

std::string rect(double x, double y, double w, double h, std::string_view fill) {
  return "<rect x=\"" + num(x, 1) + "\" y=\"" + num(y, 1) + "\" width=\"" + num(w, 1) +
         "\" height=\"" + num(h, 1) + "\" fill=\"" + std::string(fill) +
         "\" stroke=\"#cccccc\" stroke-width=\"0.5\"/>\n";
}

std::string correlation(const json& doc) {
  const auto& targets = doc.at("targets");
  const auto& rows = doc.at("rows");
  const double cw = 46, ch = 30, left = 160, top = 130;
  const double w = left + cw * static_cast<double>(targets.size()) + 20;
  const double h = top + ch * static_cast<double>(rows.size()) + 40;
  std::string out = header(w, h, doc);
  out += text(left, 20, "Spearman R (mean over seeds), * p<0.05, ** p<0.01, *** p<0.001", 12);
  for (std::size_t j = 0; j < targets.size(); ++j) {
    out += text(left + cw * (static_cast<double>(j) + 0.5), top - 6, targets[j].get<std::string>(),
                10, "start", -60);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double y = top + ch * static_cast<double>(i);
    out += text(left - 6, y + ch / 2 + 4, rows[i].at("model").get<std::string>(), 11, "end");
    const auto& cells = rows[i].at("cells");
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const double x = left + cw * static_cast<double>(j);
      const auto& c = cells[j];
      if (!c.at("defined").get<bool>()) {
        out += rect(x, y, cw, ch, "#dddddd");
        out += text(x + cw / 2, y + ch / 2 + 4, "n/a", 9, "middle");
        continue;
      }
      const double r = c.at("mean_r").get<double>();
      out += rect(x, y, cw, ch, diverging(r));
      out += text(x + cw / 2, y + ch / 2, num(r) + c.at("stars").get<std::string>(), 9, "middle");
      out += text(x + cw / 2, y + ch / 2 + 10, "(" + num(c.at("std_r").get<double>()) + ")", 8,
                  "middle");
    }
  }
  return out + "</svg>\n";
}

std::string overlap(const json& doc) {
  const auto& cats = doc.at("categories");
  const auto& values = doc.at("values");
  const double cs = 22, left = 150, top = 150;
  const double n = static_cast<double>(cats.size());
  std::string out = header(left + cs * n + 20, top + cs * n + 20, doc);
  out += text(left, 20, "Mean overlap, % of row-category box area", 12);
  for (std::size_t j = 0; j < cats.size(); ++j) {
    out += text(left + cs * (static_cast<double>(j) + 0.6), top - 6, cats[j].get<std::string>(), 10,
                "start", -60);
    out += text(left - 6, top + cs * (static_cast<double>(j) + 0.7), cats[j].get<std::string>(), 10,
                "end");
  }
  for (std::size_t r = 0; r < cats.size(); ++r) {
    for (std::size_t c = 0; c < cats.size(); ++c) {
      const auto& v = values.at(r).at(c);
      const double x = left + cs * static_cast<double>(c), y = top + cs * static_cast<double>(r);
      if (v.is_null()) {
        out += rect(x, y, cs, cs, "#eeeeee");
        continue;
      }
      const double pct = v.get<double>();
      out += rect(x, y, cs, cs, sequential(pct / 100));
      out += text(x + cs / 2, y + cs / 2 + 3, num(pct, 0), 7, "middle");
    }
  }
  return out + "</svg>\n";
}

// Upward triangles for positive contributions, downward for negative, area
// scaled by magnitude relative to the largest point.
std::string scatter(const json& doc) {
  const auto& xs = doc.at("x_labels");
  const auto& ys = doc.at("categories");
  const auto& points = doc.at("points");
  const double cw = 40, ch = 34, left = 150, top = 130;
  const double w = left + cw * static_cast<double>(xs.size()) + 20;
  const double h = top + ch * static_cast<double>(ys.size()) + 30;
  double peak = 0;
  for (const auto& p : points) peak = std::max(peak, std::abs(p.at("value").get<double>()));
  std::string out = header(w, h, doc);
  out += text(left, 20, doc.value("title", std::string("Category contributions")), 12);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    out += text(left + cw * (static_cast<double>(j) + 0.5), top - 6, xs[j].get<std::string>(), 10,
                "start", -60);
  }
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double y = top + ch * (static_cast<double>(i) + 0.5);
    out += text(left - 8, y + 4, ys[i].get<std::string>(), 11, "end");
    out += "<line x1=\"" + num(left, 1) + "\" y1=\"" + num(y, 1) + "\" x2=\"" + num(w - 20, 1) +
           "\" y2=\"" + num(y, 1) + "\" stroke=\"#eeeeee\"/>\n";
  }
  for (const auto& p : points) {
    const double v = p.at("value").get<double>();
    if (v == 0 || peak == 0) continue;
    const double cx = left + cw * (p.at("x").get<double>() + 0.5);
    const double cy = top + ch * (p.at("y").get<double>() + 0.5);
    const double r = 3 + 11 * std::sqrt(std::abs(v) / peak);
    const bool up = v > 0;
    const double dx = up ? -4 : 4;
    const double tip = up ? cy - r : cy + r, base = up ? cy + r * 0.6 : cy - r * 0.6;
    out += "<polygon points=\"" + num(cx + dx, 1) + "," + num(tip, 1) + " " + num(cx + dx - r, 1) +
           "," + num(base, 1) + " " + num(cx + dx + r, 1) + "," + num(base, 1) + "\" fill=\"" +
           (up ? "#c0392b" : "#2e6da4") + "\" fill-opacity=\"0.8\"/>\n";
  }
  return out + "</svg>\n";
}

}  // namespace

std::string render_svg(const json& doc) {
  const auto kind = doc.value("kind", std::string());
  try {
    if (kind == "correlation_table") return correlation(doc);
    if (kind == "overlap_matrix") return overlap(doc);
    if (kind == "category_scatter") return scatter(doc);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, "malformed " + kind + " document: " + e.what());
  }
  throw Error(Errc::parse_error, "cannot render document of kind '" + kind + "'");
}

}  // namespace o2b::cli
