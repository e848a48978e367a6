#include "o2b/detection.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "category_map_data.hpp"
#include "json_util.hpp"
#include "o2b/io.hpp"

namespace o2b {

namespace {

using detail::json;

Detection parse_record(const json& j, const std::string& ctx) {
  detail::reject_unknown_keys(
      j, {"image_id", "class_id", "class_name", "bbox", "confidence", "image_w", "image_h"}, ctx);
  Detection d;
  d.image_id = detail::required<std::string>(j, "image_id", ctx);
  d.class_id = detail::required<std::size_t>(j, "class_id", ctx);
  d.class_name = detail::required<std::string>(j, "class_name", ctx);
  const auto box = detail::required<std::vector<double>>(j, "bbox", ctx);
  if (box.size() != 4) throw Error(Errc::parse_error, ctx + ": bbox needs 4 numbers");
  d.bbox = {box[0], box[1], box[2], box[3]};
  d.confidence = detail::required<double>(j, "confidence", ctx);
  d.image_w = detail::required<std::size_t>(j, "image_w", ctx);
  d.image_h = detail::required<std::size_t>(j, "image_h", ctx);
  if (d.image_id.empty()) throw Error(Errc::parse_error, ctx + ": empty image_id");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(Errc::parse_error, ctx + ": confidence outside [0, 1]");
  }
  if (d.image_w == 0 || d.image_h == 0) {
    throw Error(Errc::parse_error, ctx + ": image_w and image_h must be positive");
  }
  return d;
}

}  // namespace

double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  return w > 0 && h > 0 ? w * h : 0.0;
}

DetectionSet parse_detections(std::string_view jsonl, double threshold, std::string_view context) {
  DetectionSet out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    auto line = jsonl.substr(pos, nl == std::string_view::npos ? jsonl.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string ctx = std::string(context) + " line " + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(Errc::parse_error, ctx + ": " + e.what());
    }
    Detection d = parse_record(j, ctx);
    if (d.confidence < threshold) {
      ++out.below_threshold;
      continue;
    }
    BBox& b = d.bbox;
    if (!(b.x2 > b.x1) || !(b.y2 > b.y1)) {
      ++out.degenerate;
      continue;
    }
    const BBox clipped{std::max(b.x1, 0.0), std::max(b.y1, 0.0),
                       std::min(b.x2, static_cast<double>(d.image_w)),
                       std::min(b.y2, static_cast<double>(d.image_h))};
    if (!(clipped.x2 > clipped.x1) || !(clipped.y2 > clipped.y1)) {
      ++out.outside;
      continue;
    }
    if (clipped != b) {
      ++out.clamped;
      b = clipped;
    }
    out.detections.push_back(std::move(d));
  }
  return out;
}

DetectionSet load_detections(const std::filesystem::path& path, double threshold) {
  if (!std::filesystem::exists(path)) {
    throw Error(Errc::io_error, "detections file not found: " + path.string());
  }
  return parse_detections(io::read_text(path), threshold, path.string());
}

std::string detections_to_jsonl(const std::vector<Detection>& detections) {
  std::string out;
  for (const auto& d : detections) {
    detail::ordered_json j;
    j["image_id"] = d.image_id;
    j["class_id"] = d.class_id;
    j["class_name"] = d.class_name;
    j["bbox"] = {d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2};
    j["confidence"] = d.confidence;
    j["image_w"] = d.image_w;
    j["image_h"] = d.image_h;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<Detection> canonical_order(std::vector<Detection> detections) {
  auto key = [](const Detection& d) {
    return std::tie(d.image_id, d.class_id, d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2,
                    d.confidence, d.class_name, d.image_w, d.image_h);
  };
  std::stable_sort(detections.begin(), detections.end(),
                   [&](const Detection& a, const Detection& b) { return key(a) < key(b); });
  return detections;
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) {
      throw Error(Errc::invalid_argument, "duplicate class name '" + names_[i] + "'");
    }
  }
}

std::optional<std::size_t> ClassVocabulary::index_of(std::string_view name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CategoryMap CategoryMap::parse_csv(std::string_view text, std::string_view context) {
  const auto lines = io::csv_data_lines(text);
  if (lines.empty() ||
      io::split_csv_line(lines.front()) != std::vector<std::string>{"class_name", "category"}) {
    throw Error(Errc::parse_error, std::string(context) + ": header must be 'class_name,category'");
  }
  CategoryMap m;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = io::split_csv_line(lines[i]);
    if (f.size() != 2 || f[0].empty() || f[1].empty()) {
      throw Error(Errc::parse_error,
                  std::string(context) + ": row " + std::to_string(i) + " needs class_name,category");
    }
    if (!m.class_row_.emplace(f[0], m.rows_.size()).second) {
      throw Error(Errc::parse_error, std::string(context) + ": class '" + f[0] + "' mapped twice");
    }
    const auto cat = m.category_index(f[1]);
    if (cat) {
      ++m.counts_[*cat];
    } else {
      m.categories_.push_back(f[1]);
      m.counts_.push_back(1);
    }
    m.rows_.emplace_back(std::move(f[0]), std::move(f[1]));
  }
  return m;
}

CategoryMap CategoryMap::load(const std::filesystem::path& path) {
  return parse_csv(io::read_text(path), path.string());
}

const CategoryMap& CategoryMap::builtin() {
  static const CategoryMap map = parse_csv(detail::kCategoryMapCsv, "builtin category map");
  return map;
}

std::optional<std::string_view> CategoryMap::category_of(std::string_view class_name) const {
  const auto it = class_row_.find(class_name);
  if (it == class_row_.end()) return std::nullopt;
  return rows_[it->second].second;
}

std::optional<std::size_t> CategoryMap::category_index(std::string_view category) const {
  const auto it = std::find(categories_.begin(), categories_.end(), category);
  if (it == categories_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - categories_.begin());
}

std::size_t CategoryMap::constituent_count(std::string_view category) const {
  const auto idx = category_index(category);
  return idx ? counts_[*idx] : 0;
}

ClassVocabulary CategoryMap::vocabulary() const {
  std::vector<std::string> names;
  names.reserve(rows_.size());
  for (const auto& [cls, cat] : rows_) names.push_back(cls);
  return ClassVocabulary(std::move(names));
}

std::vector<CategoryGroup> categorize(const ClassVocabulary& vocabulary, const CategoryMap& map) {
  std::vector<CategoryGroup> groups;
  for (const auto& c : map.categories()) groups.push_back({c, {}});
  for (std::size_t k = 0; k < vocabulary.size(); ++k) {
    const auto cat = map.category_of(vocabulary.name(k));
    if (!cat) {
      throw Error(Errc::unmapped_class,
                  "class '" + vocabulary.name(k) + "' has no category in the map");
    }
    groups[*map.category_index(*cat)].class_ids.push_back(k);
  }
  return groups;
}

BoxStats box_stats(const Tensor<double>& map, const BBox& box) {
  if (map.rank() != 2) throw Error(Errc::shape_mismatch, "CAM map must be (H, W)");
  const double h = static_cast<double>(map.dim(0)), w = static_cast<double>(map.dim(1));
  const double xs = std::max(0.0, std::floor(box.x1)), xe = std::min(w, std::ceil(box.x2));
  const double ys = std::max(0.0, std::floor(box.y1)), ye = std::min(h, std::ceil(box.y2));
  if (!(xs < xe) || !(ys < ye)) {
    throw Error(Errc::invalid_argument, "box does not intersect the " + shape_str(map.shape()) +
                                            " map");
  }
  BoxStats s;
  double sum = 0, lo = 0;
  bool first = true;
  const std::size_t width = map.dim(1);
  for (auto y = static_cast<std::size_t>(ys); y < static_cast<std::size_t>(ye); ++y) {
    for (auto x = static_cast<std::size_t>(xs); x < static_cast<std::size_t>(xe); ++x) {
      const double v = map[y * width + x];
      s.max = first ? v : std::max(s.max, v);
      lo = first ? v : std::min(lo, v);
      first = false;
      sum += v;
      ++s.pixels;
    }
  }
  s.mean = std::clamp(sum / static_cast<double>(s.pixels), lo, s.max);
  return s;
}

double emocam_score(double max, double mean) noexcept { return max / (1.0 + (max - mean)); }

double score_box(const Tensor<double>& map, const BBox& box) {
  const auto s = box_stats(map, box);
  return emocam_score(s.max, s.mean);
}

OverlapMatrix overlap_matrix(const std::vector<Detection>& detections, const CategoryMap& map) {
  OverlapMatrix out;
  out.categories = map.categories();
  const std::size_t k = out.categories.size();
  std::vector<double> sums(k * k, 0.0);
  out.pairs.assign(k * k, 0);

  const auto ordered = canonical_order(detections);
  std::vector<std::size_t> cat(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const auto c = map.category_of(ordered[i].class_name);
    if (!c) {
      throw Error(Errc::unmapped_class,
                  "class '" + ordered[i].class_name + "' has no category in the map");
    }
    cat[i] = *map.category_index(*c);
  }
  std::size_t begin = 0;
  while (begin < ordered.size()) {
    std::size_t end = begin;
    while (end < ordered.size() && ordered[end].image_id == ordered[begin].image_id) ++end;
    for (std::size_t a = begin; a < end; ++a) {
      const double area = ordered[a].bbox.area();
      for (std::size_t b = begin; b < end; ++b) {
        if (a == b) continue;
        const std::size_t cell = cat[a] * k + cat[b];
        sums[cell] += 100.0 * intersection_area(ordered[a].bbox, ordered[b].bbox) / area;
        ++out.pairs[cell];
      }
    }
    begin = end;
  }
  out.values.resize(k * k);
  for (std::size_t i = 0; i < k * k; ++i) {
    if (out.pairs[i] > 0) out.values[i] = sums[i] / static_cast<double>(out.pairs[i]);
  }
  return out;
}

}  // namespace o2b
