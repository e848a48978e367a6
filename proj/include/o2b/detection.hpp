#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "o2b/tensor.hpp"

namespace o2b {

/// Detector confidence below which records are discarded.
inline constexpr double kDefaultConfidenceThreshold = 0.25;

/// Pixel box (x1, y1, x2, y2), half-open.
struct BBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const noexcept { return x2 - x1; }
  double height() const noexcept { return y2 - y1; }
  double area() const noexcept { return width() * height(); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

double intersection_area(const BBox& a, const BBox& b) noexcept;

struct Detection {
  std::string image_id;
  std::size_t class_id = 0;
  std::string class_name;
  BBox bbox;
  double confidence = 0;
  std::size_t image_w = 0;
  std::size_t image_h = 0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct DetectionSet {
  std::vector<Detection> detections;  // file order
  std::size_t below_threshold = 0;
  std::size_t degenerate = 0;  // x2 <= x1 or y2 <= y1
  std::size_t outside = 0;     // no area left after clamping to the image
  std::size_t clamped = 0;     // kept, but clipped to the image
};

DetectionSet parse_detections(std::string_view jsonl, double threshold = kDefaultConfidenceThreshold,
                              std::string_view context = "detections");
DetectionSet load_detections(const std::filesystem::path& path,
                             double threshold = kDefaultConfidenceThreshold);
std::string detections_to_jsonl(const std::vector<Detection>& detections);

/// Sorted by image_id, then class_id, box, confidence; makes reductions
/// independent of file order.
std::vector<Detection> canonical_order(std::vector<Detection> detections);

class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  explicit ClassVocabulary(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t id) const { return names_.at(id); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// class_name -> category, parsed from `class_name,category` CSV. Row order
/// doubles as the detector's class index order.
class CategoryMap {
 public:
  static CategoryMap parse_csv(std::string_view text, std::string_view context = "category map");
  static CategoryMap load(const std::filesystem::path& path);
  /// The 601-class, 34-category mapping shipped with the library.
  static const CategoryMap& builtin();

  std::optional<std::string_view> category_of(std::string_view class_name) const;
  /// Categories in order of first appearance.
  const std::vector<std::string>& categories() const noexcept { return categories_; }
  std::optional<std::size_t> category_index(std::string_view category) const;
  std::size_t constituent_count(std::string_view category) const;
  /// Class names in row order.
  ClassVocabulary vocabulary() const;

 private:
  std::vector<std::pair<std::string, std::string>> rows_;
  std::map<std::string, std::size_t, std::less<>> class_row_;
  std::vector<std::string> categories_;
  std::vector<std::size_t> counts_;
};

struct CategoryGroup {
  std::string category;
  std::vector<std::size_t> class_ids;
};

/// Partition of the vocabulary into categories (category order of the map).
std::vector<CategoryGroup> categorize(const ClassVocabulary& vocabulary, const CategoryMap& map);

/// Values of a normalized CAM map inside a box.
struct BoxStats {
  double max = 0;
  double mean = 0;
  std::size_t pixels = 0;
};

/// Pixel (x, y) is inside when floor(x1) <= x < ceil(x2) and likewise for y.
BoxStats box_stats(const Tensor<double>& map, const BBox& box);

/// M / (1 + (M - A)).
double emocam_score(double max, double mean) noexcept;

/// emocam_score over the box; errors when the box misses the map.
double score_box(const Tensor<double>& map, const BBox& box);

/// Category x category mean of 100 * area(b_r & b_c) / area(b_r) over every
/// ordered pair of distinct detections sharing an image.
struct OverlapMatrix {
  std::vector<std::string> categories;
  std::vector<std::optional<double>> values;  // row-major K x K
  std::vector<std::size_t> pairs;

  std::optional<double> at(std::size_t r, std::size_t c) const {
    return values.at(r * categories.size() + c);
  }
};

OverlapMatrix overlap_matrix(const std::vector<Detection>& detections, const CategoryMap& map);

}  // namespace o2b
