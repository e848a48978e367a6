#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "o2b/tensor.hpp"

namespace o2b {

struct CorpusEntry {
  std::string image_id;
  std::filesystem::path path;  // resolved against the manifest directory
  Shape shape;
};

/// Preprocessed image tensors, ordered by image_id. Images are read lazily
/// from little-endian float32 CHW blobs, or held in memory for fixtures.
class Corpus {
 public:
  Corpus() = default;

  static Corpus load(const std::filesystem::path& manifest);
  static Corpus from_tensors(std::vector<std::pair<std::string, Tensor<float>>> images);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::vector<CorpusEntry>& entries() const noexcept { return entries_; }
  const std::string& id(std::size_t i) const { return entries_.at(i).image_id; }
  std::optional<std::size_t> find(std::string_view image_id) const;

  /// Loads image i; errors name the image_id.
  Tensor<float> image(std::size_t i) const;

  /// Raw JSON of the manifest's optional "preprocessing" object ("" if absent).
  const std::string& preprocessing() const noexcept { return preprocessing_; }

  /// Writes the manifest and, for in-memory corpora, one blob per image under
  /// `blob_dir` (relative to the manifest directory).
  void save(const std::filesystem::path& manifest, const std::string& blob_dir = "images") const;

 private:
  std::vector<CorpusEntry> entries_;
  std::vector<Tensor<float>> memory_;
  std::string preprocessing_;
};

/// Scalar predictions keyed by image_id, kept sorted by id.
class PredictionTable {
 public:
  PredictionTable() = default;
  explicit PredictionTable(std::vector<std::pair<std::string, double>> rows);

  const std::vector<std::pair<std::string, double>>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  std::optional<double> find(std::string_view image_id) const;

  /// `image_id,prediction` with optional leading '#' comment lines.
  std::string to_csv(const std::vector<std::string>& comments = {}) const;
  static PredictionTable from_csv(std::string_view text, std::string_view context = "predictions");
  static PredictionTable read(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, double>> rows_;
};

}  // namespace o2b
