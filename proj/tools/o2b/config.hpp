#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "o2b/inference.hpp"
#include "o2b/object2brain.hpp"

namespace o2b::cli {

struct ModelEntry {
  std::string name;
  std::vector<std::filesystem::path> bundles;      // one per seed
  std::vector<std::filesystem::path> predictions;  // explicit CSVs for correlate
};

/// Declarative run description. Relative paths resolve against the config
/// file's directory.
struct RunConfig {
  std::filesystem::path source;  // config file, empty when none
  std::string source_text;

  std::filesystem::path output_dir = "out";
  std::size_t jobs = 1;

  std::filesystem::path stimuli_manifest;
  std::filesystem::path stimulus_table;

  std::filesystem::path corpus_manifest;
  std::filesystem::path detections;
  double threshold = kDefaultConfidenceThreshold;
  GradientOf gradient = GradientOf::logit;

  std::filesystem::path category_map;  // empty: built-in map
  std::vector<std::string> category_selection;

  std::vector<std::string> analysis_models;  // empty: every model
  std::vector<std::string> target_layers;    // empty: bundle metadata
  std::size_t top_x = kDefaultTopX;
  AblationStrategy strategy = AblationStrategy::automatic;

  std::vector<ModelEntry> models;

  const ModelEntry& model(std::string_view name) const;
  std::vector<const ModelEntry*> analysed_models() const;
};

RunConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       std::string_view context = "config");
RunConfig load_config(const std::filesystem::path& path);

}  // namespace o2b::cli
