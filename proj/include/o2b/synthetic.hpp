#pragma once

// Deterministic fixtures: small networks, stimulus tables, corpora and
// detections built from a seed.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "o2b/corpus.hpp"
#include "o2b/detection.hpp"
#include "o2b/model_graph.hpp"
#include "o2b/stats.hpp"

namespace o2b::synth {

/// Uniform double in [lo, hi) from the top 53 bits of the engine.
double uniform(std::mt19937_64& rng, double lo, double hi);

/// Three conv layers (4, 6, 6 filters) on a 3x12x12 input. Channel
/// kToyDeadChannel of relu2 is dead: zero weights and a negative bias.
/// Target layers: relu1, relu2, relu3 (relu3 feeds the head directly).
ModelGraph toy_network(std::uint64_t seed);
inline constexpr std::size_t kToyDeadChannel = 2;

/// ResNet-style block with folded batchnorm and a residual add on 3x8x8.
ModelGraph residual_network(std::uint64_t seed);

/// conv -> relu -> flatten -> linear -> sigmoid on 1x3x3 with fixed weights.
ModelGraph tiny_network();

/// AlexNet layout (node ids features.0 .. features.12, conv widths
/// 64/192/384/256/256) on a 3x64x64 input with random weights.
ModelGraph alexnet_like(std::uint64_t seed);

/// 48 stimuli, 12 per condition, binary true labels and continuous decoder
/// outputs; ids stim_00 .. stim_47.
StimulusTable stimulus_table(std::uint64_t seed);

/// One image per id with values uniform in [-1, 1).
Corpus random_corpus(const std::vector<std::string>& ids, const Shape& shape, std::uint64_t seed);

/// 0..max_per_image detections per image over the first `classes_used`
/// vocabulary classes, confidence >= 0.25, boxes inside a w x h image.
std::vector<Detection> random_detections(const std::vector<std::string>& ids,
                                         const ClassVocabulary& vocabulary,
                                         std::size_t classes_used, std::size_t max_per_image,
                                         std::size_t image_w, std::size_t image_h,
                                         std::uint64_t seed);

}  // namespace o2b::synth
