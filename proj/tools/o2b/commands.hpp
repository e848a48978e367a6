#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "o2b/config.hpp"
#include "o2b/provenance.hpp"

namespace o2b::cli {

/// A loaded run configuration plus command-line overrides.
struct Context {
  RunConfig config;
  std::filesystem::path output_dir;
  std::size_t jobs = 1;
  std::string config_hash = "none";

  Provenance provenance(std::string command, const std::vector<std::filesystem::path>& bundles) const;
};

void cmd_predict(const Context& ctx);
void cmd_correlate(const Context& ctx);
void cmd_emocam(const Context& ctx);
void cmd_ablate(const Context& ctx);
void cmd_object2brain(const Context& ctx);
void cmd_overlap(const Context& ctx);

/// Re-renders an SVG from a figure JSON written by correlate, overlap or o2b.
void cmd_render(const std::filesystem::path& input, const std::filesystem::path& output);

struct BenchResult {
  std::string node_id;
  std::size_t filters = 0;
  std::size_t images = 0;
  std::size_t repeats = 0;
  double incremental_ms = 0;
  double full_ms = 0;
  double speedup = 0;
  bool identical = false;  // both sweeps produced the same deltas
};

/// Single-threaded ablation sweep on the toy network's head-adjacent layer,
/// resumed from cached activations versus recomputed from the input.
BenchResult run_bench(std::size_t repeats, std::uint64_t seed);
std::string to_json(const BenchResult& r);

/// Writes a self-contained toy workspace (bundles, corpora, detections,
/// stimulus table, config.toml).
void write_synthetic_workspace(const std::filesystem::path& dir, std::uint64_t seed);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args);

}  // namespace o2b::cli
