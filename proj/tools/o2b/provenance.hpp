#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace o2b::cli {

inline constexpr std::string_view kToolVersion = "0.1.0";

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view text);

/// Digest of a bundle's model.json followed by weights.bin.
std::string bundle_hash(const std::filesystem::path& bundle_dir);

/// Lines written at the top of every output.
struct Provenance {
  std::string command;
  std::string config_hash;
  std::string bundle_hash;

  std::vector<std::string> lines() const;
};

/// Combines several bundle digests in the given order; "none" for no bundles.
std::string combined_bundle_hash(const std::vector<std::filesystem::path>& bundles);

}  // namespace o2b::cli
