#include "o2b/provenance.hpp"

#include <array>
#include <cstdio>

#include <openssl/evp.h>

#include "o2b/error.hpp"
#include "o2b/io.hpp"

namespace o2b::cli {

namespace {

class Digest {
 public:
  Digest() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error(Errc::io_error, "cannot initialise SHA-256");
    }
  }
  ~Digest() { EVP_MD_CTX_free(ctx_); }
  Digest(const Digest&) = delete;
  Digest& operator=(const Digest&) = delete;

  void update(std::span<const unsigned char> bytes) {
    if (EVP_DigestUpdate(ctx_, bytes.data(), bytes.size()) != 1) {
      throw Error(Errc::io_error, "SHA-256 update failed");
    }
  }

  std::string hex() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, md.data(), &len) != 1) {
      throw Error(Errc::io_error, "SHA-256 final failed");
    }
    std::string out;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(buf, sizeof buf, "%02x", md[i]);
      out += buf;
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
  Digest d;
  d.update(bytes);
  return d.hex();
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string bundle_hash(const std::filesystem::path& bundle_dir) {
  Digest d;
  for (const char* name : {"model.json", "weights.bin"}) {
    const auto path = bundle_dir / name;
    if (!std::filesystem::exists(path)) continue;
    const auto bytes = io::read_bytes(path);
    d.update(bytes);
  }
  return d.hex();
}

std::string combined_bundle_hash(const std::vector<std::filesystem::path>& bundles) {
  if (bundles.empty()) return "none";
  if (bundles.size() == 1) return bundle_hash(bundles.front());
  std::string joined;
  for (const auto& b : bundles) joined += bundle_hash(b) + "\n";
  return sha256_hex(joined);
}

std::vector<std::string> Provenance::lines() const {
  return {"o2b " + std::string(kToolVersion) + " " + command,
          "config sha256 " + config_hash,
          "bundle sha256 " + bundle_hash};
}

}  // namespace o2b::cli
