#include "o2b/corpus.hpp"

#include <algorithm>

#include "json_util.hpp"
#include "o2b/io.hpp"

namespace o2b {

namespace {

using detail::json;
using detail::ordered_json;

void sort_and_check(std::vector<CorpusEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].image_id == entries[i - 1].image_id) {
      throw Error(Errc::parse_error, "duplicate image_id '" + entries[i].image_id + "' in corpus");
    }
  }
}

}  // namespace

Corpus Corpus::load(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) {
    throw Error(Errc::io_error, "corpus manifest not found: " + manifest.string());
  }
  const json m = detail::parse_json(io::read_text(manifest), manifest.string());
  detail::reject_unknown_keys(m, {"format", "images", "preprocessing"}, "corpus manifest");
  if (const auto f = m.find("format"); f != m.end() && *f != "o2b-corpus-v1") {
    throw Error(Errc::parse_error, "corpus manifest: unsupported format " + f->dump());
  }
  Corpus c;
  if (const auto p = m.find("preprocessing"); p != m.end()) c.preprocessing_ = p->dump();
  const json images = detail::required<json>(m, "images", "corpus manifest");
  if (!images.is_array()) throw Error(Errc::parse_error, "corpus manifest: images must be an array");
  const auto base = manifest.parent_path();
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string ctx = "corpus manifest images[" + std::to_string(i) + "]";
    detail::reject_unknown_keys(images[i], {"image_id", "path", "shape"}, ctx);
    CorpusEntry e;
    e.image_id = detail::required<std::string>(images[i], "image_id", ctx);
    e.path = base / detail::required<std::string>(images[i], "path", ctx);
    e.shape = detail::required<Shape>(images[i], "shape", ctx);
    if (e.image_id.empty()) throw Error(Errc::parse_error, ctx + ": empty image_id");
    if (e.shape.size() != 3) {
      throw Error(Errc::shape_mismatch,
                  "image '" + e.image_id + "' shape must be CHW, got " + shape_str(e.shape));
    }
    c.entries_.push_back(std::move(e));
  }
  sort_and_check(c.entries_);
  return c;
}

Corpus Corpus::from_tensors(std::vector<std::pair<std::string, Tensor<float>>> images) {
  std::sort(images.begin(), images.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  Corpus c;
  for (auto& [id, t] : images) {
    c.entries_.push_back({id, {}, t.shape()});
    c.memory_.push_back(std::move(t));
  }
  sort_and_check(c.entries_);
  return c;
}

std::optional<std::size_t> Corpus::find(std::string_view image_id) const {
  const auto it = std::lower_bound(
      entries_.begin(), entries_.end(), image_id,
      [](const CorpusEntry& e, std::string_view id) { return e.image_id < id; });
  if (it == entries_.end() || it->image_id != image_id) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

Tensor<float> Corpus::image(std::size_t i) const {
  const auto& e = entries_.at(i);
  if (!memory_.empty()) return memory_[i];
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_bytes(e.path);
  } catch (const Error&) {
    throw Error(Errc::io_error, "image '" + e.image_id + "': cannot read " + e.path.string());
  }
  if (bytes.size() != shape_numel(e.shape) * sizeof(float)) {
    throw Error(Errc::shape_mismatch, "image '" + e.image_id + "': blob has " +
                                          std::to_string(bytes.size()) + " bytes, shape " +
                                          shape_str(e.shape) + " needs " +
                                          std::to_string(shape_numel(e.shape) * sizeof(float)));
  }
  auto values = io::decode_f32_le(bytes);
  try {
    return Tensor<float>(e.shape, std::move(values));
  } catch (const Error& err) {
    throw Error(err.code(), "image '" + e.image_id + "': " + err.what());
  }
}

void Corpus::save(const std::filesystem::path& manifest, const std::string& blob_dir) const {
  ordered_json m;
  m["format"] = "o2b-corpus-v1";
  if (!preprocessing_.empty()) m["preprocessing"] = ordered_json::parse(preprocessing_);
  ordered_json images = ordered_json::array();
  const auto base = manifest.parent_path();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const std::string rel = blob_dir + "/" + e.image_id + ".f32";
    const Tensor<float> img = image(i);
    io::write_bytes(base / rel, io::encode_f32_le(img.data()));
    ordered_json je;
    je["image_id"] = e.image_id;
    je["path"] = rel;
    je["shape"] = e.shape;
    images.push_back(std::move(je));
  }
  m["images"] = std::move(images);
  io::write_text(manifest, m.dump(2) + "\n");
}

PredictionTable::PredictionTable(std::vector<std::pair<std::string, double>> rows)
    : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    if (rows_[i].first == rows_[i - 1].first) {
      throw Error(Errc::parse_error, "duplicate image_id '" + rows_[i].first + "' in predictions");
    }
  }
}

std::optional<double> PredictionTable::find(std::string_view image_id) const {
  const auto it = std::lower_bound(
      rows_.begin(), rows_.end(), image_id,
      [](const auto& row, std::string_view id) { return row.first < id; });
  if (it == rows_.end() || it->first != image_id) return std::nullopt;
  return it->second;
}

std::string PredictionTable::to_csv(const std::vector<std::string>& comments) const {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "image_id,prediction\n";
  for (const auto& [id, v] : rows_) out += io::csv_row({id, io::format_double(v)});
  return out;
}

PredictionTable PredictionTable::from_csv(std::string_view text, std::string_view context) {
  const auto lines = io::csv_data_lines(text);
  if (lines.empty() || io::split_csv_line(lines.front()) !=
                           std::vector<std::string>{"image_id", "prediction"}) {
    throw Error(Errc::parse_error,
                std::string(context) + ": header must be 'image_id,prediction'");
  }
  std::vector<std::pair<std::string, double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split_csv_line(lines[i]);
    if (f.size() != 2) {
      throw Error(Errc::parse_error,
                  std::string(context) + ": row " + std::to_string(i) + " needs 2 fields");
    }
    rows.emplace_back(f[0], io::parse_double(f[1], context));
  }
  return PredictionTable(std::move(rows));
}

PredictionTable PredictionTable::read(const std::filesystem::path& path) {
  return from_csv(io::read_text(path), path.string());
}

}  // namespace o2b
