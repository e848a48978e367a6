#include "o2b/io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "o2b/error.hpp"

namespace o2b::io {

namespace {

template <typename T, typename U>
std::vector<std::uint8_t> encode_le(std::span<const T> values) {
  static_assert(sizeof(T) == sizeof(U));
  std::vector<std::uint8_t> out(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    U bits = std::bit_cast<U>(values[i]);
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      out[i * sizeof(U) + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
  }
  return out;
}

template <typename T, typename U>
std::vector<T> decode_le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % sizeof(U) != 0) {
    throw Error(Errc::parse_error, "byte count " + std::to_string(bytes.size()) +
                                       " is not a multiple of " + std::to_string(sizeof(U)));
  }
  std::vector<T> out(bytes.size() / sizeof(U));
  for (std::size_t i = 0; i < out.size(); ++i) {
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      bits |= static_cast<U>(bytes[i * sizeof(U) + b]) << (8 * b);
    }
    out[i] = std::bit_cast<T>(bits);
  }
  return out;
}

void write_raw(const std::filesystem::path& path, const char* data, std::size_t size) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw Error(Errc::io_error, "short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_raw(path, text.data(), text.size());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  write_raw(path, reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<std::uint8_t> encode_f32_le(std::span<const float> values) {
  return encode_le<float, std::uint32_t>(values);
}
std::vector<float> decode_f32_le(std::span<const std::uint8_t> bytes) {
  return decode_le<float, std::uint32_t>(bytes);
}
std::vector<std::uint8_t> encode_f64_le(std::span<const double> values) {
  return encode_le<double, std::uint64_t>(values);
}
std::vector<double> decode_f64_le(std::span<const std::uint8_t> bytes) {
  return decode_le<double, std::uint64_t>(bytes);
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(Errc::parse_error, "unterminated quote in CSV line");
  fields.push_back(std::move(cur));
  return fields;
}

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\n") == std::string_view::npos) return std::string(value);
  std::string s = "\"";
  for (char c : value) {
    if (c == '"') s += '"';
    s += c;
  }
  return s + "\"";
}

std::string csv_row(std::initializer_list<std::string_view> fields) {
  std::string s;
  bool first = true;
  for (auto f : fields) {
    if (!first) s += ',';
    s += csv_field(f);
    first = false;
  }
  return s + "\n";
}

std::string csv_row(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) s += ',';
    s += csv_field(fields[i]);
  }
  return s + "\n";
}

std::vector<std::string> csv_data_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty() && line.front() != '#') lines.emplace_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

double parse_double(std::string_view text, std::string_view context) {
  double v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(Errc::parse_error,
                std::string(context) + ": '" + std::string(text) + "' is not a number");
  }
  return v;
}

std::size_t parse_size(std::string_view text, std::string_view context) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw Error(Errc::parse_error, std::string(context) + ": '" + std::string(text) +
                                       "' is not a non-negative integer");
  }
  return v;
}

}  // namespace o2b::io
