#include "blastcast/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "blastcast/error.hpp"

namespace blastcast::io {

namespace {

template <typename U>
U to_little(U v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    U out = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      out = static_cast<U>((out << 8) | ((v >> (8 * b)) & 0xff));
    }
    return out;
  }
}

template <typename U>
void append_raw(std::string& out, U v) {
  v = to_little(v);
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

std::uintmax_t checked_size(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) {
    throw Error(ErrorKind::kMissingInput, "cannot stat " + path.string());
  }
  return size;
}

}  // namespace

void append_f32(std::string& out, float v) {
  append_raw(out, std::bit_cast<std::uint32_t>(v));
}
void append_u32(std::string& out, std::uint32_t v) { append_raw(out, v); }
void append_i64(std::string& out, std::int64_t v) {
  append_raw(out, static_cast<std::uint64_t>(v));
}

std::string_view ByteReader::take(std::size_t n) {
  if (bytes_.size() - pos_ < n) {
    throw CorruptDatasetError("unexpected end of binary record");
  }
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  std::memcpy(&v, take(4).data(), 4);
  return to_little(v);
}

std::int64_t ByteReader::i64() {
  std::uint64_t v;
  std::memcpy(&v, take(8).data(), 8);
  return static_cast<std::int64_t>(to_little(v));
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kMissingInput, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kMissingInput, "write failed: " + path.string());
}

void write_f32(const std::filesystem::path& path, std::span<const float> data) {
  std::string bytes;
  bytes.reserve(data.size() * 4);
  for (float v : data) append_f32(bytes, v);
  write_file(path, bytes);
}

std::vector<float> read_f32(const std::filesystem::path& path,
                            std::size_t count) {
  const auto size = checked_size(path);
  if (size != count * 4) {
    throw CorruptDatasetError(path.string() + ": expected " +
                              std::to_string(count * 4) + " bytes, found " +
                              std::to_string(size));
  }
  const std::string bytes = read_file(path);
  ByteReader reader(bytes);
  std::vector<float> out(count);
  for (float& v : out) v = reader.f32();
  return out;
}

void write_u8(const std::filesystem::path& path,
              std::span<const std::uint8_t> data) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(data.data()),
                                    data.size()));
}

std::vector<std::uint8_t> read_u8(const std::filesystem::path& path,
                                  std::size_t count) {
  const auto size = checked_size(path);
  if (size != count) {
    throw CorruptDatasetError(path.string() + ": expected " +
                              std::to_string(count) + " bytes, found " +
                              std::to_string(size));
  }
  const std::string bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CorruptDatasetError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

}  // namespace blastcast::io
