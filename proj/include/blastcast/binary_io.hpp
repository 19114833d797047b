#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace blastcast::io {

// Raw arrays are IEEE-754 little-endian regardless of host byte order.

void write_f32(const std::filesystem::path& path, std::span<const float> data);

/// Reads exactly `count` values; throws CorruptDatasetError when the file
/// size disagrees.
std::vector<float> read_f32(const std::filesystem::path& path,
                            std::size_t count);

void write_u8(const std::filesystem::path& path,
              std::span<const std::uint8_t> data);
std::vector<std::uint8_t> read_u8(const std::filesystem::path& path,
                                  std::size_t count);

void append_f32(std::string& out, float v);
void append_u32(std::string& out, std::uint32_t v);
void append_i64(std::string& out, std::int64_t v);

/// Cursor over a little-endian byte buffer. Throws CorruptDatasetError on
/// reads past the end.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32();
  std::int64_t i64();
  float f32();
  std::string_view take(std::size_t n);
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace blastcast::io
