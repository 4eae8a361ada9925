#pragma once

// Binary tensor container, little-endian:
//
//   "DRVT" | version u32 | dtype u32 | rank u32 | rank x u64 extents | payload
//
// dtype 0 = float32, 1 = float64, 2 = uint8 (segmentation category ids).
// The payload is row-major. Checkpoints append a name-index trailer after
// the payload (see checkpoint.hpp).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "drivegaze/tensor.hpp"

namespace drivegaze {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DType : std::uint32_t { Float32 = 0, Float64 = 1, UInt8 = 2 };

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kMaxRank = 8;

std::size_t container_header_size(std::size_t rank);
std::size_t dtype_size(DType dtype);

/// Category ids on an H x W grid.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

void write_tensor(std::ostream& out, const Tensor& tensor, DType dtype = DType::Float32);
/// Reads one container from the stream; any dtype decodes to doubles.
Tensor read_tensor(std::istream& in, DType* dtype_out = nullptr);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, DType dtype = DType::Float32);
/// Rejects bad magic, unknown version/dtype, rank > 8, truncation and trailing bytes.
Tensor read_tensor(const std::filesystem::path& path);

void write_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_labels(const std::filesystem::path& path);

namespace io {

void put_u32(std::ostream& out, std::uint32_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f32(std::ostream& out, float v);
void put_string(std::ostream& out, const std::string& s);  // u32 length + bytes

std::uint32_t get_u32(std::istream& in);
std::uint64_t get_u64(std::istream& in);
float get_f32(std::istream& in);
std::string get_string(std::istream& in, std::size_t max_len = 1 << 20);

}  // namespace io

}  // namespace drivegaze
