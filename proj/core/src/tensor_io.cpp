#include "drivegaze/tensor_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace drivegaze {

namespace {
constexpr std::array<char, 4> kMagic{'D', 'R', 'V', 'T'};
}

std::size_t container_header_size(std::size_t rank) { return 4 + 4 + 4 + 4 + 8 * rank; }

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::Float32: return 4;
    case DType::Float64: return 8;
    case DType::UInt8: return 1;
  }
  throw FormatError("unknown dtype");
}

namespace io {

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw FormatError("unexpected end of file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void put_u32(std::ostream& out, std::uint32_t v) { put_le(out, v); }
void put_u64(std::ostream& out, std::uint64_t v) { put_le(out, v); }
void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }
void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) { return get_le<std::uint32_t>(in); }
std::uint64_t get_u64(std::istream& in) { return get_le<std::uint64_t>(in); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }
std::string get_string(std::istream& in, std::size_t max_len) {
  const std::uint32_t n = get_u32(in);
  if (n > max_len) throw FormatError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw FormatError("unexpected end of file in string");
  return s;
}

}  // namespace io

void write_tensor(std::ostream& out, const Tensor& tensor, DType dtype) {
  if (tensor.rank() == 0 || tensor.rank() > kMaxRank) throw FormatError("tensor rank must be in [1, 8]");
  out.write(kMagic.data(), kMagic.size());
  io::put_u32(out, kContainerVersion);
  io::put_u32(out, static_cast<std::uint32_t>(dtype));
  io::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
  for (auto extent : tensor.shape()) io::put_u64(out, extent);
  switch (dtype) {
    case DType::Float32:
      for (double v : tensor.data()) io::put_f32(out, static_cast<float>(v));
      break;
    case DType::Float64:
      for (double v : tensor.data()) io::put_u64(out, std::bit_cast<std::uint64_t>(v));
      break;
    case DType::UInt8:
      for (double v : tensor.data()) {
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
          throw FormatError("uint8 container requires integer values in [0, 255]");
        }
        out.put(static_cast<char>(static_cast<std::uint8_t>(v)));
      }
      break;
  }
  if (!out) throw FormatError("write failed");
}

Tensor read_tensor(std::istream& in, DType* dtype_out) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in) throw FormatError("truncated header");
  if (magic != kMagic) throw FormatError("bad magic, not a DRVT tensor container");
  const std::uint32_t version = io::get_u32(in);
  if (version != kContainerVersion) throw FormatError("unsupported container version " + std::to_string(version));
  const std::uint32_t code = io::get_u32(in);
  if (code > 2) throw FormatError("unknown dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::uint32_t rank = io::get_u32(in);
  if (rank == 0 || rank > kMaxRank) throw FormatError("rank " + std::to_string(rank) + " outside [1, 8]");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& extent : shape) {
    const std::uint64_t e = io::get_u64(in);
    if (e == 0) throw FormatError("zero extent");
    if (count > (std::uint64_t{1} << 40) / e) throw FormatError("tensor too large");
    count *= e;
    extent = static_cast<std::size_t>(e);
  }
  std::vector<double> data(static_cast<std::size_t>(count));
  switch (dtype) {
    case DType::Float32: {
      std::vector<unsigned char> raw(data.size() * 4);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!in) throw FormatError("truncated payload");
      for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
        data[i] = static_cast<double>(std::bit_cast<float>(bits));
      }
      break;
    }
    case DType::Float64:
      for (auto& v : data) {
        try {
          v = std::bit_cast<double>(io::get_u64(in));
        } catch (const FormatError&) {
          throw FormatError("truncated payload");
        }
      }
      break;
    case DType::UInt8: {
      std::vector<unsigned char> raw(data.size());
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      if (!in) throw FormatError("truncated payload");
      for (std::size_t i = 0; i < data.size(); ++i) data[i] = raw[i];
      break;
    }
  }
  if (dtype_out) *dtype_out = dtype;
  return Tensor(std::move(shape), std::move(data));
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor, DType dtype) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_tensor(out, tensor, dtype);
}

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  Tensor t = read_tensor(in);
  if (in.peek() != std::ifstream::traits_type::eof()) throw FormatError(path.string() + ": trailing bytes");
  return t;
}

void write_labels(const std::filesystem::path& path, const LabelMap& labels) {
  if (labels.labels.size() != labels.height * labels.width) throw FormatError("label map size mismatch");
  std::vector<double> data(labels.labels.begin(), labels.labels.end());
  write_tensor(path, Tensor({labels.height, labels.width}, std::move(data)), DType::UInt8);
}

LabelMap read_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  DType dtype{};
  Tensor t = read_tensor(in, &dtype);
  if (dtype != DType::UInt8) throw FormatError(path.string() + ": segmentation map must use dtype code 2");
  if (t.rank() != 2) throw FormatError(path.string() + ": segmentation map must be rank 2");
  LabelMap labels{t.dim(0), t.dim(1), {}};
  labels.labels.reserve(t.numel());
  for (double v : t.data()) labels.labels.push_back(static_cast<std::uint8_t>(v));
  return labels;
}

}  // namespace drivegaze
