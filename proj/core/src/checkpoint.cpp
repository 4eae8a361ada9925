#include "drivegaze/checkpoint.hpp"

#include <array>
#include <fstream>

#include "drivegaze/tensor_io.hpp"

namespace drivegaze {

namespace {

constexpr std::array<char, 4> kIndexMagic{'D', 'R', 'V', 'I'};
constexpr std::uint32_t kIndexVersion = 1;

Tensor flatten(const std::vector<const Tensor*>& parts) {
  std::size_t total = 0;
  for (const Tensor* t : parts) total += t->numel();
  std::vector<double> data;
  data.reserve(total);
  for (const Tensor* t : parts) data.insert(data.end(), t->data().begin(), t->data().end());
  return Tensor(Shape{total}, std::move(data));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const Optimizer* optimizer) {
  const auto& entries = params.entries();
  if (optimizer && optimizer->states().size() != entries.size()) {
    throw std::invalid_argument("optimizer state does not match the model");
  }
  std::vector<const Tensor*> values;
  for (const auto& e : entries) values.push_back(&e.tensor.value());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write checkpoint " + path.string());
  write_tensor(out, flatten(values), DType::Float32);

  const auto& cfg = params.config();
  out.write(kIndexMagic.data(), kIndexMagic.size());
  io::put_u32(out, kIndexVersion);
  io::put_string(out, to_string(cfg.arch));
  io::put_u64(out, cfg.input_size);
  io::put_u64(out, cfg.channel_divisor);
  io::put_u64(out, cfg.refine_resolution);
  io::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    io::put_string(out, e.name);
    const Shape& shape = e.tensor.shape();
    io::put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) io::put_u64(out, d);
    io::put_u64(out, offset);
    offset += 4 * e.tensor.value().numel();
  }

  io::put_u32(out, optimizer ? 1 : 0);
  if (optimizer) {
    std::vector<const Tensor*> m, v;
    for (const auto& s : optimizer->states()) {
      m.push_back(&s.m);
      v.push_back(&s.v);
    }
    io::put_u64(out, optimizer->step_count());
    write_tensor(out, flatten(m), DType::Float64);
    write_tensor(out, flatten(v), DType::Float64);
  }
  if (!out.flush()) throw FormatError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string() + ": ";
  try {
    const Tensor payload = read_tensor(in);
    if (payload.rank() != 1) throw FormatError("payload must be rank 1");

    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in) throw FormatError("missing name index (truncated file?)");
    if (magic != kIndexMagic) throw FormatError("bad name-index magic");
    if (io::get_u32(in) != kIndexVersion) throw FormatError("unsupported name-index version");

    NetConfig cfg;
    cfg.arch = parse_architecture(io::get_string(in, 64));
    cfg.input_size = io::get_u64(in);
    cfg.channel_divisor = io::get_u64(in);
    cfg.refine_resolution = io::get_u64(in);
    if (cfg.input_size > 4096 || cfg.refine_resolution > 65536 || cfg.channel_divisor > 64) {
      throw FormatError("implausible network configuration in header");
    }
    const auto schedule = parameter_schedule(cfg);

    const std::uint32_t count = io::get_u32(in);
    if (count != schedule.size()) {
      throw FormatError("index lists " + std::to_string(count) + " tensors, architecture '" + to_string(cfg.arch) +
                        "' needs " + std::to_string(schedule.size()));
    }
    ModelParams params(cfg);
    std::uint64_t expected_offset = 0;
    for (const auto& [name, shape] : schedule) {
      const std::string stored = io::get_string(in, 256);
      if (stored != name) throw FormatError("expected tensor '" + name + "', found '" + stored + "'");
      const std::uint32_t rank = io::get_u32(in);
      if (rank > kMaxRank) throw FormatError("tensor '" + name + "' has rank " + std::to_string(rank));
      Shape got(rank);
      for (auto& d : got) d = io::get_u64(in);
      if (got != shape) {
        throw FormatError("tensor '" + name + "' has shape " + shape_str(got) + ", architecture expects " +
                          shape_str(shape));
      }
      const std::uint64_t offset = io::get_u64(in);
      if (offset != expected_offset) throw FormatError("tensor '" + name + "' has inconsistent byte offset");
      const std::size_t n = shape_numel(shape);
      const std::size_t first = offset / 4;
      if (first + n > payload.numel()) throw FormatError("tensor '" + name + "' extends past the payload");
      std::vector<double> data(payload.data().begin() + static_cast<std::ptrdiff_t>(first),
                               payload.data().begin() + static_cast<std::ptrdiff_t>(first + n));
      params.add(name, Var::parameter(Tensor(shape, std::move(data))));
      expected_offset += 4 * n;
    }
    if (expected_offset != 4 * payload.numel()) throw FormatError("payload has unindexed bytes");

    Checkpoint ckpt{std::move(params), std::nullopt};
    const std::uint32_t has_optimizer = io::get_u32(in);
    if (has_optimizer > 1) throw FormatError("bad optimizer flag");
    if (has_optimizer == 1) {
      const std::uint64_t step = io::get_u64(in);
      const Tensor m = read_tensor(in);
      const Tensor v = read_tensor(in);
      if (m.numel() != payload.numel() || v.numel() != payload.numel()) {
        throw FormatError("optimizer moments do not match parameter count");
      }
      Optimizer opt(ckpt.params);
      std::size_t pos = 0;
      for (auto& s : opt.states()) {
        s.step = step;
        for (std::size_t i = 0; i < s.m.numel(); ++i, ++pos) {
          s.m[i] = m[pos];
          s.v[i] = v[pos];
        }
      }
      ckpt.optimizer = std::move(opt);
    }
    if (in.peek() != std::ifstream::traits_type::eof()) throw FormatError("trailing bytes after checkpoint");
    return ckpt;
  } catch (const FormatError& e) {
    throw FormatError(where + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(where + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetConfig& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const NetConfig& got = ckpt.params.config();
  if (got.arch != expected.arch) {
    throw FormatError("checkpoint " + path.string() + " holds architecture '" + to_string(got.arch) + "', expected '" +
                      to_string(expected.arch) + "'");
  }
  if (!(got == expected)) {
    throw FormatError("checkpoint " + path.string() + " was trained with input " + std::to_string(got.input_size) +
                      ", channel divisor " + std::to_string(got.channel_divisor) + ", R " +
                      std::to_string(got.refine_resolution) + "; run configuration differs");
  }
  return ckpt;
}

}  // namespace drivegaze
