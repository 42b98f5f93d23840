// SPDX-License-Identifier: Apache-2.0
#include "mpg/cli/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mpg::cli {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'G', 'C'};

template <class T>
void write_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw CheckpointError("checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void write_f32(std::ostream& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  write_le<std::uint32_t>(out, bits);
}

float read_f32(std::istream& in) {
  const std::uint32_t bits = read_le<std::uint32_t>(in);
  float value;
  std::memcpy(&value, &bits, sizeof(value));
  return value;
}

}  // namespace

const nc::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : params)
    if (n == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_le<std::uint16_t>(out, checkpoint.version);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.config_json.size()));
  out.write(checkpoint.config_json.data(),
            static_cast<std::streamsize>(checkpoint.config_json.size()));
  write_le<std::uint64_t>(out, checkpoint.step);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.params.size()));
  for (const auto& [name, tensor] : checkpoint.params) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape())
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (std::size_t i = 0; i < tensor.size(); ++i)
      write_f32(out, static_cast<float>(tensor.data()[i]));
  }
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError("not a checkpoint file: " + path);
  Checkpoint checkpoint;
  checkpoint.version = read_le<std::uint16_t>(in);
  if (checkpoint.version != 1)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(checkpoint.version));
  const auto config_len = read_le<std::uint32_t>(in);
  checkpoint.config_json.resize(config_len);
  in.read(checkpoint.config_json.data(), config_len);
  if (!in) throw CheckpointError("checkpoint truncated in config");
  checkpoint.step = read_le<std::uint64_t>(in);
  const auto n_params = read_le<std::uint32_t>(in);
  for (std::uint32_t p = 0; p < n_params; ++p) {
    const auto name_len = read_le<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw CheckpointError("checkpoint truncated in parameter name");
    const auto rank = read_le<std::uint32_t>(in);
    nc::Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = read_le<std::uint32_t>(in);
      count *= d;
    }
    std::vector<double> data(count);
    for (auto& v : data) v = static_cast<double>(read_f32(in));
    checkpoint.params.emplace_back(std::move(name),
                                   nc::Tensor::from(std::move(shape), std::move(data)));
  }
  return checkpoint;
}

void load_into(const Checkpoint& checkpoint,
               const std::vector<std::pair<std::string, nc::Tensor>>& destination) {
  for (const auto& [name, tensor] : destination) {
    const nc::Tensor* source = checkpoint.find(name);
    if (!source) throw CheckpointError("checkpoint is missing parameter: " + name);
    if (source->shape() != tensor.shape())
      throw CheckpointError("checkpoint shape mismatch for " + name);
    const_cast<nc::Tensor&>(tensor).vec() = source->vec();
  }
}

}  // namespace mpg::cli
