// Binary checkpoint format (little-endian, bit-exact round trip):
//   magic "AFLW1"
//   u32 data_dim, u32 cond_dim, u32 activation (0=tanh, 1=silu), u32 n_hidden
//   u32 hidden[n_hidden]
//   f64 params[param_count]
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aflow/errors.hpp"
#include "aflow/model.hpp"

namespace aflow {

namespace detail {

inline constexpr char kCheckpointMagic[5] = {'A', 'F', 'L', 'W', '1'};

// Byte-at-a-time little-endian IO keeps the format independent of host
// endianness without any C++23 helpers.
inline void write_le(std::ostream& os, std::uint64_t v, int nbytes) {
  char buf[8];
  for (int i = 0; i < nbytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(buf, nbytes);
}

inline std::uint64_t read_le(std::istream& is, int nbytes, const char* field) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), nbytes))
    throw CheckpointError(std::string("checkpoint truncated while reading ") + field);
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return v;
}

inline void write_u32(std::ostream& os, std::uint32_t v) { write_le(os, v, 4); }

inline std::uint32_t read_u32(std::istream& is, const char* field) {
  return static_cast<std::uint32_t>(read_le(is, 4, field));
}

inline void write_f64(std::ostream& os, double d) {
  write_le(os, std::bit_cast<std::uint64_t>(d), 8);
}

inline double read_f64(std::istream& is, const char* field) {
  return std::bit_cast<double>(read_le(is, 8, field));
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path,
                            const VelocityModel& model) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  os.write(detail::kCheckpointMagic, sizeof detail::kCheckpointMagic);
  const ArchSpec& a = model.arch();
  detail::write_u32(os, static_cast<std::uint32_t>(a.data_dim));
  detail::write_u32(os, static_cast<std::uint32_t>(a.cond_dim));
  detail::write_u32(os, a.activation == Activation::tanh ? 0u : 1u);
  detail::write_u32(os, static_cast<std::uint32_t>(a.hidden.size()));
  for (std::size_t w : a.hidden)
    detail::write_u32(os, static_cast<std::uint32_t>(w));
  for (double p : model.params()) detail::write_f64(os, p);
  os.flush();
  if (!os) throw CheckpointError("failed writing checkpoint: " + path.string());
}

inline VelocityModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw CheckpointError("cannot open checkpoint for reading: " + path.string());
  char magic[sizeof detail::kCheckpointMagic] = {};
  if (!is.read(magic, sizeof magic) ||
      std::memcmp(magic, detail::kCheckpointMagic, sizeof magic) != 0)
    throw CheckpointError("not a model checkpoint (bad magic): " + path.string());

  ArchSpec arch;
  arch.data_dim = detail::read_u32(is, "data_dim");
  arch.cond_dim = detail::read_u32(is, "cond_dim");
  const std::uint32_t act = detail::read_u32(is, "activation");
  if (act > 1)
    throw CheckpointError("checkpoint has unknown activation code " +
                          std::to_string(act));
  arch.activation = act == 0 ? Activation::tanh : Activation::silu;
  const std::uint32_t n_hidden = detail::read_u32(is, "hidden layer count");
  arch.hidden.resize(n_hidden);
  for (std::uint32_t i = 0; i < n_hidden; ++i)
    arch.hidden[i] = detail::read_u32(is, "hidden width");
  arch.validate();

  VelocityModel model(arch);
  for (double& p : model.params()) p = detail::read_f64(is, "parameters");
  // Exactly param_count values must remain; anything else is corruption.
  char extra = 0;
  if (is.read(&extra, 1))
    throw CheckpointError("checkpoint has trailing bytes: " + path.string());
  return model;
}

}  // namespace aflow
