#pragma once

// Parameter checkpoints: magic "PCFG", version u32, then per tensor a
// (name-length u32, name bytes, rank u32, extents u64..., f64 data) record.
// Little-endian host assumed.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pcf/errors.hpp"
#include "pcf/params.hpp"

namespace pcf {

inline constexpr char kCheckpointMagic[4] = {'P', 'C', 'F', 'G'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error::io("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, 4);
  const uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    const uint32_t name_len = static_cast<uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof name_len);
    out.write(name.data(), name_len);
    const uint32_t rank = static_cast<uint32_t>(t.rank());
    out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
    for (size_t d : t.shape()) {
      const uint64_t e = d;
      out.write(reinterpret_cast<const char*>(&e), sizeof e);
    }
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw Error::io("write failed: " + path);
}

inline ParamStore load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw Error("CHECKPOINT_MISSING", "checkpoint not found: " + path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error::io("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kCheckpointMagic, 4))
    throw Error::io("bad checkpoint magic in " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kCheckpointVersion)
    throw Error::io("unsupported checkpoint version in " + path);
  ParamStore params;
  while (true) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
    if (in.eof()) break;
    if (!in || name_len == 0 || name_len > 4096) throw Error::io("corrupt checkpoint: " + path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint32_t rank = 0;
    in.read(reinterpret_cast<char*>(&rank), sizeof rank);
    if (!in || rank > 8) throw Error::io("corrupt checkpoint: " + path);
    std::vector<size_t> shape(rank);
    size_t count = 1;
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t e = 0;
      in.read(reinterpret_cast<char*>(&e), sizeof e);
      shape[i] = static_cast<size_t>(e);
      count *= shape[i];
    }
    std::vector<double> data(count);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw Error::io("truncated checkpoint: " + path);
    params.add(name, Tensor(std::move(shape), std::move(data)));
  }
  return params;
}

}  // namespace pcf
