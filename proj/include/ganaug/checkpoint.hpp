#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ganaug/error.hpp"
#include "ganaug/network.hpp"

namespace ganaug {

// Checkpoint container:
//   magic "GACP" | version u32 | tensor count u32
//   per tensor: name length u32 + UTF-8 bytes | rank u32 | dims u32[] | f32 data
// All integers and floats little-endian. A reserved "__arch__" tensor holds
// the encoded NetworkSpec so the file alone rebuilds the network.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kArchTensorName[] = "__arch__";

struct NamedBuffer {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

struct ByteReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) {
    require(pos + n <= size, ErrorKind::TruncatedFile, "checkpoint ends unexpectedly");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(data[pos]) |
                      (static_cast<std::uint32_t>(data[pos + 1]) << 8) |
                      (static_cast<std::uint32_t>(data[pos + 2]) << 16) |
                      (static_cast<std::uint32_t>(data[pos + 3]) << 24);
    pos += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

inline std::vector<std::uint8_t> serialize_buffers(const std::vector<NamedBuffer>& tensors) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'G', 'A', 'C', 'P'});
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float f : t.data) detail::put_f32(out, f);
  }
  return out;
}

inline std::vector<NamedBuffer> deserialize_buffers(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader reader{bytes.data(), bytes.size()};
  reader.need(4);
  require(std::memcmp(bytes.data(), "GACP", 4) == 0, ErrorKind::BadMagic,
          "not a GACP checkpoint");
  reader.pos = 4;
  std::uint32_t version = reader.u32();
  require(version == kCheckpointVersion, ErrorKind::VersionMismatch,
          "checkpoint version " + std::to_string(version) + ", expected " +
              std::to_string(kCheckpointVersion));
  std::uint32_t count = reader.u32();
  std::vector<NamedBuffer> tensors;
  tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedBuffer t;
    std::uint32_t name_len = reader.u32();
    t.name = reader.str(name_len);
    std::uint32_t rank = reader.u32();
    require(rank >= 1 && rank <= 8, ErrorKind::CorruptFile, "checkpoint tensor rank out of range");
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      std::uint32_t dim = reader.u32();
      require(dim >= 1 && dim <= (1u << 28), ErrorKind::CorruptFile,
              "checkpoint dimension out of range");
      t.shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    t.data.resize(numel);
    for (std::size_t j = 0; j < numel; ++j) t.data[j] = reader.f32();
    tensors.push_back(std::move(t));
  }
  return tensors;
}

inline void save_checkpoint(Network& net, const std::string& path) {
  std::vector<NamedBuffer> tensors;
  auto arch = encode_spec(net.spec());
  tensors.push_back(NamedBuffer{kArchTensorName, {static_cast<int>(arch.size())}, arch});
  for (auto& [name, tensor] : net.named_tensors())
    tensors.push_back(NamedBuffer{name, tensor.shape(), tensor.values()});
  auto bytes = serialize_buffers(tensors);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorKind::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorKind::IoError, "short write to " + path);
}

inline Network load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::IoError, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  auto tensors = deserialize_buffers(bytes);

  std::map<std::string, const NamedBuffer*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  auto arch_it = by_name.find(kArchTensorName);
  require(arch_it != by_name.end(), ErrorKind::CorruptFile, "checkpoint missing network table");
  Network net = build_network(decode_spec(arch_it->second->data));
  for (auto& [name, tensor] : net.named_tensors()) {
    auto it = by_name.find(name);
    require(it != by_name.end(), ErrorKind::CorruptFile, "checkpoint missing tensor " + name);
    require(it->second->data.size() == tensor.numel(), ErrorKind::CorruptFile,
            "checkpoint tensor " + name + " has wrong size");
    tensor.values() = it->second->data;
  }
  return net;
}

// Deep copy: fresh parameter storage with identical values.
inline Network clone_network(Network& net) {
  Network copy = build_network(net.spec());
  auto src = net.named_tensors();
  auto dst = copy.named_tensors();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].second.values() = src[i].second.values();
  return copy;
}

}  // namespace ganaug
