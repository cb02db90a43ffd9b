#ifndef PPGS_NUMERICS_MODEL_FILE_HPP_
#define PPGS_NUMERICS_MODEL_FILE_HPP_

// Little-endian binary container for a list of MLPs:
//
//   "PPGS" | u32 version | u32 extension_size | extension bytes
//   u32 network_count
//   per network: u32 input_width | u32 layer_count
//                per layer: u32 width | u8 layer_norm | u8 activation
//                float32 parameter blocks in declaration order
//                (weight column-major, bias, [gain, shift]) per layer
//
// The extension is an opaque blob owned by the caller.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <iterator>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppgs/numerics/mlp.hpp"

namespace ppgs::numerics {

inline constexpr std::array<char, 4> kModelMagic = {'P', 'P', 'G', 'S'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NetworkRecord {
  MlpSpec spec;
  MlpParams<float> params;
};

// Byte-level little-endian writer/reader shared with header extensions.
class ByteWriter {
 public:
  void U8(std::uint8_t v) { bytes_.push_back(v); }
  void U32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void U64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void Raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::uint8_t U8() {
    Need(1);
    return bytes_[pos_++];
  }
  std::uint32_t U32() {
    Need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t U64() {
    Need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float F32() { return std::bit_cast<float>(U32()); }
  std::vector<std::uint8_t> Take(std::size_t n) {
    Need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }

 private:
  void Need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ModelFormatError("model file truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> EncodeModelFile(const std::vector<std::uint8_t>& extension,
                                                 const std::vector<NetworkRecord>& networks) {
  ByteWriter w;
  w.Raw(kModelMagic.data(), kModelMagic.size());
  w.U32(kModelFormatVersion);
  w.U32(static_cast<std::uint32_t>(extension.size()));
  w.Raw(extension.data(), extension.size());
  w.U32(static_cast<std::uint32_t>(networks.size()));
  for (const NetworkRecord& net : networks) {
    w.U32(static_cast<std::uint32_t>(net.spec.input_width));
    w.U32(static_cast<std::uint32_t>(net.spec.layers.size()));
    for (const LayerSpec& l : net.spec.layers) {
      w.U32(static_cast<std::uint32_t>(l.width));
      w.U8(l.layer_norm ? 1 : 0);
      w.U8(static_cast<std::uint8_t>(l.activation));
    }
    for (const Matrix<float>* block : net.params.Blocks()) {
      for (Eigen::Index i = 0; i < block->size(); ++i) w.F32(block->data()[i]);
    }
  }
  return w.bytes();
}

struct DecodedModelFile {
  std::vector<std::uint8_t> extension;
  std::vector<NetworkRecord> networks;
};

inline DecodedModelFile DecodeModelFile(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  const auto magic = r.Take(4);
  if (std::memcmp(magic.data(), kModelMagic.data(), 4) != 0) {
    throw ModelFormatError("not a PPGS model file (bad magic)");
  }
  const std::uint32_t version = r.U32();
  if (version != kModelFormatVersion) {
    throw ModelFormatError("unsupported model format version " + std::to_string(version));
  }
  DecodedModelFile out;
  out.extension = r.Take(r.U32());
  const std::uint32_t count = r.U32();
  for (std::uint32_t n = 0; n < count; ++n) {
    NetworkRecord net;
    net.spec.input_width = static_cast<int>(r.U32());
    const std::uint32_t layers = r.U32();
    for (std::uint32_t i = 0; i < layers; ++i) {
      LayerSpec l;
      l.width = static_cast<int>(r.U32());
      l.layer_norm = r.U8() != 0;
      const std::uint8_t act = r.U8();
      if (act > static_cast<std::uint8_t>(Activation::kReLU)) {
        throw ModelFormatError("unknown activation code");
      }
      l.activation = static_cast<Activation>(act);
      net.spec.layers.push_back(l);
    }
    try {
      net.spec.Validate();
    } catch (const std::invalid_argument& e) {
      throw ModelFormatError(std::string("invalid network spec: ") + e.what());
    }
    net.params = ZeroParams<float>(net.spec);
    for (Matrix<float>* block : net.params.Blocks()) {
      for (Eigen::Index i = 0; i < block->size(); ++i) block->data()[i] = r.F32();
    }
    out.networks.push_back(std::move(net));
  }
  if (!r.AtEnd()) throw ModelFormatError("trailing bytes after model payload");
  return out;
}

inline void WriteModelFile(std::ostream& os, const std::vector<std::uint8_t>& extension,
                           const std::vector<NetworkRecord>& networks) {
  const auto bytes = EncodeModelFile(extension, networks);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed to write model file");
}

inline DecodedModelFile ReadModelFile(std::istream& is) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return DecodeModelFile(bytes);
}

}  // namespace ppgs::numerics

#endif  // PPGS_NUMERICS_MODEL_FILE_HPP_
