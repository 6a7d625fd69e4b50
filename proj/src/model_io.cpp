#include "nasvox/model_io.hpp"

#include "nasvox/voxel_grid.hpp"

#include <algorithm>
#include <cstring>
#include <iterator>

namespace nasvox {

namespace {

constexpr char kMagic[4] = {'N', 'A', 'S', 'V'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFFu));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFFu));
}

float get_f32(const std::uint8_t* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const Mlp<float>& net) {
  const ArchSpec& arch = net.arch();
  validate_structure(arch);
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kModelVersion);
  out.push_back(static_cast<std::uint8_t>(arch.hidden.size()));
  for (const auto& l : arch.hidden) {
    put_u16(out, static_cast<std::uint16_t>(l.width));
    out.push_back(static_cast<std::uint8_t>(l.activation.kind));
  }
  const VectorX<float> flat = net.flatten();
  out.reserve(out.size() + 4 * static_cast<std::size_t>(flat.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) put_f32(out, flat[i]);
  return out;
}

Mlp<float> decode_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw FormatError("not a NASV model file");
  if (bytes[4] != kModelVersion)
    throw FormatError("unsupported NASV version " + std::to_string(bytes[4]));
  const std::size_t layers = bytes[5];
  std::size_t pos = 6;
  if (bytes.size() < pos + 3 * layers) throw FormatError("truncated NASV header");
  ArchSpec arch;
  for (std::size_t i = 0; i < layers; ++i, pos += 3) {
    const int width = bytes[pos] | (bytes[pos + 1] << 8);
    const std::uint8_t code = bytes[pos + 2];
    if (code > 2) throw FormatError("unknown activation code " + std::to_string(code));
    arch.hidden.push_back({width, Activation{static_cast<ActivationKind>(code)}});
  }
  try {
    validate_structure(arch);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("bad NASV architecture: ") + e.what());
  }
  Mlp<float> net(arch);
  const auto count = static_cast<std::size_t>(parameter_count(arch));
  if (bytes.size() != pos + 4 * count) throw FormatError("NASV parameter block size mismatch");
  VectorX<float> flat(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) flat[static_cast<Eigen::Index>(i)] = get_f32(bytes.data() + pos + 4 * i);
  net.assign(flat);
  return net;
}

void write_model(const Mlp<float>& net, const std::filesystem::path& path) {
  write_file_bytes(path, encode_model(net));
}

Mlp<float> read_model(const std::filesystem::path& path) { return decode_model(read_file_bytes(path)); }

}  // namespace nasvox
