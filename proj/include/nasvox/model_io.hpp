#ifndef NASVOX_MODEL_IO_HPP
#define NASVOX_MODEL_IO_HPP

#include "nasvox/mlp.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nasvox {

inline constexpr std::uint8_t kModelVersion = 1;

// NASV model file:
//   "NASV" | u8 version | u8 L | L x (u16 width, u8 activation) | f32 parameters
// All integers and floats little-endian; parameter order matches Mlp::flatten().
// Activation codes: 0 ReLU, 1 ELU, 2 Swish. alpha and beta are stored implicitly as 1.
std::vector<std::uint8_t> encode_model(const Mlp<float>& net);
Mlp<float> decode_model(const std::vector<std::uint8_t>& bytes);

void write_model(const Mlp<float>& net, const std::filesystem::path& path);
Mlp<float> read_model(const std::filesystem::path& path);

}  // namespace nasvox

#endif  // NASVOX_MODEL_IO_HPP
