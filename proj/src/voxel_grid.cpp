#include "nasvox/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace nasvox {

namespace {
constexpr char kVoxbMagic[4] = {'V', 'O', 'X', 'B'};
}

VoxelGrid::VoxelGrid(int resolution) : n_(resolution) {
  if (resolution <= 0) throw std::invalid_argument("resolution must be positive");
  const auto n = static_cast<std::size_t>(resolution);
  bits_.assign(n * n * n, 0);
}

Eigen::Vector3d VoxelGrid::center(std::size_t idx) const {
  const Eigen::Vector3i c = coords(idx);
  return {center_coord(c.x()), center_coord(c.y()), center_coord(c.z())};
}

std::size_t VoxelGrid::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

int voxel_of(double coord, int resolution) {
  const int i = static_cast<int>(std::floor((coord + 1.0) * 0.5 * resolution));
  return std::clamp(i, 0, resolution - 1);
}

std::vector<std::uint8_t> encode_voxb(const VoxelGrid& grid) {
  const std::size_t nbits = grid.size();
  std::vector<std::uint8_t> out(8 + (nbits + 7) / 8, 0);
  std::copy(std::begin(kVoxbMagic), std::end(kVoxbMagic), out.begin());
  const auto n = static_cast<std::uint32_t>(grid.resolution());
  for (int b = 0; b < 4; ++b) out[4 + b] = static_cast<std::uint8_t>((n >> (8 * b)) & 0xFFu);
  for (std::size_t i = 0; i < nbits; ++i) {
    if (grid[i]) out[8 + i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  return out;
}

VoxelGrid decode_voxb(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(std::begin(kVoxbMagic), std::end(kVoxbMagic), bytes.begin()))
    throw FormatError("not a VOXB file");
  std::uint32_t n = 0;
  for (int b = 0; b < 4; ++b) n |= static_cast<std::uint32_t>(bytes[4 + b]) << (8 * b);
  if (n == 0 || n > 2048) throw FormatError("VOXB resolution out of range");
  VoxelGrid grid(static_cast<int>(n));
  const std::size_t nbits = grid.size();
  if (bytes.size() != 8 + (nbits + 7) / 8) throw FormatError("VOXB payload size mismatch");
  for (std::size_t i = 0; i < nbits; ++i) grid.set(i, (bytes[8 + i / 8] >> (i % 8)) & 1u);
  return grid;
}

void write_voxb(const VoxelGrid& grid, const std::filesystem::path& path) {
  write_file_bytes(path, encode_voxb(grid));
}

VoxelGrid read_voxb(const std::filesystem::path& path) { return decode_voxb(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace nasvox
