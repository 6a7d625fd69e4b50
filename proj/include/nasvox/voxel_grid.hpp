#ifndef NASVOX_VOXEL_GRID_HPP
#define NASVOX_VOXEL_GRID_HPP

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nasvox {

/// Dense N^3 occupancy grid over the normalized domain [-1,1]^3.
///
/// Linear index is x-fastest: idx = x + N*(y + N*z). Voxel (i,j,k) has its
/// center at -1 + (i+0.5)*2/N along each axis.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(int resolution);

  int resolution() const { return n_; }
  std::size_t size() const { return bits_.size(); }
  double pitch() const { return 2.0 / n_; }

  std::size_t index(int x, int y, int z) const {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(n_) * (static_cast<std::size_t>(y) +
                                           static_cast<std::size_t>(n_) * static_cast<std::size_t>(z));
  }
  Eigen::Vector3i coords(std::size_t idx) const {
    const auto n = static_cast<std::size_t>(n_);
    return {static_cast<int>(idx % n), static_cast<int>((idx / n) % n), static_cast<int>(idx / (n * n))};
  }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < n_ && y < n_ && z < n_;
  }

  bool operator[](std::size_t idx) const { return bits_[idx] != 0; }
  bool at(int x, int y, int z) const { return bits_[index(x, y, z)] != 0; }
  void set(std::size_t idx, bool v) { bits_[idx] = v ? 1 : 0; }
  void set(int x, int y, int z, bool v) { set(index(x, y, z), v); }

  /// Center of voxel `idx` in normalized coordinates.
  Eigen::Vector3d center(std::size_t idx) const;
  double center_coord(int i) const { return -1.0 + (i + 0.5) * pitch(); }

  std::size_t count() const;

  const std::vector<std::uint8_t>& data() const { return bits_; }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  int n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Maps a normalized coordinate back to the voxel containing it, clamped to the grid.
int voxel_of(double coord, int resolution);

// VOXB: "VOXB", u32 LE N, ceil(N^3/8) bytes, LSB-first, x-fastest.
std::vector<std::uint8_t> encode_voxb(const VoxelGrid& grid);
VoxelGrid decode_voxb(const std::vector<std::uint8_t>& bytes);
void write_voxb(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid read_voxb(const std::filesystem::path& path);

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace nasvox

#endif  // NASVOX_VOXEL_GRID_HPP
