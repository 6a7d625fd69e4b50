#ifndef NASVOX_GEOMETRY_HPP
#define NASVOX_GEOMETRY_HPP

#include "nasvox/voxel_grid.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

namespace nasvox {

struct Mesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> triangles;
};

/// Throws std::invalid_argument unless the mesh has >= 3 vertices, >= 1 triangle,
/// and every triangle index is in range.
void validate(const Mesh& mesh);

/// Translates by the negated bounding-box center, then scales uniformly so the
/// farthest vertex lies at distance `radius` from the origin.
Mesh normalize_mesh(const Mesh& mesh, double radius = 0.9);

struct VoxelizeStats {
  /// Fraction of voxels (among those any axis marked occupied) whose three axis votes disagree.
  double axis_disagreement = 0.0;
  std::size_t occupied = 0;
};

/// Center-inside rasterization: parity of ray crossings along +x, +y, +z from
/// each voxel center, combined by majority vote. Throws std::runtime_error when
/// no voxel ends up occupied.
VoxelGrid voxelize(const Mesh& mesh, int resolution, VoxelizeStats* stats = nullptr);

struct SupportSet {
  std::vector<std::size_t> surface;  // occupied, >= 1 unoccupied 6-neighbor
  std::vector<std::size_t> outer;    // unoccupied 6-neighbors of surface voxels

  std::size_t size() const { return surface.size() + outer.size(); }
};

/// Out-of-grid neighbors count as unoccupied. Both lists are sorted ascending.
SupportSet support_set(const VoxelGrid& grid);

/// Occupied voxels with at least one unoccupied (or out-of-grid) 6-neighbor.
std::vector<std::size_t> surface_voxels(const VoxelGrid& grid);

// Warnings from geometry and the pipeline go through this sink (stderr by default).
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

// Mesh I/O: ASCII OBJ (v/f records) and binary STL.
Mesh read_obj(const std::filesystem::path& path);
Mesh read_stl(const std::filesystem::path& path);
/// Dispatches on extension (.obj / .stl, case-insensitive).
Mesh read_mesh(const std::filesystem::path& path);
void write_obj(const Mesh& mesh, const std::filesystem::path& path);
Mesh parse_obj(std::string_view text);

// Analytic test shapes.
Mesh make_uv_sphere(double radius, int stacks, int slices);
Mesh make_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);
Mesh make_torus(double major_radius, double minor_radius, int major_segments, int minor_segments);
/// The reference shapes by name: "sphere", "box" (a cube) or "torus" (tube/ring ratio 0.25/0.6).
Mesh analytic_shape(std::string_view name);

}  // namespace nasvox

#endif  // NASVOX_GEOMETRY_HPP
