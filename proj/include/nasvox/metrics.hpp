#ifndef NASVOX_METRICS_HPP
#define NASVOX_METRICS_HPP

#include "nasvox/voxel_grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nasvox {

struct ReportMetrics {
  double iou = 0.0;
  double cd_x1000 = 0.0;
  std::int64_t size = 0;
  int resolution = 0;
  double runtime_seconds = 0.0;
};

enum class ChamferSpace { Normalized, VoxelIndex };

/// |pred & gt| / |pred | gt|, 1 when both are empty.
double iou(const VoxelGrid& pred, const VoxelGrid& gt);

/// Symmetric mean of squared nearest-neighbour distances between the two
/// surface-voxel sets, multiplied by 1000. Normalized space uses voxel
/// centers in [-1,1]^3; VoxelIndex space uses integer voxel coordinates.
/// Throws std::invalid_argument("undefined CD") when either surface is empty.
double chamfer(const VoxelGrid& pred, const VoxelGrid& gt, ChamferSpace space = ChamferSpace::Normalized);

/// Exact squared distance (in voxel units) from every voxel to the nearest marked voxel.
/// Entries are +inf when nothing is marked.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& marked, int resolution);

/// IoU and CD together; CD is +inf (null in JSON) when either surface is empty.
ReportMetrics evaluate(const VoxelGrid& pred, const VoxelGrid& gt, std::int64_t size = 0);

std::string to_json(const ReportMetrics& m);

}  // namespace nasvox

#endif  // NASVOX_METRICS_HPP
