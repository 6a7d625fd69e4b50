#ifndef NASVOX_SAMPLING_HPP
#define NASVOX_SAMPLING_HPP

#include "nasvox/geometry.hpp"
#include "nasvox/voxel_grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>

namespace nasvox {

/// Labeled voxel-center samples. Column i of `positions` is sample i.
struct TrainingSet {
  Eigen::Matrix3Xf positions;
  Eigen::VectorXf labels;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return positions.cols(); }
};

struct SamplingOptions {
  bool non_support_with_replacement = false;
};

/// Class-balanced boundary oversampling.
///
/// With O the count of non-support voxels, draws floor(O/4) non-support voxels
/// and floor(O/4) support voxels: the support set is replicated whole as many
/// times as fits, and the remainder is a seeded draw without replacement.
/// Non-support samples come first, support samples second.
TrainingSet build_training_set(const VoxelGrid& grid, const SupportSet& support, std::uint64_t seed,
                               const SamplingOptions& options = {});

/// Every voxel center of the grid with its label, in linear index order.
TrainingSet full_grid_set(const VoxelGrid& grid);

void write_training_csv(const TrainingSet& data, const std::filesystem::path& path);

}  // namespace nasvox

#endif  // NASVOX_SAMPLING_HPP
