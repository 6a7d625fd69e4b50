#ifndef NASVOX_PIPELINE_HPP
#define NASVOX_PIPELINE_HPP

#include "nasvox/geometry.hpp"
#include "nasvox/metrics.hpp"
#include "nasvox/nas.hpp"
#include "nasvox/sampling.hpp"
#include "nasvox/selection.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nasvox {

/// Every knob of the voxelize -> sample -> search -> select -> train -> score chain.
struct PipelineConfig {
  int resolution = 128;
  double radius = 0.9;
  int rounds = 5;
  int per_round = 6;
  int proxy_epochs = 3;
  int final_epochs = 30;
  double threshold = 0.001;
  std::vector<ActivationKind> activations{ActivationKind::ReLU, ActivationKind::ELU, ActivationKind::Swish};
  bool size_reward = true;
  bool postprocess = true;
  std::optional<ArchSpec> fixed_arch;
  int batch_size = 2048;
  double learning_rate = 1e-3;
  std::size_t accuracy_subsample = 0;
  bool sample_with_replacement = false;
  std::uint64_t seed = 0;

  void validate() const;

  SearchSpace search_space() const;
  SearchConfig search_config() const;
  SelectionConfig selection_config() const;
  TrainConfig final_train_config() const;
  std::uint64_t sampling_seed() const;
};

/// Keys match the field names; unknown keys are rejected.
PipelineConfig config_from_json(const std::string& text, PipelineConfig base = {});
std::string config_to_json(const PipelineConfig& cfg);

/// The "no search" baseline: 6 hidden layers of 32 ReLU units.
ArchSpec no_search_arch();

struct PreparedData {
  SupportSet support;
  TrainingSet training;
};

PreparedData prepare(const VoxelGrid& grid, const PipelineConfig& cfg);

struct PipelineResult {
  std::vector<CandidateRecord> records;  // empty when the architecture was fixed
  std::optional<SelectionReport> selection;
  ArchSpec arch;
  FinalizeResult final;
};

/// Search (unless cfg.fixed_arch), select, train from scratch, reconstruct and score.
PipelineResult run_pipeline(const VoxelGrid& grid, const PipelineConfig& cfg);

/// Search and selection only.
std::pair<std::vector<CandidateRecord>, SelectionReport> search_and_select(const VoxelGrid& grid,
                                                                          const PreparedData& data,
                                                                          const PipelineConfig& cfg);

// Exports of a voxel grid.
void write_voxel_cubes_obj(const VoxelGrid& grid, const std::filesystem::path& path);
void write_voxel_points(const VoxelGrid& grid, const std::filesystem::path& path);

}  // namespace nasvox

#endif  // NASVOX_PIPELINE_HPP
