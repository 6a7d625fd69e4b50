#ifndef NASVOX_SELECTION_HPP
#define NASVOX_SELECTION_HPP

#include "nasvox/metrics.hpp"
#include "nasvox/mlp.hpp"
#include "nasvox/nas.hpp"
#include "nasvox/sampling.hpp"
#include "nasvox/train.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nasvox {

struct SelectionConfig {
  double threshold = 0.001;  // absolute accuracy margin below the best candidate
  int final_epochs = 30;
  bool postprocess = true;   // false: take the highest-reward candidate

  void validate() const;
};

struct RejectedCandidate {
  CandidateRecord record;
  std::string reason;
};

struct SelectionReport {
  CandidateRecord chosen;
  double best_acc = 0.0;
  double threshold = 0.0;
  bool postprocess = true;
  std::vector<CandidateRecord> filter_set;  // candidates within the margin (postprocess only)
  std::vector<RejectedCandidate> rejected;
};

/// With post-processing: keep candidates with acc >= max(acc) - threshold and take the
/// smallest; ties go to fewer hidden layers, then earlier (round, index_in_round).
/// Without: the highest reward, same tie-breaks after size.
SelectionReport select(const std::vector<CandidateRecord>& records, const SelectionConfig& cfg);
CandidateRecord select_candidate(const std::vector<CandidateRecord>& records, const SelectionConfig& cfg);

std::string to_json(const SelectionReport& report);
/// Reads the chosen architecture back from a selection report file.
ArchSpec read_selected_arch(const std::filesystem::path& path);

struct FinalizeResult {
  Mlp<float> net;
  ReportMetrics metrics;
  std::vector<double> loss_history;
  double learning_rate = 0.0;  // the rate that finally succeeded
};

/// Fresh seeded network of `arch` trained cfg.epochs epochs, reconstructed at the grid's
/// resolution and scored. A divergence is retried once at half the learning rate.
/// Writes the model when `model_path` is given.
FinalizeResult finalize(const ArchSpec& arch, const TrainingSet& data, const VoxelGrid& grid, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& model_path = std::nullopt);

}  // namespace nasvox

#endif  // NASVOX_SELECTION_HPP
