#ifndef NASVOX_NAS_HPP
#define NASVOX_NAS_HPP

#include "nasvox/arch.hpp"
#include "nasvox/mlp.hpp"
#include "nasvox/sampling.hpp"
#include "nasvox/train.hpp"
#include "nasvox/voxel_grid.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace nasvox {

// Reward constants: expected accuracy, reference (default NI) size, largest size in the space.
inline constexpr double kAccBase = 0.98;
inline constexpr std::int64_t kSizeBase = 7553;
inline constexpr std::int64_t kSizeMax = 21121;

/// (acc - 0.98) + (7553 - size) / 21121. With the size term disabled, acc - 0.98.
double reward_formula(double acc, std::int64_t size, bool size_reward = true);

struct SearchSpace {
  std::vector<int> widths{kSearchWidths.begin(), kSearchWidths.end()};
  std::vector<ActivationKind> activations{ActivationKind::ReLU, ActivationKind::ELU, ActivationKind::Swish};
  int max_hidden = kMaxHidden;

  void validate() const;
  /// Per-slot choices: 0 = terminate, then width-major (width, activation) pairs.
  int action_count() const { return 1 + static_cast<int>(widths.size() * activations.size()); }
  LayerSpec layer_for(int action) const;
  int action_for(const LayerSpec& layer) const;
  int max_width() const { return widths.back(); }
};

/// Slot decisions that generate `arch`, including the terminating one when depth < max_hidden.
std::vector<int> decisions(const ArchSpec& arch, const SearchSpace& space);

/// Independent categorical distribution per hidden slot.
struct ControllerPolicy {
  std::vector<Eigen::VectorXd> logits;  // one per slot, action_count() entries
  std::optional<double> baseline;       // reward EMA; seeded from the first round's mean
  double temperature = 1.0;
  double learning_rate = 0.3;
  double baseline_decay = 0.7;

  /// Uniform over depth, and uniform over (width, activation) within each slot.
  static ControllerPolicy uniform(const SearchSpace& space);
  /// Softmax of logits/temperature; terminate has zero mass in the first slot.
  Eigen::VectorXd probabilities(int slot) const;
  /// log pi(arch) under the current policy.
  double log_probability(const ArchSpec& arch, const SearchSpace& space) const;
};

ArchSpec sample_architecture(const ControllerPolicy& policy, const SearchSpace& space, std::mt19937_64& rng);

struct CandidateRecord {
  ArchSpec arch;
  double acc = 0.0;
  std::int64_t size = 0;
  double reward = 0.0;
  int round = 0;
  int index_in_round = 0;
  std::string note;
};

/// One REINFORCE step over a round: logits += lr * advantage * grad log pi(arch), then the
/// baseline EMA absorbs each reward in order. With several records the advantage is the
/// reward minus the mean of the other records, divided by the round's reward standard
/// deviation; a lone record uses reward minus the EMA baseline.
void update_policy(ControllerPolicy& policy, const SearchSpace& space, const std::vector<CandidateRecord>& round);

/// Supernet tensors. Slot s holds max_width x fan_in weights (fan_in 3 for slot 0) and
/// max_width biases; each possible depth has its own output head. A child reads and
/// writes the top-left blocks matching its widths.
class SharedWeights {
 public:
  SharedWeights(const SearchSpace& space, std::uint64_t seed);

  Mlp<float> extract(const ArchSpec& arch) const;
  void write_back(const Mlp<float>& child);

  const std::vector<MatrixX<float>>& slot_weights() const { return weights_; }
  const std::vector<VectorX<float>>& slot_biases() const { return biases_; }
  const std::vector<RowVectorX<float>>& head_weights() const { return head_w_; }
  const std::vector<float>& head_biases() const { return head_b_; }

 private:
  void check(const ArchSpec& arch) const;

  int max_width_;
  std::vector<MatrixX<float>> weights_;
  std::vector<VectorX<float>> biases_;
  std::vector<RowVectorX<float>> head_w_;
  std::vector<float> head_b_;
};

struct SearchConfig {
  int rounds = 5;
  int per_round = 6;
  TrainConfig proxy{.epochs = 3};
  bool size_reward = true;
  double controller_lr = 0.3;
  double baseline_decay = 0.7;
  double temperature = 1.0;
  /// 0 scores every voxel; otherwise a fixed seeded subset of this many voxels.
  std::size_t accuracy_subsample = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Accuracy evaluator over either the full grid or a fixed voxel subset.
class AccuracyProbe {
 public:
  AccuracyProbe(const VoxelGrid& grid, std::size_t subsample, std::uint64_t seed);
  double operator()(const Mlp<float>& net) const;

 private:
  const VoxelGrid* grid_;
  std::optional<TrainingSet> subset_;
};

/// Trains the child slice `epochs` epochs, writes it back, and scores it.
CandidateRecord proxy_train_and_score(const ArchSpec& arch, SharedWeights& shared, const TrainingSet& data,
                                      const AccuracyProbe& probe, const TrainConfig& cfg, bool size_reward,
                                      int round = 0, int index_in_round = 0);

struct SearchResult {
  std::vector<CandidateRecord> records;
  ControllerPolicy policy;
};

SearchResult run_search(const VoxelGrid& grid, const TrainingSet& data, const SearchSpace& space,
                        const SearchConfig& cfg);

// JSON-lines candidate log: a {"config": ...} header line, then one record per line.
std::string record_to_json(const CandidateRecord& r);
CandidateRecord record_from_json(const std::string& line);
void write_candidate_log(const std::filesystem::path& path, const SearchSpace& space, const SearchConfig& cfg,
                         const std::vector<CandidateRecord>& records);
std::vector<CandidateRecord> read_candidate_log(const std::filesystem::path& path);
std::string search_config_json(const SearchSpace& space, const SearchConfig& cfg);

}  // namespace nasvox

#endif  // NASVOX_NAS_HPP
