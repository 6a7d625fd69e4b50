#include "nasvox/sampling.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <stdexcept>

namespace nasvox {

namespace {

// First `k` entries of `pool` become a uniform sample without replacement.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t k, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
}

}  // namespace

TrainingSet build_training_set(const VoxelGrid& grid, const SupportSet& support, std::uint64_t seed,
                               const SamplingOptions& options) {
  if (support.size() == 0) throw std::invalid_argument("no boundary");
  std::vector<std::uint8_t> in_support(grid.size(), 0);
  for (auto i : support.surface) in_support[i] = 1;
  for (auto i : support.outer) in_support[i] = 1;

  std::vector<std::size_t> others;
  others.reserve(grid.size() - support.size());
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!in_support[i]) others.push_back(i);
  if (others.size() < 4) throw std::invalid_argument("grid too small");

  const std::size_t quarter = others.size() / 4;
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> chosen;
  chosen.reserve(2 * quarter);
  if (options.non_support_with_replacement) {
    std::uniform_int_distribution<std::size_t> pick(0, others.size() - 1);
    for (std::size_t i = 0; i < quarter; ++i) chosen.push_back(others[pick(rng)]);
  } else {
    partial_shuffle(others, quarter, rng);
    chosen.insert(chosen.end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(quarter));
  }

  std::vector<std::size_t> pool(support.surface);
  pool.insert(pool.end(), support.outer.begin(), support.outer.end());
  const std::size_t copies = quarter / pool.size();
  const std::size_t remainder = quarter % pool.size();
  for (std::size_t c = 0; c < copies; ++c) chosen.insert(chosen.end(), pool.begin(), pool.end());
  partial_shuffle(pool, remainder, rng);
  chosen.insert(chosen.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(remainder));

  TrainingSet out;
  out.seed = seed;
  out.positions.resize(3, static_cast<Eigen::Index>(chosen.size()));
  out.labels.resize(static_cast<Eigen::Index>(chosen.size()));
  for (std::size_t s = 0; s < chosen.size(); ++s) {
    const auto col = static_cast<Eigen::Index>(s);
    out.positions.col(col) = grid.center(chosen[s]).cast<float>();
    out.labels[col] = grid[chosen[s]] ? 1.0f : 0.0f;
  }
  return out;
}

TrainingSet full_grid_set(const VoxelGrid& grid) {
  TrainingSet out;
  const auto n = static_cast<Eigen::Index>(grid.size());
  out.positions.resize(3, n);
  out.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.positions.col(i) = grid.center(static_cast<std::size_t>(i)).cast<float>();
    out.labels[i] = grid[static_cast<std::size_t>(i)] ? 1.0f : 0.0f;
  }
  return out;
}

void write_training_csv(const TrainingSet& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "x,y,z,label\n";
  out.precision(9);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    out << data.positions(0, i) << ',' << data.positions(1, i) << ',' << data.positions(2, i) << ','
        << static_cast<int>(data.labels[i]) << '\n';
  }
}

}  // namespace nasvox
