#include "nasvox/nas.hpp"

#include "nasvox/seed.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace nasvox {

namespace {

// Seed streams.
constexpr std::uint64_t kControllerStream = 1;
constexpr std::uint64_t kSupernetStream = 2;
constexpr std::uint64_t kProbeStream = 3;
constexpr std::uint64_t kChildStreamBase = 1000;

// Middle of the width range; children of every width share these tensors.
constexpr double kSharedHiddenFanIn = 32.0;

}  // namespace

double reward_formula(double acc, std::int64_t size, bool size_reward) {
  const double acc_term = acc - kAccBase;
  if (!size_reward) return acc_term;
  return acc_term + static_cast<double>(kSizeBase - size) / static_cast<double>(kSizeMax);
}

// --- search space -----------------------------------------------------------

void SearchSpace::validate() const {
  if (widths.empty()) throw std::invalid_argument("search space needs at least one width");
  if (!std::is_sorted(widths.begin(), widths.end()) || widths.front() <= 0)
    throw std::invalid_argument("search widths must be positive and sorted");
  if (activations.empty()) throw std::invalid_argument("search space needs at least one activation");
  if (max_hidden < 1) throw std::invalid_argument("max_hidden must be >= 1");
}

LayerSpec SearchSpace::layer_for(int action) const {
  if (action <= 0 || action >= action_count()) throw std::out_of_range("not a layer action");
  const auto k = static_cast<std::size_t>(action - 1);
  return {widths[k / activations.size()], Activation{activations[k % activations.size()]}};
}

int SearchSpace::action_for(const LayerSpec& layer) const {
  const auto w = std::find(widths.begin(), widths.end(), layer.width);
  const auto a = std::find(activations.begin(), activations.end(), layer.activation.kind);
  if (w == widths.end() || a == activations.end()) throw std::invalid_argument("layer outside the search space");
  return 1 + static_cast<int>(static_cast<std::size_t>(w - widths.begin()) * activations.size() +
                              static_cast<std::size_t>(a - activations.begin()));
}

std::vector<int> decisions(const ArchSpec& arch, const SearchSpace& space) {
  if (arch.hidden.empty() || static_cast<int>(arch.depth()) > space.max_hidden)
    throw std::invalid_argument("architecture depth outside the search space");
  std::vector<int> out;
  for (const auto& l : arch.hidden) out.push_back(space.action_for(l));
  if (static_cast<int>(arch.depth()) < space.max_hidden) out.push_back(0);
  return out;
}

// --- controller -------------------------------------------------------------

ControllerPolicy ControllerPolicy::uniform(const SearchSpace& space) {
  space.validate();
  ControllerPolicy p;
  p.logits.assign(static_cast<std::size_t>(space.max_hidden), Eigen::VectorXd::Zero(space.action_count()));
  // Terminate logits that make every depth 1..max_hidden equally likely: stopping at
  // slot k (having placed k layers) has probability 1 / (max_hidden - k + 1).
  const double layer_actions = space.action_count() - 1;
  for (int k = 1; k < space.max_hidden; ++k) {
    const double stop = 1.0 / (space.max_hidden - k + 1);
    p.logits[static_cast<std::size_t>(k)][0] = std::log(stop * layer_actions / (1.0 - stop));
  }
  return p;
}

Eigen::VectorXd ControllerPolicy::probabilities(int slot) const {
  const Eigen::VectorXd& l = logits.at(static_cast<std::size_t>(slot));
  Eigen::VectorXd scaled = l / temperature;
  if (slot == 0) scaled[0] = -std::numeric_limits<double>::infinity();
  const double top = scaled.maxCoeff();
  Eigen::VectorXd p = (scaled.array() - top).exp().matrix();
  if (slot == 0) p[0] = 0.0;  // vectorized exp(-inf) is not exactly zero
  return p / p.sum();
}

double ControllerPolicy::log_probability(const ArchSpec& arch, const SearchSpace& space) const {
  const auto acts = decisions(arch, space);
  double lp = 0.0;
  for (std::size_t k = 0; k < acts.size(); ++k) lp += std::log(probabilities(static_cast<int>(k))[acts[k]]);
  return lp;
}

ArchSpec sample_architecture(const ControllerPolicy& policy, const SearchSpace& space, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ArchSpec arch;
  for (int slot = 0; slot < space.max_hidden; ++slot) {
    const Eigen::VectorXd p = policy.probabilities(slot);
    const double u = unit(rng);
    double acc = 0.0;
    int action = static_cast<int>(p.size()) - 1;
    for (Eigen::Index a = 0; a < p.size(); ++a) {
      acc += p[a];
      if (u < acc) {
        action = static_cast<int>(a);
        break;
      }
    }
    // Rounding can leave u beyond the cumulative sum; fall back to the last non-empty action.
    while (p[action] == 0.0) --action;
    if (action == 0) break;
    arch.hidden.push_back(space.layer_for(action));
  }
  return arch;
}

void update_policy(ControllerPolicy& policy, const SearchSpace& space, const std::vector<CandidateRecord>& round) {
  if (round.empty()) throw std::invalid_argument("empty round");
  const double n = static_cast<double>(round.size());
  double mean = 0.0;
  for (const auto& r : round) mean += r.reward;
  mean /= n;
  if (!policy.baseline) policy.baseline = mean;
  double var = 0.0;
  for (const auto& r : round) var += (r.reward - mean) * (r.reward - mean);
  const double sd = std::sqrt(var / n);
  // A spread at rounding level carries no ranking signal; standardizing it would amplify noise.
  const double min_sd = 1e-12 * std::max(1.0, std::abs(mean));

  std::vector<Eigen::VectorXd> step(policy.logits.size());
  for (auto& s : step) s = Eigen::VectorXd::Zero(space.action_count());
  for (const auto& r : round) {
    double advantage = 0.0;
    if (round.size() == 1) {
      advantage = r.reward - *policy.baseline;
    } else if (sd > min_sd) {
      const double others = (mean * n - r.reward) / (n - 1.0);
      advantage = (r.reward - others) / sd;
    }
    if (advantage == 0.0) continue;
    const auto acts = decisions(r.arch, space);
    for (std::size_t k = 0; k < acts.size(); ++k) {
      Eigen::VectorXd g = -policy.probabilities(static_cast<int>(k));
      g[acts[k]] += 1.0;
      step[k] += advantage * g / policy.temperature;
    }
  }
  for (std::size_t k = 0; k < step.size(); ++k) policy.logits[k] += policy.learning_rate * step[k];
  for (const auto& r : round)
    policy.baseline = policy.baseline_decay * *policy.baseline + (1.0 - policy.baseline_decay) * r.reward;
}

// --- supernet ---------------------------------------------------------------

SharedWeights::SharedWeights(const SearchSpace& space, std::uint64_t seed) : max_width_(space.max_width()) {
  space.validate();
  std::mt19937_64 rng(seed);
  auto fill = [&rng](auto& m, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(u(rng));
  };
  for (int s = 0; s < space.max_hidden; ++s) {
    const int fan_in = s == 0 ? kInputDim : max_width_;
    weights_.push_back(MatrixX<float>::Zero(max_width_, fan_in));
    fill(weights_.back(), std::sqrt(6.0 / (s == 0 ? double(kInputDim) : kSharedHiddenFanIn)));
    biases_.push_back(VectorX<float>::Zero(max_width_));
    head_w_.push_back(RowVectorX<float>::Zero(max_width_));
    fill(head_w_.back(), std::sqrt(1.0 / kSharedHiddenFanIn));
    head_b_.push_back(0.0f);
  }
}

void SharedWeights::check(const ArchSpec& arch) const {
  if (arch.hidden.empty() || arch.depth() > weights_.size())
    throw std::invalid_argument("child depth exceeds the supernet");
  for (const auto& l : arch.hidden)
    if (l.width > max_width_) throw std::invalid_argument("child width exceeds the supernet");
}

Mlp<float> SharedWeights::extract(const ArchSpec& arch) const {
  check(arch);
  Mlp<float> net(arch);
  Eigen::Index fan_in = kInputDim;
  for (std::size_t s = 0; s < arch.depth(); ++s) {
    const Eigen::Index w = arch.hidden[s].width;
    net.layers()[s].weight = weights_[s].topLeftCorner(w, fan_in);
    net.layers()[s].bias = biases_[s].head(w);
    fan_in = w;
  }
  net.head_weight() = head_w_[arch.depth() - 1].head(fan_in);
  net.head_bias() = head_b_[arch.depth() - 1];
  return net;
}

void SharedWeights::write_back(const Mlp<float>& child) {
  const ArchSpec& arch = child.arch();
  check(arch);
  Eigen::Index fan_in = kInputDim;
  for (std::size_t s = 0; s < arch.depth(); ++s) {
    const Eigen::Index w = arch.hidden[s].width;
    weights_[s].topLeftCorner(w, fan_in) = child.layers()[s].weight;
    biases_[s].head(w) = child.layers()[s].bias;
    fan_in = w;
  }
  head_w_[arch.depth() - 1].head(fan_in) = child.head_weight();
  head_b_[arch.depth() - 1] = child.head_bias();
}

// --- scoring and search -----------------------------------------------------

void SearchConfig::validate() const {
  if (rounds < 1 || per_round < 1) throw std::invalid_argument("rounds and per_round must be >= 1");
  proxy.validate();
  if (!(controller_lr >= 0.0)) throw std::invalid_argument("controller_lr must be >= 0");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw std::invalid_argument("baseline_decay must be in [0,1)");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
}

AccuracyProbe::AccuracyProbe(const VoxelGrid& grid, std::size_t subsample, std::uint64_t seed) : grid_(&grid) {
  if (subsample == 0 || subsample >= grid.size()) return;
  std::vector<std::size_t> idx(grid.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < subsample; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  TrainingSet s;
  s.seed = seed;
  s.positions.resize(3, static_cast<Eigen::Index>(subsample));
  s.labels.resize(static_cast<Eigen::Index>(subsample));
  for (std::size_t i = 0; i < subsample; ++i) {
    s.positions.col(static_cast<Eigen::Index>(i)) = grid.center(idx[i]).cast<float>();
    s.labels[static_cast<Eigen::Index>(i)] = grid[idx[i]] ? 1.0f : 0.0f;
  }
  subset_ = std::move(s);
}

double AccuracyProbe::operator()(const Mlp<float>& net) const {
  if (!subset_) return full_grid_accuracy(net, *grid_);
  const RowVectorX<float> p = forward(net, Positions<float>(subset_->positions));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5f) == (subset_->labels[i] > 0.5f);
  return static_cast<double>(correct) / static_cast<double>(p.size());
}

CandidateRecord proxy_train_and_score(const ArchSpec& arch, SharedWeights& shared, const TrainingSet& data,
                                      const AccuracyProbe& probe, const TrainConfig& cfg, bool size_reward,
                                      int round, int index_in_round) {
  CandidateRecord rec;
  rec.arch = arch;
  rec.size = parameter_count(arch);
  rec.round = round;
  rec.index_in_round = index_in_round;
  try {
    auto trained = train(shared.extract(arch), data, cfg);
    shared.write_back(trained.net);
    rec.acc = probe(trained.net);
  } catch (const TrainingDiverged<float>& e) {
    rec.acc = 0.0;
    rec.note = e.what();
  } catch (const NumericOverflow& e) {
    rec.acc = 0.0;
    rec.note = e.what();
  }
  rec.reward = reward_formula(rec.acc, rec.size, size_reward);
  return rec;
}

SearchResult run_search(const VoxelGrid& grid, const TrainingSet& data, const SearchSpace& space,
                        const SearchConfig& cfg) {
  space.validate();
  cfg.validate();
  SearchResult result;
  result.policy = ControllerPolicy::uniform(space);
  result.policy.learning_rate = cfg.controller_lr;
  result.policy.baseline_decay = cfg.baseline_decay;
  result.policy.temperature = cfg.temperature;

  std::mt19937_64 controller_rng(derive_seed(cfg.seed, kControllerStream));
  SharedWeights shared(space, derive_seed(cfg.seed, kSupernetStream));
  const AccuracyProbe probe(grid, cfg.accuracy_subsample, derive_seed(cfg.seed, kProbeStream));

  for (int round = 1; round <= cfg.rounds; ++round) {
    std::vector<CandidateRecord> batch;
    for (int i = 0; i < cfg.per_round; ++i) {
      const ArchSpec arch = sample_architecture(result.policy, space, controller_rng);
      TrainConfig child = cfg.proxy;
      child.seed = derive_seed(cfg.seed, kChildStreamBase + static_cast<std::uint64_t>(round * cfg.per_round + i));
      batch.push_back(proxy_train_and_score(arch, shared, data, probe, child, cfg.size_reward, round, i));
    }
    update_policy(result.policy, space, batch);
    result.records.insert(result.records.end(), batch.begin(), batch.end());
  }
  return result;
}

// --- candidate log ------------------------------------------------------------

namespace {

nlohmann::ordered_json record_json(const CandidateRecord& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round;
  j["index_in_round"] = r.index_in_round;
  j["arch"] = to_string(r.arch);
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : r.arch.hidden) layers.push_back({{"width", l.width}, {"activation", to_string(l.activation.kind)}});
  j["layers"] = std::move(layers);
  j["depth"] = r.arch.depth();
  j["acc"] = r.acc;
  j["size"] = r.size;
  j["reward"] = r.reward;
  j["note"] = r.note;
  return j;
}

}  // namespace

std::string record_to_json(const CandidateRecord& r) { return record_json(r).dump(); }

CandidateRecord record_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  CandidateRecord r;
  r.round = j.at("round").get<int>();
  r.index_in_round = j.at("index_in_round").get<int>();
  r.arch = parse_arch(j.at("arch").get<std::string>());
  r.acc = j.at("acc").get<double>();
  r.size = j.at("size").get<std::int64_t>();
  r.reward = j.at("reward").get<double>();
  r.note = j.value("note", "");
  return r;
}

std::string search_config_json(const SearchSpace& space, const SearchConfig& cfg) {
  nlohmann::ordered_json c;
  c["rounds"] = cfg.rounds;
  c["per_round"] = cfg.per_round;
  c["proxy_epochs"] = cfg.proxy.epochs;
  c["batch_size"] = cfg.proxy.batch_size;
  c["learning_rate"] = cfg.proxy.learning_rate;
  c["size_reward"] = cfg.size_reward;
  c["controller_lr"] = cfg.controller_lr;
  c["baseline_decay"] = cfg.baseline_decay;
  c["temperature"] = cfg.temperature;
  c["accuracy_subsample"] = cfg.accuracy_subsample;
  c["seed"] = cfg.seed;
  c["widths"] = space.widths;
  nlohmann::ordered_json acts = nlohmann::ordered_json::array();
  for (auto a : space.activations) acts.push_back(to_string(a));
  c["activations"] = std::move(acts);
  c["max_hidden"] = space.max_hidden;
  nlohmann::ordered_json header;
  header["config"] = std::move(c);
  return header.dump();
}

void write_candidate_log(const std::filesystem::path& path, const SearchSpace& space, const SearchConfig& cfg,
                         const std::vector<CandidateRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << search_config_json(space, cfg) << '\n';
  for (const auto& r : records) out << record_to_json(r) << '\n';
}

std::vector<CandidateRecord> read_candidate_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<CandidateRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (nlohmann::json::parse(line).contains("config")) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

}  // namespace nasvox
