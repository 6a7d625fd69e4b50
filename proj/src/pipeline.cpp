#include "nasvox/pipeline.hpp"

#include "nasvox/seed.hpp"

#include "json.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace nasvox {

namespace {

constexpr std::uint64_t kSamplingStream = 10;
constexpr std::uint64_t kSearchStream = 11;
constexpr std::uint64_t kFinalStream = 12;

}  // namespace

void PipelineConfig::validate() const {
  if (resolution < 8) throw std::invalid_argument("resolution >= 8 required");
  if (!(radius > 0.0 && radius <= 1.0)) throw std::invalid_argument("radius must be in (0, 1]");
  if (proxy_epochs < 0 || final_epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (activations.empty()) throw std::invalid_argument("at least one activation required");
  if (fixed_arch) validate_structure(*fixed_arch);
  search_config().validate();
  selection_config().validate();
  final_train_config().validate();
}

SearchSpace PipelineConfig::search_space() const {
  SearchSpace s;
  s.activations = activations;
  return s;
}

SearchConfig PipelineConfig::search_config() const {
  SearchConfig s;
  s.rounds = rounds;
  s.per_round = per_round;
  s.proxy.epochs = proxy_epochs;
  s.proxy.batch_size = batch_size;
  s.proxy.learning_rate = learning_rate;
  s.size_reward = size_reward;
  s.accuracy_subsample = accuracy_subsample;
  s.seed = derive_seed(seed, kSearchStream);
  return s;
}

SelectionConfig PipelineConfig::selection_config() const {
  return {.threshold = threshold, .final_epochs = final_epochs, .postprocess = postprocess};
}

TrainConfig PipelineConfig::final_train_config() const {
  TrainConfig t;
  t.epochs = final_epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.seed = derive_seed(seed, kFinalStream);
  return t;
}

std::uint64_t PipelineConfig::sampling_seed() const { return derive_seed(seed, kSamplingStream); }

PipelineConfig config_from_json(const std::string& text, PipelineConfig cfg) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  static const std::set<std::string> known = {
      "resolution", "radius",       "rounds",       "per_round",  "proxy_epochs",       "final_epochs",
      "threshold",  "activations",  "size_reward",  "postprocess", "fixed_arch",        "batch_size",
      "learning_rate", "accuracy_subsample", "sample_with_replacement", "seed"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");

  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("resolution", cfg.resolution);
  get("radius", cfg.radius);
  get("rounds", cfg.rounds);
  get("per_round", cfg.per_round);
  get("proxy_epochs", cfg.proxy_epochs);
  get("final_epochs", cfg.final_epochs);
  get("threshold", cfg.threshold);
  get("size_reward", cfg.size_reward);
  get("postprocess", cfg.postprocess);
  get("batch_size", cfg.batch_size);
  get("learning_rate", cfg.learning_rate);
  get("accuracy_subsample", cfg.accuracy_subsample);
  get("sample_with_replacement", cfg.sample_with_replacement);
  get("seed", cfg.seed);
  if (j.contains("activations")) {
    cfg.activations.clear();
    for (const auto& a : j.at("activations")) cfg.activations.push_back(parse_activation(a.get<std::string>()));
  }
  if (j.contains("fixed_arch")) {
    if (j.at("fixed_arch").is_null())
      cfg.fixed_arch.reset();
    else
      cfg.fixed_arch = parse_arch(j.at("fixed_arch").get<std::string>());
  }
  cfg.validate();
  return cfg;
}

std::string config_to_json(const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["resolution"] = cfg.resolution;
  j["radius"] = cfg.radius;
  j["rounds"] = cfg.rounds;
  j["per_round"] = cfg.per_round;
  j["proxy_epochs"] = cfg.proxy_epochs;
  j["final_epochs"] = cfg.final_epochs;
  j["threshold"] = cfg.threshold;
  j["activations"] = nlohmann::ordered_json::array();
  for (auto a : cfg.activations) j["activations"].push_back(to_string(a));
  j["size_reward"] = cfg.size_reward;
  j["postprocess"] = cfg.postprocess;
  j["fixed_arch"] = cfg.fixed_arch ? nlohmann::ordered_json(to_string(*cfg.fixed_arch)) : nlohmann::ordered_json();
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["accuracy_subsample"] = cfg.accuracy_subsample;
  j["sample_with_replacement"] = cfg.sample_with_replacement;
  j["seed"] = cfg.seed;
  return j.dump(2);
}

ArchSpec no_search_arch() { return uniform_arch(6, 32, ActivationKind::ReLU); }

PreparedData prepare(const VoxelGrid& grid, const PipelineConfig& cfg) {
  PreparedData d;
  d.support = support_set(grid);
  d.training = build_training_set(grid, d.support, cfg.sampling_seed(), {cfg.sample_with_replacement});
  return d;
}

std::pair<std::vector<CandidateRecord>, SelectionReport> search_and_select(const VoxelGrid& grid,
                                                                          const PreparedData& data,
                                                                          const PipelineConfig& cfg) {
  cfg.validate();
  SearchResult search = run_search(grid, data.training, cfg.search_space(), cfg.search_config());
  SelectionReport report = select(search.records, cfg.selection_config());
  return {std::move(search.records), std::move(report)};
}

PipelineResult run_pipeline(const VoxelGrid& grid, const PipelineConfig& cfg) {
  cfg.validate();
  const PreparedData data = prepare(grid, cfg);
  PipelineResult out;
  if (cfg.fixed_arch) {
    out.arch = *cfg.fixed_arch;
  } else {
    auto [records, report] = search_and_select(grid, data, cfg);
    out.records = std::move(records);
    out.arch = report.chosen.arch;
    out.selection = std::move(report);
  }
  out.final = finalize(out.arch, data.training, grid, cfg.final_train_config());
  return out;
}

void write_voxel_cubes_obj(const VoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(9);
  const double h = 0.5 * grid.pitch();
  static constexpr int kFaces[6][4] = {{1, 3, 4, 2}, {5, 6, 8, 7}, {1, 2, 6, 5},
                                       {3, 7, 8, 4}, {1, 5, 7, 3}, {2, 4, 8, 6}};
  std::size_t base = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid[i]) continue;
    const Eigen::Vector3d c = grid.center(i);
    for (int k = 0; k < 8; ++k)
      out << "v " << c.x() + (k & 1 ? h : -h) << ' ' << c.y() + (k & 2 ? h : -h) << ' ' << c.z() + (k & 4 ? h : -h)
          << '\n';
    for (const auto& f : kFaces)
      out << "f " << base + f[0] << ' ' << base + f[1] << ' ' << base + f[2] << ' ' << base + f[3] << '\n';
    base += 8;
  }
}

void write_voxel_points(const VoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(9);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!grid[i]) continue;
    const Eigen::Vector3d c = grid.center(i);
    out << c.x() << ' ' << c.y() << ' ' << c.z() << '\n';
  }
}

}  // namespace nasvox
