#include "nasvox/selection.hpp"

#include "nasvox/model_io.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace nasvox {

namespace {

// Size, then depth, then discovery order.
bool smaller_first(const CandidateRecord& a, const CandidateRecord& b) {
  return std::tuple(a.size, a.arch.depth(), a.round, a.index_in_round) <
         std::tuple(b.size, b.arch.depth(), b.round, b.index_in_round);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string tie_reason(const CandidateRecord& r, const CandidateRecord& chosen) {
  if (r.size != chosen.size) return "larger than chosen (" + std::to_string(r.size) + " > " + std::to_string(chosen.size) + ")";
  if (r.arch.depth() != chosen.arch.depth()) return "same size, more hidden layers";
  return "same size and depth, discovered later";
}

}  // namespace

void SelectionConfig::validate() const {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must be in [0, 1)");
  if (final_epochs < 0) throw std::invalid_argument("final_epochs must be >= 0");
}

SelectionReport select(const std::vector<CandidateRecord>& records, const SelectionConfig& cfg) {
  cfg.validate();
  if (records.empty()) throw std::invalid_argument("no candidates to select from");
  SelectionReport rep;
  rep.threshold = cfg.threshold;
  rep.postprocess = cfg.postprocess;
  rep.best_acc = std::max_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
                   return a.acc < b.acc;
                 })->acc;

  if (cfg.postprocess) {
    const double floor = rep.best_acc - cfg.threshold;
    for (const auto& r : records)
      if (r.acc >= floor) rep.filter_set.push_back(r);
    rep.chosen = *std::min_element(rep.filter_set.begin(), rep.filter_set.end(), smaller_first);
    for (const auto& r : records) {
      if (r.acc < floor) {
        rep.rejected.push_back({r, "accuracy " + fmt(r.acc) + " below " + fmt(floor)});
      } else if (r.round != rep.chosen.round || r.index_in_round != rep.chosen.index_in_round) {
        rep.rejected.push_back({r, tie_reason(r, rep.chosen)});
      }
    }
  } else {
    rep.chosen = *std::min_element(records.begin(), records.end(), [](const auto& a, const auto& b) {
      if (a.reward != b.reward) return a.reward > b.reward;
      return smaller_first(a, b);
    });
    for (const auto& r : records) {
      if (r.round == rep.chosen.round && r.index_in_round == rep.chosen.index_in_round) continue;
      rep.rejected.push_back(
          {r, r.reward < rep.chosen.reward ? "reward " + fmt(r.reward) + " below best" : tie_reason(r, rep.chosen)});
    }
  }
  return rep;
}

CandidateRecord select_candidate(const std::vector<CandidateRecord>& records, const SelectionConfig& cfg) {
  return select(records, cfg).chosen;
}

std::string to_json(const SelectionReport& report) {
  auto rec = [](const CandidateRecord& r) { return nlohmann::ordered_json::parse(record_to_json(r)); };
  nlohmann::ordered_json j;
  j["chosen"] = rec(report.chosen);
  j["postprocess"] = report.postprocess;
  j["threshold"] = report.threshold;
  j["best_acc"] = report.best_acc;
  j["filter_set"] = nlohmann::ordered_json::array();
  for (const auto& r : report.filter_set) j["filter_set"].push_back(rec(r));
  j["rejected"] = nlohmann::ordered_json::array();
  for (const auto& r : report.rejected) {
    auto e = rec(r.record);
    e["reason"] = r.reason;
    j["rejected"].push_back(std::move(e));
  }
  return j.dump(2);
}

ArchSpec read_selected_arch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(in);
  return parse_arch(j.at("chosen").at("arch").get<std::string>());
}

FinalizeResult finalize(const ArchSpec& arch, const TrainingSet& data, const VoxelGrid& grid, const TrainConfig& cfg,
                        const std::optional<std::filesystem::path>& model_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const Mlp<float> init = Mlp<float>::random(arch, cfg.seed);
  TrainConfig attempt = cfg;
  std::optional<TrainResult<float>> trained;
  try {
    trained = train(init, data, attempt);
  } catch (const TrainingDiverged<float>&) {
    attempt.learning_rate *= 0.5;
    trained = train(init, data, attempt);  // a second divergence propagates
  }
  FinalizeResult out{std::move(trained->net), {}, std::move(trained->loss_history), attempt.learning_rate};
  const VoxelGrid recon = reconstruct(out.net, grid.resolution());
  out.metrics = evaluate(recon, grid, parameter_count(arch));
  out.metrics.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (model_path) write_model(out.net, *model_path);
  return out;
}

}  // namespace nasvox
