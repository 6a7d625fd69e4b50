// nasvox: voxelize a mesh, search an occupancy MLP for it, train, reconstruct, score.

#include "nasvox/model_io.hpp"
#include "nasvox/pipeline.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace nasvox;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Flag values as parsed; applied over the config file (if any) only when given.
struct ConfigFlags {
  std::string config_path;
  int resolution = 0;
  double radius = 0.0;
  int rounds = 0;
  int per_round = 0;
  int proxy_epochs = 0;
  int final_epochs = 0;
  double threshold = 0.0;
  std::string activations;
  bool no_size_reward = false;
  bool no_postprocess = false;
  std::string fixed_arch;
  bool no_nas = false;
  int batch_size = 0;
  double learning_rate = 0.0;
  std::size_t accuracy_subsample = 0;
  std::uint64_t seed = 0;

  std::vector<CLI::Option*> opts;
};

void add_config_flags(CLI::App* app, ConfigFlags& f, bool with_resolution, bool with_search) {
  auto add = [&](CLI::Option* o) { f.opts.push_back(o); };
  add(app->add_option("--config", f.config_path, "JSON config file; flags override it")->check(CLI::ExistingFile));
  add(app->add_option("--seed", f.seed, "Base seed for every random stream"));
  if (with_resolution) {
    add(app->add_option("-N,--resolution", f.resolution, "Voxel grid resolution (default 128)"));
    add(app->add_option("--radius", f.radius, "Normalization radius (default 0.9)"));
  }
  add(app->add_option("--final-epochs", f.final_epochs, "Final training epochs (default 30)"));
  add(app->add_option("--batch-size", f.batch_size, "Mini-batch size (default 2048)"));
  add(app->add_option("--learning-rate", f.learning_rate, "Adam learning rate (default 1e-3)"));
  if (!with_search) return;
  add(app->add_option("--rounds", f.rounds, "Controller rounds (default 5)"));
  add(app->add_option("--per-round", f.per_round, "Architectures per round (default 6)"));
  add(app->add_option("--proxy-epochs", f.proxy_epochs, "Proxy training epochs (default 3)"));
  add(app->add_option("--threshold", f.threshold, "Post-processing accuracy margin (default 0.001)"));
  add(app->add_option("--activations", f.activations, "Comma list from relu,elu,swish"));
  add(app->add_flag("--no-size-reward", f.no_size_reward, "Reward is accuracy only"));
  add(app->add_flag("--no-postprocess", f.no_postprocess, "Select the highest-reward candidate"));
  add(app->add_option("--accuracy-subsample", f.accuracy_subsample, "Score candidates on this many voxels (0 = all)"));
  add(app->add_option("--fixed-arch", f.fixed_arch, "Skip the search and use this architecture, e.g. 32:relu,32:relu"));
  add(app->add_flag("--no-nas", f.no_nas, "Skip the search and use 6 x 32 ReLU"));
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

PipelineConfig build_config(const ConfigFlags& f) {
  PipelineConfig cfg;
  if (!f.config_path.empty()) cfg = config_from_json(slurp(f.config_path));
  auto given = [&](const char* name) {
    for (const auto* o : f.opts)
      if (o->check_name(name)) return o->count() > 0;
    return false;
  };
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--resolution")) cfg.resolution = f.resolution;
  if (given("--radius")) cfg.radius = f.radius;
  if (given("--rounds")) cfg.rounds = f.rounds;
  if (given("--per-round")) cfg.per_round = f.per_round;
  if (given("--proxy-epochs")) cfg.proxy_epochs = f.proxy_epochs;
  if (given("--final-epochs")) cfg.final_epochs = f.final_epochs;
  if (given("--threshold")) cfg.threshold = f.threshold;
  if (given("--batch-size")) cfg.batch_size = f.batch_size;
  if (given("--learning-rate")) cfg.learning_rate = f.learning_rate;
  if (given("--accuracy-subsample")) cfg.accuracy_subsample = f.accuracy_subsample;
  if (f.no_size_reward) cfg.size_reward = false;
  if (f.no_postprocess) cfg.postprocess = false;
  if (given("--activations")) {
    cfg.activations.clear();
    std::stringstream ss(f.activations);
    for (std::string item; std::getline(ss, item, ',');) cfg.activations.push_back(parse_activation(item));
  }
  if (f.no_nas) cfg.fixed_arch = no_search_arch();
  if (!f.fixed_arch.empty()) cfg.fixed_arch = parse_arch(f.fixed_arch);
  return cfg;
}

// The pipeline's stages only see the grid, so its resolution wins over the configured one.
PipelineConfig for_grid(PipelineConfig cfg, const VoxelGrid& grid) {
  cfg.resolution = grid.resolution();
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text << '\n';
}

VoxelGrid load_grid(const fs::path& path, int resolution) {
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "NASV") {
    if (resolution < 8) throw std::invalid_argument("resolution >= 8 required");
    return reconstruct(decode_model(bytes), resolution);
  }
  return decode_voxb(bytes);
}

VoxelGrid voxelize_file(const fs::path& mesh_path, int resolution, double radius) {
  if (resolution < 8) throw std::invalid_argument("resolution >= 8 required");
  return voxelize(normalize_mesh(read_mesh(mesh_path), radius), resolution);
}

json grid_summary(const VoxelGrid& grid) {
  const SupportSet s = support_set(grid);
  return {{"resolution", grid.resolution()},
          {"occupied", grid.count()},
          {"surface", s.surface.size()},
          {"support", s.size()}};
}

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

json metrics_json(const ReportMetrics& m) { return json::parse(to_json(m)); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occupancy-network voxel reconstruction with architecture search"};
  app.require_subcommand(1);
  std::string active = "nasvox";

  // shape
  std::string shape_kind, shape_out;
  auto* shape = app.add_subcommand("shape", "Write an analytic test mesh (sphere, box, torus) as OBJ");
  shape->add_option("kind", shape_kind)->required()->check(CLI::IsMember({"sphere", "box", "torus"}));
  shape->add_option("-o,--out", shape_out)->required();

  // voxelize
  std::string vox_mesh, vox_out;
  int vox_n = 128;
  double vox_radius = 0.9;
  auto* vox = app.add_subcommand("voxelize", "Normalize and voxelize an OBJ/STL mesh into a VOXB grid");
  vox->add_option("mesh", vox_mesh)->required()->check(CLI::ExistingFile);
  vox->add_option("-o,--out", vox_out)->required();
  vox->add_option("-N,--resolution", vox_n, "Grid resolution")->capture_default_str();
  vox->add_option("--radius", vox_radius, "Normalization radius")->capture_default_str();

  // search
  std::string search_grid, search_log = "candidates.jsonl", search_sel = "selection.json";
  ConfigFlags search_flags;
  auto* search = app.add_subcommand("search", "Architecture search and selection on a VOXB grid");
  search->add_option("grid", search_grid)->required()->check(CLI::ExistingFile);
  search->add_option("--log", search_log, "Candidate log (JSON lines)")->capture_default_str();
  search->add_option("--selection", search_sel, "Selection report (JSON)")->capture_default_str();
  add_config_flags(search, search_flags, false, true);

  // train
  std::string train_grid, train_sel, train_arch, train_out = "model.nasv", train_metrics;
  ConfigFlags train_flags;
  auto* trn = app.add_subcommand("train", "Train the selected (or a fixed) architecture from scratch");
  trn->add_option("grid", train_grid)->required()->check(CLI::ExistingFile);
  trn->add_option("--selection", train_sel, "Selection report from `search`")->check(CLI::ExistingFile);
  trn->add_option("--arch", train_arch, "Architecture, e.g. 32:relu,16:swish");
  trn->add_option("-o,--out", train_out, "Model file (NASV)")->capture_default_str();
  trn->add_option("--metrics", train_metrics, "Also write the metrics JSON here");
  add_config_flags(trn, train_flags, false, false);
  trn->add_option("--fixed-arch", train_flags.fixed_arch, "Same as --arch");
  trn->add_flag("--no-nas", train_flags.no_nas, "Use 6 x 32 ReLU");

  // reconstruct
  std::string rec_model, rec_out;
  int rec_n = 128;
  auto* rec = app.add_subcommand("reconstruct", "Evaluate a model at every voxel center into a VOXB grid");
  rec->add_option("model", rec_model)->required()->check(CLI::ExistingFile);
  rec->add_option("-o,--out", rec_out)->required();
  rec->add_option("-N,--resolution", rec_n)->capture_default_str();

  // eval
  std::string eval_pred, eval_gt, eval_out;
  std::int64_t eval_size = -1;
  auto* ev = app.add_subcommand("eval", "IoU and Chamfer distance between two VOXB grids");
  ev->add_option("--pred", eval_pred)->required()->check(CLI::ExistingFile);
  ev->add_option("--gt", eval_gt)->required()->check(CLI::ExistingFile);
  ev->add_option("--size", eval_size, "Parameter count to record; read from --model otherwise");
  std::string eval_model;
  ev->add_option("--model", eval_model, "Model whose parameter count is recorded")->check(CLI::ExistingFile);
  ev->add_option("-o,--out", eval_out, "Also write the metrics JSON here");

  // export
  std::string exp_in, exp_out, exp_format = "cubes";
  int exp_n = 128;
  auto* exp = app.add_subcommand("export", "Write a VOXB grid (or a model's reconstruction) as OBJ cubes or points");
  exp->add_option("input", exp_in, "VOXB grid or NASV model")->required()->check(CLI::ExistingFile);
  exp->add_option("-o,--out", exp_out)->required();
  exp->add_option("--format", exp_format)->check(CLI::IsMember({"cubes", "points"}))->capture_default_str();
  exp->add_option("-N,--resolution", exp_n, "Resolution when the input is a model")->capture_default_str();

  // run
  std::string run_mesh, run_dir = "nasvox_out";
  ConfigFlags run_flags;
  auto* run = app.add_subcommand("run", "Voxelize, search, select, train, reconstruct and score in one go");
  run->add_option("mesh", run_mesh)->required()->check(CLI::ExistingFile);
  run->add_option("--out-dir", run_dir)->capture_default_str();
  add_config_flags(run, run_flags, true, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}, {"kind", "usage"}}.dump() << std::endl;
    return 2;
  }

  try {
    if (*shape) {
      active = "shape";
      const Mesh m = analytic_shape(shape_kind);
      write_obj(m, shape_out);
      print({{"mesh", shape_out}, {"vertices", m.vertices.size()}, {"triangles", m.triangles.size()}});
    } else if (*vox) {
      active = "voxelize";
      const VoxelGrid grid = voxelize_file(vox_mesh, vox_n, vox_radius);
      write_voxb(grid, vox_out);
      json j = grid_summary(grid);
      j["out"] = vox_out;
      print(j);
    } else if (*search) {
      active = "search";
      const VoxelGrid grid = read_voxb(search_grid);
      const PipelineConfig cfg = for_grid(build_config(search_flags), grid);
      const PreparedData data = prepare(grid, cfg);
      auto [records, report] = search_and_select(grid, data, cfg);
      write_candidate_log(search_log, cfg.search_space(), cfg.search_config(), records);
      write_text(search_sel, to_json(report));
      print({{"candidates", records.size()},
             {"chosen", to_string(report.chosen.arch)},
             {"size", report.chosen.size},
             {"acc", report.chosen.acc},
             {"log", search_log},
             {"selection", search_sel}});
    } else if (*trn) {
      active = "train";
      const VoxelGrid grid = read_voxb(train_grid);
      PipelineConfig cfg = for_grid(build_config(train_flags), grid);
      ArchSpec arch;
      if (!train_arch.empty())
        arch = parse_arch(train_arch);
      else if (cfg.fixed_arch)
        arch = *cfg.fixed_arch;
      else if (!train_sel.empty())
        arch = read_selected_arch(train_sel);
      else
        throw std::invalid_argument("one of --selection, --arch, --fixed-arch or --no-nas is required");
      const PreparedData data = prepare(grid, cfg);
      const FinalizeResult r = finalize(arch, data.training, grid, cfg.final_train_config(), fs::path(train_out));
      if (!train_metrics.empty()) write_text(train_metrics, to_json(r.metrics));
      json j = metrics_json(r.metrics);
      j["arch"] = to_string(arch);
      j["model"] = train_out;
      j["final_loss"] = r.loss_history.empty() ? json() : json(r.loss_history.back());
      print(j);
    } else if (*rec) {
      active = "reconstruct";
      if (rec_n < 8) throw std::invalid_argument("resolution >= 8 required");
      const Mlp<float> net = read_model(rec_model);
      const VoxelGrid grid = reconstruct(net, rec_n);
      write_voxb(grid, rec_out);
      json j = grid_summary(grid);
      j["out"] = rec_out;
      print(j);
    } else if (*ev) {
      active = "eval";
      const auto t0 = std::chrono::steady_clock::now();
      std::int64_t size = eval_size >= 0 ? eval_size : 0;
      if (eval_size < 0 && !eval_model.empty()) size = read_model(eval_model).allocated_parameters();
      ReportMetrics m = evaluate(read_voxb(eval_pred), read_voxb(eval_gt), size);
      m.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!eval_out.empty()) write_text(eval_out, to_json(m));
      std::cout << to_json(m) << std::endl;
    } else if (*exp) {
      active = "export";
      const VoxelGrid grid = load_grid(exp_in, exp_n);
      if (exp_format == "cubes")
        write_voxel_cubes_obj(grid, exp_out);
      else
        write_voxel_points(grid, exp_out);
      print({{"out", exp_out}, {"format", exp_format}, {"occupied", grid.count()}});
    } else if (*run) {
      active = "run";
      PipelineConfig cfg = build_config(run_flags);
      cfg.validate();
      fs::create_directories(run_dir);
      const fs::path dir(run_dir);
      const VoxelGrid grid = voxelize_file(run_mesh, cfg.resolution, cfg.radius);
      write_voxb(grid, dir / "grid.voxb");
      write_text(dir / "config.json", config_to_json(cfg));
      const PreparedData data = prepare(grid, cfg);
      ArchSpec arch;
      if (cfg.fixed_arch) {
        arch = *cfg.fixed_arch;
      } else {
        auto [records, report] = search_and_select(grid, data, cfg);
        write_candidate_log(dir / "candidates.jsonl", cfg.search_space(), cfg.search_config(), records);
        write_text(dir / "selection.json", to_json(report));
        arch = report.chosen.arch;
      }
      const FinalizeResult r = finalize(arch, data.training, grid, cfg.final_train_config(), dir / "model.nasv");
      write_voxb(reconstruct(r.net, cfg.resolution), dir / "reconstruction.voxb");
      write_text(dir / "metrics.json", to_json(r.metrics));
      json j = metrics_json(r.metrics);
      j["arch"] = to_string(arch);
      j["out_dir"] = run_dir;
      print(j);
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}, {"command", active}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
