// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset; the exit status is nonzero if any selected criterion fails.

#include "nasvox/pipeline.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

using namespace nasvox;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradRelTol = 1e-4;
constexpr double kGradGoodFraction = 0.99;
constexpr double kChamferTol = 1e-9;
constexpr double kBallVolumeTol = 0.01;
constexpr double kMinIou = 0.97;
constexpr double kMaxCd = 0.2;
constexpr std::int64_t kMaxSelectedSize = 7553;
constexpr int kEndToEndResolution = 64;
constexpr std::uint64_t kEndToEndSeed = 1;
constexpr int kAblationSeeds = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

VoxelGrid shape_grid(const char* name, int n) { return voxelize(normalize_mesh(analytic_shape(name), 0.9), n); }

// ---------------------------------------------------------------------------

Outcome parameter_counts() {
  bool ok = parameter_count(uniform_arch(8, 32)) == 7553 && parameter_count(uniform_arch(6, 64)) == 21121;
  int checked = 0;
  for (int w : kSearchWidths)
    for (int d = 1; d <= kMaxHidden; ++d) {
      const ArchSpec arch = uniform_arch(d, w);
      ok = ok && Mlp<float>(arch).allocated_parameters() == parameter_count(arch);
      ++checked;
    }
  return {ok, fmt("8x32 -> %lld, 6x64 -> %lld, %d width/depth pairs checked",
                  (long long)parameter_count(uniform_arch(8, 32)), (long long)parameter_count(uniform_arch(6, 64)),
                  checked)};
}

Outcome reward_goldens() {
  bool ok = reward_formula(0.98, 7553) == 0.0;
  int violations = 0;
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 100; ++j) {
      const double acc = 0.9 + 0.001 * i;
      const std::int64_t size = 41 + 211 * j;
      if (i + 1 < 100 && !(reward_formula(0.9 + 0.001 * (i + 1), size) > reward_formula(acc, size))) ++violations;
      if (j + 1 < 100 && !(reward_formula(acc, 41 + 211 * (j + 1)) < reward_formula(acc, size))) ++violations;
    }
  return {ok && violations == 0, fmt("reward(0.98, 7553) = %g, monotonicity violations %d", reward_formula(0.98, 7553),
                                     violations)};
}

Outcome gradient_check() {
  const double h = 1e-4;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::size_t total = 0, good = 0;
  std::set<ActivationKind> seen;
  for (int n = 0; n < 20; ++n) {
    ArchSpec arch;
    for (int l = 0; l <= n % 3; ++l) {
      const auto kind = static_cast<ActivationKind>((n + l) % 3);
      seen.insert(kind);
      arch.hidden.push_back({8, Activation{kind}});
    }
    const Mlp<double> net = Mlp<double>::random(arch, 100 + static_cast<std::uint64_t>(n));
    Positions<double> x(3, 24);
    RowVectorX<double> y(24);
    for (Eigen::Index i = 0; i < 24; ++i) {
      x.col(i) << u(rng), u(rng), u(rng);
      y[i] = u(rng) > 0.0 ? 1.0 : 0.0;
    }
    MlpGradient<double> grad;
    loss_and_gradient(net, x, y, grad);
    const VectorX<double> analytic = grad.flatten();
    const VectorX<double> theta = net.flatten();
    Mlp<double> probe = net;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      VectorX<double> t = theta;
      t[k] += h;
      probe.assign(t);
      const double up = bce_loss(forward(probe, x), y);
      t[k] -= 2 * h;
      probe.assign(t);
      const double down = bce_loss(forward(probe, x), y);
      ++total;
      good += oracle::relative_error(analytic[k], (up - down) / (2 * h)) < kGradRelTol;
    }
  }
  const double frac = static_cast<double>(good) / static_cast<double>(total);
  return {frac > kGradGoodFraction && seen.size() == 3,
          fmt("%zu/%zu parameters within %g relative error (%.4f), %zu activation kinds", good, total, kGradRelTol, frac,
              seen.size())};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> fill(0.2, 0.8);
  int pairs = 0, iou_bad = 0, cd_bad = 0, asym = 0;
  double worst = 0.0;
  while (pairs < 50) {
    const VoxelGrid a = oracle::random_grid(8, fill(rng), rng);
    const VoxelGrid b = oracle::random_grid(8, fill(rng), rng);
    if (oracle::surface_points(a).empty() || oracle::surface_points(b).empty()) continue;
    ++pairs;
    if (iou(a, b) != oracle::iou(a, b)) ++iou_bad;
    const double d = std::abs(chamfer(a, b) - oracle::chamfer_x1000(a, b));
    worst = std::max(worst, d);
    if (d > kChamferTol) ++cd_bad;
    if (chamfer(a, b) != chamfer(b, a)) ++asym;
  }
  return {iou_bad == 0 && cd_bad == 0 && asym == 0,
          fmt("%d pairs: iou mismatches %d, chamfer max |diff| %.3g, asymmetric %d", pairs, iou_bad, worst, asym)};
}

Outcome voxelizer_accuracy() {
  const int n = 128;
  const VoxelGrid sphere = shape_grid("sphere", n);
  const double ball = 4.0 / 3.0 * std::numbers::pi * 0.9 * 0.9 * 0.9 / std::pow(2.0 / n, 3);
  const double rel = std::abs(static_cast<double>(sphere.count()) - ball) / ball;

  // Box: count voxel centers strictly inside the normalized cube's extent.
  const int m = 64;
  const Mesh box = normalize_mesh(analytic_shape("box"), 0.9);
  Eigen::Vector3d lo = box.vertices.front(), hi = lo;
  for (const auto& v : box.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  int side[3];
  for (int k = 0; k < 3; ++k) {
    side[k] = 0;
    for (int i = 0; i < m; ++i) {
      const double c = -1.0 + (i + 0.5) * 2.0 / m;
      side[k] += c > lo[k] && c < hi[k];
    }
  }
  const long long exact = 1LL * side[0] * side[1] * side[2];
  const long long shell = exact - 1LL * (side[0] - 2) * (side[1] - 2) * (side[2] - 2);
  const long long got = static_cast<long long>(shape_grid("box", m).count());
  return {rel <= kBallVolumeTol && std::llabs(got - exact) <= shell,
          fmt("sphere N=128: %zu voxels vs ball %.0f (rel %.4f); box N=64: %lld vs exact %lld (shell %lld)",
              sphere.count(), ball, rel, got, exact, shell)};
}

// Union of random balls; brute-force support set.
Outcome sampling_contract() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.6, 0.6), r(0.15, 0.5);
  int failures = 0;
  std::string first;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 16 + 4 * (trial % 5);
    VoxelGrid g(n);
    const int balls = 1 + trial % 4;
    std::vector<std::pair<Eigen::Vector3d, double>> spec;
    for (int b = 0; b < balls; ++b) spec.push_back({{u(rng), u(rng), u(rng)}, r(rng)});
    for (std::size_t i = 0; i < g.size(); ++i)
      for (const auto& [c, rad] : spec)
        if ((g.center(i) - c).norm() <= rad) g.set(i, true);

    std::vector<std::uint8_t> in_support(g.size(), 0);
    for (const auto& p : oracle::surface_points(g)) in_support[g.index(p[0], p[1], p[2])] = 1;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          const std::size_t i = g.index(x, y, z);
          if (g[i]) continue;
          const int d[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
          for (const auto& o : d) {
            const int a = x + o[0], b = y + o[1], c = z + o[2];
            if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) continue;
            const std::size_t j = g.index(a, b, c);
            if (g[j] && in_support[j] == 1) in_support[i] = 2;
          }
        }
    std::size_t support = 0;
    for (auto s : in_support) support += s != 0;
    const std::size_t others = g.size() - support;

    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
    const TrainingSet t = build_training_set(g, support_set(g), seed);
    const TrainingSet again = build_training_set(g, support_set(g), seed);
    const auto k = static_cast<std::size_t>(t.size());
    bool ok = k == 2 * (others / 4);
    std::size_t non_support = 0, support_samples = 0;
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const auto p = t.positions.col(i);
      const std::size_t idx = g.index(voxel_of(p.x(), n), voxel_of(p.y(), n), voxel_of(p.z(), n));
      ok = ok && t.labels[i] == (g[idx] ? 1.0f : 0.0f);
      const bool first_half = static_cast<std::size_t>(i) < k / 2;
      ok = ok && (first_half == (in_support[idx] == 0));
      (in_support[idx] ? support_samples : non_support)++;
    }
    ok = ok && non_support == support_samples;
    ok = ok && t.positions.size() == again.positions.size() &&
         std::memcmp(t.positions.data(), again.positions.data(), sizeof(float) * t.positions.size()) == 0 &&
         std::memcmp(t.labels.data(), again.labels.data(), sizeof(float) * t.labels.size()) == 0;
    if (!ok) {
      ++failures;
      if (first.empty()) first = fmt(" (first failure: trial %d, N=%d, K=%zu, O=%zu)", trial, n, k, others);
    }
  }
  return {failures == 0, fmt("20 grids, %d contract violations%s", failures, first.c_str())};
}

Outcome selection_rule() {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(1, 40), depth(1, 6), size_step(0, 12), acc_step(0, 30);
  std::uniform_real_distribution<double> threshold(0.0, 0.01);
  int mismatches = 0, shuffle_changes = 0;
  for (int log = 0; log < 1000; ++log) {
    std::vector<CandidateRecord> recs;
    const int c = count(rng);
    for (int i = 0; i < c; ++i) {
      CandidateRecord r;
      r.arch = uniform_arch(depth(rng), 8);
      r.size = 500 + 250 * size_step(rng);  // coarse values so ties occur
      r.acc = 0.97 + 0.001 * acc_step(rng);
      r.reward = reward_formula(r.acc, r.size);
      r.round = 1 + i / 6;
      r.index_in_round = i % 6;
      recs.push_back(r);
    }
    const double t = log % 4 == 0 ? 0.001 : threshold(rng);
    const auto& expect = recs[oracle::select_index(recs, t)];
    const auto got = select_candidate(recs, {.threshold = t});
    if (got.round != expect.round || got.index_in_round != expect.index_in_round) ++mismatches;
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto shuffled = select_candidate(recs, {.threshold = t});
    if (shuffled.round != got.round || shuffled.index_in_round != got.index_in_round) ++shuffle_changes;
  }
  return {mismatches == 0 && shuffle_changes == 0,
          fmt("1000 logs: %d mismatches vs brute force, %d order-dependent results", mismatches, shuffle_changes)};
}

Outcome end_to_end() {
  bool ok = true;
  std::ostringstream detail;
  for (const char* name : {"sphere", "box", "torus"}) {
    const VoxelGrid grid = shape_grid(name, kEndToEndResolution);
    PipelineConfig cfg;
    cfg.resolution = kEndToEndResolution;
    cfg.seed = kEndToEndSeed;
    const PipelineResult r = run_pipeline(grid, cfg);
    const auto& m = r.final.metrics;
    const bool pass = m.iou >= kMinIou && m.size <= kMaxSelectedSize && m.cd_x1000 <= kMaxCd;
    ok = ok && pass && r.records.size() == 30;
    detail << fmt("%s%s: %s size=%lld iou=%.4f cd=%.4f%s", detail.tellp() > 0 ? "; " : "", name,
                  to_string(r.arch).c_str(), (long long)m.size, m.iou, m.cd_x1000, pass ? "" : " [miss]");
  }
  return {ok, detail.str()};
}

// Arch shape (widths only); every activation of the same widths has the same size.
std::vector<int> widths_of(const ArchSpec& a) {
  std::vector<int> w;
  for (const auto& l : a.hidden) w.push_back(l.width);
  return w;
}

Outcome controller_sanity() {
  // (a) Reward -size (scaled by the largest size so it stays on the scale of the real reward).
  const SearchSpace space;
  const SearchConfig defaults;
  auto modal_widths = [&](std::uint64_t seed) {
    ControllerPolicy policy = ControllerPolicy::uniform(space);
    policy.learning_rate = defaults.controller_lr;
    policy.baseline_decay = defaults.baseline_decay;
    std::mt19937_64 rng(seed);
    for (int round = 1; round <= 20; ++round) {
      std::vector<CandidateRecord> batch;
      for (int i = 0; i < defaults.per_round; ++i) {
        CandidateRecord r;
        r.arch = sample_architecture(policy, space, rng);
        r.size = parameter_count(r.arch);
        r.reward = -static_cast<double>(r.size) / static_cast<double>(kSizeMax);
        r.round = round;
        r.index_in_round = i;
        batch.push_back(r);
      }
      update_policy(policy, space, batch);
    }
    std::map<std::vector<int>, int> tally;
    for (int i = 0; i < 2000; ++i) ++tally[widths_of(sample_architecture(policy, space, rng))];
    return std::max_element(tally.begin(), tally.end(), [](auto& a, auto& b) { return a.second < b.second; })->first;
  };
  const std::vector<int> smallest{space.widths.front()};
  const std::vector<int> mode = modal_widths(21);
  const bool size_ok = mode == smallest;
  // Not part of the verdict: how often other seeds reach the same mode.
  int hits = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) hits += modal_widths(seed) == smallest;
  std::string mode_text;
  for (int w : mode) mode_text += (mode_text.empty() ? "" : ",") + std::to_string(w);

  // (b) Accuracy-only reward on a separable half-space target vs the fixed no-search arch.
  VoxelGrid grid(32);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::Vector3d c = grid.center(i);
    grid.set(i, c.x() + 0.5 * c.y() - 0.25 * c.z() > 0.1);
  }
  PipelineConfig cfg;
  cfg.resolution = 32;
  cfg.seed = 3;
  cfg.size_reward = false;
  cfg.postprocess = false;
  const PreparedData data = prepare(grid, cfg);
  const auto [records, report] = search_and_select(grid, data, cfg);
  const FinalizeResult searched = finalize(report.chosen.arch, data.training, grid, cfg.final_train_config());
  const FinalizeResult fixed = finalize(no_search_arch(), data.training, grid, cfg.final_train_config());
  const double acc_search = full_grid_accuracy(searched.net, grid);
  const double acc_fixed = full_grid_accuracy(fixed.net, grid);

  return {size_ok && acc_search >= acc_fixed,
          fmt("-size reward: modal widths [%s] (seeds 1-20 reach [%d]: %d/20); acc-only search %s acc %.5f vs "
              "no-search acc %.5f",
              mode_text.c_str(), smallest.front(), hits, to_string(report.chosen.arch).c_str(), acc_search, acc_fixed)};
}

Outcome ablation_direction() {
  const VoxelGrid grid = shape_grid("torus", kEndToEndResolution);
  double mean_on = 0.0, mean_off = 0.0;
  int pp_violations = 0, pp_comparisons = 0;
  std::ostringstream sizes;
  for (int s = 1; s <= kAblationSeeds; ++s) {
    for (bool size_reward : {true, false}) {
      PipelineConfig cfg;
      cfg.resolution = kEndToEndResolution;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.size_reward = size_reward;
      const PreparedData data = prepare(grid, cfg);
      const auto [records, with_pp] = search_and_select(grid, data, cfg);
      const SelectionReport without_pp = select(records, {.threshold = cfg.threshold, .postprocess = false});
      (size_reward ? mean_on : mean_off) += static_cast<double>(with_pp.chosen.size) / kAblationSeeds;
      sizes << fmt("%s%d%s:%lld", sizes.tellp() > 0 ? " " : "", s, size_reward ? "+" : "-",
                   (long long)with_pp.chosen.size);
      // Post-processing never picks a larger net when the no-post-processing pick clears acc >= best - t.
      if (without_pp.chosen.acc >= with_pp.best_acc - cfg.threshold) {
        ++pp_comparisons;
        if (with_pp.chosen.size > without_pp.chosen.size) ++pp_violations;
      }
    }
  }
  return {mean_off >= mean_on && pp_violations == 0,
          fmt("mean selected size: size reward on %.1f, off %.1f [%s]; post-processing larger in %d of %d comparable runs",
              mean_on, mean_off, sizes.str().c_str(), pp_violations, pp_comparisons)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "parameter-count goldens", 1, parameter_counts},
      {2, "reward goldens and monotonicity", 1, reward_goldens},
      {3, "gradient correctness", 30, gradient_check},
      {4, "metric oracles", 30, metric_oracles},
      {5, "voxelizer accuracy", 60, voxelizer_accuracy},
      {6, "sampling contract", 30, sampling_contract},
      {7, "selection rule", 5, selection_rule},
      {8, "end-to-end reconstruction", 1800, end_to_end},
      {9, "controller sanity", 600, controller_sanity},
      {10, "ablation direction", 3600, ablation_direction},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  // Voxelizer warnings are expected noise here.
  set_warning_sink([](std::string_view) {});

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("[%s] criterion %d: %s (%.1fs of %.0fs%s): %s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_seconds, in_time ? "" : ", over budget", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
