#include "nasvox/metrics.hpp"

#include "nasvox/geometry.hpp"

#include "json.hpp"

#include <chrono>
#include <limits>
#include <stdexcept>

namespace nasvox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line.
void distance_1d(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  int k = 0;
  int first = 0;
  while (first < n && f[first] == kInf) ++first;
  if (first == n) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  v[0] = first;
  z[0] = -kInf;
  z[1] = kInf;
  for (int q = first + 1; q < n; ++q) {
    if (f[q] == kInf) continue;
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

double mean_nearest(const std::vector<std::size_t>& from, const std::vector<double>& dist_to_other) {
  double sum = 0.0;
  for (auto i : from) sum += dist_to_other[i];
  return sum / static_cast<double>(from.size());
}

}  // namespace

double iou(const VoxelGrid& pred, const VoxelGrid& gt) {
  if (pred.resolution() != gt.resolution()) throw std::invalid_argument("resolution mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] && gt[i];
    uni += pred[i] || gt[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& marked, int resolution) {
  const auto n = static_cast<std::size_t>(resolution);
  if (marked.size() != n * n * n) throw std::invalid_argument("mask size mismatch");
  std::vector<double> grid(marked.size());
  for (std::size_t i = 0; i < marked.size(); ++i) grid[i] = marked[i] ? 0.0 : kInf;

  std::vector<double> line(n), out(n), z(n + 1);
  std::vector<int> v(n);
  const std::size_t strides[3] = {1, n, n * n};
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t s = strides[axis];
    const std::size_t a = strides[(axis + 1) % 3];
    const std::size_t b = strides[(axis + 2) % 3];
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t base = i * a + j * b;
        for (std::size_t q = 0; q < n; ++q) line[q] = grid[base + q * s];
        distance_1d(line.data(), out.data(), resolution, v, z);
        for (std::size_t q = 0; q < n; ++q) grid[base + q * s] = out[q];
      }
    }
  }
  return grid;
}

double chamfer(const VoxelGrid& pred, const VoxelGrid& gt, ChamferSpace space) {
  if (pred.resolution() != gt.resolution()) throw std::invalid_argument("resolution mismatch");
  const auto surf_pred = surface_voxels(pred);
  const auto surf_gt = surface_voxels(gt);
  if (surf_pred.empty() || surf_gt.empty()) throw std::invalid_argument("undefined CD");

  auto mask_of = [&](const std::vector<std::size_t>& pts) {
    std::vector<std::uint8_t> m(pred.size(), 0);
    for (auto i : pts) m[i] = 1;
    return m;
  };
  const int n = pred.resolution();
  const auto to_gt = squared_distance_transform(mask_of(surf_gt), n);
  const auto to_pred = squared_distance_transform(mask_of(surf_pred), n);
  const double scale = space == ChamferSpace::Normalized ? pred.pitch() * pred.pitch() : 1.0;
  // Each term is computed the same way regardless of argument order, so swapping
  // the grids swaps the addends and the sum is bit-identical.
  const double forward_term = mean_nearest(surf_pred, to_gt) * scale;
  const double backward_term = mean_nearest(surf_gt, to_pred) * scale;
  return (forward_term + backward_term) * 1000.0;
}

ReportMetrics evaluate(const VoxelGrid& pred, const VoxelGrid& gt, std::int64_t size) {
  const auto t0 = std::chrono::steady_clock::now();
  ReportMetrics m;
  m.iou = iou(pred, gt);
  try {
    m.cd_x1000 = chamfer(pred, gt);
  } catch (const std::invalid_argument&) {
    m.cd_x1000 = kInf;
  }
  m.size = size;
  m.resolution = gt.resolution();
  m.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

std::string to_json(const ReportMetrics& m) {
  nlohmann::ordered_json j;
  j["iou"] = m.iou;
  j["cd_x1000"] = m.cd_x1000;
  j["size"] = m.size;
  j["resolution"] = m.resolution;
  j["runtime_seconds"] = m.runtime_seconds;
  return j.dump();
}

}  // namespace nasvox
