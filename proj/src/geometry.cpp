#include "nasvox/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iostream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace nasvox {

namespace {

WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}

// A projected edge owns its boundary points when it points "up", or "left" if
// horizontal. Two triangles sharing an edge traverse it in opposite directions
// after CCW orientation, so exactly one of them claims a ray that hits it.
bool owns_boundary(double du, double dv) { return dv > 0.0 || (dv == 0.0 && du < 0.0); }

// Casts rays along +axis through every voxel center of the orthogonal plane and
// marks centers with an odd number of crossings beyond them.
std::vector<std::uint8_t> parity_fill(const Mesh& mesh, int n, int axis) {
  const int ua = (axis + 1) % 3;
  const int va = (axis + 2) % 3;
  const double pitch = 2.0 / n;
  const auto nn = static_cast<std::size_t>(n);
  std::vector<std::vector<double>> crossings(nn * nn);

  auto first_center = [&](double lo) {
    return std::max(0, static_cast<int>(std::ceil((lo + 1.0) / pitch - 0.5)));
  };
  auto last_center = [&](double hi) {
    return std::min(n - 1, static_cast<int>(std::floor((hi + 1.0) / pitch - 0.5)));
  };

  for (const Eigen::Vector3i& tri : mesh.triangles) {
    std::array<Eigen::Vector3d, 3> p = {mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]};
    double area2 = (p[1][ua] - p[0][ua]) * (p[2][va] - p[0][va]) - (p[1][va] - p[0][va]) * (p[2][ua] - p[0][ua]);
    if (area2 == 0.0) continue;
    if (area2 < 0.0) {
      std::swap(p[1], p[2]);
      area2 = -area2;
    }
    const double umin = std::min({p[0][ua], p[1][ua], p[2][ua]});
    const double umax = std::max({p[0][ua], p[1][ua], p[2][ua]});
    const double vmin = std::min({p[0][va], p[1][va], p[2][va]});
    const double vmax = std::max({p[0][va], p[1][va], p[2][va]});
    const int i0 = first_center(umin), i1 = last_center(umax);
    const int j0 = first_center(vmin), j1 = last_center(vmax);

    for (int j = j0; j <= j1; ++j) {
      const double v = -1.0 + (j + 0.5) * pitch;
      for (int i = i0; i <= i1; ++i) {
        const double u = -1.0 + (i + 0.5) * pitch;
        std::array<double, 3> edge{};
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
          const Eigen::Vector3d& a = p[k];
          const Eigen::Vector3d& b = p[(k + 1) % 3];
          const double du = b[ua] - a[ua];
          const double dv = b[va] - a[va];
          edge[k] = du * (v - a[va]) - dv * (u - a[ua]);
          inside = edge[k] > 0.0 || (edge[k] == 0.0 && owns_boundary(du, dv));
        }
        if (!inside) continue;
        // edge[k] is opposite vertex (k+2)%3.
        const double t = (edge[1] * p[0][axis] + edge[2] * p[1][axis] + edge[0] * p[2][axis]) / area2;
        crossings[static_cast<std::size_t>(i) + nn * static_cast<std::size_t>(j)].push_back(t);
      }
    }
  }

  std::vector<std::uint8_t> inside(nn * nn * nn, 0);
  std::array<std::size_t, 3> stride = {1, nn, nn * nn};
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      auto& line = crossings[static_cast<std::size_t>(i) + nn * static_cast<std::size_t>(j)];
      if (line.empty()) continue;
      std::sort(line.begin(), line.end());
      const std::size_t base = stride[ua] * static_cast<std::size_t>(i) + stride[va] * static_cast<std::size_t>(j);
      // Crossings strictly beyond the center; the pointer walks forward as the center advances.
      std::size_t passed = 0;
      for (int k = 0; k < n; ++k) {
        const double c = -1.0 + (k + 0.5) * pitch;
        while (passed < line.size() && line[passed] <= c) ++passed;
        if ((line.size() - passed) % 2 == 1) inside[base + stride[axis] * static_cast<std::size_t>(k)] = 1;
      }
    }
  }
  return inside;
}

}  // namespace

void set_warning_sink(WarningSink sink) { warning_sink() = std::move(sink); }

void warn(std::string_view message) {
  if (warning_sink()) warning_sink()(message);
}

void validate(const Mesh& mesh) {
  if (mesh.vertices.size() < 3) throw std::invalid_argument("mesh needs at least 3 vertices");
  if (mesh.triangles.empty()) throw std::invalid_argument("mesh needs at least 1 triangle");
  const auto nv = static_cast<int>(mesh.vertices.size());
  for (const auto& t : mesh.triangles) {
    if ((t.array() < 0).any() || (t.array() >= nv).any())
      throw std::invalid_argument("triangle index out of range");
  }
}

Mesh normalize_mesh(const Mesh& mesh, double radius) {
  validate(mesh);
  if (!(radius > 0.0 && radius <= 1.0)) throw std::invalid_argument("radius must be in (0, 1]");
  Eigen::Vector3d lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  double max_norm = 0.0;
  for (const auto& v : mesh.vertices) max_norm = std::max(max_norm, (v - center).norm());
  if (max_norm == 0.0) throw std::invalid_argument("zero extent");

  Mesh out = mesh;
  const double scale = radius / max_norm;
  for (auto& v : out.vertices) v = (v - center) * scale;
  return out;
}

VoxelGrid voxelize(const Mesh& mesh, int resolution, VoxelizeStats* stats) {
  validate(mesh);
  if (resolution < 8) throw std::invalid_argument("resolution >= 8 required");

  std::array<std::vector<std::uint8_t>, 3> votes;
  for (int axis = 0; axis < 3; ++axis) votes[axis] = parity_fill(mesh, resolution, axis);

  VoxelGrid grid(resolution);
  std::size_t any = 0, disagree = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const int v = votes[0][i] + votes[1][i] + votes[2][i];
    grid.set(i, v >= 2);
    if (v > 0) ++any;
    if (v == 1 || v == 2) ++disagree;
  }
  const double frac = any == 0 ? 0.0 : static_cast<double>(disagree) / static_cast<double>(any);
  const std::size_t occupied = grid.count();
  if (stats) *stats = {frac, occupied};
  if (occupied == 0) throw std::runtime_error("voxelization produced empty model");
  if (frac > 0.05)
    warn("axis votes disagree on " + std::to_string(100.0 * frac) + "% of voxels; mesh may not be watertight");
  return grid;
}

SupportSet support_set(const VoxelGrid& grid) {
  const int n = grid.resolution();
  static constexpr int kOffsets[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  SupportSet s;
  std::vector<std::uint8_t> is_outer(grid.size(), 0);
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (!grid.at(x, y, z)) continue;
        bool boundary = false;
        for (const auto& o : kOffsets) {
          const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (!grid.in_bounds(nx, ny, nz)) {
            boundary = true;
          } else if (!grid.at(nx, ny, nz)) {
            boundary = true;
            is_outer[grid.index(nx, ny, nz)] = 1;
          }
        }
        if (boundary) s.surface.push_back(grid.index(x, y, z));
      }
    }
  }
  for (std::size_t i = 0; i < is_outer.size(); ++i)
    if (is_outer[i]) s.outer.push_back(i);
  if (s.surface.empty()) throw std::invalid_argument("support set of an empty grid");
  if (s.outer.empty()) warn("grid is fully occupied; outer support layer is empty");
  return s;
}

std::vector<std::size_t> surface_voxels(const VoxelGrid& grid) {
  const int n = grid.resolution();
  std::vector<std::size_t> out;
  for (int z = 0; z < n; ++z) {
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        if (!grid.at(x, y, z)) continue;
        const bool interior = x > 0 && y > 0 && z > 0 && x < n - 1 && y < n - 1 && z < n - 1 &&
                              grid.at(x + 1, y, z) && grid.at(x - 1, y, z) && grid.at(x, y + 1, z) &&
                              grid.at(x, y - 1, z) && grid.at(x, y, z + 1) && grid.at(x, y, z - 1);
        if (!interior) out.push_back(grid.index(x, y, z));
      }
    }
  }
  return out;
}

Mesh make_uv_sphere(double radius, int stacks, int slices) {
  if (stacks < 2 || slices < 3) throw std::invalid_argument("sphere tessellation too coarse");
  Mesh m;
  const double pi = std::numbers::pi;
  m.vertices.emplace_back(0.0, 0.0, radius);
  for (int i = 1; i < stacks; ++i) {
    const double theta = pi * i / stacks;
    for (int j = 0; j < slices; ++j) {
      const double phi = 2.0 * pi * j / slices;
      m.vertices.emplace_back(radius * std::sin(theta) * std::cos(phi), radius * std::sin(theta) * std::sin(phi),
                              radius * std::cos(theta));
    }
  }
  m.vertices.emplace_back(0.0, 0.0, -radius);
  const int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring = [&](int i, int j) { return 1 + (i - 1) * slices + (j % slices); };
  for (int j = 0; j < slices; ++j) m.triangles.emplace_back(0, ring(1, j), ring(1, j + 1));
  for (int i = 1; i < stacks - 1; ++i) {
    for (int j = 0; j < slices; ++j) {
      m.triangles.emplace_back(ring(i, j), ring(i + 1, j), ring(i + 1, j + 1));
      m.triangles.emplace_back(ring(i, j), ring(i + 1, j + 1), ring(i, j + 1));
    }
  }
  for (int j = 0; j < slices; ++j) m.triangles.emplace_back(south, ring(stacks - 1, j + 1), ring(stacks - 1, j));
  return m;
}

Mesh make_box(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  Mesh m;
  for (int c = 0; c < 8; ++c)
    m.vertices.emplace_back(c & 1 ? hi.x() : lo.x(), c & 2 ? hi.y() : lo.y(), c & 4 ? hi.z() : lo.z());
  // Outward-facing quads, each split into two triangles.
  static constexpr int kQuads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                                       {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : kQuads) {
    m.triangles.emplace_back(q[0], q[1], q[2]);
    m.triangles.emplace_back(q[0], q[2], q[3]);
  }
  return m;
}

Mesh make_torus(double major_radius, double minor_radius, int major_segments, int minor_segments) {
  if (major_segments < 3 || minor_segments < 3) throw std::invalid_argument("torus tessellation too coarse");
  Mesh m;
  const double pi = std::numbers::pi;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2.0 * pi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double v = 2.0 * pi * j / minor_segments;
      const double r = major_radius + minor_radius * std::cos(v);
      m.vertices.emplace_back(r * std::cos(u), r * std::sin(u), minor_radius * std::sin(v));
    }
  }
  auto id = [&](int i, int j) { return (i % major_segments) * minor_segments + (j % minor_segments); };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) {
      m.triangles.emplace_back(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      m.triangles.emplace_back(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  }
  return m;
}

Mesh analytic_shape(std::string_view name) {
  if (name == "sphere") return make_uv_sphere(1.0, 64, 128);
  if (name == "box") return make_box({-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5});
  if (name == "torus") return make_torus(0.6, 0.25, 96, 48);
  throw std::invalid_argument("unknown shape '" + std::string(name) + "'");
}

}  // namespace nasvox
