#include "nasvox/geometry.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nasvox {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// "12", "12/4", "12//7", "-1/2/3" -> vertex index (1-based or negative-relative).
int parse_face_index(std::string_view token, int vertex_count) {
  const auto slash = token.find('/');
  const std::string_view head = token.substr(0, slash);
  int idx = 0;
  const auto [ptr, ec] = std::from_chars(head.data(), head.data() + head.size(), idx);
  if (ec != std::errc() || ptr != head.data() + head.size() || idx == 0)
    throw std::runtime_error("OBJ: bad face index '" + std::string(token) + "'");
  return idx > 0 ? idx - 1 : vertex_count + idx;
}

float read_f32_le(const std::uint8_t* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                       (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

Mesh parse_obj(std::string_view text) {
  Mesh mesh;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw std::runtime_error("OBJ: bad vertex on line " + std::to_string(line_no));
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_face_index(tok, static_cast<int>(mesh.vertices.size())));
      if (poly.size() < 3) throw std::runtime_error("OBJ: face with < 3 vertices on line " + std::to_string(line_no));
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) mesh.triangles.emplace_back(poly[0], poly[k], poly[k + 1]);
    }
  }
  validate(mesh);
  return mesh;
}

Mesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_obj(ss.str());
}

Mesh read_stl(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  if (bytes.size() < 84) throw std::runtime_error("STL: file too short");
  const std::uint32_t count = static_cast<std::uint32_t>(bytes[80]) | (static_cast<std::uint32_t>(bytes[81]) << 8) |
                              (static_cast<std::uint32_t>(bytes[82]) << 16) |
                              (static_cast<std::uint32_t>(bytes[83]) << 24);
  if (bytes.size() != 84 + 50ull * count) {
    if (std::string_view(reinterpret_cast<const char*>(bytes.data()), 5) == "solid")
      throw std::runtime_error("STL: ASCII STL is not supported");
    throw std::runtime_error("STL: size does not match triangle count");
  }
  Mesh mesh;
  std::map<std::array<float, 3>, int> ids;
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint8_t* rec = bytes.data() + 84 + 50ull * t;
    Eigen::Vector3i tri;
    for (int k = 0; k < 3; ++k) {
      const std::uint8_t* p = rec + 12 + 12 * k;
      const std::array<float, 3> key = {read_f32_le(p), read_f32_le(p + 4), read_f32_le(p + 8)};
      auto [it, inserted] = ids.try_emplace(key, static_cast<int>(mesh.vertices.size()));
      if (inserted) mesh.vertices.emplace_back(key[0], key[1], key[2]);
      tri[k] = it->second;
    }
    mesh.triangles.push_back(tri);
  }
  validate(mesh);
  return mesh;
}

Mesh read_mesh(const std::filesystem::path& path) {
  const std::string ext = lower(path.extension().string());
  if (ext == ".obj") return read_obj(path);
  if (ext == ".stl") return read_stl(path);
  throw std::runtime_error("unsupported mesh format '" + ext + "' (expected .obj or .stl)");
}

void write_obj(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace nasvox
