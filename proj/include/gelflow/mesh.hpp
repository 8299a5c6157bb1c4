#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "gelflow/common.hpp"

namespace gelflow {

// Oriented boundary edge: (v0,v1) runs counter-clockwise around the domain
// (domain on the left), `normal` is the outward unit normal, `tri` the unique
// triangle incident to the edge.
struct BoundaryEdge {
  int v0 = -1;
  int v1 = -1;
  Vec2 normal;
  int tag = 0;
  int tri = -1;
};

// Conforming triangulation of a 2-D polygonal domain. Triangles are CCW
// vertex-index triples. Immutable after construction.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;

  std::array<Vec2, 3> tri_coords(int t) const {
    const auto& tri = triangles[t];
    return {vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
  }
};

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

inline double triangle_area(const Mesh& m, int t) {
  auto [a, b, c] = m.tri_coords(t);
  return signed_area(a, b, c);
}

inline Vec2 triangle_centroid(const Mesh& m, int t) {
  auto [a, b, c] = m.tri_coords(t);
  return (a + b + c) / 3.0;
}

inline double mesh_area(const Mesh& m) {
  double total = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) total += triangle_area(m, static_cast<int>(t));
  return total;
}

// Maximum edge length over all triangles.
inline double mesh_size(const Mesh& m) {
  double h = 0.0;
  for (const auto& tri : m.triangles)
    for (int e = 0; e < 3; ++e) h = std::max(h, (m.vertices[tri[(e + 1) % 3]] - m.vertices[tri[e]]).norm());
  return h;
}

namespace detail {

inline std::pair<int, int> sorted_edge(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

// Map from undirected edge to incident triangle(s).
inline std::map<std::pair<int, int>, std::vector<int>> edge_incidence(const Mesh& m) {
  std::map<std::pair<int, int>, std::vector<int>> inc;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int e = 0; e < 3; ++e) inc[sorted_edge(tri[e], tri[(e + 1) % 3])].push_back(static_cast<int>(t));
  }
  return inc;
}

// Locates the parent triangle for each (v0,v1,tag) record, orients the edge so
// the domain lies on the left, and computes the outward normal.
inline void finalize_boundary(Mesh& m, const std::vector<std::array<int, 3>>& raw_edges) {
  auto inc = edge_incidence(m);
  m.boundary_edges.clear();
  m.boundary_edges.reserve(raw_edges.size());
  for (const auto& [a, b, tag] : raw_edges) {
    auto it = inc.find(sorted_edge(a, b));
    if (it == inc.end() || it->second.size() != 1)
      throw MeshError("boundary not closed: edge (" + std::to_string(a + 1) + "," + std::to_string(b + 1) +
                      ") does not bound exactly one triangle");
    BoundaryEdge be;
    be.tri = it->second.front();
    be.tag = tag;
    const auto& tri = m.triangles[be.tri];
    be.v0 = a;
    be.v1 = b;
    for (int e = 0; e < 3; ++e) {
      if (tri[e] == b && tri[(e + 1) % 3] == a) {
        be.v0 = b;
        be.v1 = a;
        break;
      }
    }
    Vec2 d = m.vertices[be.v1] - m.vertices[be.v0];
    be.normal = Vec2{d.y, -d.x} / d.norm();
    m.boundary_edges.push_back(be);
  }
}

}  // namespace detail

// Ordered vertex loops of the boundary, each traversed counter-clockwise.
inline std::vector<std::vector<int>> boundary_loops(const Mesh& m) {
  std::map<int, int> next;
  for (const auto& be : m.boundary_edges) {
    if (next.count(be.v0)) throw MeshError("boundary not closed: vertex " + std::to_string(be.v0 + 1) + " has two outgoing boundary edges");
    next[be.v0] = be.v1;
  }
  std::vector<std::vector<int>> loops;
  std::map<int, bool> seen;
  for (const auto& [start, unused] : next) {
    if (seen[start]) continue;
    std::vector<int> loop;
    int v = start;
    do {
      loop.push_back(v);
      seen[v] = true;
      auto it = next.find(v);
      if (it == next.end()) throw MeshError("boundary not closed: open chain at vertex " + std::to_string(v + 1));
      v = it->second;
    } while (v != start);
    loops.push_back(std::move(loop));
  }
  return loops;
}

// Checks every Mesh invariant; throws MeshError naming the violated one.
inline void validate_mesh(const Mesh& m) {
  if (m.vertices.empty() || m.triangles.empty()) throw MeshError("empty mesh");
  const int nv = static_cast<int>(m.vertices.size());
  std::vector<char> used(nv, 0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int v : tri) {
      if (v < 0 || v >= nv) throw MeshError("vertex index out of range in triangle " + std::to_string(t + 1));
      used[v] = 1;
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("degenerate triangle " + std::to_string(t + 1));
    if (triangle_area(m, static_cast<int>(t)) <= 0.0)
      throw MeshError("negative area: triangle " + std::to_string(t + 1) + " is not counter-clockwise");
  }
  for (int v = 0; v < nv; ++v)
    if (!used[v]) throw MeshError("unreferenced vertex " + std::to_string(v + 1));

  auto inc = detail::edge_incidence(m);
  std::size_t topological_boundary = 0;
  for (const auto& [edge, tris] : inc) {
    if (tris.size() > 2) throw MeshError("non-manifold edge");
    if (tris.size() == 1) ++topological_boundary;
  }
  if (m.boundary_edges.size() != topological_boundary)
    throw MeshError("boundary not closed: mesh has " + std::to_string(topological_boundary) +
                    " boundary edges, " + std::to_string(m.boundary_edges.size()) + " listed");
  for (const auto& be : m.boundary_edges) {
    auto it = inc.find(detail::sorted_edge(be.v0, be.v1));
    if (it == inc.end() || it->second.size() != 1)
      throw MeshError("boundary not closed: listed edge is interior or absent");
    if (be.tri != it->second.front()) throw MeshError("boundary edge parent triangle mismatch");
    Vec2 mid = (m.vertices[be.v0] + m.vertices[be.v1]) * 0.5;
    if (be.normal.dot(mid - triangle_centroid(m, be.tri)) <= 0.0) throw MeshError("boundary normal not outward");
    if (std::abs(be.normal.norm() - 1.0) > 1e-12) throw MeshError("boundary normal not unit");
  }
  const auto loops = boundary_loops(m);  // throws on open chains
  const long long V = nv, F = static_cast<long long>(m.triangles.size()), E = static_cast<long long>(inc.size());
  if (V - E + F != 2 - static_cast<long long>(loops.size()))
    throw MeshError("Euler relation violated: V-E+F = " + std::to_string(V - E + F));
}

// Structured grid of nx*ny cells, each cell split along the lower-left to
// upper-right diagonal. Boundary tags: 1=left, 2=right, 3=bottom, 4=top.
inline Mesh gen_rect_mesh(int nx, int ny, Vec2 lower, Vec2 upper) {
  if (nx < 1 || ny < 1) throw InvalidParameterError("gen_rect_mesh: nx, ny must be >= 1");
  if (upper.x <= lower.x || upper.y <= lower.y) throw InvalidParameterError("gen_rect_mesh: degenerate rectangle");
  Mesh m;
  const double dx = (upper.x - lower.x) / nx, dy = (upper.y - lower.y) / ny;
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back({lower.x + i * dx, lower.y + j * dy});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int v00 = id(i, j), v10 = id(i + 1, j), v01 = id(i, j + 1), v11 = id(i + 1, j + 1);
      m.triangles.push_back({v00, v10, v11});
      m.triangles.push_back({v00, v11, v01});
    }
  std::vector<std::array<int, 3>> raw;
  for (int j = 0; j < ny; ++j) raw.push_back({id(0, j), id(0, j + 1), 1});
  for (int j = 0; j < ny; ++j) raw.push_back({id(nx, j), id(nx, j + 1), 2});
  for (int i = 0; i < nx; ++i) raw.push_back({id(i, 0), id(i + 1, 0), 3});
  for (int i = 0; i < nx; ++i) raw.push_back({id(i, ny), id(i + 1, ny), 4});
  detail::finalize_boundary(m, raw);
  validate_mesh(m);
  return m;
}

// Polar-structured triangulation of the inscribed polygon of the ellipse
// x^2/a^2 + y^2/b^2 <= 1 with n_theta boundary segments and n_r rings.
// Boundary tags 1..4 by angular quadrant of the edge midpoint.
inline Mesh gen_ellipse_mesh(double a, double b, int n_r, int n_theta) {
  if (a <= 0.0 || b <= 0.0) throw InvalidParameterError("gen_ellipse_mesh: semi-axes must be positive");
  if (n_r < 1 || n_theta < 3) throw InvalidParameterError("gen_ellipse_mesh: need n_r >= 1, n_theta >= 3");
  Mesh m;
  m.vertices.push_back({0.0, 0.0});
  auto id = [n_theta](int k, int j) { return 1 + (k - 1) * n_theta + ((j % n_theta + n_theta) % n_theta); };
  for (int k = 1; k <= n_r; ++k) {
    const double r = static_cast<double>(k) / n_r;
    for (int j = 0; j < n_theta; ++j) {
      const double th = 2.0 * M_PI * j / n_theta;
      m.vertices.push_back({a * r * std::cos(th), b * r * std::sin(th)});
    }
  }
  for (int j = 0; j < n_theta; ++j) m.triangles.push_back({0, id(1, j), id(1, j + 1)});
  for (int k = 1; k < n_r; ++k)
    for (int j = 0; j < n_theta; ++j) {
      m.triangles.push_back({id(k, j), id(k + 1, j), id(k + 1, j + 1)});
      m.triangles.push_back({id(k, j), id(k + 1, j + 1), id(k, j + 1)});
    }
  std::vector<std::array<int, 3>> raw;
  for (int j = 0; j < n_theta; ++j) {
    const Vec2 mid = (m.vertices[id(n_r, j)] + m.vertices[id(n_r, j + 1)]) * 0.5;
    double th = std::atan2(mid.y, mid.x);
    if (th < 0.0) th += 2.0 * M_PI;
    const int tag = 1 + std::min(3, static_cast<int>(th / (0.5 * M_PI)));
    raw.push_back({id(n_r, j), id(n_r, j + 1), tag});
  }
  detail::finalize_boundary(m, raw);
  validate_mesh(m);
  return m;
}

// Splits every triangle into four via edge midpoints. Halves the mesh size,
// preserves conformity and boundary tags.
inline Mesh refine_uniform(const Mesh& coarse) {
  Mesh m;
  m.vertices = coarse.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid_id = [&](int a, int b) {
    auto key = detail::sorted_edge(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = static_cast<int>(m.vertices.size());
    m.vertices.push_back((coarse.vertices[a] + coarse.vertices[b]) * 0.5);
    midpoint.emplace(key, idx);
    return idx;
  };
  for (const auto& tri : coarse.triangles) {
    const int A = tri[0], B = tri[1], C = tri[2];
    const int ab = mid_id(A, B), bc = mid_id(B, C), ca = mid_id(C, A);
    m.triangles.push_back({A, ab, ca});
    m.triangles.push_back({B, bc, ab});
    m.triangles.push_back({C, ca, bc});
    m.triangles.push_back({ab, bc, ca});
  }
  std::vector<std::array<int, 3>> raw;
  for (const auto& be : coarse.boundary_edges) {
    const int mid = mid_id(be.v0, be.v1);
    raw.push_back({be.v0, mid, be.tag});
    raw.push_back({mid, be.v1, be.tag});
  }
  detail::finalize_boundary(m, raw);
  validate_mesh(m);
  return m;
}

// ASCII mesh format:
//   $Nodes / <N> / "<id> <x> <y>", then $Triangles, $BoundaryEdges sections.
inline std::string write_mesh(const Mesh& m) {
  std::ostringstream os;
  char buf[144];
  os << "$Nodes\n" << m.vertices.size() << "\n";
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", i + 1, m.vertices[i].x, m.vertices[i].y);
    os << buf;
  }
  os << "$Triangles\n" << m.triangles.size() << "\n";
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    os << t + 1 << " " << m.triangles[t][0] + 1 << " " << m.triangles[t][1] + 1 << " " << m.triangles[t][2] + 1 << "\n";
  os << "$BoundaryEdges\n" << m.boundary_edges.size() << "\n";
  for (std::size_t e = 0; e < m.boundary_edges.size(); ++e)
    os << e + 1 << " " << m.boundary_edges[e].v0 + 1 << " " << m.boundary_edges[e].v1 + 1 << " "
       << m.boundary_edges[e].tag << "\n";
  return os.str();
}

inline Mesh read_mesh(std::istream& in) {
  Mesh m;
  std::vector<std::array<int, 3>> raw;
  std::string line;
  int lineno = 0;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  auto parse_fail = [&](const std::string& what) -> MeshError {
    return MeshError("parse error at line " + std::to_string(lineno) + ": " + what);
  };
  auto expect_section = [&](const std::string& name) {
    if (!next_line() || line != name) throw parse_fail("expected " + name);
  };
  auto read_count = [&]() {
    if (!next_line()) throw parse_fail("expected count");
    std::istringstream ls(line);
    long long n = -1;
    if (!(ls >> n) || n < 0) throw parse_fail("invalid count");
    return static_cast<std::size_t>(n);
  };

  expect_section("$Nodes");
  const std::size_t nv = read_count();
  m.vertices.resize(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_line()) throw parse_fail("unexpected end of node list");
    std::istringstream ls(line);
    std::size_t id;
    double x, y;
    if (!(ls >> id >> x >> y) || id != i + 1) throw parse_fail("invalid node record");
    m.vertices[i] = {x, y};
  }
  expect_section("$Triangles");
  const std::size_t nt = read_count();
  m.triangles.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    if (!next_line()) throw parse_fail("unexpected end of triangle list");
    std::istringstream ls(line);
    std::size_t id;
    int a, b, c;
    if (!(ls >> id >> a >> b >> c) || id != t + 1) throw parse_fail("invalid triangle record");
    m.triangles[t] = {a - 1, b - 1, c - 1};
  }
  expect_section("$BoundaryEdges");
  const std::size_t nb = read_count();
  raw.resize(nb);
  for (std::size_t e = 0; e < nb; ++e) {
    if (!next_line()) throw parse_fail("unexpected end of boundary list");
    std::istringstream ls(line);
    std::size_t id;
    int a, b, tag;
    if (!(ls >> id >> a >> b >> tag) || id != e + 1) throw parse_fail("invalid boundary edge record");
    raw[e] = {a - 1, b - 1, tag};
  }
  for (std::size_t t = 0; t < nt; ++t)
    if (triangle_area(m, static_cast<int>(t)) <= 0.0)
      throw MeshError("negative area: triangle " + std::to_string(t + 1) + " is not counter-clockwise");
  detail::finalize_boundary(m, raw);
  validate_mesh(m);
  return m;
}

inline Mesh read_mesh(const std::string& text) {
  std::istringstream is(text);
  return read_mesh(is);
}

}  // namespace gelflow
