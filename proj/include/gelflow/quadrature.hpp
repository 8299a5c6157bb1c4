#pragma once

#include <array>
#include <functional>

#include "gelflow/mesh.hpp"

namespace gelflow {

struct QuadPoint {
  std::array<double, 3> bary;
  double weight;  // reference-triangle measure, weights sum to 1/2
};

struct QuadratureRule {
  std::vector<QuadPoint> points;
  int exactness_degree = 0;
};

// 6-point degree-4 rule (Dunavant). Exact for all products appearing in the
// assembled P2/P1 forms.
inline const QuadratureRule& triangle_rule_deg4() {
  static const QuadratureRule rule = [] {
    QuadratureRule r;
    r.exactness_degree = 4;
    const double a1 = 0.44594849091596488, w1 = 0.22338158967801146 / 2.0;
    const double a2 = 0.09157621350977074, w2 = 0.10995174365532187 / 2.0;
    for (const double a : {a1, a2}) {
      const double w = (a == a1) ? w1 : w2;
      const double b = 1.0 - 2.0 * a;
      r.points.push_back({{b, a, a}, w});
      r.points.push_back({{a, b, a}, w});
      r.points.push_back({{a, a, b}, w});
    }
    return r;
  }();
  return rule;
}

struct EdgeQuadPoint {
  double s;  // parameter in [0,1] along the edge
  double weight;
};

// 3-point Gauss-Legendre on [0,1], exact to degree 5.
inline const std::array<EdgeQuadPoint, 3>& edge_rule_gauss3() {
  static const std::array<EdgeQuadPoint, 3> rule = [] {
    const double r = 0.5 * std::sqrt(0.6);
    return std::array<EdgeQuadPoint, 3>{{{0.5 - r, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + r, 5.0 / 18.0}}};
  }();
  return rule;
}

inline Vec2 bary_to_physical(const std::array<Vec2, 3>& tri, const std::array<double, 3>& bary) {
  return tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
}

// Integral of a scalar field over the mesh with the module-level degree-4 rule.
inline double integrate_domain(const Mesh& m, const std::function<double(const Vec2&)>& f) {
  const auto& rule = triangle_rule_deg4();
  double total = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto tri = m.tri_coords(static_cast<int>(t));
    const double jac = 2.0 * triangle_area(m, static_cast<int>(t));
    for (const auto& qp : rule.points) total += jac * qp.weight * f(bary_to_physical(tri, qp.bary));
  }
  return total;
}

// Integral of a scalar over the boundary with 3-point Gauss per edge.
inline double integrate_boundary(const Mesh& m,
                                 const std::function<double(const Vec2&, const Vec2&, int)>& f) {
  double total = 0.0;
  for (const auto& be : m.boundary_edges) {
    const Vec2 p0 = m.vertices[be.v0], p1 = m.vertices[be.v1];
    const double len = (p1 - p0).norm();
    for (const auto& qp : edge_rule_gauss3())
      total += len * qp.weight * f(p0 + (p1 - p0) * qp.s, be.normal, be.tag);
  }
  return total;
}

inline Vec2 integrate_boundary_vec(const Mesh& m,
                                   const std::function<Vec2(const Vec2&, const Vec2&, int)>& f) {
  Vec2 total;
  for (const auto& be : m.boundary_edges) {
    const Vec2 p0 = m.vertices[be.v0], p1 = m.vertices[be.v1];
    const double len = (p1 - p0).norm();
    for (const auto& qp : edge_rule_gauss3()) total += len * qp.weight * f(p0 + (p1 - p0) * qp.s, be.normal, be.tag);
  }
  return total;
}

}  // namespace gelflow
