#pragma once

#include <map>

#include "gelflow/quadrature.hpp"

namespace gelflow {

enum class SpaceKind { ScalarP1, ScalarP2, VectorP2 };

// Local node order on a triangle (v0,v1,v2): nodes 0..2 are the vertices,
// node 3 is the midpoint of edge (v1,v2), node 4 of (v2,v0), node 5 of (v0,v1).
// Vector-P2 dofs interleave components: local 2k+c <-> component c of scalar
// node k, and global 2g+c <-> component c of scalar dof g.
struct BasisEval {
  int count = 0;
  std::array<double, 6> value{};
  std::array<Vec2, 6> ref_grad{};  // w.r.t. reference coordinates (xi, eta)
};

// Lagrange basis values and reference gradients at a barycentric point.
// For VectorP2 the scalar P2 basis is returned; components are handled by the
// interleaving convention above.
inline BasisEval eval_basis(SpaceKind kind, const std::array<double, 3>& bary) {
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  static constexpr Vec2 dl[3] = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
  BasisEval out;
  if (kind == SpaceKind::ScalarP1) {
    out.count = 3;
    out.value = {l0, l1, l2};
    out.ref_grad = {dl[0], dl[1], dl[2]};
    return out;
  }
  out.count = 6;
  const double l[3] = {l0, l1, l2};
  for (int i = 0; i < 3; ++i) {
    out.value[i] = l[i] * (2.0 * l[i] - 1.0);
    out.ref_grad[i] = dl[i] * (4.0 * l[i] - 1.0);
  }
  // edge nodes: 3 <-> 4*l1*l2, 4 <-> 4*l2*l0, 5 <-> 4*l0*l1
  const int ea[3] = {1, 2, 0}, eb[3] = {2, 0, 1};
  for (int e = 0; e < 3; ++e) {
    const int i = ea[e], j = eb[e];
    out.value[3 + e] = 4.0 * l[i] * l[j];
    out.ref_grad[3 + e] = dl[i] * (4.0 * l[j]) + dl[j] * (4.0 * l[i]);
  }
  return out;
}

// Affine map data for one triangle: physical gradient = JinvT * ref gradient.
struct ElementGeometry {
  std::array<Vec2, 3> coords;
  double area = 0.0;
  Mat2 jac_inv_t;

  explicit ElementGeometry(const Mesh& m, int t) {
    coords = m.tri_coords(t);
    const Vec2 e1 = coords[1] - coords[0], e2 = coords[2] - coords[0];
    const double det = e1.x * e2.y - e1.y * e2.x;
    area = 0.5 * det;
    jac_inv_t = {e2.y / det, -e1.y / det, -e2.x / det, e1.x / det};
  }

  Vec2 physical_grad(const Vec2& ref_grad) const { return jac_inv_t.apply(ref_grad); }
};

struct DofMap {
  SpaceKind kind = SpaceKind::ScalarP1;
  int n_dofs = 0;
  int n_scalar_dofs = 0;
  int dofs_per_element = 0;
  std::vector<std::vector<int>> element_dofs;        // local -> global, per triangle
  std::vector<Vec2> scalar_dof_points;               // nodal coordinates per scalar dof
  std::map<int, std::vector<int>> boundary_dofs;     // scalar dofs per boundary tag
};

inline DofMap build_dofmap(const Mesh& m, SpaceKind kind) {
  DofMap dm;
  dm.kind = kind;
  const int nv = static_cast<int>(m.vertices.size());
  if (kind == SpaceKind::ScalarP1) {
    dm.n_scalar_dofs = nv;
    dm.dofs_per_element = 3;
    dm.scalar_dof_points = m.vertices;
    for (const auto& tri : m.triangles) dm.element_dofs.push_back({tri[0], tri[1], tri[2]});
    for (const auto& be : m.boundary_edges) {
      auto& list = dm.boundary_dofs[be.tag];
      list.push_back(be.v0);
      list.push_back(be.v1);
    }
  } else {
    std::map<std::pair<int, int>, int> edge_id;
    auto edge_dof = [&](int a, int b) {
      auto key = detail::sorted_edge(a, b);
      auto it = edge_id.find(key);
      if (it != edge_id.end()) return nv + it->second;
      const int e = static_cast<int>(edge_id.size());
      edge_id.emplace(key, e);
      return nv + e;
    };
    for (const auto& tri : m.triangles) {
      dm.element_dofs.push_back({tri[0], tri[1], tri[2],
                                 edge_dof(tri[1], tri[2]), edge_dof(tri[2], tri[0]), edge_dof(tri[0], tri[1])});
    }
    dm.n_scalar_dofs = nv + static_cast<int>(edge_id.size());
    dm.dofs_per_element = 6;
    dm.scalar_dof_points.assign(dm.n_scalar_dofs, Vec2{});
    for (int v = 0; v < nv; ++v) dm.scalar_dof_points[v] = m.vertices[v];
    for (const auto& [key, e] : edge_id)
      dm.scalar_dof_points[nv + e] = (m.vertices[key.first] + m.vertices[key.second]) * 0.5;
    for (const auto& be : m.boundary_edges) {
      auto& list = dm.boundary_dofs[be.tag];
      list.push_back(be.v0);
      list.push_back(be.v1);
      list.push_back(edge_dof(be.v0, be.v1));
    }
  }
  if (kind == SpaceKind::VectorP2) {
    dm.dofs_per_element = 12;
    for (auto& dofs : dm.element_dofs) {
      std::vector<int> vec_dofs(12);
      for (int k = 0; k < 6; ++k)
        for (int c = 0; c < 2; ++c) vec_dofs[2 * k + c] = 2 * dofs[k] + c;
      dofs = std::move(vec_dofs);
    }
    dm.n_dofs = 2 * dm.n_scalar_dofs;
  } else {
    dm.n_dofs = dm.n_scalar_dofs;
  }
  return dm;
}

// Finite element function: coefficient vector on a dof map.
struct FEField {
  const DofMap* dofmap = nullptr;
  std::vector<double> coeffs;

  FEField() = default;
  explicit FEField(const DofMap& dm) : dofmap(&dm), coeffs(dm.n_dofs, 0.0) {}
  FEField(const DofMap& dm, std::vector<double> c) : dofmap(&dm), coeffs(std::move(c)) {
    if (static_cast<int>(coeffs.size()) != dm.n_dofs) throw InvalidParameterError("FEField: coefficient length mismatch");
  }
};

// Scalar field value on element t at a barycentric point.
inline double eval_scalar(const FEField& f, int t, const std::array<double, 3>& bary) {
  const auto basis = eval_basis(f.dofmap->kind, bary);
  const auto& dofs = f.dofmap->element_dofs[t];
  double v = 0.0;
  for (int k = 0; k < basis.count; ++k) v += f.coeffs[dofs[k]] * basis.value[k];
  return v;
}

inline Vec2 eval_scalar_grad(const FEField& f, const ElementGeometry& geom, int t,
                             const std::array<double, 3>& bary) {
  const auto basis = eval_basis(f.dofmap->kind, bary);
  const auto& dofs = f.dofmap->element_dofs[t];
  Vec2 g;
  for (int k = 0; k < basis.count; ++k) g += geom.physical_grad(basis.ref_grad[k]) * f.coeffs[dofs[k]];
  return g;
}

inline Vec2 eval_vector(const FEField& f, int t, const std::array<double, 3>& bary) {
  const auto basis = eval_basis(SpaceKind::ScalarP2, bary);
  const auto& dofs = f.dofmap->element_dofs[t];
  Vec2 v;
  for (int k = 0; k < 6; ++k) {
    v.x += f.coeffs[dofs[2 * k]] * basis.value[k];
    v.y += f.coeffs[dofs[2 * k + 1]] * basis.value[k];
  }
  return v;
}

// Gradient of a vector-P2 field: rows are gradients of the components.
inline Mat2 eval_vector_grad(const FEField& f, const ElementGeometry& geom, int t,
                             const std::array<double, 3>& bary) {
  const auto basis = eval_basis(SpaceKind::ScalarP2, bary);
  const auto& dofs = f.dofmap->element_dofs[t];
  Mat2 g;
  for (int k = 0; k < 6; ++k) {
    const Vec2 gk = geom.physical_grad(basis.ref_grad[k]);
    g.a00 += f.coeffs[dofs[2 * k]] * gk.x;
    g.a01 += f.coeffs[dofs[2 * k]] * gk.y;
    g.a10 += f.coeffs[dofs[2 * k + 1]] * gk.x;
    g.a11 += f.coeffs[dofs[2 * k + 1]] * gk.y;
  }
  return g;
}

// Nodal interpolant of an analytic vector field into vector-P2.
inline FEField interpolate_vector(const DofMap& dm, const std::function<Vec2(const Vec2&)>& u) {
  FEField f(dm);
  for (int g = 0; g < dm.n_scalar_dofs; ++g) {
    const Vec2 v = u(dm.scalar_dof_points[g]);
    f.coeffs[2 * g] = v.x;
    f.coeffs[2 * g + 1] = v.y;
  }
  return f;
}

inline FEField interpolate_scalar(const DofMap& dm, const std::function<double(const Vec2&)>& s) {
  FEField f(dm);
  for (int g = 0; g < dm.n_scalar_dofs; ++g) f.coeffs[g] = s(dm.scalar_dof_points[g]);
  return f;
}

}  // namespace gelflow
