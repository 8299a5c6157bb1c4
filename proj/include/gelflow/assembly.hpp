#pragma once

#include "gelflow/core_model.hpp"
#include "gelflow/linsolve.hpp"

namespace gelflow {

// beta * (grad u, grad v) on vector-P2. Symmetric positive semidefinite with
// kernel spanned by the two constant vector fields.
inline SparseMatrix assemble_vector_laplacian(const Mesh& m, const DofMap& vec_dm, double beta) {
  if (vec_dm.kind != SpaceKind::VectorP2) throw InvalidParameterError("assemble_vector_laplacian: vector-P2 dofmap required");
  if (!(beta > 0.0)) throw InvalidParameterError("assemble_vector_laplacian: beta must be positive");
  const auto& rule = triangle_rule_deg4();
  std::vector<Triplet> ts;
  ts.reserve(m.triangles.size() * 72);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& dofs = vec_dm.element_dofs[t];
    double local[6][6] = {};
    for (const auto& qp : rule.points) {
      const auto basis = eval_basis(SpaceKind::ScalarP2, qp.bary);
      Vec2 g[6];
      for (int k = 0; k < 6; ++k) g[k] = geom.physical_grad(basis.ref_grad[k]);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 6; ++k)
        for (int l = 0; l < 6; ++l) local[k][l] += w * g[k].dot(g[l]);
    }
    for (int k = 0; k < 6; ++k)
      for (int l = 0; l < 6; ++l)
        for (int c = 0; c < 2; ++c) ts.push_back({dofs[2 * k + c], dofs[2 * l + c], beta * local[k][l]});
  }
  return SparseMatrix::from_triplets(vec_dm.n_dofs, vec_dm.n_dofs, std::move(ts));
}

// B[k][i] = (div phi_i, psi_k): rows are P1 test functions, columns vector-P2.
inline SparseMatrix assemble_divergence(const Mesh& m, const DofMap& vec_dm, const DofMap& p1_dm) {
  if (vec_dm.kind != SpaceKind::VectorP2 || p1_dm.kind != SpaceKind::ScalarP1)
    throw InvalidParameterError("assemble_divergence: expects vector-P2 and scalar-P1 dofmaps");
  const auto& rule = triangle_rule_deg4();
  std::vector<Triplet> ts;
  ts.reserve(m.triangles.size() * 36);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& udofs = vec_dm.element_dofs[t];
    const auto& pdofs = p1_dm.element_dofs[t];
    double local[3][12] = {};
    for (const auto& qp : rule.points) {
      const auto p2 = eval_basis(SpaceKind::ScalarP2, qp.bary);
      const auto p1 = eval_basis(SpaceKind::ScalarP1, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int g = 0; g < 6; ++g) {
        const Vec2 grad = geom.physical_grad(p2.ref_grad[g]);
        for (int k = 0; k < 3; ++k) {
          local[k][2 * g] += w * grad.x * p1.value[k];
          local[k][2 * g + 1] += w * grad.y * p1.value[k];
        }
      }
    }
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 12; ++j) ts.push_back({pdofs[k], udofs[j], local[k][j]});
  }
  return SparseMatrix::from_triplets(p1_dm.n_dofs, vec_dm.n_dofs, std::move(ts));
}

inline SparseMatrix assemble_mass_p1(const Mesh& m, const DofMap& p1_dm) {
  const auto& rule = triangle_rule_deg4();
  std::vector<Triplet> ts;
  ts.reserve(m.triangles.size() * 9);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& dofs = p1_dm.element_dofs[t];
    double local[3][3] = {};
    for (const auto& qp : rule.points) {
      const auto p1 = eval_basis(SpaceKind::ScalarP1, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) local[k][l] += w * p1.value[k] * p1.value[l];
    }
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) ts.push_back({dofs[k], dofs[l], local[k][l]});
  }
  return SparseMatrix::from_triplets(p1_dm.n_dofs, p1_dm.n_dofs, std::move(ts));
}

// (grad psi, grad chi) on P1; kernel = constants.
inline SparseMatrix assemble_stiffness_p1(const Mesh& m, const DofMap& p1_dm) {
  std::vector<Triplet> ts;
  ts.reserve(m.triangles.size() * 9);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& dofs = p1_dm.element_dofs[t];
    const auto p1 = eval_basis(SpaceKind::ScalarP1, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    Vec2 g[3];
    for (int k = 0; k < 3; ++k) g[k] = geom.physical_grad(p1.ref_grad[k]);
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) ts.push_back({dofs[k], dofs[l], geom.area * g[k].dot(g[l])});
  }
  return SparseMatrix::from_triplets(p1_dm.n_dofs, p1_dm.n_dofs, std::move(ts));
}

namespace detail {

// Barycentric coordinates of the parent triangle along a boundary edge:
// returns bary(s) for the point (1-s)*v0 + s*v1.
inline std::array<double, 3> edge_bary(const Mesh& m, const BoundaryEdge& be, double s) {
  const auto& tri = m.triangles[be.tri];
  std::array<double, 3> bary{0.0, 0.0, 0.0};
  for (int k = 0; k < 3; ++k) {
    if (tri[k] == be.v0) bary[k] = 1.0 - s;
    if (tri[k] == be.v1) bary[k] = s;
  }
  return bary;
}

}  // namespace detail

// F[i] = <f, phi_i> over the boundary with 3-point Gauss per edge.
inline std::vector<double> assemble_boundary_load(const Mesh& m, const DofMap& vec_dm, const BoundaryLoad& f,
                                                  double t = 0.0) {
  std::vector<double> F(vec_dm.n_dofs, 0.0);
  for (const auto& be : m.boundary_edges) {
    const Vec2 p0 = m.vertices[be.v0], p1 = m.vertices[be.v1];
    const double len = (p1 - p0).norm();
    const auto& dofs = vec_dm.element_dofs[be.tri];
    for (const auto& qp : edge_rule_gauss3()) {
      const Vec2 x = p0 + (p1 - p0) * qp.s;
      const Vec2 fx = f(x, be.normal, be.tag, t);
      const auto basis = eval_basis(SpaceKind::ScalarP2, detail::edge_bary(m, be, qp.s));
      for (int k = 0; k < 6; ++k) {
        F[dofs[2 * k]] += len * qp.weight * fx.x * basis.value[k];
        F[dofs[2 * k + 1]] += len * qp.weight * fx.y * basis.value[k];
      }
    }
  }
  return F;
}

// (g, phi_i) for a vector-valued volume source (manufactured solutions).
inline std::vector<double> assemble_volume_load_vec(const Mesh& m, const DofMap& vec_dm,
                                                    const std::function<Vec2(const Vec2&)>& g) {
  const auto& rule = triangle_rule_deg4();
  std::vector<double> F(vec_dm.n_dofs, 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& dofs = vec_dm.element_dofs[t];
    for (const auto& qp : rule.points) {
      const Vec2 gx = g(bary_to_physical(geom.coords, qp.bary));
      const auto basis = eval_basis(SpaceKind::ScalarP2, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 6; ++k) {
        F[dofs[2 * k]] += w * gx.x * basis.value[k];
        F[dofs[2 * k + 1]] += w * gx.y * basis.value[k];
      }
    }
  }
  return F;
}

// (g, psi_k) for a scalar volume source on P1.
inline std::vector<double> assemble_volume_load_p1(const Mesh& m, const DofMap& p1_dm,
                                                   const std::function<double(const Vec2&)>& g) {
  const auto& rule = triangle_rule_deg4();
  std::vector<double> F(p1_dm.n_dofs, 0.0);
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& dofs = p1_dm.element_dofs[t];
    for (const auto& qp : rule.points) {
      const double gx = g(bary_to_physical(geom.coords, qp.bary));
      const auto basis = eval_basis(SpaceKind::ScalarP1, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 3; ++k) F[dofs[k]] += w * gx * basis.value[k];
    }
  }
  return F;
}

// <g, psi_k> over the boundary for P1 test functions (natural-flux data).
inline std::vector<double> assemble_boundary_flux_p1(const Mesh& m, const DofMap& p1_dm,
                                                     const std::function<double(const Vec2&, const Vec2&)>& g) {
  std::vector<double> F(p1_dm.n_dofs, 0.0);
  for (const auto& be : m.boundary_edges) {
    const Vec2 p0 = m.vertices[be.v0], p1 = m.vertices[be.v1];
    const double len = (p1 - p0).norm();
    const auto& dofs = p1_dm.element_dofs[be.tri];
    for (const auto& qp : edge_rule_gauss3()) {
      const double gx = g(p0 + (p1 - p0) * qp.s, be.normal);
      const auto basis = eval_basis(SpaceKind::ScalarP1, detail::edge_bary(m, be, qp.s));
      for (int k = 0; k < 3; ++k) F[dofs[k]] += len * qp.weight * gx * basis.value[k];
    }
  }
  return F;
}

// Functional rows used for pinning constraints and diagnostics:
//   mean_u_x[i] = (phi_i)_x integrated, mean_u_y likewise,
//   flux_u[i]   = boundary flux of phi_i,
//   mean_ptilde[k] = integral of psi_k.
struct MomentRows {
  std::vector<double> mean_u_x;
  std::vector<double> mean_u_y;
  std::vector<double> flux_u;
  std::vector<double> mean_ptilde;
};

inline MomentRows assemble_moment_rows(const Mesh& m, const DofMap& vec_dm, const DofMap& p1_dm) {
  MomentRows rows;
  rows.mean_u_x.assign(vec_dm.n_dofs, 0.0);
  rows.mean_u_y.assign(vec_dm.n_dofs, 0.0);
  rows.flux_u.assign(vec_dm.n_dofs, 0.0);
  rows.mean_ptilde.assign(p1_dm.n_dofs, 0.0);
  const auto& rule = triangle_rule_deg4();
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    const auto& udofs = vec_dm.element_dofs[t];
    const auto& pdofs = p1_dm.element_dofs[t];
    for (const auto& qp : rule.points) {
      const auto p2 = eval_basis(SpaceKind::ScalarP2, qp.bary);
      const auto p1 = eval_basis(SpaceKind::ScalarP1, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 6; ++k) {
        rows.mean_u_x[udofs[2 * k]] += w * p2.value[k];
        rows.mean_u_y[udofs[2 * k + 1]] += w * p2.value[k];
      }
      for (int k = 0; k < 3; ++k) rows.mean_ptilde[pdofs[k]] += w * p1.value[k];
    }
  }
  for (const auto& be : m.boundary_edges) {
    const Vec2 p0 = m.vertices[be.v0], p1 = m.vertices[be.v1];
    const double len = (p1 - p0).norm();
    const auto& dofs = vec_dm.element_dofs[be.tri];
    for (const auto& qp : edge_rule_gauss3()) {
      const auto basis = eval_basis(SpaceKind::ScalarP2, detail::edge_bary(m, be, qp.s));
      for (int k = 0; k < 6; ++k) {
        rows.flux_u[dofs[2 * k]] += len * qp.weight * basis.value[k] * be.normal.x;
        rows.flux_u[dofs[2 * k + 1]] += len * qp.weight * basis.value[k] * be.normal.y;
      }
    }
  }
  return rows;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidParameterError("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// The scalar functionals of the conservation and energy bookkeeping.
struct Functionals {
  double int_q = 0.0;       // (q_h, 1)
  double int_ptilde = 0.0;  // (ptilde_h, 1)
  double flux_u = 0.0;      // <u_h . nu, 1> on the boundary
  double f_dot_u = 0.0;     // <f, u_h>
  double moment_f = 0.0;    // <f . x, 1> on the boundary
};

inline Functionals integrate_functionals(const Mesh& m, const MomentRows& rows, const FEField& q,
                                         const FEField& ptilde, const FEField& u, const BoundaryLoad& f,
                                         std::span<const double> load_vector, double t = 0.0) {
  if (q.dofmap->n_dofs != static_cast<int>(rows.mean_ptilde.size()) ||
      ptilde.dofmap->n_dofs != static_cast<int>(rows.mean_ptilde.size()) ||
      u.dofmap->n_dofs != static_cast<int>(rows.flux_u.size()))
    throw InvalidParameterError("integrate_functionals: dimension mismatch");
  Functionals out;
  out.int_q = dot(rows.mean_ptilde, q.coeffs);
  out.int_ptilde = dot(rows.mean_ptilde, ptilde.coeffs);
  out.flux_u = dot(rows.flux_u, u.coeffs);
  out.f_dot_u = dot(load_vector, u.coeffs);
  out.moment_f = integrate_boundary(m, [&](const Vec2& x, const Vec2& n, int tag) { return f(x, n, tag, t).dot(x); });
  return out;
}

}  // namespace gelflow
