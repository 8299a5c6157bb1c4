#pragma once

#include <optional>

#include "gelflow/fem.hpp"

namespace gelflow {

// Gel material constants: bulk modulus K, shear modulus G, polymer volume
// fraction phi, friction constant xi.
struct MaterialParams {
  double K = 0.0;
  double G = 0.0;
  double phi = 0.0;
  double xi = 0.0;
};

// PNIPA hydrogel constants (E = 6e3, nu = 0.43, phi = 0.15, xi = 100).
inline MaterialParams pnipa_hydrogel() { return {14285.7, 2097.9, 0.15, 100.0}; }

// Derived constants of the reformulated system:
//   alpha = K + G/3, beta = G, kappa = (1-phi)^2/xi,
//   D = kappa*(K + 4G/3) = kappa*(alpha+beta), c_d = alpha + beta/d.
struct DerivedParams {
  double alpha = 0.0;
  double beta = 0.0;
  double kappa = 0.0;
  double D = 0.0;
  double c_d = 0.0;
  int dim = 2;
};

inline DerivedParams derive_params(const MaterialParams& mp, int d = 2) {
  if (!(mp.K > 0.0)) throw InvalidParameterError("derive_params: K must be positive");
  if (!(mp.G > 0.0)) throw InvalidParameterError("derive_params: G must be positive");
  if (!(mp.phi >= 0.0 && mp.phi < 1.0)) throw InvalidParameterError("derive_params: phi must lie in [0,1)");
  if (!(mp.xi > 0.0)) throw InvalidParameterError("derive_params: xi must be positive");
  if (d != 2) throw InvalidParameterError("derive_params: only d = 2 is supported");
  DerivedParams dp;
  dp.alpha = mp.K + mp.G / 3.0;
  dp.beta = mp.G;
  dp.kappa = sqr(1.0 - mp.phi) / mp.xi;
  dp.D = dp.kappa * (dp.alpha + dp.beta);
  dp.c_d = dp.alpha + dp.beta / d;
  dp.dim = d;
  return dp;
}

// Conserved quantities of the flow:
//   C_q = integral of q, C_u = boundary flux of u, C_ptilde/C_p the pressure
//   means times |Omega|. Satisfy C_u = C_q and C_ptilde = C_p - alpha*C_q.
struct ConservedSet {
  double C_q = 0.0;
  double C_u = 0.0;
  double C_ptilde = 0.0;
  double C_p = 0.0;
};

// Traction data on the boundary: force per unit boundary length as a function
// of (point, outward unit normal, boundary tag, time). Physical loads are
// independent of t (time_dependent = false); the manufactured-solution path
// sets the flag and the scheme then reassembles the load every step.
struct BoundaryLoad {
  std::function<Vec2(const Vec2&, const Vec2&, int, double)> eval;
  bool time_dependent = false;

  Vec2 operator()(const Vec2& x, const Vec2& n, int tag, double t) const { return eval(x, n, tag, t); }
};

inline BoundaryLoad zero_load() {
  return {[](const Vec2&, const Vec2&, int, double) { return Vec2{}; }, false};
}

// f = magnitude * clockwise unit tangent (rotate the outward normal by -90deg).
inline BoundaryLoad tangential_load(double magnitude) {
  return {[magnitude](const Vec2&, const Vec2& n, int, double) { return Vec2{n.y, -n.x} * magnitude; }, false};
}

inline BoundaryLoad per_tag_load(std::map<int, Vec2> forces) {
  return {[forces = std::move(forces)](const Vec2&, const Vec2&, int tag, double) {
            auto it = forces.find(tag);
            return it == forces.end() ? Vec2{} : it->second;
          },
          false};
}

// Initial displacement; div_u0 is the analytic divergence when available.
struct InitialData {
  std::function<Vec2(const Vec2&)> u0;
  std::optional<std::function<double(const Vec2&)>> div_u0;
};

// Divergence of u0 on one element at a barycentric point: the analytic
// callback when supplied, otherwise the divergence of the local P2
// interpolant.
inline double div_u0_at(const InitialData& data, const ElementGeometry& geom,
                        const std::array<double, 3>& bary) {
  if (data.div_u0) return (*data.div_u0)(bary_to_physical(geom.coords, bary));
  const auto basis = eval_basis(SpaceKind::ScalarP2, bary);
  static constexpr std::array<std::array<double, 3>, 6> nodes = {
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}};
  double div = 0.0;
  for (int k = 0; k < 6; ++k) {
    const Vec2 uk = data.u0(bary_to_physical(geom.coords, nodes[k]));
    const Vec2 gk = geom.physical_grad(basis.ref_grad[k]);
    div += uk.x * gk.x + uk.y * gk.y;
  }
  return div;
}

// Verifies that a supplied div_u0 matches a centered finite difference of u0
// at element centroids. Throws InvalidParameterError on mismatch.
inline void validate_initial_data(const InitialData& data, const Mesh& m, double tol = 1e-5) {
  if (!data.u0) throw InvalidParameterError("initial data: u0 missing");
  if (!data.div_u0) return;
  const double step = 1e-5;
  const std::size_t stride = std::max<std::size_t>(1, m.triangles.size() / 32);
  double scale = 1.0;
  for (std::size_t t = 0; t < m.triangles.size(); t += stride) {
    const Vec2 c = triangle_centroid(m, static_cast<int>(t));
    const double fd = (data.u0({c.x + step, c.y}).x - data.u0({c.x - step, c.y}).x +
                       data.u0({c.x, c.y + step}).y - data.u0({c.x, c.y - step}).y) /
                      (2.0 * step);
    const double an = (*data.div_u0)(c);
    scale = std::max({scale, std::abs(an), std::abs(fd)});
    if (std::abs(fd - an) > tol * scale)
      throw InvalidParameterError("initial data: div_u0 disagrees with finite-difference divergence of u0");
  }
}

// Residual of the load compatibility condition: ||∮ f dS||_2 at t = 0.
inline double check_compatibility(const BoundaryLoad& f, const Mesh& m) {
  const Vec2 total = integrate_boundary_vec(m, [&](const Vec2& x, const Vec2& n, int tag) { return f(x, n, tag, 0.0); });
  return total.norm();
}

inline ConservedSet compute_conserved(const InitialData& u0, const BoundaryLoad& f, const Mesh& m,
                                      const DerivedParams& dp) {
  ConservedSet cs;
  const auto& rule = triangle_rule_deg4();
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    for (const auto& qp : rule.points)
      cs.C_q += 2.0 * geom.area * qp.weight * div_u0_at(u0, geom, qp.bary);
  }
  cs.C_u = integrate_boundary(m, [&](const Vec2& x, const Vec2& n, int) { return u0.u0(x).dot(n); });
  const double moment = integrate_boundary(m, [&](const Vec2& x, const Vec2& n, int tag) { return f(x, n, tag, 0.0).dot(x); });
  cs.C_p = dp.c_d * cs.C_q - moment / dp.dim;
  cs.C_ptilde = cs.C_p - dp.alpha * cs.C_q;
  return cs;
}

}  // namespace gelflow
