#include <catch2/catch_amalgamated.hpp>
#include <gelflow/assembly.hpp>

#include <random>

using namespace gelflow;

namespace {

// Single unit right triangle as a valid mesh.
Mesh unit_right_triangle() {
  Mesh m;
  m.vertices = {{0, 0}, {1, 0}, {0, 1}};
  m.triangles = {{0, 1, 2}};
  detail::finalize_boundary(m, {{0, 1, 1}, {1, 2, 1}, {2, 0, 1}});
  validate_mesh(m);
  return m;
}

using Dense = std::vector<std::vector<double>>;

Dense to_dense(const SparseMatrix& s) {
  Dense d(s.rows, std::vector<double>(s.cols, 0.0));
  for (int r = 0; r < s.rows; ++r)
    for (int k = s.row_ptr[r]; k < s.row_ptr[r + 1]; ++k) d[r][s.col_idx[k]] += s.vals[k];
  return d;
}

double max_abs_diff(const Dense& a, const Dense& b) {
  double best = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t c = 0; c < a[r].size(); ++c) best = std::max(best, std::abs(a[r][c] - b[r][c]));
  return best;
}

// Brute-force assembly: dense accumulation straight from quadrature-point
// evaluations of the mapped basis, no sparse scatter machinery.
Dense brute_vector_laplacian(const Mesh& m, const DofMap& vdm, double beta) {
  Dense a(vdm.n_dofs, std::vector<double>(vdm.n_dofs, 0.0));
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    for (const auto& qp : triangle_rule_deg4().points) {
      const auto basis = eval_basis(SpaceKind::ScalarP2, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          const double gij = geom.physical_grad(basis.ref_grad[i]).dot(geom.physical_grad(basis.ref_grad[j]));
          for (int c = 0; c < 2; ++c)
            a[vdm.element_dofs[t][2 * i + c]][vdm.element_dofs[t][2 * j + c]] += beta * w * gij;
        }
    }
  }
  return a;
}

Dense brute_divergence(const Mesh& m, const DofMap& vdm, const DofMap& pdm) {
  Dense b(pdm.n_dofs, std::vector<double>(vdm.n_dofs, 0.0));
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const ElementGeometry geom(m, static_cast<int>(t));
    for (const auto& qp : triangle_rule_deg4().points) {
      const auto p2 = eval_basis(SpaceKind::ScalarP2, qp.bary);
      const auto p1 = eval_basis(SpaceKind::ScalarP1, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 6; ++i) {
          const Vec2 g = geom.physical_grad(p2.ref_grad[i]);
          b[pdm.element_dofs[t][k]][vdm.element_dofs[t][2 * i]] += w * g.x * p1.value[k];
          b[pdm.element_dofs[t][k]][vdm.element_dofs[t][2 * i + 1]] += w * g.y * p1.value[k];
        }
    }
  }
  return b;
}

}  // namespace

TEST_CASE("P1 stiffness and mass on the unit right triangle match closed forms") {
  const Mesh m = unit_right_triangle();
  const DofMap p1 = build_dofmap(m, SpaceKind::ScalarP1);
  const Dense s = to_dense(assemble_stiffness_p1(m, p1));
  const Dense s_exact = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  CHECK(max_abs_diff(s, s_exact) <= 1e-14);
  const Dense mm = to_dense(assemble_mass_p1(m, p1));
  const double w = 0.5 / 12.0;  // |T|/12
  const Dense m_exact = {{2 * w, w, w}, {w, 2 * w, w}, {w, w, 2 * w}};
  CHECK(max_abs_diff(mm, m_exact) <= 1e-14);
}

TEST_CASE("vector laplacian: kernel, symmetry, and brute-force agreement") {
  const Mesh m = gen_rect_mesh(2, 2, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  const SparseMatrix a = assemble_vector_laplacian(m, vdm, 3.5);
  SECTION("constant fields are in the kernel") {
    const FEField cfield = interpolate_vector(vdm, [](const Vec2&) { return Vec2{1.0, 0.0}; });
    const auto y = a.apply(cfield.coeffs);
    CHECK(norm_inf_vec(y) <= 1e-12);
  }
  SECTION("symmetry") {
    const Dense d = to_dense(a);
    double asym = 0.0;
    for (std::size_t r = 0; r < d.size(); ++r)
      for (std::size_t c = 0; c < d.size(); ++c) asym = std::max(asym, std::abs(d[r][c] - d[c][r]));
    CHECK(asym <= 1e-14);
  }
  SECTION("brute force entrywise") {
    CHECK(max_abs_diff(to_dense(a), brute_vector_laplacian(m, vdm, 3.5)) <= 1e-12);
  }
}

TEST_CASE("divergence matrix properties") {
  const Mesh m = gen_rect_mesh(2, 2, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  const DofMap pdm = build_dofmap(m, SpaceKind::ScalarP1);
  const SparseMatrix b = assemble_divergence(m, vdm, pdm);
  SECTION("constant field maps to zero") {
    const FEField c = interpolate_vector(vdm, [](const Vec2&) { return Vec2{2.0, -3.0}; });
    CHECK(norm_inf_vec(b.apply(c.coeffs)) <= 1e-12);
  }
  SECTION("interpolant of (x,0) integrates P1 test functions") {
    const Mesh single = unit_right_triangle();
    const DofMap v1 = build_dofmap(single, SpaceKind::VectorP2);
    const DofMap p1 = build_dofmap(single, SpaceKind::ScalarP1);
    const SparseMatrix b1 = assemble_divergence(single, v1, p1);
    const FEField f = interpolate_vector(v1, [](const Vec2& x) { return Vec2{x.x, 0.0}; });
    const auto y = b1.apply(f.coeffs);
    for (double v : y) CHECK(v == Catch::Approx(0.5 / 3.0).margin(1e-14));  // |T|/3
  }
  SECTION("discrete divergence theorem against boundary quadrature") {
    const MomentRows rows = assemble_moment_rows(m, vdm, pdm);
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> v(vdm.n_dofs);
      for (auto& c : v) c = coef(rng);
      const auto bv = b.apply(v);
      double vol = 0.0;
      for (double x : bv) vol += x;
      CHECK(vol == Catch::Approx(dot(rows.flux_u, v)).margin(1e-12));
    }
  }
  SECTION("brute force entrywise") { CHECK(max_abs_diff(to_dense(b), brute_divergence(m, vdm, pdm)) <= 1e-12); }
}

TEST_CASE("mass and stiffness global properties") {
  const Mesh m = gen_rect_mesh(3, 3, {0, 0}, {1, 1});
  const DofMap pdm = build_dofmap(m, SpaceKind::ScalarP1);
  const SparseMatrix mass = assemble_mass_p1(m, pdm);
  const SparseMatrix stiff = assemble_stiffness_p1(m, pdm);
  std::vector<double> ones(pdm.n_dofs, 1.0);
  CHECK(norm_inf_vec(stiff.apply(ones)) <= 1e-12);
  const auto m1 = mass.apply(ones);
  double total = 0.0;
  for (double v : m1) total += v;
  CHECK(total == Catch::Approx(1.0).margin(1e-12));  // 1^T M 1 = |Omega|
  // row sums of M equal the integrals of the test functions
  const MomentRows rows = assemble_moment_rows(m, build_dofmap(m, SpaceKind::VectorP2), pdm);
  for (int k = 0; k < pdm.n_dofs; ++k) CHECK(m1[k] == Catch::Approx(rows.mean_ptilde[k]).margin(1e-13));
}

TEST_CASE("boundary load on one edge: closed-form entries") {
  const Mesh m = unit_right_triangle();
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  // constant (2,-1) load on the bottom edge (y = 0) only
  const BoundaryLoad bottom_only{[](const Vec2& x, const Vec2& n, int, double) {
                                   return (n.y < -0.5) ? Vec2{2.0, -1.0} : Vec2{};
                                 },
                                 false};
  const auto F = assemble_boundary_load(m, vdm, bottom_only);
  // bottom edge has length 1: vertex entries c*L/6, midpoint entries c*2L/3
  const double L = 1.0;
  auto dof_at = [&](const Vec2& p, int comp) {
    for (int g = 0; g < vdm.n_scalar_dofs; ++g)
      if ((vdm.scalar_dof_points[g] - p).norm() < 1e-12) return 2 * g + comp;
    FAIL("dof not found");
    return -1;
  };
  CHECK(F[dof_at({0, 0}, 0)] == Catch::Approx(2.0 * L / 6.0).margin(1e-13));
  CHECK(F[dof_at({1, 0}, 0)] == Catch::Approx(2.0 * L / 6.0).margin(1e-13));
  CHECK(F[dof_at({0.5, 0}, 0)] == Catch::Approx(2.0 * 2.0 * L / 3.0).margin(1e-13));
  CHECK(F[dof_at({0, 0}, 1)] == Catch::Approx(-1.0 * L / 6.0).margin(1e-13));
  CHECK(F[dof_at({0.5, 0}, 1)] == Catch::Approx(-1.0 * 2.0 * L / 3.0).margin(1e-13));
  // off-edge dofs receive nothing
  CHECK(F[dof_at({0, 0.5}, 0)] == 0.0);
}

TEST_CASE("boundary load of zero is zero and components sum to the net force") {
  const Mesh m = gen_rect_mesh(4, 4, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  CHECK(norm_inf_vec(assemble_boundary_load(m, vdm, zero_load())) == 0.0);
  const BoundaryLoad f{[](const Vec2& x, const Vec2& n, int, double) {
                         return Vec2{n.y - 0.3 * x.x, n.x + x.y};
                       },
                       false};
  const auto F = assemble_boundary_load(m, vdm, f);
  // partition of unity on the boundary: sum of x-entries = x-component of the net force
  const Vec2 net = integrate_boundary_vec(m, [&](const Vec2& x, const Vec2& n, int tag) { return f(x, n, tag, 0.0); });
  double sx = 0.0, sy = 0.0;
  for (int g = 0; g < vdm.n_scalar_dofs; ++g) {
    sx += F[2 * g];
    sy += F[2 * g + 1];
  }
  CHECK(sx == Catch::Approx(net.x).margin(1e-12));
  CHECK(sy == Catch::Approx(net.y).margin(1e-12));
}

TEST_CASE("moment rows") {
  const Mesh m = gen_rect_mesh(3, 2, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  const DofMap pdm = build_dofmap(m, SpaceKind::ScalarP1);
  const MomentRows rows = assemble_moment_rows(m, vdm, pdm);
  const FEField cfield = interpolate_vector(vdm, [](const Vec2&) { return Vec2{1.0, 0.0}; });
  CHECK(dot(rows.mean_u_x, cfield.coeffs) == Catch::Approx(1.0).margin(1e-12));  // |Omega| * 1
  CHECK(dot(rows.mean_u_y, cfield.coeffs) == Catch::Approx(0.0).margin(1e-12));
  const FEField xfield = interpolate_vector(vdm, [](const Vec2& x) { return Vec2{x.x, 0.0}; });
  CHECK(dot(rows.flux_u, xfield.coeffs) == Catch::Approx(1.0).margin(1e-12));  // = int div (x,0)
  double total = 0.0;
  for (double v : rows.mean_ptilde) total += v;
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("integrate_functionals") {
  const Mesh m = gen_rect_mesh(4, 4, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  const DofMap pdm = build_dofmap(m, SpaceKind::ScalarP1);
  const MomentRows rows = assemble_moment_rows(m, vdm, pdm);
  FEField q(pdm);
  std::fill(q.coeffs.begin(), q.coeffs.end(), 1.0);
  FEField ptilde(pdm);
  const FEField u = interpolate_vector(vdm, [](const Vec2& x) { return Vec2{x.x, x.y}; });
  const BoundaryLoad f = tangential_load(0.1);
  const auto F = assemble_boundary_load(m, vdm, f);
  const Functionals fn = integrate_functionals(m, rows, q, ptilde, u, f, F);
  CHECK(fn.int_q == Catch::Approx(1.0).margin(1e-12));
  CHECK(fn.int_ptilde == 0.0);
  CHECK(fn.flux_u == Catch::Approx(2.0).margin(1e-12));   // = int div(x) over the unit square
  CHECK(fn.moment_f == Catch::Approx(0.0).margin(1e-12));  // tangential moment cancels
}

TEST_CASE("Galerkin consistency: matrix products equal direct quadrature") {
  const Mesh m = gen_rect_mesh(3, 3, {0, 0}, {1, 1});
  const DofMap vdm = build_dofmap(m, SpaceKind::VectorP2);
  const DofMap pdm = build_dofmap(m, SpaceKind::ScalarP1);
  const double beta = 2.25;
  const SparseMatrix a = assemble_vector_laplacian(m, vdm, beta);
  const SparseMatrix b = assemble_divergence(m, vdm, pdm);
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    FEField u(vdm), v(vdm), phi(pdm);
    for (auto& c : u.coeffs) c = coef(rng);
    for (auto& c : v.coeffs) c = coef(rng);
    for (auto& c : phi.coeffs) c = coef(rng);
    double direct_a = 0.0, direct_b = 0.0;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) {
      const ElementGeometry geom(m, static_cast<int>(t));
      for (const auto& qp : triangle_rule_deg4().points) {
        const double w = 2.0 * geom.area * qp.weight;
        const Mat2 gu = eval_vector_grad(u, geom, static_cast<int>(t), qp.bary);
        const Mat2 gv = eval_vector_grad(v, geom, static_cast<int>(t), qp.bary);
        direct_a += w * beta * (gu.a00 * gv.a00 + gu.a01 * gv.a01 + gu.a10 * gv.a10 + gu.a11 * gv.a11);
        direct_b += w * gu.trace() * eval_scalar(phi, static_cast<int>(t), qp.bary);
      }
    }
    CHECK(dot(a.apply(u.coeffs), v.coeffs) == Catch::Approx(direct_a).margin(1e-12 * (1.0 + std::abs(direct_a))));
    CHECK(dot(b.apply(u.coeffs), phi.coeffs) == Catch::Approx(direct_b).margin(1e-12 * (1.0 + std::abs(direct_b))));
  }
}
