#include <catch2/catch_amalgamated.hpp>
#include <gelflow/core_model.hpp>

#include <random>

using namespace gelflow;

TEST_CASE("derive_params reproduces the PNIPA constants") {
  const DerivedParams dp = derive_params(pnipa_hydrogel());
  CHECK(dp.alpha == Catch::Approx(14985.0).epsilon(1e-12));
  CHECK(dp.beta == Catch::Approx(2097.9).epsilon(1e-12));
  CHECK(dp.kappa == Catch::Approx(0.007225).epsilon(1e-12));
  CHECK(dp.D == Catch::Approx(0.007225 * (14985.0 + 2097.9)).epsilon(1e-12));  // ~123.42
  CHECK(dp.c_d == Catch::Approx(16033.95).epsilon(1e-12));
}

TEST_CASE("derive_params on simple integers") {
  const DerivedParams dp = derive_params({1.0, 3.0, 0.0, 1.0});
  CHECK(dp.alpha == Catch::Approx(2.0));
  CHECK(dp.beta == Catch::Approx(3.0));
  CHECK(dp.kappa == Catch::Approx(1.0));
  CHECK(dp.D == Catch::Approx(5.0));
  CHECK(dp.c_d == Catch::Approx(3.5));
}

TEST_CASE("derive_params rejects invalid parameters") {
  CHECK_THROWS_AS(derive_params({1.0, 1.0, 1.0, 1.0}), InvalidParameterError);   // phi = 1
  CHECK_THROWS_AS(derive_params({-1.0, 1.0, 0.1, 1.0}), InvalidParameterError);  // K <= 0
  CHECK_THROWS_AS(derive_params({1.0, 0.0, 0.1, 1.0}), InvalidParameterError);   // G <= 0
  CHECK_THROWS_AS(derive_params({1.0, 1.0, 0.1, 0.0}), InvalidParameterError);   // xi <= 0
  CHECK_THROWS_AS(derive_params(pnipa_hydrogel(), 3), InvalidParameterError);
}

TEST_CASE("derive_params scale consistency") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(0.1, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    MaterialParams mp{unit(rng), unit(rng), 0.5 * unit(rng) / 10.0, unit(rng)};
    MaterialParams doubled{2.0 * mp.K, 2.0 * mp.G, mp.phi, mp.xi};
    const DerivedParams a = derive_params(mp), b = derive_params(doubled);
    CHECK(b.alpha == Catch::Approx(2.0 * a.alpha));
    CHECK(b.beta == Catch::Approx(2.0 * a.beta));
    CHECK(b.c_d == Catch::Approx(2.0 * a.c_d));
    CHECK(b.kappa == Catch::Approx(a.kappa));  // held fixed
    CHECK(b.D == Catch::Approx(2.0 * a.D));
  }
}

namespace {

InitialData paper_initial() {
  return {[](const Vec2& x) {
            const double s = 1e-4 * std::sin(x.x + x.y);
            return Vec2{s, s};
          },
          std::function<double(const Vec2&)>([](const Vec2& x) { return 2e-4 * std::cos(x.x + x.y); })};
}

}  // namespace

TEST_CASE("compute_conserved reproduces the Test 1 values") {
  const Mesh mesh = gen_rect_mesh(32, 32, {0, 0}, {1, 1});
  const DerivedParams dp = derive_params(pnipa_hydrogel());
  const ConservedSet cs = compute_conserved(paper_initial(), tangential_load(0.1), mesh, dp);
  // exact integral: 2e-4 * (2 cos 1 - cos 2 - 1) = 9.93502...e-5
  const double exact_cq = 2e-4 * (2.0 * std::cos(1.0) - std::cos(2.0) - 1.0);
  CHECK(cs.C_q == Catch::Approx(9.935e-5).epsilon(5e-3));
  CHECK(cs.C_q == Catch::Approx(exact_cq).epsilon(1e-10));
  CHECK(cs.C_u == Catch::Approx(cs.C_q).margin(1e-10));
  // tangential moment vanishes on the square, so C_p = c_2*C_q, C_ptilde = beta*C_q/2
  CHECK(cs.C_p == Catch::Approx(dp.c_d * exact_cq).epsilon(1e-9));
  CHECK(cs.C_ptilde == Catch::Approx(0.5 * dp.beta * exact_cq).epsilon(1e-9));
  CHECK(cs.C_p == Catch::Approx(1.593).epsilon(1e-3));
  CHECK(cs.C_ptilde == Catch::Approx(0.1042).epsilon(1e-3));
  CHECK(cs.C_ptilde == Catch::Approx(cs.C_p - dp.alpha * cs.C_q).margin(1e-12 * std::abs(cs.C_p)));
}

TEST_CASE("compute_conserved with zero data") {
  const Mesh mesh = gen_rect_mesh(4, 4, {0, 0}, {1, 1});
  const InitialData zero{[](const Vec2&) { return Vec2{}; },
                         std::function<double(const Vec2&)>([](const Vec2&) { return 0.0; })};
  const ConservedSet cs = compute_conserved(zero, zero_load(), mesh, derive_params(pnipa_hydrogel()));
  CHECK(cs.C_q == 0.0);
  CHECK(cs.C_u == 0.0);
  CHECK(cs.C_p == 0.0);
  CHECK(cs.C_ptilde == 0.0);
}

TEST_CASE("C_u equals C_q for random polynomial initial data (divergence theorem)") {
  const Mesh mesh = gen_rect_mesh(8, 8, {0, 0}, {1, 1});
  const DerivedParams dp = derive_params(pnipa_hydrogel());
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    // cubic vector polynomial: both quadratures are exact, so C_u = C_q sharply
    std::array<double, 10> cx{}, cy{};
    for (auto& c : cx) c = coef(rng);
    for (auto& c : cy) c = coef(rng);
    auto poly = [](const std::array<double, 10>& c, const Vec2& p) {
      return c[0] + c[1] * p.x + c[2] * p.y + c[3] * p.x * p.x + c[4] * p.x * p.y + c[5] * p.y * p.y +
             c[6] * p.x * p.x * p.x + c[7] * p.x * p.x * p.y + c[8] * p.x * p.y * p.y + c[9] * p.y * p.y * p.y;
    };
    auto dpoly_dx = [](const std::array<double, 10>& c, const Vec2& p) {
      return c[1] + 2 * c[3] * p.x + c[4] * p.y + 3 * c[6] * p.x * p.x + 2 * c[7] * p.x * p.y + c[8] * p.y * p.y;
    };
    auto dpoly_dy = [](const std::array<double, 10>& c, const Vec2& p) {
      return c[2] + c[4] * p.x + 2 * c[5] * p.y + c[7] * p.x * p.x + 2 * c[8] * p.x * p.y + 3 * c[9] * p.y * p.y;
    };
    InitialData data{[&, cx, cy](const Vec2& p) { return Vec2{poly(cx, p), poly(cy, p)}; },
                     std::function<double(const Vec2&)>(
                         [&, cx, cy](const Vec2& p) { return dpoly_dx(cx, p) + dpoly_dy(cy, p); })};
    const ConservedSet cs = compute_conserved(data, zero_load(), mesh, dp);
    CHECK(cs.C_u == Catch::Approx(cs.C_q).margin(1e-12 * (1.0 + std::abs(cs.C_q))));
  }
}

TEST_CASE("interpolant divergence is used when div_u0 is absent") {
  const Mesh mesh = gen_rect_mesh(16, 16, {0, 0}, {1, 1});
  const DerivedParams dp = derive_params(pnipa_hydrogel());
  InitialData no_div = paper_initial();
  no_div.div_u0.reset();
  const ConservedSet with_div = compute_conserved(paper_initial(), zero_load(), mesh, dp);
  const ConservedSet without = compute_conserved(no_div, zero_load(), mesh, dp);
  CHECK(without.C_q == Catch::Approx(with_div.C_q).epsilon(1e-6));
}

TEST_CASE("check_compatibility") {
  const Mesh mesh = gen_rect_mesh(8, 8, {0, 0}, {1, 1});
  SECTION("tangential load cancels exactly") {
    CHECK(check_compatibility(tangential_load(0.1), mesh) <= 1e-12);
  }
  SECTION("constant load integrates to the perimeter") {
    const BoundaryLoad f{[](const Vec2&, const Vec2&, int, double) { return Vec2{1.0, 0.0}; }, false};
    CHECK(check_compatibility(f, mesh) == Catch::Approx(4.0).epsilon(1e-12));
  }
  SECTION("zero load") { CHECK(check_compatibility(zero_load(), mesh) == 0.0); }
}

TEST_CASE("validate_initial_data flags an inconsistent divergence") {
  const Mesh mesh = gen_rect_mesh(4, 4, {0, 0}, {1, 1});
  InitialData bad = paper_initial();
  bad.div_u0 = [](const Vec2& x) { return 5.0 + 2e-4 * std::cos(x.x + x.y); };
  CHECK_THROWS_AS(validate_initial_data(bad, mesh), InvalidParameterError);
  CHECK_NOTHROW(validate_initial_data(paper_initial(), mesh));
}
