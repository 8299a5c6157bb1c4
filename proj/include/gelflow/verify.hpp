#pragma once

#include <cstdio>

#include "gelflow/scheme.hpp"

namespace gelflow {

// Analytic solution plus the induced data that make it satisfy the scheme's
// equations: traction f = beta*du/dnu - ptilde*nu, volume sources
// g_u = -beta*lap(u) + grad(ptilde), g_q = q_t - kappa*lap(alpha*q + ptilde),
// and the natural diffusion flux g_q_flux = kappa * dp/dnu.
struct ExactSolution {
  std::function<Vec2(const Vec2&, double)> u;
  std::function<Mat2(const Vec2&, double)> grad_u;
  std::function<double(const Vec2&, double)> q;
  std::function<Vec2(const Vec2&, double)> grad_q;
  std::function<double(const Vec2&, double)> ptilde;
  std::function<Vec2(const Vec2&, double)> grad_ptilde;
  std::function<double(const Vec2&, double)> p;
  std::function<Vec2(const Vec2&, double)> grad_p;
  std::function<Vec2(const Vec2&, const Vec2&, double)> traction;
  std::function<Vec2(const Vec2&, double)> g_u;
  std::function<double(const Vec2&, double)> g_q;
  std::function<double(const Vec2&, const Vec2&, double)> g_q_flux;

  BoundaryLoad boundary_load() const {
    return {[t_ = traction](const Vec2& x, const Vec2& n, int, double t) { return t_(x, n, t); }, true};
  }
  SourceHooks hooks() const { return {g_u, g_q, g_q_flux}; }
  InitialData initial_data() const {
    return {[u_ = u](const Vec2& x) { return u_(x, 0.0); },
            std::function<double(const Vec2&)>([q_ = q](const Vec2& x) { return q_(x, 0.0); })};
  }
};

// Default manufactured solution: smooth, time-decaying, nonpolynomial.
//   u = 1e-2 e^{-t} sin(pi x1) sin(pi x2) (1,1),  ptilde = e^{-t} cos(pi x1) cos(pi x2).
inline ExactSolution mms_default(const DerivedParams& dp) {
  const double A = 1e-2, pi = M_PI;
  const double alpha = dp.alpha, beta = dp.beta, kappa = dp.kappa;
  ExactSolution ex;
  ex.u = [=](const Vec2& x, double t) {
    const double v = A * std::exp(-t) * std::sin(pi * x.x) * std::sin(pi * x.y);
    return Vec2{v, v};
  };
  ex.grad_u = [=](const Vec2& x, double t) {
    const double e = A * std::exp(-t) * pi;
    const double gx = e * std::cos(pi * x.x) * std::sin(pi * x.y);
    const double gy = e * std::sin(pi * x.x) * std::cos(pi * x.y);
    return Mat2{gx, gy, gx, gy};
  };
  ex.q = [=](const Vec2& x, double t) {
    return A * std::exp(-t) * pi * (std::cos(pi * x.x) * std::sin(pi * x.y) + std::sin(pi * x.x) * std::cos(pi * x.y));
  };
  ex.grad_q = [=](const Vec2& x, double t) {
    const double v = A * std::exp(-t) * pi * pi *
                     (std::cos(pi * x.x) * std::cos(pi * x.y) - std::sin(pi * x.x) * std::sin(pi * x.y));
    return Vec2{v, v};
  };
  ex.ptilde = [=](const Vec2& x, double t) { return std::exp(-t) * std::cos(pi * x.x) * std::cos(pi * x.y); };
  ex.grad_ptilde = [=](const Vec2& x, double t) {
    return Vec2{-pi * std::exp(-t) * std::sin(pi * x.x) * std::cos(pi * x.y),
                -pi * std::exp(-t) * std::cos(pi * x.x) * std::sin(pi * x.y)};
  };
  ex.p = [=, q = ex.q, pt = ex.ptilde](const Vec2& x, double t) { return pt(x, t) + alpha * q(x, t); };
  ex.grad_p = [=, gq = ex.grad_q, gpt = ex.grad_ptilde](const Vec2& x, double t) {
    return gpt(x, t) + gq(x, t) * alpha;
  };
  ex.traction = [=, gu = ex.grad_u, pt = ex.ptilde](const Vec2& x, const Vec2& n, double t) {
    return gu(x, t).apply(n) * beta - n * pt(x, t);
  };
  ex.g_u = [=, u = ex.u, gpt = ex.grad_ptilde](const Vec2& x, double t) {
    // -beta*lap(u) = 2 pi^2 beta u for this u
    return u(x, t) * (2.0 * pi * pi * beta) + gpt(x, t);
  };
  ex.g_q = [=, q = ex.q, pt = ex.ptilde](const Vec2& x, double t) {
    // q_t = -q; lap(q) = -2 pi^2 q; lap(ptilde) = -2 pi^2 ptilde
    return -q(x, t) + kappa * 2.0 * pi * pi * (alpha * q(x, t) + pt(x, t));
  };
  ex.g_q_flux = [=, gp = ex.grad_p](const Vec2& x, const Vec2& n, double t) { return kappa * gp(x, t).dot(n); };
  return ex;
}

struct ErrorNorms {
  double H1_u = 0.0;    // ||grad(u - u_h)||_L2
  double L2_q = 0.0;    // ||q - q_h||_L2
  double gradP = 0.0;   // ||grad(p - p_h)||_L2
};

// Norms of (exact - discrete) at time t by degree-4 quadrature per element.
inline ErrorNorms error_norms(const Mesh& m, const FEField& u_h, const FEField& q_h, const FEField& p_h,
                              const ExactSolution& ex, double t) {
  const auto& rule = triangle_rule_deg4();
  double eu = 0.0, eq = 0.0, ep = 0.0;
  for (std::size_t tr = 0; tr < m.triangles.size(); ++tr) {
    const ElementGeometry geom(m, static_cast<int>(tr));
    for (const auto& qp : rule.points) {
      const Vec2 x = bary_to_physical(geom.coords, qp.bary);
      const double w = 2.0 * geom.area * qp.weight;
      const Mat2 du = ex.grad_u(x, t) - eval_vector_grad(u_h, geom, static_cast<int>(tr), qp.bary);
      eu += w * du.frobenius2();
      eq += w * sqr(ex.q(x, t) - eval_scalar(q_h, static_cast<int>(tr), qp.bary));
      const Vec2 dp = ex.grad_p(x, t) - eval_scalar_grad(p_h, geom, static_cast<int>(tr), qp.bary);
      ep += w * dp.dot(dp);
    }
  }
  return {std::sqrt(eu), std::sqrt(eq), std::sqrt(ep)};
}

struct RateRow {
  int level = 0;
  double h = 0.0;
  double dt = 0.0;
  double H1_u = 0.0, rate_u = 0.0;
  double L2_q = 0.0, rate_q = 0.0;
  double gradP = 0.0, rate_p = 0.0;
};

struct RateTable {
  std::vector<RateRow> rows;

  std::string to_csv() const {
    std::string out = "level,h,dt,H1_u,rate_u,L2_q,rate_q,gradP,rate_p\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.6g,%.17g,%.6g,%.17g,%.6g\n", r.level, r.h, r.dt,
                    r.H1_u, r.rate_u, r.L2_q, r.rate_q, r.gradP, r.rate_p);
      out += buf;
    }
    return out;
  }
};

enum class Coupling { DtProportionalH2, DtProportionalH, FixedMesh };

struct StudyConfig {
  int levels = 4;
  Coupling coupling = Coupling::DtProportionalH2;
  int base_nx = 8;
  int base_ny = 8;
  double T = 0.1;
  int base_steps = 5;  // time steps at the coarsest level (largest dt)
  Algorithm algorithm = Algorithm::Alg1;
  MaterialParams material = pnipa_hydrogel();
  int fixed_nx = 32;           // mesh for Coupling::FixedMesh
  int reference_refinement = 16;  // dt_ref = dt_finest / reference_refinement
};

namespace detail {

struct LevelErrors {
  double H1_u = 0.0, L2_q = 0.0, gradP = 0.0;
};

// One refinement-study level: run the scheme against the manufactured
// solution, accumulate dt*sum_n ||grad(p - p_h)(t_n)||^2 online, and take the
// field norms at final time.
inline LevelErrors run_mms_level(const Mesh& mesh, const DerivedParams& dp, const ExactSolution& ex,
                                 const TimeGrid& grid, Algorithm alg) {
  GelSimulator sim(mesh, dp, ex.boundary_load(), ex.hooks());
  double gp2 = 0.0;
  RunOptions opts;
  opts.observer = [&](const State& s) {
    if (s.step == 0) return;
    const ErrorNorms en = error_norms(mesh, s.u, s.q, s.p, ex, s.t);
    gp2 += grid.step_dt(s.step) * sqr(en.gradP);
  };
  const RunResult res = sim.run(ex.initial_data(), grid, alg, opts);
  const State& fin = res.final_state;
  const ErrorNorms en = error_norms(mesh, fin.u, fin.q, fin.p, ex, fin.t);
  return {en.H1_u, en.L2_q, std::sqrt(gp2)};
}

}  // namespace detail

// Empirical convergence rates against mms_default. For the two mesh couplings
// the levels are uniform refinements; for FixedMesh the time step halves and
// errors are measured against a small-dt reference trajectory on the same
// mesh (isolating the first-order-in-dt component of the error bound).
inline RateTable convergence_study(const StudyConfig& cfg) {
  if (cfg.levels < 2) throw InvalidParameterError("convergence_study: need at least 2 levels");
  const DerivedParams dp = derive_params(cfg.material);
  const ExactSolution ex = mms_default(dp);
  RateTable table;

  if (cfg.coupling == Coupling::FixedMesh) {
    const Mesh mesh = gen_rect_mesh(cfg.fixed_nx, cfg.fixed_nx, {0.0, 0.0}, {1.0, 1.0});
    GelSimulator sim(mesh, dp, ex.boundary_load(), ex.hooks());
    const int finest_steps = cfg.base_steps << (cfg.levels - 1);
    const TimeGrid ref_grid = TimeGrid::uniform_or_shortened(cfg.T / (finest_steps * cfg.reference_refinement), cfg.T);
    const State ref = sim.run(ex.initial_data(), ref_grid, cfg.algorithm).final_state;
    const auto& A = sim.laplacian();
    const auto& M = sim.mass();
    const auto& S = sim.stiffness();
    for (int lev = 0; lev < cfg.levels; ++lev) {
      const int steps = cfg.base_steps << lev;
      const TimeGrid grid = TimeGrid::uniform_or_shortened(cfg.T / steps, cfg.T);
      const State fin = sim.run(ex.initial_data(), grid, cfg.algorithm).final_state;
      std::vector<double> du(fin.u.coeffs.size()), dq(fin.q.coeffs.size()), dpv(fin.p.coeffs.size());
      for (std::size_t i = 0; i < du.size(); ++i) du[i] = fin.u.coeffs[i] - ref.u.coeffs[i];
      for (std::size_t i = 0; i < dq.size(); ++i) dq[i] = fin.q.coeffs[i] - ref.q.coeffs[i];
      for (std::size_t i = 0; i < dpv.size(); ++i) dpv[i] = fin.p.coeffs[i] - ref.p.coeffs[i];
      RateRow row;
      row.level = lev;
      row.h = mesh_size(mesh);
      row.dt = grid.dt;
      row.H1_u = std::sqrt(dot(A.apply(du), du) / dp.beta);
      row.L2_q = std::sqrt(dot(M.apply(dq), dq));
      row.gradP = std::sqrt(dot(S.apply(dpv), dpv));
      table.rows.push_back(row);
    }
  } else {
    Mesh mesh = gen_rect_mesh(cfg.base_nx, cfg.base_ny, {0.0, 0.0}, {1.0, 1.0});
    for (int lev = 0; lev < cfg.levels; ++lev) {
      if (lev > 0) mesh = refine_uniform(mesh);
      const int factor = cfg.coupling == Coupling::DtProportionalH2 ? (1 << (2 * lev)) : (1 << lev);
      const TimeGrid grid = TimeGrid::uniform_or_shortened(cfg.T / (cfg.base_steps * factor), cfg.T);
      const auto err = detail::run_mms_level(mesh, dp, ex, grid, cfg.algorithm);
      RateRow row;
      row.level = lev;
      row.h = mesh_size(mesh);
      row.dt = grid.dt;
      row.H1_u = err.H1_u;
      row.L2_q = err.L2_q;
      row.gradP = err.gradP;
      table.rows.push_back(row);
    }
  }

  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    auto& cur = table.rows[i];
    const auto& prev = table.rows[i - 1];
    const double denom = cfg.coupling == Coupling::FixedMesh ? std::log2(prev.dt / cur.dt)
                                                             : std::log2(prev.h / cur.h);
    cur.rate_u = std::log2(prev.H1_u / cur.H1_u) / denom;
    cur.rate_q = std::log2(prev.L2_q / cur.L2_q) / denom;
    cur.rate_p = std::log2(prev.gradP / cur.gradP) / denom;
  }
  return table;
}

}  // namespace gelflow
