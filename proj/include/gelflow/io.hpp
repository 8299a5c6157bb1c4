#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "gelflow/verify.hpp"

namespace gelflow {

struct DomainSpec {
  enum class Kind { Rect, Ellipse, File } kind = Kind::Rect;
  int nx = 1, ny = 1;
  Vec2 lower{0.0, 0.0}, upper{1.0, 1.0};
  double a = 1.0, b = 1.0;
  int n_r = 1, n_theta = 3;
  std::string path;
};

struct LoadSpec {
  enum class Kind { Tangential, PerTag, Mms } kind = Kind::Tangential;
  double magnitude = 0.0;
  std::map<int, Vec2> forces;
};

struct InitialSpec {
  enum class Kind { SineSum, Zero, Mms } kind = Kind::Zero;
  double amplitude = 1e-4;
};

struct RunConfig {
  DomainSpec domain;
  MaterialParams material;
  LoadSpec load;
  InitialSpec initial;
  double dt = 0.0;
  double T = 0.0;
  Algorithm algorithm = Algorithm::Alg1;
  double theta_warn = 0.1;
  std::string output_dir = "out";
  int snapshot_stride = 1;
  double magnification = 500.0;
};

namespace detail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw ConfigError("unknown key '" + path + "." + it.key() + "'");
  }
}

inline const json& require(const json& obj, const std::string& path, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing key '" + path + "." + key + "'");
  return *it;
}

inline double require_number(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_number()) throw ConfigError("'" + path + "." + key + "' must be a number");
  return v.get<double>();
}

inline int require_int(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_number_integer()) throw ConfigError("'" + path + "." + key + "' must be an integer");
  return v.get<int>();
}

inline std::string require_string(const json& obj, const std::string& path, const char* key) {
  const json& v = require(obj, path, key);
  if (!v.is_string()) throw ConfigError("'" + path + "." + key + "' must be a string");
  return v.get<std::string>();
}

inline Vec2 parse_vec2(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError("'" + path + "' must be an array of two numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  detail::check_keys(root, "$", {"domain", "material", "load", "initial", "dt", "T", "algorithm", "theta_warn",
                                 "output_dir", "snapshot_stride", "magnification"});
  RunConfig cfg;

  const json& dom = detail::require(root, "$", "domain");
  const std::string dkind = detail::require_string(dom, "domain", "type");
  if (dkind == "rect") {
    detail::check_keys(dom, "domain", {"type", "nx", "ny", "lower", "upper"});
    cfg.domain.kind = DomainSpec::Kind::Rect;
    cfg.domain.nx = detail::require_int(dom, "domain", "nx");
    cfg.domain.ny = detail::require_int(dom, "domain", "ny");
    cfg.domain.lower = detail::parse_vec2(detail::require(dom, "domain", "lower"), "domain.lower");
    cfg.domain.upper = detail::parse_vec2(detail::require(dom, "domain", "upper"), "domain.upper");
  } else if (dkind == "ellipse") {
    detail::check_keys(dom, "domain", {"type", "a", "b", "n_r", "n_theta"});
    cfg.domain.kind = DomainSpec::Kind::Ellipse;
    cfg.domain.a = detail::require_number(dom, "domain", "a");
    cfg.domain.b = detail::require_number(dom, "domain", "b");
    cfg.domain.n_r = detail::require_int(dom, "domain", "n_r");
    cfg.domain.n_theta = detail::require_int(dom, "domain", "n_theta");
  } else if (dkind == "file") {
    detail::check_keys(dom, "domain", {"type", "path"});
    cfg.domain.kind = DomainSpec::Kind::File;
    cfg.domain.path = detail::require_string(dom, "domain", "path");
  } else {
    throw ConfigError("'domain.type' must be rect, ellipse, or file");
  }

  const json& mat = detail::require(root, "$", "material");
  detail::check_keys(mat, "material", {"K", "G", "phi", "xi"});
  cfg.material.K = detail::require_number(mat, "material", "K");
  cfg.material.G = detail::require_number(mat, "material", "G");
  cfg.material.phi = detail::require_number(mat, "material", "phi");
  cfg.material.xi = detail::require_number(mat, "material", "xi");

  const json& load = detail::require(root, "$", "load");
  const std::string lkind = detail::require_string(load, "load", "type");
  if (lkind == "tangential") {
    detail::check_keys(load, "load", {"type", "magnitude"});
    cfg.load.kind = LoadSpec::Kind::Tangential;
    cfg.load.magnitude = detail::require_number(load, "load", "magnitude");
  } else if (lkind == "per_tag") {
    detail::check_keys(load, "load", {"type", "forces"});
    cfg.load.kind = LoadSpec::Kind::PerTag;
    const json& forces = detail::require(load, "load", "forces");
    if (!forces.is_object()) throw ConfigError("'load.forces' must be an object keyed by boundary tag");
    for (auto it = forces.begin(); it != forces.end(); ++it) {
      int tag = 0;
      try {
        tag = std::stoi(it.key());
      } catch (...) {
        throw ConfigError("'load.forces' key '" + it.key() + "' is not an integer tag");
      }
      cfg.load.forces[tag] = detail::parse_vec2(it.value(), "load.forces." + it.key());
    }
  } else if (lkind == "mms") {
    detail::check_keys(load, "load", {"type"});
    cfg.load.kind = LoadSpec::Kind::Mms;
  } else {
    throw ConfigError("'load.type' must be tangential, per_tag, or mms");
  }

  const json& init = detail::require(root, "$", "initial");
  const std::string ikind = detail::require_string(init, "initial", "type");
  if (ikind == "sine_sum") {
    detail::check_keys(init, "initial", {"type", "amplitude"});
    cfg.initial.kind = InitialSpec::Kind::SineSum;
    cfg.initial.amplitude = init.contains("amplitude") ? detail::require_number(init, "initial", "amplitude") : 1e-4;
  } else if (ikind == "zero") {
    detail::check_keys(init, "initial", {"type"});
    cfg.initial.kind = InitialSpec::Kind::Zero;
  } else if (ikind == "mms") {
    detail::check_keys(init, "initial", {"type"});
    cfg.initial.kind = InitialSpec::Kind::Mms;
  } else {
    throw ConfigError("'initial.type' must be sine_sum, zero, or mms");
  }
  if ((cfg.load.kind == LoadSpec::Kind::Mms) != (cfg.initial.kind == InitialSpec::Kind::Mms))
    throw ConfigError("'load' and 'initial' must both be mms or neither");

  cfg.dt = detail::require_number(root, "$", "dt");
  cfg.T = detail::require_number(root, "$", "T");
  if (!(cfg.dt > 0.0)) throw ConfigError("'dt' must be positive");
  if (!(cfg.T > 0.0)) throw ConfigError("'T' must be positive");
  const std::string alg = detail::require_string(root, "$", "algorithm");
  if (alg == "alg1")
    cfg.algorithm = Algorithm::Alg1;
  else if (alg == "alg2")
    cfg.algorithm = Algorithm::Alg2;
  else
    throw ConfigError("'algorithm' must be alg1 or alg2");
  if (root.contains("theta_warn")) cfg.theta_warn = detail::require_number(root, "$", "theta_warn");
  if (root.contains("output_dir")) cfg.output_dir = detail::require_string(root, "$", "output_dir");
  if (root.contains("snapshot_stride")) {
    cfg.snapshot_stride = detail::require_int(root, "$", "snapshot_stride");
    if (cfg.snapshot_stride < 1) throw ConfigError("'snapshot_stride' must be >= 1");
  }
  if (root.contains("magnification")) cfg.magnification = detail::require_number(root, "$", "magnification");
  return cfg;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

// Everything a run needs, built from a validated config.
struct BuiltProblem {
  Mesh mesh;
  DerivedParams params;
  BoundaryLoad load;
  InitialData initial;
  SourceHooks hooks;
};

inline BuiltProblem build_problem(const RunConfig& cfg, const std::string& base_dir = ".") {
  BuiltProblem p;
  switch (cfg.domain.kind) {
    case DomainSpec::Kind::Rect:
      p.mesh = gen_rect_mesh(cfg.domain.nx, cfg.domain.ny, cfg.domain.lower, cfg.domain.upper);
      break;
    case DomainSpec::Kind::Ellipse:
      p.mesh = gen_ellipse_mesh(cfg.domain.a, cfg.domain.b, cfg.domain.n_r, cfg.domain.n_theta);
      break;
    case DomainSpec::Kind::File: {
      const auto path = std::filesystem::path(cfg.domain.path).is_absolute()
                            ? std::filesystem::path(cfg.domain.path)
                            : std::filesystem::path(base_dir) / cfg.domain.path;
      p.mesh = read_mesh(read_file(path.string()));
      break;
    }
  }
  p.params = derive_params(cfg.material);
  if (cfg.load.kind == LoadSpec::Kind::Mms) {
    const ExactSolution ex = mms_default(p.params);
    p.load = ex.boundary_load();
    p.initial = ex.initial_data();
    p.hooks = ex.hooks();
    return p;
  }
  p.load = cfg.load.kind == LoadSpec::Kind::Tangential ? tangential_load(cfg.load.magnitude)
                                                       : per_tag_load(cfg.load.forces);
  if (cfg.initial.kind == InitialSpec::Kind::Zero) {
    p.initial = {[](const Vec2&) { return Vec2{}; }, std::function<double(const Vec2&)>([](const Vec2&) { return 0.0; })};
  } else {
    const double A = cfg.initial.amplitude;
    p.initial = {[A](const Vec2& x) {
                   const double s = A * std::sin(x.x + x.y);
                   return Vec2{s, s};
                 },
                 std::function<double(const Vec2&)>([A](const Vec2& x) { return 2.0 * A * std::cos(x.x + x.y); })};
  }
  return p;
}

// Legacy VTK 2.0 ASCII snapshot. P1 fields at the vertices; the P2
// displacement restricted to vertex values; warp = magnification * u.
inline std::string write_snapshot(const State& s, const Mesh& mesh, double magnification) {
  std::ostringstream os;
  char buf[160];
  const std::size_t nv = mesh.vertices.size();
  os << "# vtk DataFile Version 2.0\n";
  os << "gelflow step " << s.step << " t " << s.t << "\n";
  os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.9e %.9e 0\n", v.x, v.y);
    os << buf;
  }
  os << "CELLS " << mesh.triangles.size() << " " << 4 * mesh.triangles.size() << "\n";
  for (const auto& tri : mesh.triangles) os << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  os << "CELL_TYPES " << mesh.triangles.size() << "\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) os << "5\n";
  os << "POINT_DATA " << nv << "\n";
  auto scalar_section = [&](const char* name, const std::vector<double>& coeffs) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t v = 0; v < nv; ++v) {
      std::snprintf(buf, sizeof buf, "%.9e\n", coeffs.empty() ? 0.0 : coeffs[v]);
      os << buf;
    }
  };
  scalar_section("pressure", s.p.coeffs);
  scalar_section("q", s.q.coeffs);
  auto vector_section = [&](const char* name, double scale) {
    os << "VECTORS " << name << " double\n";
    for (std::size_t v = 0; v < nv; ++v) {
      const double ux = s.u.coeffs.empty() ? 0.0 : s.u.coeffs[2 * v];
      const double uy = s.u.coeffs.empty() ? 0.0 : s.u.coeffs[2 * v + 1];
      std::snprintf(buf, sizeof buf, "%.9e %.9e 0\n", scale * ux, scale * uy);
      os << buf;
    }
  };
  vector_section("displacement", 1.0);
  vector_section("warp", magnification);
  return os.str();
}

inline std::string diagnostics_csv(const Diagnostics& diag) {
  std::string out = "step,t,J_h,C_q,C_u,C_ptilde,C_p,theta,mult_x,mult_y\n";
  char buf[360];
  for (const auto& r : diag.records) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.t,
                  r.J_h, r.C_q, r.C_u, r.C_ptilde, r.C_p, diag.theta, r.mult_x, r.mult_y);
    out += buf;
  }
  return out;
}

// Runs a config and writes snap_<n>.vtk plus diagnostics.csv into out_dir.
inline Diagnostics run_to_directory(const RunConfig& cfg, const std::string& base_dir,
                                    const std::string& out_dir, std::ostream& log = std::cout) {
  BuiltProblem prob = build_problem(cfg, base_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + out_dir + "': " + ec.message());
  GelSimulator sim(prob.mesh, prob.params, prob.load, prob.hooks);
  const TimeGrid grid = TimeGrid::uniform_or_shortened(cfg.dt, cfg.T);
  RunOptions opts;
  opts.theta_warn_threshold = cfg.theta_warn;
  // snapshots at steps 0, stride, 2*stride, ...: floor(N/stride)+1 files
  opts.observer = [&](const State& s) {
    if (s.step % cfg.snapshot_stride != 0) return;
    const std::string path = out_dir + "/snap_" + std::to_string(s.step) + ".vtk";
    write_file(path, write_snapshot(s, prob.mesh, cfg.magnification));
  };
  const RunResult res = sim.run(prob.initial, grid, cfg.algorithm, opts);
  write_file(out_dir + "/diagnostics.csv", diagnostics_csv(res.diag));
  for (const auto& w : res.diag.warnings) log << "warning: " << w << "\n";
  return res.diag;
}

inline StudyConfig parse_study_config(const std::string& text) {
  using detail::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object() || !root.contains("study")) throw ConfigError("convergence config needs a 'study' object");
  detail::check_keys(root, "$", {"study"});
  const json& st = root["study"];
  detail::check_keys(st, "study", {"coupling", "levels", "base_nx", "base_ny", "T", "base_steps", "algorithm",
                                   "material", "fixed_nx", "reference_refinement", "output"});
  StudyConfig cfg;
  const std::string coupling = detail::require_string(st, "study", "coupling");
  if (coupling == "dt_h2")
    cfg.coupling = Coupling::DtProportionalH2;
  else if (coupling == "dt_h")
    cfg.coupling = Coupling::DtProportionalH;
  else if (coupling == "fixed_mesh")
    cfg.coupling = Coupling::FixedMesh;
  else
    throw ConfigError("'study.coupling' must be dt_h2, dt_h, or fixed_mesh");
  cfg.levels = detail::require_int(st, "study", "levels");
  if (st.contains("base_nx")) cfg.base_nx = detail::require_int(st, "study", "base_nx");
  if (st.contains("base_ny")) cfg.base_ny = detail::require_int(st, "study", "base_ny");
  cfg.T = detail::require_number(st, "study", "T");
  cfg.base_steps = detail::require_int(st, "study", "base_steps");
  if (st.contains("algorithm")) {
    const std::string alg = detail::require_string(st, "study", "algorithm");
    if (alg == "alg1")
      cfg.algorithm = Algorithm::Alg1;
    else if (alg == "alg2")
      cfg.algorithm = Algorithm::Alg2;
    else
      throw ConfigError("'study.algorithm' must be alg1 or alg2");
  }
  if (st.contains("material")) {
    const json& mat = st["material"];
    detail::check_keys(mat, "study.material", {"K", "G", "phi", "xi"});
    cfg.material.K = detail::require_number(mat, "study.material", "K");
    cfg.material.G = detail::require_number(mat, "study.material", "G");
    cfg.material.phi = detail::require_number(mat, "study.material", "phi");
    cfg.material.xi = detail::require_number(mat, "study.material", "xi");
  }
  if (st.contains("fixed_nx")) cfg.fixed_nx = detail::require_int(st, "study", "fixed_nx");
  if (st.contains("reference_refinement")) cfg.reference_refinement = detail::require_int(st, "study", "reference_refinement");
  return cfg;
}

inline std::string study_output_path(const std::string& text) {
  using detail::json;
  const json root = json::parse(text, nullptr, false);
  if (root.is_object() && root.contains("study") && root["study"].contains("output") &&
      root["study"]["output"].is_string())
    return root["study"]["output"].get<std::string>();
  return "rates.csv";
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  static const char* usage =
      "usage: gelflow run <config.json> [--out DIR] [--stride K]\n"
      "       gelflow convergence <config.json>\n"
      "       gelflow mesh-info <mesh>\n";
  try {
    if (args.empty()) {
      err << usage;
      return 1;
    }
    const std::string& cmd = args[0];
    if (cmd == "run") {
      if (args.size() < 2) throw ConfigError("run: missing config path");
      std::string out_dir;
      int stride = 0;
      for (std::size_t i = 2; i < args.size(); ++i) {
        if (args[i] == "--out" && i + 1 < args.size())
          out_dir = args[++i];
        else if (args[i] == "--stride" && i + 1 < args.size())
          stride = std::stoi(args[++i]);
        else
          throw ConfigError("run: unknown option '" + args[i] + "'");
      }
      RunConfig cfg = parse_config(read_file(args[1]));
      if (!out_dir.empty()) cfg.output_dir = out_dir;
      if (stride > 0) cfg.snapshot_stride = stride;
      const std::string base_dir = std::filesystem::path(args[1]).parent_path().string();
      const Diagnostics diag = run_to_directory(cfg, base_dir.empty() ? "." : base_dir, cfg.output_dir, err);
      out << "wrote " << cfg.output_dir << "/diagnostics.csv (" << diag.records.size() << " steps, theta = "
          << diag.theta << ")\n";
      return 0;
    }
    if (cmd == "convergence") {
      if (args.size() != 2) throw ConfigError("convergence: expected exactly one config path");
      const std::string text = read_file(args[1]);
      const StudyConfig cfg = parse_study_config(text);
      const RateTable table = convergence_study(cfg);
      const std::string csv = table.to_csv();
      write_file(study_output_path(text), csv);
      out << csv;
      return 0;
    }
    if (cmd == "mesh-info") {
      if (args.size() != 2) throw ConfigError("mesh-info: expected exactly one mesh path");
      const Mesh m = read_mesh(read_file(args[1]));
      std::map<int, int> tag_counts;
      for (const auto& be : m.boundary_edges) ++tag_counts[be.tag];
      out << "vertices:       " << m.vertices.size() << "\n";
      out << "triangles:      " << m.triangles.size() << "\n";
      out << "boundary edges: " << m.boundary_edges.size() << "\n";
      out << "boundary loops: " << boundary_loops(m).size() << "\n";
      out << "mesh size h:    " << mesh_size(m) << "\n";
      out << "total area:     " << mesh_area(m) << "\n";
      for (const auto& [tag, count] : tag_counts) out << "tag " << tag << ": " << count << " edges\n";
      return 0;
    }
    err << usage;
    return 1;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidParameterError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MeshError& e) {
    err << "mesh error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace gelflow
