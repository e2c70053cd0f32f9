#pragma once

// Problem specification and method drivers for the benchmark tool.
//
// Matrix sources:  gen:random | gen:stencil | gen:nonnormal | <path.mtx>
// RHS sources:     family:random | family:angle-sweep | family:half-real | <directory of .mtx vectors>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrhs/baselines.hpp"
#include "mrhs/generators.hpp"
#include "mrhs/gmres_mrhs.hpp"
#include "mrhs/matrix_market.hpp"
#include "mrhs/oracle.hpp"

namespace mrhs::bench {

using gen::config_error;

struct ProblemSpec {
  std::string matrix = "gen:random";
  Index n = 100;            // generator size; for gen:stencil the grid side is round(sqrt(n))
  std::string rhs = "family:random";
  Index count = 4;          // M, for generated families
  Real tol = 1e-8;
  std::vector<Real> tols;   // per-system tolerances; overrides tol where present
  std::string method = "all";
  Index max_iter = 0;
  std::uint64_t seed = 1;
  std::string precision = "double";  // double | single
  Real correlation_floor = 0.9;
  Real waves = 4;
  Real scale = 0.25;        // gen:random
  Real spread = 1e3;        // gen:nonnormal
  Real coupling = 0.5;      // gen:nonnormal
  bool deterministic = false;
};

struct Problem {
  LinearOperator A;
  std::optional<Matrix> dense;  // available for generated and file matrices up to the oracle limit
  std::vector<RhsInput> systems;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"mrhs", "classic", "gcr", "seed"};
  return names;
}

inline std::vector<std::string> selected_methods(const std::string& method) {
  if (method == "all") return method_names();
  if (std::find(method_names().begin(), method_names().end(), method) == method_names().end())
    throw config_error("unknown method '" + method + "' (expected mrhs, classic, gcr, seed or all)");
  return {method};
}

inline void validate(const ProblemSpec& spec) {
  if (spec.count < 1) throw config_error("count must be at least 1");
  if (!(spec.tol > 0)) throw config_error("tolerance must be positive");
  for (Real t : spec.tols)
    if (!(t > 0)) throw config_error("per-system tolerances must be positive");
  if (spec.precision != "double" && spec.precision != "single")
    throw config_error("precision must be double or single, not '" + spec.precision + "'");
  if (spec.max_iter < 0) throw config_error("max_iter must be non-negative");
  selected_methods(spec.method);
}

/// Reads the fields present in a JSON object on top of the defaults in spec.
inline ProblemSpec spec_from_json(const nlohmann::json& j, ProblemSpec spec = {}) {
  if (!j.is_object()) throw config_error("config must be a JSON object");
  static const std::vector<std::string> known{"matrix", "n", "rhs", "count", "tol", "tols", "method", "max_iter", "seed",
                                              "precision", "correlation_floor", "waves", "scale", "spread",
                                              "coupling", "deterministic"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw config_error("unknown config key '" + key + "'");
  try {
    if (j.contains("matrix")) spec.matrix = j["matrix"].get<std::string>();
    if (j.contains("n")) spec.n = j["n"].get<Index>();
    if (j.contains("rhs")) spec.rhs = j["rhs"].get<std::string>();
    if (j.contains("count")) spec.count = j["count"].get<Index>();
    if (j.contains("tol")) spec.tol = j["tol"].get<Real>();
    if (j.contains("tols")) spec.tols = j["tols"].get<std::vector<Real>>();
    if (j.contains("method")) spec.method = j["method"].get<std::string>();
    if (j.contains("max_iter")) spec.max_iter = j["max_iter"].get<Index>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("precision")) spec.precision = j["precision"].get<std::string>();
    if (j.contains("correlation_floor")) spec.correlation_floor = j["correlation_floor"].get<Real>();
    if (j.contains("waves")) spec.waves = j["waves"].get<Real>();
    if (j.contains("scale")) spec.scale = j["scale"].get<Real>();
    if (j.contains("spread")) spec.spread = j["spread"].get<Real>();
    if (j.contains("coupling")) spec.coupling = j["coupling"].get<Real>();
    if (j.contains("deterministic")) spec.deterministic = j["deterministic"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("bad config value: ") + e.what());
  }
  return spec;
}

inline ProblemSpec spec_from_file(const std::string& path, ProblemSpec spec = {}) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error(path + ": " + e.what());
  }
  return spec_from_json(j, std::move(spec));
}

inline constexpr Index kDenseLimit = 2000;

inline std::vector<Vector> rhs_from_directory(const std::string& dir, Index n) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw config_error("RHS source '" + dir + "' is neither family:NAME nor a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".mtx") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw config_error("no .mtx vectors in " + dir);
  std::vector<Vector> out;
  for (const auto& f : files) {
    Vector b = mm::load_vector(f.string());
    if (b.size() != n)
      throw config_error(f.string() + ": vector has " + std::to_string(b.size()) + " entries, matrix has " +
                         std::to_string(n) + " rows");
    out.push_back(std::move(b));
  }
  return out;
}

/// Builds the operator and the systems; deterministic in spec.seed. The
/// matrix and RHS draws use independent streams derived from the seed.
inline Problem generate_problem(const ProblemSpec& spec) {
  validate(spec);
  Problem p;
  const std::uint64_t matrix_seed = spec.seed * 2 + 1;
  const std::uint64_t rhs_seed = spec.seed * 2 + 2;

  if (spec.matrix.rfind("gen:", 0) == 0) {
    const std::string name = spec.matrix.substr(4);
    if (spec.n < 1) throw config_error("n must be positive");
    if (name == "random") {
      p.dense = gen::random_well_conditioned(spec.n, matrix_seed, spec.scale);
      p.A = dense_operator(*p.dense);
    } else if (name == "stencil") {
      const auto grid = static_cast<Index>(std::lround(std::sqrt(static_cast<Real>(spec.n))));
      const SparseMatrix S = gen::convection_diffusion(std::max<Index>(grid, 1));
      if (S.rows() <= kDenseLimit) p.dense = Matrix(S);
      p.A = sparse_operator(S);
    } else if (name == "nonnormal") {
      if (spec.n < 2 || spec.n % 2 != 0) throw config_error("gen:nonnormal needs an even n >= 2");
      p.dense = gen::nonnormal_ill_conditioned(spec.n, matrix_seed, spec.spread, spec.coupling);
      p.A = dense_operator(*p.dense);
    } else {
      throw config_error("unknown generator '" + name + "' (expected random, stencil or nonnormal)");
    }
  } else {
    const auto m = mm::read_file(spec.matrix);
    if (m.rows != m.cols) throw config_error(spec.matrix + ": matrix is not square");
    if (m.rows <= kDenseLimit) p.dense = m.dense();
    p.A = sparse_operator(m.sparse());
  }
  const Index n = p.A.size();

  std::vector<Vector> rhs;
  if (spec.rhs.rfind("family:", 0) == 0) {
    const std::string name = spec.rhs.substr(7);
    if (name == "random") rhs = gen::random_family(n, spec.count, rhs_seed);
    else if (name == "angle-sweep")
      rhs = gen::angle_sweep_family(n, spec.count, rhs_seed, spec.correlation_floor, spec.waves).rhs;
    else if (name == "half-real") rhs = gen::half_real_family(n, spec.count, rhs_seed);
    else throw config_error("unknown RHS family '" + name + "' (expected random, angle-sweep or half-real)");
  } else {
    rhs = rhs_from_directory(spec.rhs, n);
  }

  for (std::size_t s = 0; s < rhs.size(); ++s) {
    const Real eps = s < spec.tols.size() ? spec.tols[s] : spec.tol;
    p.systems.push_back({std::move(rhs[s]), Vector(), eps});
  }
  if (spec.precision == "single") p.A = single_precision(p.A);
  return p;
}

inline SolveOptions options_for(const ProblemSpec& spec) {
  SolveOptions o;
  o.max_iter = spec.max_iter;
  return o;
}

/// Runs one method. Systems a method never reached (it stopped at its
/// iteration cap or on a breakdown) are appended as non-converged records.
inline SolveReport run_method(const std::string& method, const Problem& problem, const SolveOptions& options,
                              const StreamHooks& hooks = {}) {
  const auto provider = provider_from_list(problem.systems);
  SolveReport rep;
  if (method == "classic") rep = classic_stream_solve(problem.A, provider, options);
  else if (method == "gcr") rep = gcr_mrhs_solve(problem.A, provider, options);
  else if (method == "seed") rep = seed_gmres_solve(problem.A, provider, options);
  else if (method == "mrhs") rep = solve_stream(problem.A, provider, options, hooks);
  else throw config_error("unknown method '" + method + "'");
  for (std::size_t s = rep.records.size(); s < problem.systems.size(); ++s) {
    RecordReport r;
    r.rhs_index = static_cast<Index>(s);
    r.rhs_norm = problem.systems[s].b.norm();
    r.eps = problem.systems[s].eps;
    rep.records.push_back(std::move(r));
  }
  summarize(rep);
  return rep;
}

/// Every selected method on identical data, one after another.
inline std::vector<SolveReport> run_benchmark(const ProblemSpec& spec) {
  const Problem problem = generate_problem(spec);
  const SolveOptions options = options_for(spec);
  std::vector<SolveReport> out;
  for (const auto& method : selected_methods(spec.method)) out.push_back(run_method(method, problem, options));
  return out;
}

struct CertifiedRun {
  SolveReport report;
  oracle::Certification certification;
};

/// Runs the multi-RHS solver with a trace and certifies every residual estimate.
inline CertifiedRun certify_run(const ProblemSpec& spec, Real rel_tol = 1e-9) {
  const Problem problem = generate_problem(spec);
  MrhsTrace trace;
  StreamHooks hooks;
  hooks.trace = &trace;
  CertifiedRun out;
  out.report = solve_stream(problem.A, provider_from_list(problem.systems), options_for(spec), hooks);
  out.certification = oracle::certify(problem.A, trace, rel_tol);
  return out;
}

}  // namespace mrhs::bench
