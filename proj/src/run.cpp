#include "micromorph/run.hpp"

#include "micromorph/polynomial.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace micromorph::run
{

using io::Json;
using io::number;

bool ExperimentResult::pass() const
{
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

namespace
{

std::shared_ptr<const geometry::Mesh> mesh_at(const RunConfig& c, int level)
{
  return std::make_shared<const geometry::Mesh>(geometry::build_mesh(c.domain, 1 << level));
}

int finest_level(const RunConfig& c) { return c.levels.back(); }

std::string model_name(const energy::MaterialModel& m)
{
  return std::holds_alternative<energy::LinearCoefficients>(m) ? "linear" : "nonlinear";
}

std::string fmt(const char* f, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fespace::FieldP random_p(std::shared_ptr<const geometry::Mesh> mesh, std::uint64_t seed)
{
  fespace::FieldP p = fespace::zero_field(fespace::HCurlTensorSpace(std::move(mesh)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& v : p.coeffs)
    v = g(rng);
  fespace::constrain(p);
  return p;
}

// quadratic polynomial matrix with normal coefficients, and its divergence
std::pair<PolyMat, PolyVec> random_moment(std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  PolyMat m;
  for (auto& row : m)
    for (auto& e : row)
      for (int a = 0; a <= 2; ++a)
        for (int b = 0; a + b <= 2; ++b)
          for (int d = 0; a + b + d <= 2; ++d)
            e = e + Poly3::monomial(0.5 * g(rng), a, b, d);
  return {m, div(m)};
}

Json report_json(const solve::SolveReport& r)
{
  Json j;
  j["method"] = r.method;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["residual"] = r.residual;
  j["relative_gradient"] = r.relative_gradient;
  j["energy"] = r.energy;
  j["norm_u_h1"] = r.norm_u_h1;
  j["norm_p_hcurl"] = r.norm_p_hcurl;
  if (r.apriori_ratio)
    j["apriori_ratio"] = *r.apriori_ratio;
  return j;
}

Json probe_json(const analysis::ProbeReport& p)
{
  Json j;
  j["field"] = p.field;
  j["m"] = p.m;
  j["sigma"] = p.sigma;
  j["eta"] = p.eta;
  j["zero_field"] = p.zero_field;
  j["index"] = p.describe();
  j["beta"] = p.beta;
  j["s_est"] = p.s_est;
  j["band"] = {p.s_lo, p.s_hi};
  j["capped"] = p.capped;
  return j;
}

io::CsvTable probe_table(const analysis::ProbeReport& p)
{
  io::CsvTable t{{"k", "h", "direction", "integral", "quotient"}, {}};
  for (const auto& r : p.rows)
    t.add({std::to_string(r.k), number(r.h), std::to_string(r.direction), number(r.integral), number(r.quotient)});
  return t;
}

void add_verdicts(ExperimentResult& out, const std::vector<Verdict>& vs, const std::string& prefix)
{
  for (const auto& v : vs)
    out.verdicts.push_back({prefix + v.name, v.pass, v.detail});
}

} // namespace

// -- experiments ---------------------------------------------------------------------

ExperimentResult solve_experiment(const RunConfig& c)
{
  ExperimentResult out;
  out.experiment = "solve";
  const auto loads = c.loads();
  io::CsvTable table{{"model", "level", "n", "dofs", "method", "iterations", "converged", "residual", "energy",
                      "norm_u_h1", "norm_p_hcurl", "l2_error_u", "l2_error_p"},
                     {}};
  Json runs = Json::array();
  for (const auto& model : c.models())
  {
    const std::string name = model_name(model);
    std::vector<std::pair<double, double>> errors;
    for (int level : c.levels)
    {
      auto mesh = mesh_at(c, level);
      auto sol = std::make_shared<const solve::Solution>(solve::solve_model(mesh, model, loads, c.solve_tol));
      const auto& r = sol->report;
      const int dofs = static_cast<int>(sol->u.coeffs.size() + sol->p.coeffs.size());
      std::string eu = "", ep = "";
      Json j = report_json(r);
      j["model"] = name;
      j["level"] = level;
      j["dofs"] = dofs;
      if (loads.has_exact())
      {
        const double a = fespace::l2_error(sol->u, loads.u_exact);
        const double b = fespace::l2_error(sol->p, loads.p_exact);
        errors.emplace_back(a, b);
        eu = number(a);
        ep = number(b);
        j["l2_error_u"] = a;
        j["l2_error_p"] = b;
      }
      runs.push_back(j);
      table.add({name, std::to_string(level), std::to_string(1 << level), std::to_string(dofs), r.method,
                 std::to_string(r.iterations), r.converged ? "1" : "0", number(r.residual), number(r.energy),
                 number(r.norm_u_h1), number(r.norm_p_hcurl), eu, ep});
      out.verdicts.push_back({name + " level " + std::to_string(level) + " converged", r.converged,
                              r.method + ", " + std::to_string(r.iterations) + " iterations, residual " +
                                  fmt("%.3g", r.residual)});
      if (level == finest_level(c))
        out.fields.push_back({"fields_" + name + "_n" + std::to_string(1 << level), sol});
    }
    // rates for nested levels of a manufactured solution
    for (std::size_t i = 1; i < errors.size(); ++i)
    {
      const double ratio = std::ldexp(1.0, c.levels[i] - c.levels[i - 1]);
      const double ru = std::log(errors[i - 1].first / errors[i].first) / std::log(ratio);
      const double rp = std::log(errors[i - 1].second / errors[i].second) / std::log(ratio);
      const std::string step = std::to_string(c.levels[i - 1]) + "->" + std::to_string(c.levels[i]);
      out.verdicts.push_back({name + " u L2 rate " + step, ru >= 1.8, fmt("%.4f, need >= 1.8", ru)});
      out.verdicts.push_back({name + " P L2 rate " + step, rp >= 0.9, fmt("%.4f, need >= 0.9", rp)});
    }
  }
  out.results["runs"] = runs;
  out.tables["solve.csv"] = table;
  return out;
}

ExperimentResult verify_transforms(const RunConfig& c)
{
  ExperimentResult out;
  out.experiment = "verify-transforms";
  auto mesh = mesh_at(c, finest_level(c));
  const auto p = random_p(mesh, c.seed);
  const auto [mp, dmp] = random_moment(c.seed + 1);
  const transform::TensorFunction m = [mp = mp](const Vec3& x) { return eval(mp, x); };
  const transform::VectorFunction dm = [dmp = dmp](const Vec3& x) { return eval(dmp, x); };
  const auto base = transform::default_variation(c.domain);

  io::CsvTable table{{"h", "curl_defect", "curl_points", "div_defect", "div_points", "adjoint_defect",
                      "adjoint_defect_refined", "bound_sampled", "bound_closed_form"},
                     {}};
  Json rows = Json::array();
  for (double h : c.shifts)
  {
    const auto iv = transform::with_shift(base, h * base.cone.axis);
    const auto curl = transform::curl_identity_check(iv, p);
    const auto dv = transform::div_identity_check(iv, m, dm);
    const auto adj = transform::adjoint_check(iv, p, m);
    const auto bound = transform::uniform_bound(iv, 1000, c.seed);
    const std::string hs = fmt("%g", h);
    table.add({number(h), number(curl.max_defect), std::to_string(curl.points), number(dv.max_defect),
               std::to_string(dv.points), number(adj.defect), number(adj.defect_refined), number(bound.sampled),
               number(bound.closed_form)});
    rows.push_back({{"h", h},
                    {"curl_defect", curl.max_defect},
                    {"div_defect", dv.max_defect},
                    {"adjoint_defect", adj.defect},
                    {"adjoint_defect_refined", adj.defect_refined}});
    out.verdicts.push_back({"curl identity |h| = " + hs, curl.max_defect <= 1e-5 && curl.points > 0,
                            fmt("defect %.3g", curl.max_defect) + " at " + std::to_string(curl.points) +
                                " points, need <= 1e-5"});
    out.verdicts.push_back({"div identity |h| = " + hs, dv.max_defect <= 1e-5 && dv.points > 0,
                            fmt("defect %.3g", dv.max_defect) + " at " + std::to_string(dv.points) +
                                " points, need <= 1e-5"});
    const bool reduced = adj.defect_refined <= adj.defect / 4.0 || adj.defect_refined <= 1e-12;
    out.verdicts.push_back({"adjointness |h| = " + hs, adj.defect <= 1e-6 && reduced,
                            fmt("defect %.3g", adj.defect) + fmt(", refined %.3g", adj.defect_refined) +
                                ", need <= 1e-6 and 4x reduction (or <= 1e-12)"});
  }
  const auto fz = transform::mapping_property_fuzz(c.domain, c.fuzz_samples, c.seed);
  out.verdicts.push_back({"mapping properties", fz.exterior_violations == 0 && fz.interior_violations == 0 &&
                                                    fz.min_det >= 0.5 && fz.max_roundtrip <= 1e-12,
                          std::to_string(fz.samples) + " samples, violations " +
                              std::to_string(fz.exterior_violations) + "/" + std::to_string(fz.interior_violations) +
                              fmt(", min det %.4f", fz.min_det) + fmt(", roundtrip %.2e", fz.max_roundtrip)});
  out.results["shifts"] = rows;
  out.results["fuzz"] = {{"samples", fz.samples},
                         {"exterior_violations", fz.exterior_violations},
                         {"interior_violations", fz.interior_violations},
                         {"min_det", fz.min_det},
                         {"max_roundtrip", fz.max_roundtrip}};
  out.tables["transforms.csv"] = table;
  return out;
}

ExperimentResult korn_experiment(const RunConfig& c)
{
  ExperimentResult out;
  out.experiment = "korn";
  io::CsvTable table{{"level", "n", "free_dofs", "constant", "lambda_min", "iterations", "residual",
                      "max_sampled_rayleigh"},
                     {}};
  std::vector<double> cs;
  Json rows = Json::array();
  for (int level : c.levels)
  {
    auto mesh = mesh_at(c, level);
    const auto k = analysis::korn_constant(mesh);
    double worst = 0.0;
    for (int s = 0; s < c.rayleigh_samples; ++s)
      worst = std::max(worst, analysis::korn_rayleigh(random_p(mesh, c.seed + static_cast<std::uint64_t>(s))));
    cs.push_back(k.constant);
    table.add({std::to_string(level), std::to_string(1 << level), std::to_string(k.free_dofs), number(k.constant),
               number(k.lambda_min), std::to_string(k.iterations), number(k.residual), number(worst)});
    rows.push_back({{"level", level}, {"constant", k.constant}, {"max_sampled_rayleigh", worst}});
    if (c.rayleigh_samples > 0)
      out.verdicts.push_back({"Rayleigh bound level " + std::to_string(level), worst <= k.constant + 1e-8,
                              fmt("max sampled %.6f", worst) + fmt(" <= c~_h + 1e-8 = %.6f", k.constant + 1e-8)});
  }
  for (std::size_t i = 1; i < cs.size(); ++i)
    out.verdicts.push_back({"nondecreasing " + std::to_string(c.levels[i - 1]) + "->" + std::to_string(c.levels[i]),
                            cs[i] >= cs[i - 1] * (1.0 - 1e-8), fmt("%.6f", cs[i - 1]) + fmt(" -> %.6f", cs[i])});
  if (cs.size() >= 3)
  {
    const double inc = (cs.back() - cs[cs.size() - 2]) / cs[cs.size() - 2];
    out.verdicts.push_back({"final relative increment", inc <= 0.10, fmt("%.4f, need <= 0.10", inc)});
  }
  out.results["levels"] = rows;
  out.tables["korn.csv"] = table;
  return out;
}

ExperimentResult helmholtz_experiment(const RunConfig& c)
{
  ExperimentResult out;
  out.experiment = "helmholtz";
  auto mesh = mesh_at(c, finest_level(c));
  const auto p = random_p(mesh, c.seed);
  io::CsvTable table{{"row", "norm_p2", "norm_dv2", "norm_q2", "cross", "weak_div", "cg_iterations"}, {}};
  Json rows = Json::array();
  for (int row = 0; row < 3; ++row)
  {
    const auto s = analysis::helmholtz_decompose(p, row);
    table.add({std::to_string(row), number(s.norm_p2), number(s.norm_dv2), number(s.norm_q2), number(s.cross),
               number(s.weak_div), std::to_string(s.cg_iterations)});
    rows.push_back({{"row", row}, {"norm_p2", s.norm_p2}, {"norm_dv2", s.norm_dv2}, {"norm_q2", s.norm_q2},
                    {"cross", s.cross}});
    const double pyth = std::abs(s.norm_p2 - s.norm_dv2 - s.norm_q2 - 2.0 * s.cross);
    out.verdicts.push_back({"orthogonality row " + std::to_string(row), std::abs(s.cross) <= 1e-9 * s.norm_p2,
                            fmt("|<Dv, q>| / |p|^2 = %.3g", std::abs(s.cross) / s.norm_p2) + ", need <= 1e-9"});
    out.verdicts.push_back({"Pythagoras row " + std::to_string(row),
                            std::abs(s.norm_p2 - s.norm_dv2 - s.norm_q2) <= 1e-9 * s.norm_p2,
                            fmt("defect %.3g", std::abs(s.norm_p2 - s.norm_dv2 - s.norm_q2) / s.norm_p2) +
                                fmt(" (with cross term %.3g)", pyth / s.norm_p2)});
  }
  out.results["rows"] = rows;
  out.tables["helmholtz.csv"] = table;
  return out;
}

namespace
{

ExperimentResult regularity_runs(const RunConfig& c, bool sweep)
{
  ExperimentResult out;
  out.experiment = sweep ? "full-regularity" : "probe";
  auto mesh = mesh_at(c, finest_level(c));
  const auto loads = c.loads();
  auto opts = c.regularity;
  opts.sweep = sweep;
  for (const auto& model : c.models())
  {
    const std::string name = model_name(model);
    const auto r = analysis::regularity_experiment(mesh, model, loads, opts);
    Json j;
    j["solve"] = report_json(r.solve);
    j["u"] = probe_json(r.u);
    j["P"] = probe_json(r.p);
    j["CurlP"] = probe_json(r.curl_p);
    out.tables["probe_" + name + "_u.csv"] = probe_table(r.u);
    out.tables["probe_" + name + "_P.csv"] = probe_table(r.p);
    out.tables["probe_" + name + "_CurlP.csv"] = probe_table(r.curl_p);
    if (sweep)
    {
      io::CsvTable q{{"k", "h", "u_l2", "u_h1", "p_l2", "p_hcurl", "quotient"}, {}};
      for (const auto& row : r.quotients)
        q.add({std::to_string(row.k), number(row.h), number(row.q.u_l2), number(row.q.u_h1), number(row.q.p_l2),
               number(row.q.p_hcurl), number(row.q.quotient)});
      out.tables["quotients_" + name + ".csv"] = q;
      j["quotient_ratio"] = r.quotient_ratio;
    }
    out.results[name] = j;
    out.verdicts.push_back({name + " solve converged", r.solve.converged, r.solve.method});
    add_verdicts(out, r.verdicts, name + " ");
    out.fields.push_back({"fields_" + name + "_n" + std::to_string(c.finest_n()), r.solution});
  }
  return out;
}

} // namespace

ExperimentResult probe_experiment(const RunConfig& c) { return regularity_runs(c, false); }
ExperimentResult full_regularity(const RunConfig& c) { return regularity_runs(c, true); }

ExperimentResult run_experiment(const RunConfig& c)
{
  if (c.experiment == "solve")
    return solve_experiment(c);
  if (c.experiment == "verify-transforms")
    return verify_transforms(c);
  if (c.experiment == "korn")
    return korn_experiment(c);
  if (c.experiment == "helmholtz")
    return helmholtz_experiment(c);
  if (c.experiment == "probe")
    return probe_experiment(c);
  if (c.experiment == "full-regularity")
    return full_regularity(c);
  throw ConfigError("run.experiment", "unknown experiment '" + c.experiment + "'");
}

void write_artifacts(const ExperimentResult& r, const RunConfig& c, const std::string& dir)
{
  io::ensure_directory(dir);
  Json s;
  s["experiment"] = r.experiment;
  s["pass"] = r.pass();
  Json cfg;
  cfg["domain"] = c.domain.name();
  cfg["levels"] = c.levels;
  cfg["model"] = c.model;
  cfg["q"] = c.nonlinear.q;
  cfg["alpha"] = c.nonlinear.alpha;
  cfg["loads"] = c.load_preset;
  cfg["seed"] = c.seed;
  s["config"] = cfg;
  Json vs = Json::array();
  for (const auto& v : r.verdicts)
    vs.push_back({{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
  s["verdicts"] = vs;
  s["results"] = r.results;
  io::write_json(dir + "/summary.json", s);
  for (const auto& [name, t] : r.tables)
    io::write_csv(dir + "/" + name, t);
  if (c.write_vtk)
    for (const auto& f : r.fields)
      io::write_vtk(dir + "/" + f.name + ".vtk", f.solution->u.space.mesh(), &f.solution->u, &f.solution->p);
}

int run(const RunConfig& c, std::ostream& log)
{
  try
  {
    Eigen::setNbThreads(c.threads);
    const ExperimentResult r = run_experiment(c);
    write_artifacts(r, c, c.out_dir);
    for (const auto& v : r.verdicts)
      log << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
    log << (r.pass() ? "all verdicts pass" : "verdict failure") << " (" << r.experiment << ", artifacts in "
        << c.out_dir << ")\n";
    return r.pass() ? exit_pass : exit_verdict_failure;
  }
  catch (const ConfigError& e)
  {
    log << "error: " << e.what() << '\n';
    return exit_config_error;
  }
  catch (const std::exception& e)
  {
    log << "error: " << e.what() << '\n';
    return exit_numerical_failure;
  }
}

} // namespace micromorph::run
