#include "micromorph/analysis.hpp"

#include <Eigen/CholmodSupport>
#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace micromorph::analysis
{

namespace
{

using CellFunction = std::function<Vec3(int tet, const std::array<double, 4>& bary, const Vec3& x)>;

HelmholtzSplit decompose(std::shared_ptr<const Mesh> mesh, const CellFunction& pc, int quad_order)
{
  const Mesh& m = *mesh;
  const int nv = m.num_vertices();
  std::vector<int> index(nv, -1);
  int nfree = 0;
  for (int v = 0; v < nv; ++v)
    if (!m.boundary_vertex(v))
      index[v] = nfree++;

  const auto& rule = fespace::tet_rule(quad_order);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(16 * m.num_tets());
  Vector b = Vector::Zero(nfree);
  double norm_p2 = 0.0;
  for (int t = 0; t < m.num_tets(); ++t)
  {
    const auto& tet = m.tets()[t];
    const auto& g = m.grad_lambda(t);
    const double vol = m.volume(t);
    for (int a = 0; a < 4; ++a)
    {
      const int ia = index[tet[a]];
      if (ia < 0)
        continue;
      for (int c = 0; c < 4; ++c)
      {
        const int ic = index[tet[c]];
        if (ic >= 0)
          trip.emplace_back(ia, ic, vol * g[a].dot(g[c]));
      }
    }
    for (std::size_t k = 0; k < rule.size(); ++k)
    {
      const double w = 6.0 * vol * rule.weights[k];
      const Vec3 pv = pc(t, rule.points[k], m.point(t, rule.points[k]));
      norm_p2 += w * pv.squaredNorm();
      for (int a = 0; a < 4; ++a)
        if (index[tet[a]] >= 0)
          b[index[tet[a]]] += w * pv.dot(g[a]);
    }
  }
  SparseMatrix k(nfree, nfree);
  k.setFromTriplets(trip.begin(), trip.end());

  Vector vf = Vector::Zero(nfree);
  int iterations = 0;
  if (nfree > 0 && b.norm() > 0.0)
  {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg(k);
    cg.setTolerance(1e-10);
    cg.setMaxIterations(std::max(1000, 10 * nfree));
    vf = cg.solve(b);
    iterations = static_cast<int>(cg.iterations());
    if (cg.info() != Eigen::Success)
      throw NoConvergence("helmholtz_decompose: CG did not reach 1e-10", iterations);
  }

  HelmholtzSplit s;
  s.mesh = mesh;
  s.cg_iterations = iterations;
  s.potential = Vector::Zero(nv);
  for (int v = 0; v < nv; ++v)
    if (index[v] >= 0)
      s.potential[v] = vf[index[v]];

  // norms with the rule used for the load, so Pythagoras holds to CG accuracy
  const Vector r = b - k * vf;
  s.weak_div = nfree > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  s.norm_p2 = norm_p2;
  s.norm_dv2 = vf.dot(k * vf);
  s.cross = vf.dot(r);
  s.norm_q2 = norm_p2 - 2.0 * vf.dot(b) + s.norm_dv2;
  return s;
}

Vec3 grad_p1(const Mesh& m, const Vector& v, int t)
{
  Vec3 g = Vec3::Zero();
  const auto& tet = m.tets()[t];
  for (int a = 0; a < 4; ++a)
    g += v[tet[a]] * m.grad_lambda(t)[a];
  return g;
}

int cell_or_throw(const Mesh& m, const Vec3& x)
{
  const int t = m.locate(x);
  if (t < 0)
    throw PointOutsideDomain("point outside the mesh");
  return t;
}

} // namespace

Vec3 HelmholtzSplit::grad_potential(const Vec3& x) const
{
  return grad_p1(*mesh, potential, cell_or_throw(*mesh, x));
}

HelmholtzSplit helmholtz_decompose(std::shared_ptr<const Mesh> mesh, std::function<Vec3(const Vec3&)> p,
                                   int quad_order)
{
  HelmholtzSplit s = decompose(mesh, [&](int, const std::array<double, 4>&, const Vec3& x) { return p(x); },
                               quad_order);
  s.p = p;
  auto self = std::make_shared<const HelmholtzSplit>(s);
  s.q = [self](const Vec3& x) { return Vec3(self->p(x) - self->grad_potential(x)); };
  return s;
}

HelmholtzSplit helmholtz_decompose(const FieldP& p, int row)
{
  if (row < 0 || row > 2)
    throw ConfigError("helmholtz.row", "row must be 0, 1 or 2");
  auto mesh = p.space.mesh_ptr();
  // edge fields are linear per cell, order 2 integrates |p|^2 exactly
  HelmholtzSplit s = decompose(
      mesh, [&](int t, const std::array<double, 4>& bary, const Vec3&) {
        return Vec3(fespace::p_in_cell(p, t, bary).row(row).transpose());
      },
      2);
  auto field = std::make_shared<const FieldP>(p);
  s.p = [field, row](const Vec3& x) { return Vec3(fespace::evaluate_P(*field, x).row(row).transpose()); };
  auto pot = std::make_shared<const Vector>(s.potential);
  s.q = [field, row, pot, mesh](const Vec3& x) {
    const int t = cell_or_throw(*mesh, x);
    const Vec3 pv = fespace::p_in_cell(*field, t, mesh->barycentric(t, x)).row(row).transpose();
    return Vec3(pv - grad_p1(*mesh, *pot, t));
  };
  return s;
}

// -- Korn ---------------------------------------------------------------------

namespace
{

struct KornSystem
{
  SparseMatrix a, b;
  std::vector<int> free; // P dof index of each reduced dof
};

KornSystem korn_system(std::shared_ptr<const Mesh> mesh)
{
  const fespace::H1VectorSpace us(mesh);
  const fespace::HCurlTensorSpace ps(mesh);
  const TensorField id = TensorField::identity();
  const SparseMatrix a = fespace::assemble(fespace::FormKind::symP_symP, &id, us, ps) +
                         fespace::assemble(fespace::FormKind::curlcurl, &id, us, ps);
  const SparseMatrix b = fespace::assemble(fespace::FormKind::mass_P, nullptr, us, ps);

  KornSystem s;
  const int off = us.dim();
  std::vector<int> reduced(us.dim() + ps.dim(), -1);
  for (int i = 0; i < ps.dim(); ++i)
    if (!ps.boundary_mask()[i])
    {
      reduced[off + i] = static_cast<int>(s.free.size());
      s.free.push_back(i);
    }
  const int n = static_cast<int>(s.free.size());
  auto restrict_to = [&](const SparseMatrix& m) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < m.outerSize(); ++c)
      for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      {
        const int i = reduced[it.row()], j = reduced[it.col()];
        if (i >= 0 && j >= 0)
          trip.emplace_back(i, j, it.value());
      }
    SparseMatrix r(n, n);
    r.setFromTriplets(trip.begin(), trip.end());
    return r;
  };
  s.a = restrict_to(a);
  s.b = restrict_to(b);
  return s;
}

} // namespace

KornReport korn_constant(std::shared_ptr<const Mesh> mesh, double tol, int max_steps)
{
  const KornSystem sys = korn_system(mesh);
  const int n = static_cast<int>(sys.free.size());
  if (n == 0)
    throw NumericalError("korn_constant: no free edge dofs on this mesh");
  max_steps = std::clamp(max_steps, 1, n);

  Eigen::CholmodSupernodalLLT<SparseMatrix> fac(sys.a);
  if (fac.info() != Eigen::Success)
    throw NumericalError("korn_constant: factorization of the sym + curl matrix failed");

  // Lanczos on A^{-1} B, self-adjoint in the B inner product; its largest
  // eigenvalue is 1 / lambda_min. Full reorthogonalization.
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Vector v(n);
  for (auto& c : v)
    c = normal(rng);
  Vector bv = sys.b * v;
  const double n0 = std::sqrt(v.dot(bv));
  v /= n0;
  bv /= n0;

  std::vector<Vector> vs{v}, bvs{bv};
  std::vector<double> alpha, beta;
  KornReport rep;
  double prev = 0.0;
  for (int j = 0; j < max_steps; ++j)
  {
    Vector w = fac.solve(bvs[j]);
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < vs.size(); ++i)
      {
        const double c = bvs[i].dot(w);
        w -= c * vs[i];
        if (pass == 0 && i == vs.size() - 1)
          alpha.push_back(c);
      }
    const Vector bw = sys.b * w;
    const double bn = std::sqrt(std::max(0.0, w.dot(bw)));

    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
    {
      t(i, i) = alpha[i];
      if (i + 1 < m)
        t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double theta = es.eigenvalues()[m - 1];
    const Eigen::VectorXd sv = es.eigenvectors().col(m - 1);
    // |A^{-1}B x - theta x|_B for the Ritz vector x
    const double resid = bn * std::abs(sv[m - 1]);
    rep.iterations = m;
    const bool done = resid <= tol * theta || bn <= 1e-14 * theta || m == n;
    if (done || (m >= 2 && std::abs(theta - prev) <= 1e-3 * tol * theta && resid <= std::sqrt(tol) * theta))
    {
      Vector x = Vector::Zero(n);
      for (int i = 0; i < m; ++i)
        x += sv[i] * vs[i];
      rep.lambda_min = 1.0 / theta;
      rep.constant = theta;
      rep.residual = resid / theta;
      rep.free_dofs = n;
      const fespace::HCurlTensorSpace ps(mesh);
      rep.eigenvector = Vector::Zero(ps.dim());
      for (int i = 0; i < n; ++i)
        rep.eigenvector[sys.free[i]] = x[i];
      return rep;
    }
    prev = theta;
    beta.push_back(bn);
    vs.push_back(w / bn);
    bvs.push_back(bw / bn);
  }
  throw NoConvergence("korn_constant: Lanczos", max_steps);
}

double korn_rayleigh(const FieldP& p)
{
  const Mesh& m = p.space.mesh();
  const auto& rule = fespace::tet_rule(2);
  double num = 0.0, den = 0.0;
  for (int t = 0; t < m.num_tets(); ++t)
  {
    const double vol = m.volume(t);
    const Mat3 c = fespace::curlp_in_cell(p, t);
    den += vol * c.squaredNorm();
    for (std::size_t k = 0; k < rule.size(); ++k)
    {
      const Mat3 pv = fespace::p_in_cell(p, t, rule.points[k]);
      const double w = 6.0 * vol * rule.weights[k];
      num += w * pv.squaredNorm();
      den += w * sym(pv).squaredNorm();
    }
  }
  if (den <= 0.0)
    throw NumericalError("korn_rayleigh: zero field");
  return num / den;
}

// -- samplers -------------------------------------------------------------------

FieldSampler sample_u(const FieldU& u)
{
  auto f = std::make_shared<const FieldU>(u);
  return {"u", 0, 3, [f](const Vec3& x) {
            Vec9 v = Vec9::Zero();
            v.head<3>() = fespace::evaluate_u(*f, x);
            return v;
          }};
}

FieldSampler sample_Du(const FieldU& u)
{
  auto f = std::make_shared<const FieldU>(u);
  return {"Du", 1, 9, [f](const Vec3& x) { return flatten(fespace::evaluate_Du(*f, x)); }};
}

FieldSampler sample_P(const FieldP& p)
{
  auto f = std::make_shared<const FieldP>(p);
  return {"P", 0, 9, [f](const Vec3& x) { return flatten(fespace::evaluate_P(*f, x)); }};
}

FieldSampler sample_CurlP(const FieldP& p)
{
  auto f = std::make_shared<const FieldP>(p);
  return {"CurlP", 0, 9, [f](const Vec3& x) { return flatten(fespace::evaluate_CurlP(*f, x)); }};
}

FieldSampler sample_function(std::string name, int components, std::function<Vec9(const Vec3&)> f)
{
  if (components < 1 || components > 9)
    throw ConfigError("probe.components", "between 1 and 9 components");
  return {std::move(name), 0, components, std::move(f)};
}

// -- Besov probe ------------------------------------------------------------------

namespace
{

struct LineSums
{
  std::vector<double> integral; // one per shift
  long interior_points = 0;
  double max_abs = 0.0;
};

// Integrals of |f(x + s_j g e_d) - f(x)|^2 over grid points x in Omega_eta,
// one grid line parallel to e_d at a time; each line is sampled once.
LineSums shifted_integrals(const DomainSpec& domain, const FieldSampler& f, int d, const std::vector<int>& steps,
                           double eta, const ProbeGrid& grid)
{
  const double g = grid.spacing;
  const Vec3 hi = domain.bbox_max();
  std::array<int, 3> n{};
  for (int i = 0; i < 3; ++i)
    n[i] = static_cast<int>(std::floor(hi[i] / g - grid.offset[i])) + 1;
  const int d1 = (d + 1) % 3, d2 = (d + 2) % 3;
  const int nc = f.components;

  LineSums out;
  out.integral.assign(steps.size(), 0.0);
  std::vector<Vec9> val(n[d]);
  std::vector<char> have(n[d]), inner(n[d]);
  const double cell = g * g * g;

  for (int a = 0; a < n[d1]; ++a)
    for (int b = 0; b < n[d2]; ++b)
    {
      Vec3 x;
      x[d1] = (a + grid.offset[d1]) * g;
      x[d2] = (b + grid.offset[d2]) * g;
      if (x[d1] <= eta || x[d1] >= hi[d1] - eta || x[d2] <= eta || x[d2] >= hi[d2] - eta)
        continue;
      bool any = false;
      for (int i = 0; i < n[d]; ++i)
      {
        x[d] = (i + grid.offset[d]) * g;
        inner[i] = domain.contains(x) && domain.boundary_distance(x) > eta;
        have[i] = 0;
        any = any || inner[i];
      }
      if (!any)
        continue;
      auto at = [&](int i) -> const Vec9& {
        if (!have[i])
        {
          Vec3 y = x;
          y[d] = (i + grid.offset[d]) * g;
          val[i] = f.value(y);
          have[i] = 1;
          out.max_abs = std::max(out.max_abs, val[i].head(nc).cwiseAbs().maxCoeff());
        }
        return val[i];
      };
      for (int i = 0; i < n[d]; ++i)
      {
        if (!inner[i])
          continue;
        ++out.interior_points;
        const Vec9& v0 = at(i);
        for (std::size_t j = 0; j < steps.size(); ++j)
        {
          const int ip = i + steps[j];
          if (ip >= n[d])
            throw NumericalError("besov probe: shifted point left the sample grid");
          out.integral[j] += cell * (at(ip) - v0).head(nc).squaredNorm();
        }
      }
    }
  if (out.interior_points == 0)
    throw EmptyInteriorRegion("no grid point with boundary distance > " + std::to_string(eta));
  return out;
}

// Shift h as (direction, grid steps); h must be a positive multiple of the
// spacing along one axis.
std::pair<int, int> grid_shift(const Vec3& h, double g)
{
  int d = -1;
  for (int i = 0; i < 3; ++i)
    if (h[i] != 0.0)
    {
      if (d >= 0)
        throw ConfigError("probe.h", "shift must be parallel to a coordinate axis");
      d = i;
    }
  if (d < 0 || h[d] <= 0.0)
    throw ConfigError("probe.h", "shift must be a positive multiple of a coordinate direction");
  const double s = h[d] / g;
  const long steps = std::lround(s);
  if (steps < 1 || std::abs(s - static_cast<double>(steps)) > 1e-9 * std::max(1.0, s))
    throw ConfigError("probe.h", "shift must be a multiple of the grid spacing");
  return {d, static_cast<int>(steps)};
}

} // namespace

double besov_quotient(const DomainSpec& domain, const FieldSampler& f, double sigma, const Vec3& h, double eta,
                      const ProbeGrid& grid)
{
  if (!(sigma > 0.0 && sigma < 1.0))
    throw ConfigError("probe.sigma", "sigma must lie in (0, 1)");
  if (!(grid.spacing > 0.0))
    throw ConfigError("probe.grid", "grid spacing must be positive");
  const auto [d, steps] = grid_shift(h, grid.spacing);
  if (!(h.norm() < eta))
    throw ConfigError("probe.eta", "need 0 < |h| < eta");
  const LineSums s = shifted_integrals(domain, f, d, {steps}, eta, grid);
  return std::pow(h.norm(), -2.0 * sigma) * s.integral[0];
}

std::string ProbeReport::describe() const
{
  if (zero_field)
    return "undefined (zero field)";
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.4f [%.4f, %.4f]%s", s_est, s_lo, s_hi, capped ? " (capped)" : "");
  return buf;
}

ProbeReport regularity_index(const DomainSpec& domain, const FieldSampler& f, const ProbeOptions& opts)
{
  if (f.m != 0 && f.m != 1)
    throw ConfigError("probe.m", "m must be 0 or 1");
  if (opts.k_max < opts.k_min)
    throw ConfigError("probe.k", "k_max < k_min");
  if (!(opts.sigma > 0.0 && opts.sigma < 1.0))
    throw ConfigError("probe.sigma", "sigma must lie in (0, 1)");

  ProbeReport rep;
  rep.field = f.name;
  rep.m = f.m;
  rep.sigma = opts.sigma;
  const double hmax = opts.h_bar * std::ldexp(1.0, -opts.k_min);
  rep.eta = 2.0 * hmax;

  std::vector<int> ks, steps;
  for (int k = opts.k_min; k <= opts.k_max; ++k)
  {
    ks.push_back(k);
    Vec3 h = Vec3::Zero();
    h[0] = opts.h_bar * std::ldexp(1.0, -k);
    steps.push_back(grid_shift(h, opts.grid.spacing).second);
  }

  double max_abs = 0.0;
  for (int d = 0; d < 3; ++d)
  {
    const LineSums s = shifted_integrals(domain, f, d, steps, rep.eta, opts.grid);
    max_abs = std::max(max_abs, s.max_abs);
    for (std::size_t j = 0; j < ks.size(); ++j)
    {
      const double h = opts.h_bar * std::ldexp(1.0, -ks[j]);
      rep.rows.push_back({ks[j], h, d, s.integral[j], std::pow(h, -2.0 * opts.sigma) * s.integral[j]});
    }
  }

  const double cap = f.m + 1.0;
  if (max_abs <= opts.zero_threshold)
  {
    rep.zero_field = true;
    rep.s_est = rep.s_lo = rep.s_hi = cap;
    rep.beta = 2.0;
    rep.capped = true;
    return rep;
  }

  // pooled fit log I = beta log h + c_d over the directions with data; rows
  // with a zero integral carry no slope information
  double sxy = 0.0, sxx = 0.0;
  int npts = 0, ndir = 0;
  std::array<double, 3> xm{}, ym{};
  std::array<int, 3> cnt{};
  for (const auto& r : rep.rows)
    if (r.integral > 0.0)
    {
      xm[r.direction] += std::log(r.h);
      ym[r.direction] += std::log(r.integral);
      ++cnt[r.direction];
    }
  for (int d = 0; d < 3; ++d)
    if (cnt[d] >= 2)
    {
      xm[d] /= cnt[d];
      ym[d] /= cnt[d];
      ++ndir;
      npts += cnt[d];
    }
  for (const auto& r : rep.rows)
    if (r.integral > 0.0 && cnt[r.direction] >= 2)
    {
      const double dx = std::log(r.h) - xm[r.direction];
      sxx += dx * dx;
      sxy += dx * (std::log(r.integral) - ym[r.direction]);
    }
  if (ndir == 0 || sxx <= 0.0)
  {
    // no usable differences at any shift: constant on Omega_eta
    rep.beta = 2.0;
    rep.s_est = rep.s_lo = rep.s_hi = cap;
    rep.capped = true;
    return rep;
  }
  rep.beta = sxy / sxx;
  double sse = 0.0;
  for (const auto& r : rep.rows)
    if (r.integral > 0.0 && cnt[r.direction] >= 2)
    {
      const double e = std::log(r.integral) - ym[r.direction] - rep.beta * (std::log(r.h) - xm[r.direction]);
      sse += e * e;
    }
  const int df = npts - 1 - ndir;
  double half = 0.0;
  if (df > 0)
  {
    const boost::math::students_t dist(df);
    const double t = boost::math::quantile(dist, 0.975);
    half = 0.5 * t * std::sqrt(sse / df / sxx);
  }
  const double s = f.m + 0.5 * rep.beta;
  rep.capped = s >= cap - 1e-9;
  rep.s_est = std::min(s, cap);
  rep.s_lo = std::min(s - half, cap);
  rep.s_hi = std::min(s + half, cap);
  return rep;
}

// -- regularity experiment -------------------------------------------------------

bool RegularityReport::all_pass() const
{
  return !verdicts.empty() &&
         std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

RegularityReport regularity_experiment(std::shared_ptr<const Mesh> mesh, const MaterialModel& model,
                                       const solve::LoadSpec& loads, const RegularityOptions& opts)
{
  if (!(opts.tol_s >= 0.0))
    throw ConfigError("analysis.tol_s", "tol_s must be nonnegative");
  if (opts.k_max < opts.k_min || opts.k_min < 1)
    throw ConfigError("analysis.k", "need 1 <= k_min <= k_max");

  RegularityReport rep;
  auto sol = std::make_shared<const solve::Solution>(solve::solve_model(mesh, model, loads, opts.solve_tol));
  rep.solution = sol;
  rep.solve = sol->report;
  const DomainSpec& domain = mesh->domain();

  // round-off level relative to the solution size marks a field as zero
  ProbeOptions po = opts.probe;
  const double scale = std::max(sol->report.norm_u_h1, sol->report.norm_p_hcurl);
  po.zero_threshold = std::max(po.zero_threshold, 1e-10 * scale);
  rep.u = regularity_index(domain, sample_Du(sol->u), po);
  rep.u.field = "u";
  rep.p = regularity_index(domain, sample_P(sol->p), po);
  rep.curl_p = regularity_index(domain, sample_CurlP(sol->p), po);

  auto index_verdict = [&](const std::string& name, const ProbeReport& pr, double target) {
    const double need = target - opts.tol_s;
    char buf[160];
    std::snprintf(buf, sizeof buf, "s_est = %s, need >= %.3f", pr.describe().c_str(), need);
    rep.verdicts.push_back({name, pr.s_est >= need, buf});
  };
  index_verdict("s_est(u)", rep.u, 1.5);
  index_verdict("s_est(P)", rep.p, 0.5);
  index_verdict("s_est(Curl P)", rep.curl_p, 0.5);
  if (!opts.sweep)
    return rep;

  const transform::InnerVariation iv0 = transform::default_variation(domain);
  const double hbar = iv0.h0() * (1.0 - 1e-9);
  double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
  for (int k = opts.k_min; k <= opts.k_max; ++k)
  {
    const double h = hbar * std::ldexp(1.0, -k);
    const auto iv = transform::with_shift(iv0, h * iv0.cone.axis);
    const auto q = transform::diff_quotient(iv, sol->u, sol->p, opts.lines);
    rep.quotients.push_back({k, h, q});
    qmin = std::min(qmin, q.quotient);
    qmax = std::max(qmax, q.quotient);
  }
  const bool zero_quotients = qmax == 0.0;
  rep.quotient_ratio = zero_quotients ? 1.0 : (qmin > 0.0 ? qmax / qmin : std::numeric_limits<double>::infinity());

  char buf[160];
  std::snprintf(buf, sizeof buf, "max/min = %.4g over k = %d..%d, need <= %.3g%s", rep.quotient_ratio, opts.k_min,
                opts.k_max, opts.max_ratio, zero_quotients ? " (all zero)" : "");
  rep.verdicts.push_back({"diff_quotient sweep", rep.quotient_ratio <= opts.max_ratio, buf});
  return rep;
}

} // namespace micromorph::analysis
