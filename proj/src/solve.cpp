#include "micromorph/solve.hpp"
#include "micromorph/polynomial.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/CholmodSupport>

#include <cmath>

namespace micromorph::solve
{

using fespace::H1VectorSpace;
using fespace::HCurlTensorSpace;
using fespace::SparseMatrix;

LoadSpec zero_loads() { return {}; }

LoadSpec body_force(const Vec3& f)
{
  LoadSpec l;
  l.name = "body_force";
  l.f = [f](const Vec3&) { return f; };
  return l;
}

LoadSpec manufactured(const geometry::DomainSpec& domain)
{
  if (domain.shape == geometry::Shape::l_prism)
    throw ConfigError("loads.preset", "the manufactured preset needs a box-shaped domain");
  const Vec3 ext = domain.bbox_max();
  const Poly3 x = Poly3::var(0), y = Poly3::var(1), z = Poly3::var(2);
  const Poly3 bx = x * (ext[0] - x), by = y * (ext[1] - y), bz = z * (ext[2] - z);
  const Poly3 bubble = bx * by * bz;

  const PolyVec u{bubble, bubble * x, bubble * (y - z)};
  // rows (by bz a, bx bz b, bx by c) have vanishing tangential trace
  const std::array<std::array<Poly3, 3>, 3> abc{{{1.0, x, y}, {z, 1.0, -x}, {y, -z, 1.0 + x}}};
  PolyMat p;
  for (int i = 0; i < 3; ++i)
  {
    p[i][0] = by * bz * abc[i][0];
    p[i][1] = bx * bz * abc[i][1];
    p[i][2] = bx * by * abc[i][2];
  }
  const PolyMat du = gradient(u);
  const PolyMat e = sym(du - p);
  const PolyVec div_e = div(e);
  const PolyMat cp = curl(p);
  const PolyMat m = curl(cp) - e + sym(p);
  const PolyVec dm = div(m);

  LoadSpec l;
  l.name = "manufactured";
  l.f = [div_e](const Vec3& q) -> Vec3 { return -eval(div_e, q); };
  l.m = [m](const Vec3& q) { return eval(m, q); };
  l.div_m = [dm](const Vec3& q) { return eval(dm, q); };
  l.u_exact = [u](const Vec3& q) { return eval(u, q); };
  l.du_exact = [du](const Vec3& q) { return eval(du, q); };
  l.p_exact = [p](const Vec3& q) { return eval(p, q); };
  l.curlp_exact = [cp](const Vec3& q) { return eval(cp, q); };
  return l;
}

LoadSpec scaled(const LoadSpec& loads, double s)
{
  LoadSpec l = loads;
  l.name = loads.name + "*" + std::to_string(s);
  auto sv = [s](const VectorFunction& g) -> VectorFunction {
    if (!g)
      return {};
    return [g, s](const Vec3& x) -> Vec3 { return s * g(x); };
  };
  auto st = [s](const TensorFunction& g) -> TensorFunction {
    if (!g)
      return {};
    return [g, s](const Vec3& x) -> Mat3 { return s * g(x); };
  };
  l.f = sv(loads.f);
  l.m = st(loads.m);
  l.div_m = sv(loads.div_m);
  l.u_exact = sv(loads.u_exact);
  l.du_exact = st(loads.du_exact);
  l.p_exact = st(loads.p_exact);
  l.curlp_exact = st(loads.curlp_exact);
  return l;
}

Vector load_vector(const H1VectorSpace& us, const HCurlTensorSpace& ps, const LoadSpec& loads)
{
  if (!loads.f && !loads.m)
    return Vector::Zero(us.dim() + ps.dim());
  return fespace::load_vector(us, ps, loads.f, loads.m);
}

Vector combined(const FieldU& u, const FieldP& p)
{
  Vector x(u.coeffs.size() + p.coeffs.size());
  x << u.coeffs, p.coeffs;
  return x;
}

namespace
{

double free_norm(const Vector& v, const std::vector<bool>& mask)
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!mask[i])
      s += v[i] * v[i];
  return std::sqrt(s);
}

void finish_report(Solution& s, const energy::EnergyFunctional& e, const LoadSpec& loads)
{
  const Vector x = combined(s.u, s.p);
  const double bn = free_norm(e.load(), e.mask());
  const double gn = free_norm(e.gradient(x), e.mask());
  s.report.residual = bn > 0.0 ? gn / bn : gn;
  s.report.energy = e.value(x);
  s.report.norm_u_h1 = fespace::norms(s.u).full;
  s.report.norm_p_hcurl = fespace::norms(s.p).full;
  try
  {
    s.report.apriori_ratio = apriori_check(s.u, s.p, loads);
  }
  catch (const ZeroLoad&)
  {
    s.report.apriori_ratio.reset();
  }
}

Solution split(const H1VectorSpace& us, const HCurlTensorSpace& ps, const Vector& x)
{
  return {FieldU{us, x.head(us.dim())}, FieldP{ps, x.tail(ps.dim())}, {}};
}

} // namespace

Solution solve_linear(std::shared_ptr<const Mesh> mesh, const LinearCoefficients& c, const LoadSpec& loads,
                      const LinearOptions& opts)
{
  c.validate(mesh->domain().bbox_min(), mesh->domain().bbox_max());
  const H1VectorSpace us(mesh);
  const HCurlTensorSpace ps(mesh);
  const energy::EnergyFunctional e(us, ps, c, load_vector(us, ps, loads));
  const int n = e.dim();

  Vector x = Vector::Zero(n);
  int iterations = 0;
  bool converged = true;
  Vector b = e.load();
  if (free_norm(b, e.mask()) > 0.0)
  {
    fespace::SparseMatrix a = e.quadratic();
    fespace::apply_essential_bc(a, b, e.mask());
    Eigen::ConjugateGradient<fespace::SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(opts.tol);
    cg.setMaxIterations(opts.max_iter > 0 ? opts.max_iter : 10 * n);
    cg.compute(a);
    x = cg.solve(b);
    iterations = static_cast<int>(cg.iterations());
    // the recursive residual can drift from the true one; restart until the
    // true relative residual meets the tolerance
    for (int restart = 0; restart < 5 && cg.info() == Eigen::Success; ++restart)
    {
      if ((b - a * x).norm() <= opts.tol * b.norm())
        break;
      x = cg.solveWithGuess(b, x);
      iterations += static_cast<int>(cg.iterations());
    }
    converged = cg.info() == Eigen::Success && (b - a * x).norm() <= opts.tol * b.norm();
    if (!converged)
      throw NoConvergence("solve_linear: conjugate gradients did not reach the tolerance", iterations);
  }

  Solution s = split(us, ps, x);
  s.report.method = "linear-cg";
  s.report.iterations = iterations;
  s.report.converged = converged;
  finish_report(s, e, loads);
  return s;
}

Solution solve_nonlinear(std::shared_ptr<const Mesh> mesh, const NonlinearParams& params, const LoadSpec& loads,
                         const NonlinearOptions& opts)
{
  params.validate();
  const H1VectorSpace us(mesh);
  const HCurlTensorSpace ps(mesh);
  const energy::EnergyFunctional e(us, ps, params, load_vector(us, ps, loads));
  const int n = e.dim();

  Vector x = opts.initial ? *opts.initial : Vector::Zero(n);
  if (x.size() != n)
    throw Error("solve_nonlinear: initial state has the wrong length");
  e.constrain(x);

  // quadratic part with essential rows and columns removed; its inverse
  // defines the norm in which the gradient is measured
  SparseMatrix kbc = e.quadratic();
  kbc.prune([&](Eigen::Index r, Eigen::Index c, double) { return !e.mask()[r] && !e.mask()[c]; });
  for (int i = 0; i < n; ++i)
    if (e.mask()[i])
      kbc.coeffRef(i, i) = 1.0;
  Eigen::CholmodSupernodalLLT<SparseMatrix> kfac(kbc);
  if (kfac.info() != Eigen::Success)
    throw NumericalError("solve_nonlinear: factorization of the quadratic part failed");
  auto dual_norm = [&](const Vector& g) { return std::sqrt(std::max(0.0, g.dot(kfac.solve(g)))); };

  // variable metric: K plus the power-term Hessian with |Curl P| floored
  SparseMatrix metric = kbc;
  Eigen::CholmodSupernodalLLT<SparseMatrix> mfac;
  bool analyzed = false;
  auto refresh = [&](const Vector& x) {
    if (params.alpha == 0.0)
    {
      mfac.compute(kbc);
      return;
    }
    const double floor = std::max(1e-6 * e.max_curl(x), 1e-12);
    metric = kbc + e.power_hessian(x, floor);
    // the pattern does not change between iterations
    if (!analyzed)
    {
      mfac.analyzePattern(metric);
      analyzed = true;
    }
    mfac.factorize(metric);
    if (mfac.info() != Eigen::Success)
      throw NumericalError("solve_nonlinear: factorization of the metric failed");
  };

  Vector g = e.gradient(x);
  const double g0 = dual_norm(g);
  std::vector<double> history;
  double gnorm = g0;
  int it = 0;
  double step = 1.0;
  double cumulative = 0.0;
  if (g0 > 0.0)
  {
    for (; it < opts.max_iter && gnorm > opts.tol * g0; ++it)
    {
      refresh(x);
      Vector d = -mfac.solve(g);
      e.constrain(d);
      const double slope = g.dot(d);
      double t = std::min(step, 1.0);
      double delta = e.difference(x, t * d);
      while (!(delta <= opts.armijo * t * slope))
      {
        t *= 0.5;
        if (t < 1e-20)
          throw LineSearchStall("solve_nonlinear: Armijo backtracking stalled at iteration " + std::to_string(it));
        delta = e.difference(x, t * d);
      }
      const Vector s = t * d;
      x += s;
      const Vector gn = e.gradient(x);
      const Vector yv = gn - g;
      g = gn;
      cumulative += delta;
      history.push_back(cumulative);
      gnorm = dual_norm(g);
      // Barzilai-Borwein proposal in the current metric
      const double sy = s.dot(yv);
      const double sms = s.dot(metric * s);
      step = sy > 0.0 ? sms / sy : 2.0 * t;
    }
    if (gnorm > opts.tol * g0)
      throw NoConvergence("solve_nonlinear: gradient tolerance not reached", it);
  }

  Solution out = split(us, ps, x);
  out.report.method = "nonlinear-bb-armijo";
  out.report.iterations = it;
  out.report.converged = true;
  out.report.relative_gradient = g0 > 0.0 ? gnorm / g0 : 0.0;
  out.report.energy_history = std::move(history);
  finish_report(out, e, loads);
  return out;
}

Solution solve_model(std::shared_ptr<const Mesh> mesh, const MaterialModel& model, const LoadSpec& loads, double tol)
{
  if (const auto* lin = std::get_if<LinearCoefficients>(&model))
  {
    LinearOptions o;
    if (tol > 0.0)
      o.tol = tol;
    return solve_linear(std::move(mesh), *lin, loads, o);
  }
  NonlinearOptions o;
  if (tol > 0.0)
    o.tol = tol;
  return solve_nonlinear(std::move(mesh), std::get<NonlinearParams>(model), loads, o);
}

double el_residual(const FieldU& u, const FieldP& p, const MaterialModel& model, const LoadSpec& loads)
{
  const energy::EnergyFunctional e(u.space, p.space, model, load_vector(u.space, p.space, loads));
  return free_norm(e.gradient(combined(u, p)), e.mask());
}

double apriori_check(const FieldU& u, const FieldP& p, const LoadSpec& loads)
{
  const auto& mesh = u.space.mesh();
  auto l2 = [&](auto&& sq) { return std::sqrt(fespace::integrate(mesh, [&](int, const Vec3& x) { return sq(x); }, 6)); };
  const double nf = loads.f ? l2([&](const Vec3& x) { return loads.f(x).squaredNorm(); }) : 0.0;
  const double nm = loads.m ? l2([&](const Vec3& x) { return loads.m(x).squaredNorm(); }) : 0.0;
  const double nd = loads.div_m ? l2([&](const Vec3& x) { return loads.div_m(x).squaredNorm(); }) : 0.0;
  const double denom = nf + nm + nd;
  if (denom == 0.0)
    throw ZeroLoad("apriori_check: loads are zero, ratio undefined");
  return (fespace::norms(u).full + fespace::norms(p).full) / denom;
}

} // namespace micromorph::solve
