#include "micromorph/energy.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace micromorph::energy
{

namespace
{

/// Orthonormal basis of Sym(3) in flattened coordinates.
Eigen::Matrix<double, 9, 6> sym_basis()
{
  Eigen::Matrix<double, 9, 6> b = Eigen::Matrix<double, 9, 6>::Zero();
  int c = 0;
  for (int i = 0; i < 3; ++i)
    b(4 * i, c++) = 1.0;
  const double s = 1.0 / std::sqrt(2.0);
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
    {
      b(3 * i + j, c) = s;
      b(3 * j + i, c) = s;
      ++c;
    }
  return b;
}

template <int N>
void check_spd(const Eigen::Matrix<double, N, N>& m, const std::string& name, const Vec3& x)
{
  std::ostringstream where;
  where << name << " at (" << x[0] << ", " << x[1] << ", " << x[2] << ")";
  if ((m - m.transpose()).norm() > 1e-12 * std::max(1.0, m.norm()))
    throw NonPositiveCoefficient(where.str() + " is not symmetric");
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, N, N>>(m).eigenvalues().minCoeff();
  if (!(lmin > 0.0))
    throw NonPositiveCoefficient(where.str() + " is not positive definite (smallest eigenvalue " +
                                 std::to_string(lmin) + ")");
}

double quad(const Mat9& c, const Mat3& a) { return flatten(a).dot(c * flatten(a)); }
Mat3 apply(const Mat9& c, const Mat3& a) { return unflatten(c * flatten(a)); }

} // namespace

void LinearCoefficients::validate(const Vec3& lo, const Vec3& hi) const
{
  const auto b = sym_basis();
  for (int corner = 0; corner < 8; ++corner)
  {
    Vec3 x;
    for (int i = 0; i < 3; ++i)
      x[i] = (corner >> i) & 1 ? hi[i] : lo[i];
    const Eigen::Matrix<double, 6, 6> e = b.transpose() * ce.at(x) * b;
    const Eigen::Matrix<double, 6, 6> m = b.transpose() * cmicro.at(x) * b;
    check_spd<6>(e, "C_e", x);
    check_spd<6>(m, "C_micro", x);
    check_spd<9>(lc.at(x), "L_c", x);
  }
}

double LinearCoefficients::w1_lipschitz() const
{
  return std::max(ce.lipschitz() + 0.5 * cmicro.lipschitz(), 0.5 * lc.lipschitz());
}

NonlinearParams NonlinearParams::make(double q) { return make(q, 1.0 / q); }

NonlinearParams NonlinearParams::make(double q, double alpha)
{
  NonlinearParams p{q, alpha};
  p.validate();
  return p;
}

void NonlinearParams::validate() const
{
  if (!(q > 1.0 && q < 2.0))
    throw ConfigError("q", "exponent must satisfy 1 < q < 2, got " + std::to_string(q));
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw ConfigError("alpha", "weight must be finite and >= 0, got " + std::to_string(alpha));
}

// ---------------------------------------------------------------------------
// densities

double w_linear(const Vec3& x, const StateTriple& s, const LinearCoefficients& c)
{
  const Mat3 e = sym(s.F - s.P);
  const Mat3 p = sym(s.P);
  return 0.5 * (quad(c.ce.at(x), e) + quad(c.cmicro.at(x), p) + quad(c.lc.at(x), s.C));
}

Gradient dw_linear(const Vec3& x, const StateTriple& s, const LinearCoefficients& c)
{
  // derivative of 1/2 <C A, A> is the symmetric part of C applied to A
  auto symmetric = [](const Mat9& m) -> Mat9 { return 0.5 * (m + m.transpose()); };
  const Mat3 stress = sym(apply(symmetric(c.ce.at(x)), sym(s.F - s.P)));
  const Mat3 micro = sym(apply(symmetric(c.cmicro.at(x)), sym(s.P)));
  return {stress, micro - stress, apply(symmetric(c.lc.at(x)), s.C)};
}

double w_nonlinear(const StateTriple& s, const NonlinearParams& p)
{
  const double c = s.C.norm();
  return 0.5 * sym(s.F - s.P).squaredNorm() + 0.5 * sym(s.P).squaredNorm() + p.alpha * std::pow(c, p.q) +
         0.5 * c * c;
}

Gradient dw_nonlinear(const StateTriple& s, const NonlinearParams& p)
{
  const Mat3 e = sym(s.F - s.P);
  const double c = s.C.norm();
  const double factor = c > 0.0 ? p.q * p.alpha * std::pow(c, p.q - 2.0) : 0.0;
  return {e, sym(s.P) - e, (factor + 1.0) * s.C};
}

double w(const Vec3& x, const StateTriple& s, const MaterialModel& m)
{
  if (const auto* lin = std::get_if<LinearCoefficients>(&m))
    return w_linear(x, s, *lin);
  return w_nonlinear(s, std::get<NonlinearParams>(m));
}

Gradient dw(const Vec3& x, const StateTriple& s, const MaterialModel& m)
{
  if (const auto* lin = std::get_if<LinearCoefficients>(&m))
    return dw_linear(x, s, *lin);
  return dw_nonlinear(s, std::get<NonlinearParams>(m));
}

double w1_lipschitz(const MaterialModel& m)
{
  if (const auto* lin = std::get_if<LinearCoefficients>(&m))
    return lin->w1_lipschitz();
  return 0.0;
}

double check_w1_lipschitz(const MaterialModel& m, int samples, std::uint64_t seed, const Vec3& lo, const Vec3& hi)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss;
  auto point = [&] {
    Vec3 x;
    for (int i = 0; i < 3; ++i)
      x[i] = lo[i] + (hi[i] - lo[i]) * unit(rng);
    return x;
  };
  auto matrix = [&] {
    Mat3 a;
    for (int i = 0; i < 9; ++i)
      a(i / 3, i % 3) = gauss(rng);
    return a;
  };
  double worst = 0.0;
  for (int k = 0; k < samples; ++k)
  {
    const Vec3 x = point();
    const Vec3 y = point();
    const double d = (x - y).norm();
    if (d == 0.0)
      continue;
    const double scale = std::exp(2.0 * unit(rng) - 1.0);
    const StateTriple s{scale * matrix(), scale * matrix(), scale * matrix()};
    const double ratio = std::abs(w(x, s, m) - w(y, s, m)) / (d * (1.0 + s.squared_norm()));
    worst = std::max(worst, ratio);
  }
  return worst;
}

LinearCoefficients quadratic_part(const MaterialModel& m)
{
  if (const auto* lin = std::get_if<LinearCoefficients>(&m))
    return *lin;
  return LinearCoefficients::identity();
}

SparseMatrix assemble_linear(const LinearCoefficients& c, const H1VectorSpace& us, const HCurlTensorSpace& ps)
{
  using fespace::FormKind;
  const TensorField sum = c.ce + c.cmicro;
  SparseMatrix k = fespace::assemble(FormKind::symgrad_symgrad, &c.ce, us, ps);
  k -= fespace::assemble(FormKind::coupling_symgradU_symP, &c.ce, us, ps);
  k += fespace::assemble(FormKind::symP_symP, &sum, us, ps);
  k += fespace::assemble(FormKind::curlcurl, &c.lc, us, ps);
  return k;
}

// ---------------------------------------------------------------------------
// discrete functional

EnergyFunctional::EnergyFunctional(const H1VectorSpace& us, const HCurlTensorSpace& ps, const MaterialModel& model,
                                   Vector load)
    : us_(us), ps_(ps), model_(model), k_(assemble_linear(quadratic_part(model), us, ps)), b_(std::move(load)),
      mask_(fespace::combined_mask(us, ps))
{
  if (b_.size() == 0)
    b_ = Vector::Zero(k_.rows());
  if (b_.size() != k_.rows())
    throw Error("EnergyFunctional: load vector has the wrong length");
  if (const auto* p = std::get_if<NonlinearParams>(&model_))
  {
    p->validate();
    alpha_ = p->alpha;
    q_ = p->q;
  }
  const auto& mesh = us.mesh();
  if (alpha_ > 0.0)
  {
    cell_dofs_.resize(mesh.num_tets());
    cell_curls_.resize(mesh.num_tets());
    for (int t = 0; t < mesh.num_tets(); ++t)
    {
      const auto& te = mesh.tet_edges(t);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 6; ++k)
          cell_dofs_[t][6 * i + k] = us.dim() + ps.dof(i, te[k]);
      for (int k = 0; k < 6; ++k)
        cell_curls_[t][k] = fespace::edge_basis_curl(mesh, t, k);
    }
  }
}

void EnergyFunctional::constrain(Vector& x) const
{
  for (std::size_t i = 0; i < mask_.size(); ++i)
    if (mask_[i])
      x[static_cast<Eigen::Index>(i)] = 0.0;
}

Mat3 EnergyFunctional::cell_curl(const Vector& x, int t) const
{
  Mat3 c = Mat3::Zero();
  double scale = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k)
    {
      const double xk = x[cell_dofs_[t][6 * i + k]];
      c.row(i) += xk * cell_curls_[t][k].transpose();
      scale += std::abs(xk) * cell_curls_[t][k].norm();
    }
  // a curl below its own rounding error is taken as exactly zero, otherwise
  // the |C|^(q-1) gradient of a curl-free state never drops below ~sqrt(eps)
  if (c.norm() <= 16.0 * std::numeric_limits<double>::epsilon() * scale)
    c.setZero();
  return c;
}

double EnergyFunctional::power_term(const Vector& x) const
{
  if (alpha_ == 0.0)
    return 0.0;
  double s = 0.0;
  const auto& mesh = us_.mesh();
  for (int t = 0; t < mesh.num_tets(); ++t)
    s += mesh.volume(t) * std::pow(cell_curl(x, t).norm(), q_);
  return alpha_ * s;
}

double EnergyFunctional::value(const Vector& x) const
{
  return 0.5 * x.dot(k_ * x) - b_.dot(x) + power_term(x);
}

Vector EnergyFunctional::gradient(const Vector& x) const
{
  Vector g = k_ * x - b_;
  if (alpha_ > 0.0)
  {
    const auto& mesh = us_.mesh();
    for (int t = 0; t < mesh.num_tets(); ++t)
    {
      const Mat3 c = cell_curl(x, t);
      const double n = c.norm();
      if (n == 0.0)
        continue;
      const double factor = mesh.volume(t) * alpha_ * q_ * std::pow(n, q_ - 2.0);
      for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 6; ++k)
          g[cell_dofs_[t][6 * i + k]] += factor * c.row(i).dot(cell_curls_[t][k]);
    }
  }
  constrain(g);
  return g;
}

double EnergyFunctional::max_curl(const Vector& x) const
{
  double m = 0.0;
  if (alpha_ > 0.0)
    for (int t = 0; t < us_.mesh().num_tets(); ++t)
      m = std::max(m, cell_curl(x, t).norm());
  return m;
}

SparseMatrix EnergyFunctional::power_hessian(const Vector& x, double floor) const
{
  SparseMatrix h(dim(), dim());
  if (alpha_ == 0.0)
    return h;
  const auto& mesh = us_.mesh();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_tets()) * 18 * 18);
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const Mat3 c = cell_curl(x, t);
    const double n = std::max(c.norm(), floor);
    // d^2/dC^2 |C|^q = q |C|^(q-2) (I + (q-2) c c^T / |C|^2)
    Eigen::Matrix<double, 9, 18> b = Eigen::Matrix<double, 9, 18>::Zero();
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 6; ++k)
        for (int j = 0; j < 3; ++j)
          b(3 * i + j, 6 * i + k) = cell_curls_[t][k][j];
    Vec9 cv;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        cv[3 * i + j] = c(i, j);
    Mat9 d = Mat9::Identity();
    if (n > 0.0)
      d += (q_ - 2.0) * cv * cv.transpose() / (n * n);
    d *= mesh.volume(t) * alpha_ * q_ * std::pow(n, q_ - 2.0);
    const Eigen::Matrix<double, 18, 18> local = b.transpose() * d * b;
    for (int a = 0; a < 18; ++a)
      for (int e = 0; e < 18; ++e)
        if (!mask_[cell_dofs_[t][a]] && !mask_[cell_dofs_[t][e]])
          trip.emplace_back(cell_dofs_[t][a], cell_dofs_[t][e], local(a, e));
  }
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

double EnergyFunctional::difference(const Vector& x, const Vector& s) const
{
  const Vector ks = k_ * s;
  double d = s.dot(k_ * x - b_) + 0.5 * s.dot(ks);
  if (alpha_ > 0.0)
  {
    const auto& mesh = us_.mesh();
    double p = 0.0;
    for (int t = 0; t < mesh.num_tets(); ++t)
    {
      const Mat3 c = cell_curl(x, t);
      const Mat3 dc = cell_curl(s, t);
      const double b = c.norm();
      const double a2_minus_b2 = 2.0 * (c.array() * dc.array()).sum() + dc.squaredNorm();
      double term;
      if (b == 0.0)
        term = std::pow(dc.norm(), q_);
      else
      {
        const double a = (c + dc).norm();
        const double rel = a2_minus_b2 / ((a + b) * b);
        term = std::pow(b, q_) * std::expm1(q_ * std::log1p(rel));
      }
      p += mesh.volume(t) * term;
    }
    d += alpha_ * p;
  }
  return d;
}

double energy_by_quadrature(const fespace::FieldU& u, const fespace::FieldP& p, const MaterialModel& m,
                            int quad_order)
{
  const auto& mesh = u.space.mesh();
  const auto& rule = fespace::tet_rule(quad_order);
  double total = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const Mat3 du = fespace::du_in_cell(u, t);
    const Mat3 c = fespace::curlp_in_cell(p, t);
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      const auto& bary = rule.points[q];
      const StateTriple s{du, fespace::p_in_cell(p, t, bary), c};
      cell += rule.weights[q] * w(mesh.point(t, bary), s, m);
    }
    total += 6.0 * mesh.volume(t) * cell;
  }
  return total;
}

ConvexityReport check_convexity_gap(const EnergyFunctional& e, const H1VectorSpace& us, const HCurlTensorSpace& ps,
                                    const std::vector<std::pair<Vector, Vector>>& pairs)
{
  double worst = std::numeric_limits<double>::infinity();
  int used = 0;
  for (const auto& [a, b] : pairs)
  {
    const Vector s = b - a;
    const fespace::FieldU du{us, s.head(us.dim())};
    const fespace::FieldP dp{ps, s.tail(ps.dim())};
    const double denom = std::pow(fespace::norms(du).full, 2) + std::pow(fespace::norms(dp).full, 2);
    if (denom == 0.0)
      continue;
    const Vector g = e.gradient(a);
    const double gap = e.difference(a, s) - g.dot(s);
    const double ratio = gap / denom;
    if (!(ratio > 0.0))
      throw NonPositiveGap("convexity gap " + std::to_string(gap) + " is not positive");
    worst = std::min(worst, ratio);
    ++used;
  }
  return {worst, used};
}

} // namespace micromorph::energy
