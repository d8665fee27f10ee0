#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "micromorph/energy.hpp"

#include <cmath>
#include <random>

using namespace micromorph;
using namespace micromorph::energy;

namespace
{

Mat3 random_matrix(std::mt19937_64& rng, double scale = 1.0)
{
  std::normal_distribution<double> g;
  Mat3 a;
  for (int i = 0; i < 9; ++i)
    a(i / 3, i % 3) = scale * g(rng);
  return a;
}

StateTriple random_state(std::mt19937_64& rng) { return {random_matrix(rng), random_matrix(rng), random_matrix(rng)}; }

/// Central differences of a scalar density in each of the 27 entries.
template <class W>
Gradient fd_gradient(const W& wfun, const StateTriple& s, double step)
{
  Gradient g;
  for (int part = 0; part < 3; ++part)
    for (int i = 0; i < 9; ++i)
    {
      StateTriple p = s, m = s;
      Mat3* tp = part == 0 ? &p.F : part == 1 ? &p.P : &p.C;
      Mat3* tm = part == 0 ? &m.F : part == 1 ? &m.P : &m.C;
      (*tp)(i / 3, i % 3) += step;
      (*tm)(i / 3, i % 3) -= step;
      const double d = (wfun(p) - wfun(m)) / (2.0 * step);
      Mat3& out = part == 0 ? g.dF : part == 1 ? g.dP : g.dC;
      out(i / 3, i % 3) = d;
    }
  return g;
}

double rel_diff(const Gradient& a, const Gradient& b)
{
  const double n = std::sqrt((a.dF - b.dF).squaredNorm() + (a.dP - b.dP).squaredNorm() + (a.dC - b.dC).squaredNorm());
  return n / std::max(1e-300, b.norm());
}

LinearCoefficients affine_coefficients()
{
  LinearCoefficients c;
  c.ce = TensorField::isotropic(1.0, 0.5);
  c.ce.slope[0] = 0.2 * symmetrizer();
  c.cmicro = TensorField::affine_scalar(Mat9::Identity(), 1.5, Vec3(0.0, -0.3, 0.1));
  c.lc = TensorField::scaled(0.7);
  c.lc.slope[2] = 0.1 * Mat9::Identity();
  return c;
}

} // namespace

TEST_CASE("linear density values")
{
  const auto id = LinearCoefficients::identity();
  const Vec3 x(0.3, 0.4, 0.5);
  CHECK(w_linear(x, StateTriple{}, id) == 0.0);
  CHECK(w_linear(x, {Mat3::Identity(), Mat3::Zero(), Mat3::Zero()}, id) == doctest::Approx(1.5));
  Mat3 skew;
  skew << 0, 1, -2, -1, 0, 3, 2, -3, 0;
  CHECK(std::abs(w_linear(x, {skew, skew, Mat3::Zero()}, id)) < 1e-15);
  // sym of skew vanishes, so P = skew alone costs nothing either
  CHECK(std::abs(w_linear(x, {Mat3::Zero(), skew, Mat3::Zero()}, id)) < 1e-15);
}

TEST_CASE("linear density gradient")
{
  const auto id = LinearCoefficients::identity();
  const Vec3 x(0.3, 0.4, 0.5);
  const Gradient z = dw_linear(x, StateTriple{}, id);
  CHECK(z.norm() == 0.0);
  const Gradient g = dw_linear(x, {Mat3::Identity(), Mat3::Zero(), Mat3::Zero()}, id);
  CHECK((g.dF - Mat3::Identity()).norm() < 1e-15);
  CHECK((g.dP + Mat3::Identity()).norm() < 1e-15);
  CHECK(g.dC.norm() == 0.0);

  std::mt19937_64 rng(1);
  const auto c = affine_coefficients();
  for (int k = 0; k < 200; ++k)
  {
    const StateTriple s = random_state(rng);
    const Gradient fd = fd_gradient([&](const StateTriple& t) { return w_linear(x, t, c); }, s, 1e-5);
    CHECK(rel_diff(dw_linear(x, s, c), fd) <= 1e-7);
  }
}

TEST_CASE("nonlinear density values and growth")
{
  const auto p = NonlinearParams::make(1.5);
  CHECK(p.alpha == doctest::Approx(2.0 / 3.0));
  CHECK(w_nonlinear(StateTriple{}, p) == 0.0);
  Mat3 c = Mat3::Zero();
  c(0, 1) = 1.0;
  CHECK(w_nonlinear({Mat3::Zero(), Mat3::Zero(), c}, p) == doctest::Approx(7.0 / 6.0));

  // Young: a^q / q <= a^2 / 2 + (2 - q) / (2 q)
  const double cst = (2.0 - p.q) / (2.0 * p.q);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 10000; ++k)
  {
    const double s = std::exp(6.0 * unit(rng) - 3.0);
    const StateTriple q{random_matrix(rng, s), random_matrix(rng, s), random_matrix(rng, s)};
    const double bound = q.F.squaredNorm() + 1.5 * q.P.squaredNorm() + cst + (p.q / 2 + 0.5) * q.C.squaredNorm();
    const double v = w_nonlinear(q, p);
    CHECK(v >= 0.0);
    CHECK(v <= bound * (1 + 1e-14));
  }
}

TEST_CASE("nonlinear density gradient")
{
  auto p = NonlinearParams::make(1.5, 1.0);
  Mat3 c = Mat3::Zero();
  c(2, 0) = 4.0;
  const Gradient g = dw_nonlinear({Mat3::Zero(), Mat3::Zero(), c}, p);
  CHECK((g.dC - 1.75 * c).norm() < 1e-14);
  CHECK(dw_nonlinear(StateTriple{}, p).norm() == 0.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto p2 = NonlinearParams::make(1.5);
  int tested = 0;
  while (tested < 500)
  {
    StateTriple s = random_state(rng);
    s.C *= std::exp(3.0 * unit(rng) - 2.0);
    if (s.C.norm() < 0.1)
      continue;
    const Gradient fd = fd_gradient([&](const StateTriple& t) { return w_nonlinear(t, p2); }, s, 1e-5);
    CHECK(rel_diff(dw_nonlinear(s, p2), fd) <= 1e-6);
    ++tested;
  }

  // growth of the gradient: |DW| <= |sym(F-P)| + |sym P| + q alpha |C|^(q-1) + |C| up to the 2-norm
  for (int k = 0; k < 1000; ++k)
  {
    const StateTriple s = random_state(rng);
    const Gradient d = dw_nonlinear(s, p2);
    const double c = s.C.norm();
    const double bound = 2 * sym(s.F - s.P).norm() + sym(s.P).norm() + p2.q * p2.alpha * std::pow(c, p2.q - 1) + c;
    CHECK(d.norm() <= bound * (1 + 1e-14));
  }
}

TEST_CASE("parameter validation")
{
  CHECK_THROWS_AS(NonlinearParams::make(2.5), ConfigError);
  CHECK_THROWS_AS(NonlinearParams::make(1.0), ConfigError);
  try
  {
    NonlinearParams::make(2.5);
  }
  catch (const ConfigError& e)
  {
    CHECK(e.key() == "q");
  }
  CHECK_THROWS_AS(NonlinearParams::make(1.5, -1.0), ConfigError);

  LinearCoefficients bad;
  bad.ce = TensorField::affine_scalar(Mat9::Identity(), 1.0, Vec3(-2.0, 0.0, 0.0));
  CHECK_THROWS_AS(bad.validate(Vec3::Zero(), Vec3::Ones()), NonPositiveCoefficient);
  LinearCoefficients skew_only;
  skew_only.lc = TensorField::scaled(1.0);
  skew_only.lc.base(1, 1) = 0.0;
  CHECK_THROWS_AS(skew_only.validate(Vec3::Zero(), Vec3::Ones()), NonPositiveCoefficient);
  CHECK_NOTHROW(affine_coefficients().validate(Vec3::Zero(), Vec3::Ones()));
  // isotropic acts on Sym(3) only, which is all that is required of C_e
  LinearCoefficients iso;
  iso.ce = TensorField::isotropic(1.0, 0.3);
  CHECK_NOTHROW(iso.validate(Vec3::Zero(), Vec3::Ones()));
}

TEST_CASE("W1 Lipschitz sampling")
{
  CHECK(check_w1_lipschitz(LinearCoefficients::identity(), 1000, 5) == 0.0);
  CHECK(check_w1_lipschitz(NonlinearParams::make(1.5), 1000, 5) == 0.0);
  LinearCoefficients c;
  c.ce = TensorField::affine_scalar(Mat9::Identity(), 1.0, Vec3(0.5, 0.0, 0.0));
  const double observed = check_w1_lipschitz(c, 10000, 6);
  CHECK(observed > 0.0);
  CHECK(observed <= 0.5);
  CHECK(c.w1_lipschitz() == doctest::Approx(0.5));
  const auto a = affine_coefficients();
  CHECK(check_w1_lipschitz(a, 10000, 7) <= a.w1_lipschitz());
}

TEST_CASE("discrete functional agrees with quadrature of the density")
{
  auto mesh = std::make_shared<const geometry::Mesh>(geometry::build_mesh(geometry::DomainSpec::unit_cube(), 2));
  const H1VectorSpace us(mesh);
  const HCurlTensorSpace ps(mesh);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  Vector x(us.dim() + ps.dim());
  for (auto& v : x)
    v = g(rng);

  for (const MaterialModel& m : {MaterialModel(affine_coefficients()), MaterialModel(NonlinearParams::make(1.5))})
  {
    const EnergyFunctional e(us, ps, m);
    Vector xc = x;
    e.constrain(xc);
    const fespace::FieldU u{us, xc.head(us.dim())};
    const fespace::FieldP p{ps, xc.tail(ps.dim())};
    const double direct = energy_by_quadrature(u, p, m);
    CHECK(std::abs(e.value(xc) - direct) < 1e-11 * direct);

    // gradient against central differences of the value
    const Vector grad = e.gradient(xc);
    for (int k = 0; k < 20; ++k)
    {
      const int i = static_cast<int>(rng() % xc.size());
      Vector dx = Vector::Zero(xc.size());
      dx[i] = 1e-5;
      const double fd = (e.value(xc + dx) - e.value(xc - dx)) / 2e-5;
      if (e.mask()[i])
        CHECK(grad[i] == 0.0);
      else
        CHECK(std::abs(fd - grad[i]) < 1e-6 * (1.0 + std::abs(grad[i])));
    }
    // accurate differences
    Vector s(xc.size());
    for (auto& v : s)
      v = 1e-3 * g(rng);
    e.constrain(s);
    CHECK(std::abs(e.difference(xc, s) - (e.value(xc + s) - e.value(xc))) < 1e-9 * std::abs(e.value(xc)));
  }
}

TEST_CASE("convexity gap")
{
  auto mesh = std::make_shared<const geometry::Mesh>(geometry::build_mesh(geometry::DomainSpec::unit_cube(), 2));
  const H1VectorSpace us(mesh);
  const HCurlTensorSpace ps(mesh);
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  auto random_vec = [&](const EnergyFunctional& e) {
    Vector v(e.dim());
    for (auto& c : v)
      c = g(rng);
    e.constrain(v);
    return v;
  };

  const EnergyFunctional lin(us, ps, LinearCoefficients::identity());
  std::vector<std::pair<Vector, Vector>> pairs;
  for (int k = 0; k < 20; ++k)
    pairs.emplace_back(random_vec(lin), random_vec(lin));
  // a pair with zero distance is skipped
  pairs.emplace_back(pairs[0].first, pairs[0].first);
  const auto r = check_convexity_gap(lin, us, ps, pairs);
  CHECK(r.pairs == 20);
  CHECK(r.min_ratio > 0.0);

  // small perturbations: the ratio approaches the Rayleigh quotient of K
  const Vector base = random_vec(lin);
  const Vector dir = random_vec(lin);
  const fespace::FieldU du{us, dir.head(us.dim())};
  const fespace::FieldP dp{ps, dir.tail(ps.dim())};
  const double rq = 0.5 * dir.dot(lin.quadratic() * dir) /
                    (std::pow(fespace::norms(du).full, 2) + std::pow(fespace::norms(dp).full, 2));
  const auto small = check_convexity_gap(lin, us, ps, {{base, base + 1e-4 * dir}});
  CHECK(small.min_ratio == doctest::Approx(rq).epsilon(1e-6));

  // the power term alone has a nonnegative gap
  const EnergyFunctional nl(us, ps, NonlinearParams::make(1.5));
  const EnergyFunctional quad_only(us, ps, NonlinearParams::make(1.5, 0.0));
  for (int k = 0; k < 20; ++k)
  {
    const Vector a = random_vec(nl);
    const Vector b = 0.1 * random_vec(nl);
    const Vector s = b - a;
    const double full = nl.difference(a, s) - nl.gradient(a).dot(s);
    const double quad = quad_only.difference(a, s) - quad_only.gradient(a).dot(s);
    CHECK(full - quad >= -1e-12 * std::abs(quad));
  }
  const auto rn = check_convexity_gap(nl, us, ps, pairs);
  CHECK(rn.min_ratio > 0.0);
}
