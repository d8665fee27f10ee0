#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "micromorph/polynomial.hpp"
#include "micromorph/transform.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace micromorph;
using namespace micromorph::transform;
using geometry::DomainSpec;
using geometry::Mesh;

namespace
{

std::shared_ptr<const Mesh> mesh_of(const DomainSpec& d, int n)
{
  return std::make_shared<const Mesh>(geometry::build_mesh(d, n));
}

FieldP random_p(std::shared_ptr<const Mesh> mesh, std::uint64_t seed)
{
  FieldP p = fespace::zero_field(fespace::HCurlTensorSpace(std::move(mesh)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (auto& c : p.coeffs)
    c = g(rng);
  fespace::constrain(p);
  return p;
}

// polynomial M with analytic row-wise divergence
struct PolyLoad
{
  PolyMat m;
  PolyVec div_m;
  TensorFunction f() const
  {
    return [m = m](const Vec3& x) { return eval(m, x); };
  }
  VectorFunction d() const
  {
    return [d = div_m](const Vec3& x) { return eval(d, x); };
  }
};

PolyLoad poly_load()
{
  const Poly3 x = Poly3::var(0), y = Poly3::var(1), z = Poly3::var(2);
  PolyLoad l;
  l.m = {{{1.0 + x * y, z * z - x, 0.5 * y},
          {x * x * z, 2.0 - y, x + y + z},
          {y * z, -x * z, 1.0 + x * x + y * y}}};
  l.div_m = div(l.m);
  return l;
}

// shift of length `len` along the cone axis
InnerVariation shifted(const DomainSpec& d, double len)
{
  const auto base = default_variation(d);
  return with_shift(base, len * base.cone.axis);
}

// variation centred at an interior point; the cone is only a carrier for
// the admissible shift directions here
InnerVariation interior_variation(const Vec3& c, double r, const Vec3& h)
{
  geometry::ConeSpec cone{h.normalized(), 0.5, 0.1, c, r};
  return InnerVariation::make(CutoffSpec::make(c, r), cone, h);
}

} // namespace

TEST_CASE("cutoff profile")
{
  const CutoffSpec c = CutoffSpec::make(Vec3(0.3, 0.2, 0.1), 0.4);
  CHECK(c.phi(c.center) == 1.0);
  CHECK(c.phi(c.center + Vec3(0.19, 0.0, 0.0)) == 1.0);
  CHECK(c.phi(c.center + Vec3(0.0, 0.4, 0.0)) == 0.0);
  CHECK(c.phi(c.center + Vec3(0.3, 0.3, 0.0)) == 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  double gmax = 0.0;
  for (int k = 0; k < 2000; ++k)
  {
    const Vec3 x = c.center + Vec3(u(rng), u(rng), u(rng));
    const double p = c.phi(x);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    const Vec3 g = c.grad(x);
    gmax = std::max(gmax, g.norm());
    CHECK(g.norm() <= c.grad_bound() * (1.0 + 1e-12));
    const double e = 1e-6;
    for (int j = 0; j < 3; ++j)
    {
      Vec3 d = Vec3::Zero();
      d[j] = e;
      CHECK(std::abs((c.phi(x + d) - c.phi(x - d)) / (2 * e) - g[j]) <= 1e-7);
    }
  }
  // the bound is attained at 3r/4
  CHECK(c.grad(c.center + Vec3(0.3, 0.0, 0.0)).norm() == doctest::Approx(c.grad_bound()).epsilon(1e-12));
  CHECK(gmax <= c.grad_bound());
  CHECK_THROWS_AS(CutoffSpec::make(Vec3::Zero(), 0.0), ConfigError);
}

TEST_CASE("inner variation validation")
{
  const auto base = default_variation(DomainSpec::unit_cube());
  CHECK(base.cutoff.radius <= 0.45);
  CHECK(base.delta() == doctest::Approx(base.cutoff.radius / 7.5));
  CHECK(base.h0() == doctest::Approx(std::min(base.delta(), base.cone.rho)));
  CHECK_THROWS_AS(with_shift(base, -0.01 * base.cone.axis), ConfigError);
  CHECK_THROWS_AS(with_shift(base, 1.01 * base.h0() * base.cone.axis), ConfigError);
  CHECK_NOTHROW(with_shift(base, 0.99 * base.h0() * base.cone.axis));
  auto big = base.cutoff;
  big.radius = base.cone.neighborhood + 0.1;
  CHECK_THROWS_AS(InnerVariation::make(big, base.cone, Vec3::Zero()), ConfigError);
}

TEST_CASE("Jacobian algebra")
{
  for (const auto& d : {DomainSpec::unit_cube(), DomainSpec::l_prism()})
  {
    const auto iv = shifted(d, 0.05);
    const Vec3 c = iv.cutoff.center;
    const double r = iv.cutoff.radius;
    // outside the ball
    const Vec3 far = c + Vec3(1.001 * r, 0.0, 0.0);
    CHECK((t_h(iv, far) - far).norm() == 0.0);
    CHECK(dt_h(iv, far) == Mat3::Identity());
    CHECK(det_dt_h(iv, far) == 1.0);
    CHECK(s_h(iv, far) == far);
    // centre: plateau
    CHECK((t_h(iv, c) - (c + iv.h)).norm() == 0.0);
    CHECK(det_dt_h(iv, c) == 1.0);
    CHECK(inv_dt_h(iv, c) == Mat3::Identity());

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 500; ++k)
    {
      const Vec3 x = c + r * Vec3(u(rng), u(rng), u(rng));
      const Mat3 j = dt_h(iv, x);
      CHECK(det_dt_h(iv, x) == doctest::Approx(j.determinant()).epsilon(1e-13));
      CHECK(det_dt_h(iv, x) >= 0.5);
      CHECK((inv_dt_h(iv, x) * j - Mat3::Identity()).norm() <= 1e-14);
      Mat3 fd;
      const double e = 1e-6;
      for (int m = 0; m < 3; ++m)
      {
        Vec3 dx = Vec3::Zero();
        dx[m] = e;
        fd.col(m) = (t_h(iv, x + dx) - t_h(iv, x - dx)) / (2 * e);
      }
      CHECK((fd - j).norm() <= 1e-7 * j.norm());
      // inverse map and chain rule
      const Vec3 y = t_h(iv, x);
      CHECK((s_h(iv, y) - x).norm() <= 1e-12);
      const Vec3 xs = s_h(iv, y);
      CHECK(det_dt_h(iv, xs) * inv_dt_h(iv, xs).determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("pullbacks reduce to the identity at h = 0")
{
  const auto mesh = mesh_of(DomainSpec::unit_cube(), 4);
  const auto iv = default_variation(DomainSpec::unit_cube());
  const FieldP p = random_p(mesh, 3);
  FieldU u = fespace::interpolate_u(fespace::H1VectorSpace(mesh), [](const Vec3& x) {
    return Vec3(x[0] * (1 - x[0]) * x[2] * (1 - x[2]), x[1] * (1 - x[1]), 0.0);
  });
  fespace::constrain(u);
  const auto tu = tau_h(iv, u);
  const auto tp = pullback_Th(iv, p);
  const auto tc = pullback_curl(iv, p);
  const PolyLoad pl = poly_load();
  const auto pm = piola_Ph(iv, pl.f());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0.01, 0.99);
  for (int k = 0; k < 200; ++k)
  {
    const Vec3 x(u01(rng), u01(rng), u01(rng));
    CHECK((tu(x) - fespace::evaluate_u(u, x)).norm() <= 1e-14);
    CHECK((tp(x) - fespace::evaluate_P(p, x)).norm() <= 1e-13);
    CHECK((tc(x) - fespace::evaluate_CurlP(p, x)).norm() <= 1e-12);
    CHECK((pm(x) - eval(pl.m, x)).norm() <= 1e-14);
  }
  CHECK(curl_identity_check(iv, p).max_defect <= 1e-10);
  const auto adj = adjoint_check(iv, p, pl.f());
  CHECK(adj.defect <= 1e-12);
  const auto pair = divcurl_pairing_check(iv, p, pl.f(), pl.d());
  CHECK(pair.pairing <= 1e-14);
  CHECK(diff_quotient(iv, u, p).quotient == 0.0);
}

TEST_CASE("extension by zero and plateau translation")
{
  const auto mesh = mesh_of(DomainSpec::unit_cube(), 4);
  const auto iv = shifted(DomainSpec::unit_cube(), 0.05);
  const Vec3 c = iv.cutoff.center;
  const FieldP p = random_p(mesh, 5);
  FieldU u = fespace::interpolate_u(fespace::H1VectorSpace(mesh), [](const Vec3& x) {
    return Vec3(x[2], 1.0, x[0]);
  });
  fespace::constrain(u);
  // points whose image leaves the domain through z = 0
  const Vec3 x = c + Vec3(0.0, 0.0, 0.02);
  REQUIRE(!DomainSpec::unit_cube().contains(t_h(iv, x)));
  CHECK(tau_h(iv, u)(x).norm() == 0.0);
  CHECK(pullback_Th(iv, p)(x).norm() == 0.0);
  CHECK(pullback_curl(iv, p)(x).norm() == 0.0);
  // boundary samples of tau_h u vanish
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int k = 0; k < 100; ++k)
  {
    Vec3 b(u01(rng), u01(rng), u01(rng));
    b[k % 3] = (k % 2) ? 1.0 : 0.0;
    CHECK(tau_h(iv, u)(b).norm() <= 1e-14);
  }
  // constant P, plateau: translation
  const Mat3 a = (Mat3() << 1, 2, 3, -1, 0.5, 2, 0, 1, -2).finished();
  const FieldP pc = fespace::interpolate_P(fespace::HCurlTensorSpace(mesh), [&](const Vec3&) { return a; });
  const Vec3 q = c + Vec3(0.05, -0.03, 0.15);
  REQUIRE(iv.cutoff.phi(q) == 1.0);
  CHECK((pullback_Th(iv, pc)(q) - a).norm() <= 1e-12);
  CHECK((pullback_Th(iv, pc)(q) - fespace::evaluate_P(pc, q + iv.h)).norm() <= 1e-12);
  // constant M, plateau
  const auto pm = piola_Ph(iv, [&](const Vec3&) { return a; });
  CHECK((pm(q + iv.h) - a).norm() <= 1e-14);
}

TEST_CASE("curl, div and adjoint identities")
{
  const PolyLoad pl = poly_load();
  for (const auto& d : {DomainSpec::unit_cube(), DomainSpec::l_prism()})
  {
    const auto mesh = mesh_of(d, 4);
    const FieldP p = random_p(mesh, 7);
    for (double len : {0.05, 0.025})
    {
      const auto iv = shifted(d, len);
      const auto ci = curl_identity_check(iv, p);
      MESSAGE(d.name() << " |h|=" << len << " curl defect " << ci.max_defect << " over " << ci.points);
      CHECK(ci.points > 50);
      CHECK(ci.max_defect <= 1e-5);
      const auto di = div_identity_check(iv, pl.f(), pl.d());
      CHECK(di.points > 100);
      CHECK(di.max_defect <= 1e-5);
      const auto adj = adjoint_check(iv, p, pl.f());
      CHECK(adj.defect <= 1e-6);
      CHECK(adj.defect_refined <= 1e-6);
      // the transform is not the identity here
      CHECK(std::abs(adj.lhs - fespace::integrate(*mesh, [&](int t, const Vec3& x) {
                       return (fespace::p_in_cell(p, t, mesh->barycentric(t, x)).array() *
                               eval(pl.m, x).array()).sum();
                     }, 6)) > 1e-6);
    }
  }
  // constant P on the plateau: curl of the pullback is zero
  const auto mesh = mesh_of(DomainSpec::unit_cube(), 4);
  const Mat3 a = (Mat3() << 1, 2, 3, -1, 0.5, 2, 0, 1, -2).finished();
  const FieldP pc = fespace::interpolate_P(fespace::HCurlTensorSpace(mesh), [&](const Vec3&) { return a; });
  const auto plateau = curl_identity_check(shifted(DomainSpec::unit_cube(), 0.05), pc, 1e-3, 0.5);
  CHECK(plateau.points > 10);
  CHECK(plateau.max_defect <= 1e-8);
  // M = 0
  const auto adj0 = adjoint_check(shifted(DomainSpec::unit_cube(), 0.05), random_p(mesh, 8),
                                  [](const Vec3&) { return Mat3::Zero(); });
  CHECK(adj0.lhs == 0.0);
  CHECK(adj0.rhs == 0.0);
}

TEST_CASE("difference quotient of affine fields scales with |h|")
{
  // interior ball: no extension effects; u affine and P constant give
  // |u - tau_h u|^2 = |Du h|^2 int phi^2, |D(u - tau_h u)|^2 = |Du h|^2 int |grad phi|^2,
  // |P - T_h P|^2 = |A h|^2 int |grad phi|^2 and no curl contribution
  const auto mesh = mesh_of(DomainSpec::unit_cube(), 4);
  const Mat3 g = (Mat3() << 1, 0.5, -1, 0, 2, 1, 0.3, 0, 1).finished();
  const Vec3 off(0.1, -0.2, 0.3);
  const FieldU u = fespace::interpolate_u(fespace::H1VectorSpace(mesh), [&](const Vec3& x) { return Vec3(g * x + off); });
  const Mat3 a = (Mat3() << 1, 2, 3, -1, 0.5, 2, 0, 1, -2).finished();
  const FieldP p = fespace::interpolate_P(fespace::HCurlTensorSpace(mesh), [&](const Vec3&) { return a; });
  const Vec3 c(0.48, 0.51, 0.47);
  const double r = 0.3;
  // radial integrals of phi^2 and |grad phi|^2 by Gauss on the transition shell
  const CutoffSpec cut = CutoffSpec::make(c, r);
  double i_phi = 4.0 / 3.0 * std::numbers::pi * std::pow(0.5 * r, 3), i_grad = 0.0;
  const auto& gl = fespace::gauss_legendre(20);
  for (std::size_t k = 0; k < gl.nodes.size(); ++k)
  {
    const double s = 0.5 * r + 0.5 * r * gl.nodes[k];
    const double w = 0.5 * r * gl.weights[k] * 4.0 * std::numbers::pi * s * s;
    const Vec3 x = c + Vec3(s, 0.0, 0.0);
    i_phi += w * std::pow(cut.phi(x), 2);
    i_grad += w * cut.grad(x).squaredNorm();
  }
  std::vector<double> q;
  for (double len : {0.02, 0.01, 0.005})
  {
    const Vec3 h = len * Vec3(0.3, -0.5, 0.8).normalized();
    const auto rep = diff_quotient(interior_variation(c, r, h), u, p);
    const double gh = (g * h).squaredNorm();
    CHECK(rep.u_l2 == doctest::Approx(gh * i_phi).epsilon(1e-6));
    CHECK(rep.u_h1 - rep.u_l2 == doctest::Approx(gh * i_grad).epsilon(1e-4));
    CHECK(rep.p_l2 == doctest::Approx((a * h).squaredNorm() * i_grad).epsilon(1e-4));
    CHECK(rep.p_hcurl - rep.p_l2 <= 1e-20);
    q.push_back(rep.quotient);
  }
  CHECK(q[1] / q[0] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(q[2] / q[1] == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("difference quotient of discrete fields")
{
  const auto d = DomainSpec::l_prism();
  const auto mesh = mesh_of(d, 4);
  const FieldP p = random_p(mesh, 9);
  FieldU u = fespace::zero_field(fespace::H1VectorSpace(mesh));
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g;
  for (auto& c : u.coeffs)
    c = g(rng);
  fespace::constrain(u);
  const auto iv = shifted(d, 0.03);
  const auto coarse = diff_quotient(iv, u, p);
  LineQuadrature fine;
  fine.radial = 96;
  fine.angular = 192;
  const auto ref = diff_quotient(iv, u, p, fine);
  CHECK(coarse.quotient > 0.0);
  CHECK(coarse.quotient == doctest::Approx(ref.quotient).epsilon(0.02));
  // tau_h estimate: |u - tau_h u|_{L2} <= sqrt(2) |h| |Du|_{L2}
  double du2 = 0.0;
  for (int t = 0; t < mesh->num_tets(); ++t)
    du2 += mesh->volume(t) * fespace::du_in_cell(u, t).squaredNorm();
  for (double len : {0.04, 0.02, 0.01})
  {
    const auto rep = diff_quotient(shifted(d, len), u, p);
    CHECK(std::sqrt(rep.u_l2) <= std::sqrt(2.0) * len * std::sqrt(du2));
  }
}

TEST_CASE("div-curl pairing stays proportional to |h|")
{
  const auto mesh = mesh_of(DomainSpec::unit_cube(), 4);
  const FieldP p = random_p(mesh, 11);
  const PolyLoad pl = poly_load();
  const Mat3 a = (Mat3() << 1, 0, 2, 0, 1, 0, -1, 3, 1).finished();
  for (int which = 0; which < 2; ++which)
  {
    const TensorFunction m = which == 0 ? pl.f() : TensorFunction([&](const Vec3&) { return a; });
    const VectorFunction dm = which == 0 ? pl.d() : VectorFunction([](const Vec3&) { return Vec3::Zero(); });
    const auto base = default_variation(DomainSpec::unit_cube());
    double lo = 1e300, hi = 0.0;
    for (int k = 1; k <= 6; ++k)
    {
      const auto iv = with_shift(base, std::ldexp(base.h0() * 0.999, -k) * base.cone.axis);
      const auto rep = divcurl_pairing_check(iv, p, m, dm);
      lo = std::min(lo, rep.ratio);
      hi = std::max(hi, rep.ratio);
    }
    MESSAGE("pairing ratio range " << lo << " .. " << hi);
    CHECK(lo > 0.0);
    CHECK(hi / lo <= 10.0);
  }
}

TEST_CASE("mapping properties")
{
  for (const auto& d : {DomainSpec::unit_cube(), DomainSpec::l_prism()})
  {
    const auto rep = mapping_property_fuzz(d, 2000, 12);
    CHECK(rep.samples == 2000);
    CHECK(rep.exterior_violations == 0);
    CHECK(rep.interior_violations == 0);
    CHECK(rep.min_det >= 0.5);
    CHECK(rep.max_roundtrip <= 1e-12);
    const auto iv = shifted(d, 0.9 * default_variation(d).h0());
    const auto b = uniform_bound(iv, 500, 13);
    CHECK(b.sampled == doctest::Approx(b.closed_form).epsilon(0.05));
    CHECK(b.sampled <= b.closed_form * (1.0 + 1e-12));
  }
}
