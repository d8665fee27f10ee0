#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "micromorph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

using namespace micromorph;
using namespace micromorph::geometry;

namespace
{

void check_mesh_invariants(const Mesh& m)
{
  for (int t = 0; t < m.num_tets(); ++t)
    CHECK(m.signed_volume(t) > 0.0);
  for (int f = 0; f < m.num_faces(); ++f)
  {
    CHECK(m.face_multiplicity(f) >= 1);
    CHECK(m.face_multiplicity(f) <= 2);
  }
  for (const auto& e : m.edges())
    CHECK(e[0] < e[1]);
  // boundary faces must lie on the domain boundary
  for (int f = 0; f < m.num_faces(); ++f)
    if (m.boundary_face(f))
    {
      const auto& fv = m.faces()[f];
      const Vec3 c = (m.vertices()[fv[0]] + m.vertices()[fv[1]] + m.vertices()[fv[2]]) / 3.0;
      CHECK(m.domain().boundary_distance(c) < 1e-12);
    }
}

} // namespace

TEST_CASE("kuhn cube has 8 vertices, 6 tets, 19 edges")
{
  const Mesh m = build_mesh(DomainSpec::unit_cube(), 1);
  CHECK(m.num_vertices() == 8);
  CHECK(m.num_tets() == 6);
  // 12 cube edges + 6 face diagonals + 1 body diagonal
  CHECK(m.num_edges() == 19);
  // Euler characteristic of a ball: V - E + F - T = 1
  CHECK(m.num_vertices() - m.num_edges() + m.num_faces() - m.num_tets() == 1);
  CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-15));
  check_mesh_invariants(m);
}

TEST_CASE("mesh volumes and areas")
{
  for (int n : {1, 2, 3})
  {
    const Mesh m = build_mesh(DomainSpec::unit_cube(), n);
    CHECK(std::abs(m.total_volume() - 1.0) < 1e-14);
    CHECK(std::abs(m.boundary_area() - 6.0) < 1e-13);
    CHECK(m.num_vertices() - m.num_edges() + m.num_faces() - m.num_tets() == 1);
    check_mesh_invariants(m);
  }
  const Mesh l = build_mesh(DomainSpec::l_prism(), 1);
  CHECK(std::abs(l.total_volume() - 3.0) < 1e-14);
  // top + bottom 2*3, lateral perimeter 8 times height 1
  CHECK(std::abs(l.boundary_area() - 14.0) < 1e-13);
  check_mesh_invariants(l);
  const Mesh b = build_mesh(DomainSpec::box(1.0, 2.0, 0.5), 2);
  CHECK(std::abs(b.total_volume() - 1.0) < 1e-14);
  check_mesh_invariants(b);
}

TEST_CASE("refinement")
{
  const Mesh m = build_mesh(DomainSpec::unit_cube(), 1);
  const Mesh r = refine(m);
  CHECK(r.num_tets() == 48);
  CHECK(std::abs(r.total_volume() - 1.0) < 1e-14);
  CHECK(std::abs(r.boundary_area() - 6.0) < 1e-12);
  for (int v = 0; v < m.num_vertices(); ++v)
    CHECK((r.vertices()[v] - m.vertices()[v]).norm() == 0.0);
  CHECK(r.num_vertices() == m.num_vertices() + m.num_edges());
  check_mesh_invariants(r);

  const Mesh l = refine(refine(build_mesh(DomainSpec::l_prism(), 1)));
  CHECK(std::abs(l.total_volume() - 3.0) < 1e-12);
  CHECK(std::abs(l.boundary_area() - 14.0) < 1e-12);
  check_mesh_invariants(l);
}

TEST_CASE("point membership")
{
  CHECK(point_in_domain(DomainSpec::unit_cube(), {0.5, 0.5, 0.5}));
  CHECK_FALSE(point_in_domain(DomainSpec::unit_cube(), {1.5, 0.5, 0.5}));
  CHECK_FALSE(point_in_domain(DomainSpec::unit_cube(), {1.0, 0.5, 0.5}));
  CHECK_FALSE(point_in_domain(DomainSpec::l_prism(), {1.5, 1.5, 0.5}));
  CHECK(point_in_domain(DomainSpec::l_prism(), {1.5, 0.5, 0.5}));
  CHECK(point_in_domain(DomainSpec::l_prism(), {0.5, 1.5, 0.5}));
  CHECK_FALSE(point_in_domain(DomainSpec::l_prism(), {1.0, 1.5, 0.5}));
}

TEST_CASE("point location agrees with barycentric test")
{
  const Mesh m = build_mesh(DomainSpec::l_prism(), 2);
  for (int i = 0; i < 200; ++i)
  {
    const Vec3 x{0.01 + 1.98 * std::fmod(0.6180339887 * i, 1.0), 0.01 + 1.98 * std::fmod(0.7548776662 * i, 1.0),
                 std::fmod(0.5698402910 * i, 1.0)};
    const int t = m.locate(x);
    if (!m.domain().contains_closure(x))
    {
      CHECK(t == -1);
      continue;
    }
    REQUIRE(t >= 0);
    const auto b = m.barycentric(t, x);
    for (double l : b)
      CHECK(l > -1e-10);
    for (int s = 0; s < t; ++s)
    {
      const auto bs = m.barycentric(s, x);
      CHECK(*std::min_element(bs.begin(), bs.end()) < -1e-12);
    }
  }
}

TEST_CASE("exterior cones")
{
  const auto cube = DomainSpec::unit_cube();
  const ConeSpec c = exterior_cone(cube, {0.5, 0.5, 0.0});
  CHECK((c.axis - Vec3(0, 0, -1)).norm() < 1e-14);
  CHECK(c.half_angle == doctest::Approx(std::numbers::pi / 4));
  CHECK(verify_exterior_cone(cube, c, 1000, 7));

  const ConeSpec corner = exterior_cone(cube, {0.0, 0.0, 0.0});
  CHECK((corner.axis - Vec3(-1, -1, -1) / std::sqrt(3.0)).norm() < 1e-14);
  CHECK(corner.half_angle == doctest::Approx(std::numbers::pi / 8));
  CHECK(verify_exterior_cone(cube, corner, 1000, 8));

  const auto l = DomainSpec::l_prism();
  const ConeSpec re = exterior_cone(l, {1.0, 1.0, 0.5});
  CHECK((re.axis - Vec3(1, 1, 0) / std::sqrt(2.0)).norm() < 1e-14);
  CHECK(re.half_angle == doctest::Approx(std::numbers::pi / 8));
  CHECK(re.rho >= 0.1);
  CHECK(verify_exterior_cone(l, re, 1000, 9));

  // independent oracle: every direction in the cone and every step length
  // leaves the L from the re-entrant edge point
  for (int i = 0; i < 1000; ++i)
  {
    const Vec3 h = sample_cone_direction(re, std::fmod(0.31 * i, 1.0), std::fmod(0.77 * i + 0.1, 1.0));
    CHECK(re.contains_direction(h));
    for (double s : {1e-6, 0.01, 0.05, 0.0999})
      CHECK_FALSE(point_in_domain(l, Vec3(1.0, 1.0, 0.5) + s * h));
  }

  CHECK_THROWS_AS(exterior_cone(cube, {0.5, 0.5, 0.5}), NotOnBoundary);
  CHECK_THROWS_AS(exterior_cone(cube, {0.5, 0.5, 1e-9}), NotOnBoundary);
}

TEST_CASE("every sampled boundary point has a valid cone")
{
  for (const auto& d : {DomainSpec::unit_cube(), DomainSpec::l_prism()})
  {
    int count = 0;
    for (const auto& p : d.boundary_patches())
    {
      for (int i = 0; i < 5; ++i)
      {
        const Vec3 x = p.lo + Vec3(std::fmod(0.37 * i + 0.13, 1.0), std::fmod(0.61 * i + 0.29, 1.0),
                                   std::fmod(0.83 * i + 0.41, 1.0))
                                  .cwiseProduct(p.hi - p.lo);
        if (!d.contains_closure(x))
          continue;
        const ConeSpec c = exterior_cone(d, x);
        CHECK(c.half_angle >= std::numbers::pi / 8 - 1e-15);
        CHECK(c.rho >= 0.1);
        CHECK(verify_exterior_cone(d, c, 1000, 100 + count));
        ++count;
      }
    }
  }
}

TEST_CASE("Kuhn meshes at n and 2n are nested")
{
  for (const auto& d : {DomainSpec::unit_cube(), DomainSpec::l_prism()})
  {
    const Mesh coarse = geometry::build_mesh(d, 2);
    const Mesh fine = geometry::build_mesh(d, 4);
    for (int t = 0; t < fine.num_tets(); ++t)
    {
      Vec3 c = Vec3::Zero();
      for (int v : fine.tets()[t])
        c += fine.vertices()[v] / 4.0;
      const int parent = coarse.locate(c);
      REQUIRE(parent >= 0);
      for (int v : fine.tets()[t])
        for (double l : coarse.barycentric(parent, fine.vertices()[v]))
          CHECK(l >= -1e-12);
    }
  }
}
