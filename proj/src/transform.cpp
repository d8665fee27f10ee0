#include "micromorph/transform.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace micromorph::transform
{

using geometry::Mesh;

namespace
{

// quintic smoothstep and its derivative on [0,1]
double smoothstep(double t) { return t * t * t * (10.0 + t * (-15.0 + 6.0 * t)); }
double smoothstep_d(double t) { return 30.0 * t * t * (1.0 - t) * (1.0 - t); }

Vec3 unit_orthogonal(const Vec3& a)
{
  const Vec3 trial = std::abs(a[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return (trial - trial.dot(a) * a).normalized();
}

// Row-wise curl / div of a tensor field by 4th-order central differences.
template <class F>
Mat3 fd_derivative(const F& f, const Vec3& x, int j, double s)
{
  Vec3 e = Vec3::Zero();
  e[j] = s;
  return (-f(x + 2.0 * e) + 8.0 * f(x + e) - 8.0 * f(x - e) + f(x - 2.0 * e)) / (12.0 * s);
}

template <class F>
Mat3 fd_curl(const F& f, const Vec3& x, double s)
{
  const Mat3 d0 = fd_derivative(f, x, 0, s), d1 = fd_derivative(f, x, 1, s), d2 = fd_derivative(f, x, 2, s);
  Mat3 c;
  for (int i = 0; i < 3; ++i)
    c.row(i) << d1(i, 2) - d2(i, 1), d2(i, 0) - d0(i, 2), d0(i, 1) - d1(i, 0);
  return c;
}

template <class F>
Vec3 fd_div(const F& f, const Vec3& x, double s)
{
  Vec3 d = Vec3::Zero();
  for (int j = 0; j < 3; ++j)
    d += fd_derivative(f, x, j, s).col(j);
  return d;
}

std::array<Vec3, 13> stencil(const Vec3& x, double s)
{
  std::array<Vec3, 13> pts;
  pts[0] = x;
  int k = 1;
  for (int j = 0; j < 3; ++j)
    for (double m : {-2.0, -1.0, 1.0, 2.0})
    {
      Vec3 e = Vec3::Zero();
      e[j] = m * s;
      pts[k++] = x + e;
    }
  return pts;
}

bool strictly_inside(const Mesh& mesh, int t, const Vec3& x, double margin)
{
  for (double l : mesh.barycentric(t, x))
    if (l <= margin)
      return false;
  return true;
}

// Cells whose circumscribing ball meets B_r(c).
std::vector<int> cells_near_ball(const Mesh& mesh, const Vec3& c, double r)
{
  std::vector<int> out;
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    Vec3 g = Vec3::Zero();
    for (int v : mesh.tets()[t])
      g += mesh.vertices()[v] / 4.0;
    double rad = 0.0;
    for (int v : mesh.tets()[t])
      rad = std::max(rad, (mesh.vertices()[v] - g).norm());
    if ((g - c).norm() <= r + rad)
      out.push_back(t);
  }
  return out;
}

// Barycentric vertices of the eight children of the reference tet under red
// refinement (corner tets plus the octahedron cut along the 0-2 / 1-3 diagonal
// midpoints m02, m13).
using Bary = std::array<double, 4>;
std::array<std::array<Bary, 4>, 8> red_children()
{
  auto corner = [](int a) {
    Bary b{0, 0, 0, 0};
    b[a] = 1.0;
    return b;
  };
  auto mid = [](int a, int b) {
    Bary m{0, 0, 0, 0};
    m[a] = 0.5;
    m[b] = 0.5;
    return m;
  };
  const Bary m01 = mid(0, 1), m02 = mid(0, 2), m03 = mid(0, 3), m12 = mid(1, 2), m13 = mid(1, 3),
             m23 = mid(2, 3);
  return {{
      {corner(0), m01, m02, m03},
      {m01, corner(1), m12, m13},
      {m02, m12, corner(2), m23},
      {m03, m13, m23, corner(3)},
      {m01, m02, m03, m13},
      {m01, m02, m12, m13},
      {m02, m03, m13, m23},
      {m02, m12, m13, m23},
  }};
}

// Quadrature over every cell, optionally over its eight children. The
// callback gets (cell, barycentric point, physical weight).
template <class F>
void cell_quadrature(const Mesh& mesh, int order, bool refined, const F& f)
{
  const auto& rule = fespace::tet_rule(order);
  static const auto children = red_children();
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const double scale = 6.0 * mesh.volume(t);
    if (!refined)
    {
      for (std::size_t q = 0; q < rule.size(); ++q)
        f(t, rule.points[q], rule.weights[q] * scale);
      continue;
    }
    for (const auto& child : children)
      for (std::size_t q = 0; q < rule.size(); ++q)
      {
        Bary b{0, 0, 0, 0};
        for (int a = 0; a < 4; ++a)
          for (int c = 0; c < 4; ++c)
            b[c] += rule.points[q][a] * child[a][c];
        f(t, b, rule.weights[q] * scale / 8.0);
      }
  }
}

} // namespace

// ---------------------------------------------------------------------------
// Cutoff and inner variation

CutoffSpec CutoffSpec::make(const Vec3& center, double radius)
{
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ConfigError("transform.cutoff_radius", "cutoff radius must be positive");
  return {center, radius};
}

double CutoffSpec::phi(const Vec3& x) const
{
  const double s = (x - center).norm() / radius;
  if (s <= 0.5)
    return 1.0;
  if (s >= 1.0)
    return 0.0;
  return 1.0 - smoothstep(2.0 * s - 1.0);
}

Vec3 CutoffSpec::grad(const Vec3& x) const
{
  const Vec3 d = x - center;
  const double dist = d.norm();
  const double s = dist / radius;
  if (s <= 0.5 || s >= 1.0)
    return Vec3::Zero();
  return (-2.0 * smoothstep_d(2.0 * s - 1.0) / (radius * dist)) * d;
}

InnerVariation InnerVariation::make(const CutoffSpec& cutoff, const ConeSpec& cone, const Vec3& h)
{
  if ((cutoff.center - cone.x0).norm() > 1e-12)
    throw ConfigError("transform.cutoff_center", "cutoff must be centred at the cone apex");
  if (cutoff.radius > cone.neighborhood + 1e-12)
    throw ConfigError("transform.cutoff_radius",
                      "cutoff radius exceeds the neighbourhood on which the cone is valid");
  InnerVariation iv{cutoff, cone, h};
  if (h.norm() > 0.0)
  {
    if (!cone.contains_direction(h))
      throw ConfigError("transform.h", "shift is not inside the exterior cone");
    if (!(h.norm() < iv.h0()))
      throw ConfigError("transform.h", "|h| must be below h0 = min(delta, rho) = " + std::to_string(iv.h0()));
  }
  return iv;
}

InnerVariation default_variation(const DomainSpec& domain)
{
  const Vec3 x0 = domain.default_boundary_point();
  const ConeSpec cone = geometry::exterior_cone(domain, x0);
  return InnerVariation::make(CutoffSpec::make(x0, std::min(0.45, cone.neighborhood)), cone, Vec3::Zero());
}

InnerVariation with_shift(const InnerVariation& iv, const Vec3& h) { return InnerVariation::make(iv.cutoff, iv.cone, h); }

Vec3 t_h(const InnerVariation& iv, const Vec3& x) { return x + iv.cutoff.phi(x) * iv.h; }

Mat3 dt_h(const InnerVariation& iv, const Vec3& x)
{
  return Mat3::Identity() + iv.h * iv.cutoff.grad(x).transpose();
}

double det_dt_h(const InnerVariation& iv, const Vec3& x) { return 1.0 + iv.h.dot(iv.cutoff.grad(x)); }

Mat3 inv_dt_h(const InnerVariation& iv, const Vec3& x)
{
  const Vec3 g = iv.cutoff.grad(x);
  return Mat3::Identity() - (iv.h * g.transpose()) / (1.0 + iv.h.dot(g));
}

Vec3 s_h(const InnerVariation& iv, const Vec3& y)
{
  if ((y - iv.cutoff.center).norm() >= iv.cutoff.radius || iv.h.norm() == 0.0)
    return y;
  const double tol = 1e-13 * std::max(1.0, y.norm());
  Vec3 x = y;
  for (int it = 0; it < 500; ++it)
  {
    if ((t_h(iv, x) - y).norm() <= tol)
      return x;
    x = y - iv.cutoff.phi(x) * iv.h;
  }
  throw NoConvergence("s_h: fixed-point iteration did not converge", 500);
}

// ---------------------------------------------------------------------------
// Pullbacks

namespace
{

// Cell of the mesh containing y, or -1 outside the closure of the domain.
int cell_of(const Mesh& mesh, const Vec3& y)
{
  if (!mesh.domain().contains_closure(y, 1e-12))
    return -1;
  return mesh.locate(y);
}

} // namespace

VectorFunction tau_h(const InnerVariation& iv, const FieldU& u)
{
  return [iv, u](const Vec3& x) -> Vec3 {
    const Vec3 y = t_h(iv, x);
    const int t = cell_of(u.space.mesh(), y);
    if (t < 0)
      return Vec3::Zero();
    return fespace::u_in_cell(u, t, u.space.mesh().barycentric(t, y));
  };
}

TensorFunction tau_h_gradient(const InnerVariation& iv, const FieldU& u)
{
  return [iv, u](const Vec3& x) -> Mat3 {
    const int t = cell_of(u.space.mesh(), t_h(iv, x));
    if (t < 0)
      return Mat3::Zero();
    return fespace::du_in_cell(u, t) * dt_h(iv, x);
  };
}

TensorFunction pullback_Th(const InnerVariation& iv, const FieldP& p)
{
  return [iv, p](const Vec3& x) -> Mat3 {
    const Vec3 y = t_h(iv, x);
    const int t = cell_of(p.space.mesh(), y);
    if (t < 0)
      return Mat3::Zero();
    return fespace::p_in_cell(p, t, p.space.mesh().barycentric(t, y)) * dt_h(iv, x);
  };
}

TensorFunction pullback_curl(const InnerVariation& iv, const FieldP& p)
{
  return [iv, p](const Vec3& x) -> Mat3 {
    const int t = cell_of(p.space.mesh(), t_h(iv, x));
    if (t < 0)
      return Mat3::Zero();
    return det_dt_h(iv, x) * fespace::curlp_in_cell(p, t) * inv_dt_h(iv, x).transpose();
  };
}

TensorFunction piola_Ph(const InnerVariation& iv, const TensorFunction& m)
{
  return [iv, m](const Vec3& y) -> Mat3 {
    const Vec3 x = s_h(iv, y);
    return m(x) * dt_h(iv, x).transpose() / det_dt_h(iv, x);
  };
}

VectorFunction piola_div(const InnerVariation& iv, const VectorFunction& div_m)
{
  return [iv, div_m](const Vec3& y) -> Vec3 {
    const Vec3 x = s_h(iv, y);
    return div_m(x) / det_dt_h(iv, x);
  };
}

// ---------------------------------------------------------------------------
// Identity checks

namespace
{

// Distance of x from the two spheres where phi is only C^2.
double sphere_gap(const CutoffSpec& c, const Vec3& x)
{
  const double d = (x - c.center).norm();
  return std::min(std::abs(d - 0.5 * c.radius), std::abs(d - c.radius));
}

} // namespace

IdentityReport curl_identity_check(const InnerVariation& iv, const FieldP& p, double step, double radius_fraction)
{
  const Mesh& mesh = p.space.mesh();
  const auto& rule = fespace::tet_rule(2);
  IdentityReport rep;
  for (int t : cells_near_ball(mesh, iv.cutoff.center, iv.cutoff.radius))
    for (const auto& b : rule.points)
    {
      const Vec3 x = mesh.point(t, b);
      if (sphere_gap(iv.cutoff, x) <= 4.0 * step ||
          (x - iv.cutoff.center).norm() >= radius_fraction * iv.cutoff.radius)
        continue;
      const auto pts = stencil(x, step);
      if (!std::all_of(pts.begin(), pts.end(), [&](const Vec3& q) { return strictly_inside(mesh, t, q, 1e-10); }))
        continue;
      // all stencil images in one cell, or all outside the closed domain
      const int ty = cell_of(mesh, t_h(iv, x));
      bool ok = true;
      for (const auto& q : pts)
      {
        const Vec3 y = t_h(iv, q);
        if (ty >= 0 ? !strictly_inside(mesh, ty, y, 1e-10) : mesh.domain().contains_closure(y, 1e-9))
        {
          ok = false;
          break;
        }
      }
      if (!ok)
        continue;
      auto pullback = [&](const Vec3& q) -> Mat3 {
        if (ty < 0)
          return Mat3::Zero();
        const Vec3 y = t_h(iv, q);
        return fespace::p_in_cell(p, ty, mesh.barycentric(ty, y)) * dt_h(iv, q);
      };
      const Mat3 lhs = fd_curl(pullback, x, step);
      const Mat3 rhs = ty < 0 ? Mat3::Zero()
                              : Mat3(det_dt_h(iv, x) * fespace::curlp_in_cell(p, ty) * inv_dt_h(iv, x).transpose());
      rep.max_defect = std::max(rep.max_defect, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
      ++rep.points;
    }
  return rep;
}

IdentityReport div_identity_check(const InnerVariation& iv, const TensorFunction& m, const VectorFunction& div_m,
                                  double step)
{
  const TensorFunction pm = piola_Ph(iv, m);
  const VectorFunction pd = piola_div(iv, div_m);
  const double r = iv.cutoff.radius;
  IdentityReport rep;
  // lattice over the ball, offset so points avoid the symmetry planes
  const int n = 12;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
      {
        const Vec3 y = iv.cutoff.center + r * Vec3(-1.0 + (2.0 * i + 1.1) / n, -1.0 + (2.0 * j + 0.9) / n,
                                                   -1.0 + (2.0 * k + 1.05) / n);
        if ((y - iv.cutoff.center).norm() >= r)
          continue;
        // the stencil in y maps to a set of diameter <= 8 step in x
        if (sphere_gap(iv.cutoff, s_h(iv, y)) <= 8.0 * step)
          continue;
        const Vec3 lhs = fd_div(pm, y, step);
        const Vec3 rhs = pd(y);
        rep.max_defect = std::max(rep.max_defect, (lhs - rhs).norm() / std::max(1.0, rhs.norm()));
        ++rep.points;
      }
  return rep;
}

AdjointReport adjoint_check(const InnerVariation& iv, const FieldP& p, const TensorFunction& m, int quad_order)
{
  const Mesh& mesh = p.space.mesh();
  const TensorFunction pull = pullback_Th(iv, p);
  const TensorFunction pm = piola_Ph(iv, m);
  AdjointReport rep;
  for (bool refined : {false, true})
  {
    double lhs = 0.0, rhs = 0.0;
    cell_quadrature(mesh, quad_order, refined, [&](int t, const Bary& b, double w) {
      const Vec3 y = mesh.point(t, b);
      const Vec3 x = s_h(iv, y);
      // left side in x = S_h(y): dx = det D S_h(y) dy
      lhs += w * (pull(x).array() * m(x).array()).sum() / det_dt_h(iv, x);
      rhs += w * (fespace::p_in_cell(p, t, b).array() * pm(y).array()).sum();
    });
    const double d = std::abs(lhs - rhs) / (1.0 + std::abs(lhs));
    if (!refined)
    {
      rep.lhs = lhs;
      rep.rhs = rhs;
      rep.defect = d;
    }
    else
      rep.defect_refined = d;
  }
  return rep;
}

PairingReport divcurl_pairing_check(const InnerVariation& iv, const FieldP& p, const TensorFunction& m,
                                    const VectorFunction& div_m, int quad_order)
{
  const Mesh& mesh = p.space.mesh();
  const TensorFunction pm = piola_Ph(iv, m);
  double pairing = 0.0, m_l2 = 0.0, m_div = 0.0;
  cell_quadrature(mesh, quad_order, false, [&](int t, const Bary& b, double w) {
    const Vec3 y = mesh.point(t, b);
    const Mat3 my = m(y);
    pairing += w * (fespace::p_in_cell(p, t, b).array() * (pm(y) - my).array()).sum();
    m_l2 += w * my.squaredNorm();
    m_div += w * div_m(y).squaredNorm();
  });
  PairingReport rep;
  rep.pairing = std::abs(pairing);
  rep.bound = iv.h.norm() * fespace::norms(p).full * std::sqrt(m_l2 + m_div);
  rep.ratio = rep.bound > 0.0 ? rep.pairing / rep.bound : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// Difference quotient by line integration
//
// T_h moves points along h, so each line parallel to h is mapped to itself
// and the breakpoints of both x -> f(x) and x -> f(T_h x) on that line are
// computable: the cell crossings of the line and their S_h preimages.

namespace
{

struct Segment
{
  double a, b;
  int cell; // -1 outside the mesh
};

// Cells crossed by p + t d for t in [lo, hi], in order.
std::vector<Segment> walk_line(const Mesh& mesh, const Vec3& p, const Vec3& d, double lo, double hi, double h_mesh)
{
  std::vector<Segment> segs;
  const double eps = 1e-9 * h_mesh;
  double t = lo;
  while (t < hi)
  {
    const int c = mesh.locate(p + (t + eps) * d);
    if (c >= 0)
    {
      const auto lam = mesh.barycentric(c, p + (t + eps) * d);
      const auto& gl = mesh.grad_lambda(c);
      double exit = hi;
      for (int i = 0; i < 4; ++i)
      {
        const double rate = gl[i].dot(d);
        if (rate < 0.0)
          exit = std::min(exit, t + eps + std::max(0.0, lam[i]) / -rate);
      }
      exit = std::max(exit, t + 2.0 * eps);
      exit = std::min(exit, hi);
      if (!segs.empty() && segs.back().cell == c)
        segs.back().b = exit;
      else
        segs.push_back({t, exit, c});
      t = exit;
      continue;
    }
    // outside: march to the next entry, then bisect
    const double dt = h_mesh / 16.0;
    double t2 = t + dt;
    while (t2 < hi && mesh.locate(p + t2 * d) < 0)
      t2 += dt;
    double end = hi;
    if (t2 < hi)
    {
      double a = t2 - dt, b = t2;
      for (int it = 0; it < 60; ++it)
      {
        const double m = 0.5 * (a + b);
        (mesh.locate(p + m * d) < 0 ? a : b) = m;
      }
      end = b;
    }
    if (!segs.empty() && segs.back().cell < 0)
      segs.back().b = end;
    else
      segs.push_back({t, end, -1});
    t = end;
  }
  return segs;
}

int segment_at(const std::vector<Segment>& segs, double t)
{
  auto it = std::upper_bound(segs.begin(), segs.end(), t, [](double v, const Segment& s) { return v < s.a; });
  if (it == segs.begin())
    return segs.front().cell;
  --it;
  return it->cell;
}

} // namespace

DiffQuotientReport diff_quotient(const InnerVariation& iv, const FieldU& u, const FieldP& p, const LineQuadrature& lq)
{
  DiffQuotientReport rep;
  const double hn = iv.h.norm();
  if (hn == 0.0)
    return rep;
  const Mesh& mesh = u.space.mesh();
  const double h_mesh = mesh.max_edge_length();
  const Vec3 dir = iv.h / hn;
  const Vec3 e1 = unit_orthogonal(dir);
  const Vec3 e2 = dir.cross(e1);
  const Vec3 c = iv.cutoff.center;
  const double r = iv.cutoff.radius;
  const auto& radial = fespace::gauss_legendre(lq.radial);
  const auto& gauss = fespace::gauss_legendre(lq.gauss);

  // cached per-cell constants
  std::vector<Mat3> du(mesh.num_tets()), curl(mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    du[t] = fespace::du_in_cell(u, t);
    curl[t] = fespace::curlp_in_cell(p, t);
  }

  for (int ir = 0; ir < lq.radial; ++ir)
  {
    const double rho = r * radial.nodes[ir];
    const double w_r = r * radial.weights[ir] * rho;
    const double half = std::sqrt(std::max(0.0, r * r - rho * rho));
    for (int ia = 0; ia < lq.angular; ++ia)
    {
      // angular offset keeps lines off symmetry planes of structured meshes
      const double theta = 2.0 * std::numbers::pi * (ia + 0.5) / lq.angular + 0.1234;
      const double w = w_r * 2.0 * std::numbers::pi / lq.angular;
      const Vec3 base = c + rho * (std::cos(theta) * e1 + std::sin(theta) * e2);
      const auto segs = walk_line(mesh, base, dir, -half, half, h_mesh);

      std::vector<double> breaks{-half, half};
      if (rho < 0.5 * r)
      {
        const double s = std::sqrt(0.25 * r * r - rho * rho);
        breaks.push_back(-s);
        breaks.push_back(s);
      }
      for (std::size_t k = 1; k < segs.size(); ++k)
      {
        const double tb = segs[k].a;
        breaks.push_back(tb);
        breaks.push_back((s_h(iv, base + tb * dir) - base).dot(dir));
      }
      std::sort(breaks.begin(), breaks.end());

      for (std::size_t k = 0; k + 1 < breaks.size(); ++k)
      {
        const double a = std::max(breaks[k], -half), b = std::min(breaks[k + 1], half);
        if (b - a <= 0.0)
          continue;
        const double mid = 0.5 * (a + b);
        const int kx = segment_at(segs, mid);
        if (kx < 0)
          continue;
        const Vec3 xm = base + mid * dir;
        const int ky = segment_at(segs, (t_h(iv, xm) - base).dot(dir));
        for (std::size_t g = 0; g < gauss.nodes.size(); ++g)
        {
          const double tg = a + (b - a) * gauss.nodes[g];
          const double wg = w * (b - a) * gauss.weights[g];
          const Vec3 x = base + tg * dir;
          const auto bx = mesh.barycentric(kx, x);
          const Vec3 ux = fespace::u_in_cell(u, kx, bx);
          const Mat3 px = fespace::p_in_cell(p, kx, bx);
          Vec3 uy = Vec3::Zero();
          Mat3 duy = Mat3::Zero(), py = Mat3::Zero(), cy = Mat3::Zero();
          if (ky >= 0)
          {
            const Vec3 y = t_h(iv, x);
            const auto by = mesh.barycentric(ky, y);
            const Mat3 dt = dt_h(iv, x);
            uy = fespace::u_in_cell(u, ky, by);
            duy = du[ky] * dt;
            py = fespace::p_in_cell(p, ky, by) * dt;
            cy = det_dt_h(iv, x) * curl[ky] * inv_dt_h(iv, x).transpose();
          }
          const double su = (ux - uy).squaredNorm();
          const double sdu = (du[kx] - duy).squaredNorm();
          const double sp = (px - py).squaredNorm();
          const double sc = (curl[kx] - cy).squaredNorm();
          rep.u_l2 += wg * su;
          rep.u_h1 += wg * (su + sdu);
          rep.p_l2 += wg * sp;
          rep.p_hcurl += wg * (sp + sc);
        }
      }
    }
  }
  rep.quotient = (rep.u_h1 + rep.p_hcurl) / hn;
  return rep;
}

// ---------------------------------------------------------------------------
// Mapping properties

FuzzReport mapping_property_fuzz(const DomainSpec& domain, int samples, std::uint64_t seed)
{
  const InnerVariation base = default_variation(domain);
  const double r = base.cutoff.radius;
  const Vec3 c = base.cutoff.center;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  std::vector<geometry::BoundaryPatch> near;
  for (const auto& patch : domain.boundary_patches())
  {
    Vec3 q = c.cwiseMax(patch.lo).cwiseMin(patch.hi);
    if ((q - c).norm() < r)
      near.push_back(patch);
  }

  FuzzReport rep;
  rep.samples = samples;
  for (int i = 0; i < samples; ++i)
  {
    double len = 0.0;
    while (len == 0.0)
      len = base.h0() * unit(rng);
    const Vec3 h = len * geometry::sample_cone_direction(base.cone, unit(rng), unit(rng));
    const InnerVariation iv = with_shift(base, h);

    // a point in the box around the ball; every fourth one on the boundary
    Vec3 x = c + 1.1 * r * Vec3(sym(rng), sym(rng), sym(rng));
    if (i % 4 == 3 && !near.empty())
    {
      const auto& patch = near[static_cast<std::size_t>(unit(rng) * near.size()) % near.size()];
      x = x.cwiseMax(patch.lo).cwiseMin(patch.hi);
      x[patch.axis] = patch.offset;
    }
    const Vec3 y = t_h(iv, x);
    if (!domain.contains(x) && domain.contains(y))
      ++rep.exterior_violations;
    if (domain.contains(x) && !domain.contains(s_h(iv, x)))
      ++rep.interior_violations;
    rep.min_det = std::min(rep.min_det, det_dt_h(iv, x));
    rep.max_roundtrip = std::max(rep.max_roundtrip, (s_h(iv, y) - x).norm());
  }
  return rep;
}

BoundReport uniform_bound(const InnerVariation& iv, int samples, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  const Vec3 c = iv.cutoff.center;
  const double r = iv.cutoff.radius;
  std::vector<Vec3> pts;
  if (iv.h.norm() > 0.0)
  {
    const Vec3 d = iv.h.normalized();
    pts.push_back(c + 0.75 * r * d);
    pts.push_back(c - 0.75 * r * d);
  }
  for (int i = 0; i < samples; ++i)
    pts.push_back(c + r * Vec3(sym(rng), sym(rng), sym(rng)));

  double det_max = 0.0, inv_det_max = 0.0, lip = 0.0, lip_inv = 0.0;
  for (const auto& x : pts)
  {
    const double det = det_dt_h(iv, x);
    det_max = std::max(det_max, det);
    inv_det_max = std::max(inv_det_max, 1.0 / det);
    lip = std::max(lip, Eigen::JacobiSVD<Mat3>(dt_h(iv, x)).singularValues()[0]);
    lip_inv = std::max(lip_inv, Eigen::JacobiSVD<Mat3>(inv_dt_h(iv, x)).singularValues()[0]);
  }
  const double a = iv.h.norm() * iv.cutoff.grad_bound();
  return {det_max + inv_det_max + lip + lip_inv, 2.0 * (1.0 + a) + 2.0 / (1.0 - a)};
}

} // namespace micromorph::transform
