#include "micromorph/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace micromorph::geometry
{

// ---------------------------------------------------------------------------
// DomainSpec

std::string DomainSpec::name() const
{
  switch (shape)
  {
  case Shape::unit_cube:
    return "unit_cube";
  case Shape::l_prism:
    return "l_prism";
  case Shape::box:
    return "box";
  }
  return "unknown";
}

Vec3 DomainSpec::bbox_max() const
{
  switch (shape)
  {
  case Shape::unit_cube:
    return {1.0, 1.0, 1.0};
  case Shape::l_prism:
    return {2.0, 2.0, 1.0};
  case Shape::box:
    return extent;
  }
  return extent;
}

double DomainSpec::volume() const
{
  switch (shape)
  {
  case Shape::unit_cube:
    return 1.0;
  case Shape::l_prism:
    return 3.0;
  case Shape::box:
    return extent.prod();
  }
  return 0.0;
}

bool DomainSpec::contains(const Vec3& x) const
{
  const Vec3 hi = bbox_max();
  for (int i = 0; i < 3; ++i)
    if (!(x[i] > 0.0 && x[i] < hi[i]))
      return false;
  if (shape == Shape::l_prism)
    return x[0] < 1.0 || x[1] < 1.0;
  return true;
}

bool DomainSpec::contains_closure(const Vec3& x, double tol) const
{
  const Vec3 hi = bbox_max();
  for (int i = 0; i < 3; ++i)
    if (x[i] < -tol || x[i] > hi[i] + tol)
      return false;
  if (shape == Shape::l_prism)
    return x[0] <= 1.0 + tol || x[1] <= 1.0 + tol;
  return true;
}

double DomainSpec::boundary_distance(const Vec3& x) const
{
  if (!contains(x))
    return 0.0;
  const Vec3 hi = bbox_max();
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    d = std::min({d, x[i], hi[i] - x[i]});
  if (shape == Shape::l_prism)
  {
    // re-entrant faces {x0 = 1, x1 in [1,2]} and {x1 = 1, x0 in [1,2]}
    const double a = x[1] >= 1.0 ? std::abs(x[0] - 1.0) : std::hypot(x[0] - 1.0, x[1] - 1.0);
    const double b = x[0] >= 1.0 ? std::abs(x[1] - 1.0) : std::hypot(x[0] - 1.0, x[1] - 1.0);
    d = std::min({d, a, b});
  }
  return d;
}

std::vector<BoundaryPatch> DomainSpec::boundary_patches() const
{
  std::vector<BoundaryPatch> patches;
  const Vec3 hi = bbox_max();
  auto add = [&](int axis, double sign, double offset, Vec3 lo, Vec3 up) {
    Vec3 n = Vec3::Zero();
    n[axis] = sign;
    lo[axis] = offset;
    up[axis] = offset;
    patches.push_back({n, axis, offset, lo, up});
  };
  if (shape != Shape::l_prism)
  {
    for (int a = 0; a < 3; ++a)
    {
      add(a, -1.0, 0.0, Vec3::Zero(), hi);
      add(a, 1.0, hi[a], Vec3::Zero(), hi);
    }
    return patches;
  }
  add(0, -1.0, 0.0, Vec3::Zero(), hi);
  add(1, -1.0, 0.0, Vec3::Zero(), hi);
  add(2, -1.0, 0.0, Vec3::Zero(), hi);
  add(2, 1.0, 1.0, Vec3::Zero(), hi); // top face; the L cut is handled in patch tests
  add(0, 1.0, 2.0, Vec3(0, 0, 0), Vec3(2, 1, 1));
  add(1, 1.0, 2.0, Vec3(0, 0, 0), Vec3(1, 2, 1));
  add(0, 1.0, 1.0, Vec3(1, 1, 0), Vec3(1, 2, 1));
  add(1, 1.0, 1.0, Vec3(1, 1, 0), Vec3(2, 1, 1));
  return patches;
}

Vec3 DomainSpec::default_boundary_point() const
{
  if (shape == Shape::l_prism)
    return {1.0, 1.0, 0.5};
  const Vec3 hi = bbox_max();
  return {0.5 * hi[0], 0.5 * hi[1], 0.0};
}

bool point_in_domain(const DomainSpec& domain, const Vec3& x) { return domain.contains(x); }

// ---------------------------------------------------------------------------
// Mesh

namespace
{

std::int64_t edge_key(int a, int b, std::int64_t nv) { return static_cast<std::int64_t>(a) * nv + b; }

std::int64_t face_key(std::array<int, 3> f, std::int64_t nv)
{
  std::sort(f.begin(), f.end());
  return (static_cast<std::int64_t>(f[0]) * nv + f[1]) * nv + f[2];
}

double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d)
{
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

} // namespace

Mesh::Mesh(DomainSpec domain, std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets)
    : domain_(domain), vertices_(std::move(vertices)), tets_(std::move(tets))
{
  for (auto& t : tets_)
    if (tet_signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]) < 0.0)
      std::swap(t[2], t[3]);
  build_connectivity();
  build_locator();
}

void Mesh::build_connectivity()
{
  const std::int64_t nv = num_vertices();
  const int nt = num_tets();

  std::vector<std::int64_t> ekeys;
  std::vector<std::int64_t> fkeys;
  ekeys.reserve(6 * nt);
  fkeys.reserve(4 * nt);
  for (const auto& t : tets_)
  {
    for (const auto& le : local_edges)
    {
      const int a = std::min(t[le[0]], t[le[1]]);
      const int b = std::max(t[le[0]], t[le[1]]);
      ekeys.push_back(edge_key(a, b, nv));
    }
    for (int skip = 0; skip < 4; ++skip)
    {
      std::array<int, 3> f{};
      int k = 0;
      for (int i = 0; i < 4; ++i)
        if (i != skip)
          f[k++] = t[i];
      fkeys.push_back(face_key(f, nv));
    }
  }
  std::vector<std::int64_t> all_faces = fkeys;
  std::sort(ekeys.begin(), ekeys.end());
  ekeys.erase(std::unique(ekeys.begin(), ekeys.end()), ekeys.end());
  std::sort(fkeys.begin(), fkeys.end());
  fkeys.erase(std::unique(fkeys.begin(), fkeys.end()), fkeys.end());

  edges_.resize(ekeys.size());
  for (std::size_t e = 0; e < ekeys.size(); ++e)
    edges_[e] = {static_cast<int>(ekeys[e] / nv), static_cast<int>(ekeys[e] % nv)};
  faces_.resize(fkeys.size());
  for (std::size_t f = 0; f < fkeys.size(); ++f)
  {
    const std::int64_t k = fkeys[f];
    faces_[f] = {static_cast<int>(k / (nv * nv)), static_cast<int>((k / nv) % nv),
                 static_cast<int>(k % nv)};
  }

  auto find_edge = [&](int a, int b) {
    if (a > b)
      std::swap(a, b);
    return static_cast<int>(std::lower_bound(ekeys.begin(), ekeys.end(), edge_key(a, b, nv)) -
                            ekeys.begin());
  };
  auto find_face = [&](std::int64_t key) {
    return static_cast<int>(std::lower_bound(fkeys.begin(), fkeys.end(), key) - fkeys.begin());
  };

  tet_edges_.resize(nt);
  tet_edge_signs_.resize(nt);
  tet_faces_.resize(nt);
  face_count_.assign(faces_.size(), 0);
  for (int t = 0; t < nt; ++t)
  {
    for (int k = 0; k < 6; ++k)
    {
      const int a = tets_[t][local_edges[k][0]];
      const int b = tets_[t][local_edges[k][1]];
      tet_edges_[t][k] = find_edge(a, b);
      tet_edge_signs_[t][k] = a < b ? 1 : -1;
    }
    for (int k = 0; k < 4; ++k)
    {
      const int f = find_face(all_faces[4 * t + k]);
      tet_faces_[t][k] = f;
      ++face_count_[f];
    }
  }

  boundary_vertex_.assign(vertices_.size(), false);
  boundary_edge_.assign(edges_.size(), false);
  for (std::size_t f = 0; f < faces_.size(); ++f)
  {
    if (face_count_[f] != 1)
      continue;
    const auto& fv = faces_[f];
    for (int i = 0; i < 3; ++i)
    {
      boundary_vertex_[fv[i]] = true;
      boundary_edge_[find_edge(fv[i], fv[(i + 1) % 3])] = true;
    }
  }

  volume_.resize(nt);
  grad_lambda_.resize(nt);
  inverse_jacobian_.resize(nt);
  for (int t = 0; t < nt; ++t)
  {
    const auto& v = tets_[t];
    Mat3 jac;
    jac.col(0) = vertices_[v[1]] - vertices_[v[0]];
    jac.col(1) = vertices_[v[2]] - vertices_[v[0]];
    jac.col(2) = vertices_[v[3]] - vertices_[v[0]];
    const Mat3 inv = jac.inverse();
    inverse_jacobian_[t] = inv;
    volume_[t] = std::abs(jac.determinant()) / 6.0;
    grad_lambda_[t][1] = inv.row(0).transpose();
    grad_lambda_[t][2] = inv.row(1).transpose();
    grad_lambda_[t][3] = inv.row(2).transpose();
    grad_lambda_[t][0] = -(grad_lambda_[t][1] + grad_lambda_[t][2] + grad_lambda_[t][3]);
  }
}

void Mesh::build_locator()
{
  const Vec3 lo = domain_.bbox_min();
  const Vec3 hi = domain_.bbox_max();
  const double cell = std::cbrt(6.0 * domain_.volume() / std::max(1, num_tets()));
  for (int i = 0; i < 3; ++i)
    bucket_dims_[i] = std::max(1, static_cast<int>(std::ceil((hi[i] - lo[i]) / cell)));
  bucket_origin_ = lo;
  for (int i = 0; i < 3; ++i)
    bucket_size_[i] = (hi[i] - lo[i]) / bucket_dims_[i];

  const int nb = bucket_dims_[0] * bucket_dims_[1] * bucket_dims_[2];
  std::vector<std::vector<int>> lists(nb);
  constexpr double pad = 1e-10;
  for (int t = 0; t < num_tets(); ++t)
  {
    Vec3 tmin = vertices_[tets_[t][0]];
    Vec3 tmax = tmin;
    for (int k = 1; k < 4; ++k)
    {
      tmin = tmin.cwiseMin(vertices_[tets_[t][k]]);
      tmax = tmax.cwiseMax(vertices_[tets_[t][k]]);
    }
    std::array<int, 3> b0{}, b1{};
    for (int i = 0; i < 3; ++i)
    {
      b0[i] = std::clamp(static_cast<int>(std::floor((tmin[i] - pad - lo[i]) / bucket_size_[i])), 0,
                         bucket_dims_[i] - 1);
      b1[i] = std::clamp(static_cast<int>(std::floor((tmax[i] + pad - lo[i]) / bucket_size_[i])), 0,
                         bucket_dims_[i] - 1);
    }
    for (int k = b0[2]; k <= b1[2]; ++k)
      for (int j = b0[1]; j <= b1[1]; ++j)
        for (int i = b0[0]; i <= b1[0]; ++i)
          lists[(k * bucket_dims_[1] + j) * bucket_dims_[0] + i].push_back(t);
  }
  bucket_start_.assign(nb + 1, 0);
  for (int b = 0; b < nb; ++b)
    bucket_start_[b + 1] = bucket_start_[b] + static_cast<int>(lists[b].size());
  bucket_tets_.reserve(bucket_start_[nb]);
  for (const auto& l : lists)
    bucket_tets_.insert(bucket_tets_.end(), l.begin(), l.end());
}

double Mesh::signed_volume(int t) const
{
  const auto& v = tets_[t];
  return tet_signed_volume(vertices_[v[0]], vertices_[v[1]], vertices_[v[2]], vertices_[v[3]]);
}

double Mesh::total_volume() const
{
  double s = 0.0;
  for (double v : volume_)
    s += v;
  return s;
}

double Mesh::boundary_area() const
{
  double s = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f)
  {
    if (face_count_[f] != 1)
      continue;
    const auto& v = faces_[f];
    s += 0.5 * (vertices_[v[1]] - vertices_[v[0]]).cross(vertices_[v[2]] - vertices_[v[0]]).norm();
  }
  return s;
}

double Mesh::max_edge_length() const
{
  double m = 0.0;
  for (const auto& e : edges_)
    m = std::max(m, (vertices_[e[1]] - vertices_[e[0]]).norm());
  return m;
}

std::array<double, 4> Mesh::barycentric(int t, const Vec3& x) const
{
  const Vec3 l = inverse_jacobian_[t] * (x - vertices_[tets_[t][0]]);
  return {1.0 - l.sum(), l[0], l[1], l[2]};
}

Vec3 Mesh::point(int t, const std::array<double, 4>& bary) const
{
  const auto& v = tets_[t];
  return bary[0] * vertices_[v[0]] + bary[1] * vertices_[v[1]] + bary[2] * vertices_[v[2]] +
         bary[3] * vertices_[v[3]];
}

int Mesh::locate(const Vec3& x) const
{
  std::array<int, 3> b{};
  for (int i = 0; i < 3; ++i)
  {
    const double s = (x[i] - bucket_origin_[i]) / bucket_size_[i];
    if (s < -1e-9 || s > bucket_dims_[i] + 1e-9)
      return -1;
    b[i] = std::clamp(static_cast<int>(std::floor(s)), 0, bucket_dims_[i] - 1);
  }
  const int id = (b[2] * bucket_dims_[1] + b[1]) * bucket_dims_[0] + b[0];
  for (int k = bucket_start_[id]; k < bucket_start_[id + 1]; ++k)
  {
    const int t = bucket_tets_[k];
    const auto l = barycentric(t, x);
    if (l[0] >= -1e-12 && l[1] >= -1e-12 && l[2] >= -1e-12 && l[3] >= -1e-12)
      return t;
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Mesh construction

Mesh build_mesh(const DomainSpec& domain, int n)
{
  if (n < 1)
    throw std::invalid_argument("build_mesh: n must be >= 1");
  const Vec3 hi = domain.bbox_max();
  std::array<int, 3> cells{};
  for (int i = 0; i < 3; ++i)
    cells[i] = std::max(1, static_cast<int>(std::lround(hi[i] * n)));

  auto cell_used = [&](int i, int j, int) {
    if (domain.shape != Shape::l_prism)
      return true;
    return !(i >= n && j >= n);
  };

  const int nx = cells[0] + 1, ny = cells[1] + 1, nz = cells[2] + 1;
  std::vector<int> id(static_cast<std::size_t>(nx) * ny * nz, -1);
  auto gid = [&](int i, int j, int k) -> int& { return id[(static_cast<std::size_t>(k) * ny + j) * nx + i]; };

  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i)
        if (cell_used(i, j, k))
          for (int c = 0; c < 8; ++c)
            gid(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) = 0;

  std::vector<Vec3> vertices;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (gid(i, j, k) == 0)
        {
          gid(i, j, k) = static_cast<int>(vertices.size());
          vertices.emplace_back(hi[0] * i / cells[0], hi[1] * j / cells[1], hi[2] * k / cells[2]);
        }

  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < cells[2]; ++k)
    for (int j = 0; j < cells[1]; ++j)
      for (int i = 0; i < cells[0]; ++i)
      {
        if (!cell_used(i, j, k))
          continue;
        for (const auto& p : perms)
        {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> t{};
          t[0] = gid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s)
          {
            ++c[p[s]];
            t[s + 1] = gid(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
      }
  return Mesh(domain, std::move(vertices), std::move(tets));
}

Mesh refine(const Mesh& mesh)
{
  std::vector<Vec3> vertices = mesh.vertices();
  const int nv = mesh.num_vertices();
  for (const auto& e : mesh.edges())
    vertices.push_back(0.5 * (vertices[e[0]] + vertices[e[1]]));

  std::vector<std::array<int, 4>> tets;
  tets.reserve(8 * mesh.num_tets());
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const auto& v = mesh.tets()[t];
    const auto& te = mesh.tet_edges(t);
    // midpoint of local edge k
    std::array<int, 6> m{};
    for (int k = 0; k < 6; ++k)
      m[k] = nv + te[k];
    // local edges: 0:(0,1) 1:(0,2) 2:(0,3) 3:(1,2) 4:(1,3) 5:(2,3)
    tets.push_back({v[0], m[0], m[1], m[2]});
    tets.push_back({m[0], v[1], m[3], m[4]});
    tets.push_back({m[1], m[3], v[2], m[5]});
    tets.push_back({m[2], m[4], m[5], v[3]});

    // inner octahedron, split along its shortest diagonal
    static constexpr std::array<std::array<int, 2>, 3> diagonals{{{0, 5}, {1, 4}, {2, 3}}};
    static constexpr std::array<std::array<int, 4>, 3> rings{
        {{1, 2, 4, 3}, {0, 2, 5, 3}, {0, 1, 5, 4}}};
    int best = 0;
    double best_len = std::numeric_limits<double>::infinity();
    for (int d = 0; d < 3; ++d)
    {
      const double len = (vertices[m[diagonals[d][0]]] - vertices[m[diagonals[d][1]]]).norm();
      if (len < best_len - 1e-14)
      {
        best_len = len;
        best = d;
      }
    }
    const auto& ring = rings[best];
    for (int s = 0; s < 4; ++s)
      tets.push_back({m[diagonals[best][0]], m[diagonals[best][1]], m[ring[s]], m[ring[(s + 1) % 4]]});
  }
  return Mesh(mesh.domain(), std::move(vertices), std::move(tets));
}

// ---------------------------------------------------------------------------
// Exterior cones

namespace
{

double distance_to_patch(const BoundaryPatch& p, const Vec3& x)
{
  const Vec3 c = x.cwiseMax(p.lo).cwiseMin(p.hi);
  return (x - c).norm();
}

bool on_patch(const DomainSpec& domain, const BoundaryPatch& p, const Vec3& x, double tol)
{
  if (distance_to_patch(p, x) > tol)
    return false;
  // the top/bottom faces of the L-prism exclude the removed quadrant
  if (domain.shape == Shape::l_prism && p.axis == 2)
    return x[0] <= 1.0 + tol || x[1] <= 1.0 + tol;
  return true;
}

Vec3 orthogonal_unit(const Vec3& a)
{
  const Vec3 trial = std::abs(a[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return a.cross(trial).normalized();
}

} // namespace

bool ConeSpec::contains_direction(const Vec3& h) const
{
  const double n = h.norm();
  if (n == 0.0)
    return false;
  return std::acos(std::clamp(h.dot(axis) / n, -1.0, 1.0)) < half_angle;
}

Vec3 sample_cone_direction(const ConeSpec& cone, double u1, double u2)
{
  const double cos_t = 1.0 - u1 * (1.0 - std::cos(cone.half_angle));
  const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
  const double phi = 2.0 * std::numbers::pi * u2;
  const Vec3 e1 = orthogonal_unit(cone.axis);
  const Vec3 e2 = cone.axis.cross(e1);
  return cos_t * cone.axis + sin_t * (std::cos(phi) * e1 + std::sin(phi) * e2);
}

ConeSpec exterior_cone(const DomainSpec& domain, const Vec3& x0, double neighborhood, double rho)
{
  constexpr double tol = 1e-12;
  if (!domain.contains_closure(x0, tol) || domain.boundary_distance(x0) > tol)
    throw NotOnBoundary("exterior_cone: point is not on the boundary of " + domain.name());

  // Faces closer than 2 rho take part in the cone, so points near an edge get
  // the edge cone.
  Vec3 axis = Vec3::Zero();
  int active = 0;
  std::vector<std::pair<double, Vec3>> inactive;
  for (const auto& p : domain.boundary_patches())
  {
    const double d = distance_to_patch(p, x0);
    if (d <= 2.0 * rho)
    {
      axis += p.normal;
      ++active;
    }
    else
      inactive.emplace_back(d, p.normal);
  }
  if (active == 0)
    throw NotOnBoundary("exterior_cone: no boundary face contains the point");
  if (axis.norm() < 1e-12)
    throw NumericalError("exterior_cone: domain is thinner than 2 rho at the point");

  ConeSpec cone;
  cone.axis = axis.normalized();
  cone.half_angle = active == 1 ? std::numbers::pi / 4.0 : std::numbers::pi / 8.0;
  cone.rho = rho;
  cone.x0 = x0;
  // a shift in the cone moves at most rho cos(angle(axis, n) - half_angle)
  // across a plane with normal n
  cone.neighborhood = neighborhood;
  for (const auto& [d, n] : inactive)
  {
    const double tilt = std::acos(std::clamp(std::abs(cone.axis.dot(n)), 0.0, 1.0));
    const double reach = rho * std::cos(std::max(0.0, tilt - cone.half_angle));
    cone.neighborhood = std::min(cone.neighborhood, d - reach);
  }
  return cone;
}

bool verify_exterior_cone(const DomainSpec& domain, const ConeSpec& cone, int samples,
                          std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<BoundaryPatch> near;
  for (const auto& p : domain.boundary_patches())
    if (distance_to_patch(p, cone.x0) < cone.neighborhood)
      near.push_back(p);
  if (near.empty())
    return false;

  auto test = [&](const Vec3& x) {
    const Vec3 dir = sample_cone_direction(cone, unit(rng), unit(rng));
    // open cone and |h| < rho
    const double len = cone.rho * (1.0 - unit(rng));
    return !domain.contains(x + len * dir);
  };

  if (!test(cone.x0))
    return false;
  int done = 0;
  for (int attempt = 0; done < samples && attempt < 100 * samples; ++attempt)
  {
    const auto& p = near[attempt % near.size()];
    Vec3 x;
    for (int i = 0; i < 3; ++i)
    {
      const double lo = std::max(p.lo[i], cone.x0[i] - cone.neighborhood);
      const double hi = std::min(p.hi[i], cone.x0[i] + cone.neighborhood);
      x[i] = lo + (hi - lo) * unit(rng);
    }
    if ((x - cone.x0).norm() >= cone.neighborhood || !on_patch(domain, p, x, 1e-12))
      continue;
    if (!test(x))
      return false;
    ++done;
  }
  return done >= samples;
}

} // namespace micromorph::geometry
