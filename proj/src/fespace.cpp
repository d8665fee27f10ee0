#include "micromorph/fespace.hpp"

#include <unsupported/Eigen/SparseExtra>

#include <cmath>
#include <sstream>

namespace micromorph::fespace
{

namespace
{

std::shared_ptr<const std::vector<bool>> vertex_mask(const Mesh& mesh)
{
  auto mask = std::make_shared<std::vector<bool>>(3 * mesh.num_vertices(), false);
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.boundary_vertex(v))
      for (int c = 0; c < 3; ++c)
        (*mask)[H1VectorSpace::dof(v, c)] = true;
  return mask;
}

std::shared_ptr<const std::vector<bool>> edge_mask(const Mesh& mesh)
{
  const int ne = mesh.num_edges();
  auto mask = std::make_shared<std::vector<bool>>(3 * ne, false);
  for (int e = 0; e < ne; ++e)
    if (mesh.boundary_edge(e))
      for (int r = 0; r < 3; ++r)
        (*mask)[r * ne + e] = true;
  return mask;
}

int locate_or_throw(const Mesh& mesh, const Vec3& x)
{
  const int t = mesh.locate(x);
  if (t < 0)
  {
    std::ostringstream os;
    os << "point (" << x[0] << ", " << x[1] << ", " << x[2] << ") lies outside the mesh";
    throw PointOutsideDomain(os.str());
  }
  return t;
}

} // namespace

H1VectorSpace::H1VectorSpace(std::shared_ptr<const Mesh> mesh)
    : mesh_(std::move(mesh)), mask_(vertex_mask(*mesh_))
{
}

HCurlTensorSpace::HCurlTensorSpace(std::shared_ptr<const Mesh> mesh)
    : mesh_(std::move(mesh)), mask_(edge_mask(*mesh_))
{
}

FieldU zero_field(const H1VectorSpace& space) { return {space, Vector::Zero(space.dim())}; }
FieldP zero_field(const HCurlTensorSpace& space) { return {space, Vector::Zero(space.dim())}; }

void constrain(FieldU& u)
{
  const auto& mask = u.space.boundary_mask();
  for (int i = 0; i < u.space.dim(); ++i)
    if (mask[i])
      u.coeffs[i] = 0.0;
}

void constrain(FieldP& p)
{
  const auto& mask = p.space.boundary_mask();
  for (int i = 0; i < p.space.dim(); ++i)
    if (mask[i])
      p.coeffs[i] = 0.0;
}

// ---------------------------------------------------------------------------
// evaluation

Vec3 edge_basis(const Mesh& mesh, int tet, int k, const std::array<double, 4>& bary)
{
  const auto& g = mesh.grad_lambda(tet);
  const int a = Mesh::local_edges[k][0];
  const int b = Mesh::local_edges[k][1];
  return mesh.tet_edge_signs(tet)[k] * (bary[a] * g[b] - bary[b] * g[a]);
}

Vec3 edge_basis_curl(const Mesh& mesh, int tet, int k)
{
  const auto& g = mesh.grad_lambda(tet);
  const int a = Mesh::local_edges[k][0];
  const int b = Mesh::local_edges[k][1];
  return mesh.tet_edge_signs(tet)[k] * 2.0 * g[a].cross(g[b]);
}

Vec3 u_in_cell(const FieldU& u, int tet, const std::array<double, 4>& bary)
{
  const auto& v = u.space.mesh().tets()[tet];
  Vec3 r = Vec3::Zero();
  for (int a = 0; a < 4; ++a)
    r += bary[a] * u.coeffs.segment<3>(H1VectorSpace::dof(v[a], 0));
  return r;
}

Mat3 du_in_cell(const FieldU& u, int tet)
{
  const auto& mesh = u.space.mesh();
  const auto& v = mesh.tets()[tet];
  const auto& g = mesh.grad_lambda(tet);
  Mat3 r = Mat3::Zero();
  for (int a = 0; a < 4; ++a)
    r += u.coeffs.segment<3>(H1VectorSpace::dof(v[a], 0)) * g[a].transpose();
  return r;
}

Mat3 p_in_cell(const FieldP& p, int tet, const std::array<double, 4>& bary)
{
  const auto& mesh = p.space.mesh();
  const auto& te = mesh.tet_edges(tet);
  Mat3 r = Mat3::Zero();
  for (int k = 0; k < 6; ++k)
  {
    const Vec3 w = edge_basis(mesh, tet, k, bary);
    for (int i = 0; i < 3; ++i)
      r.row(i) += p.coeffs[p.space.dof(i, te[k])] * w.transpose();
  }
  return r;
}

Mat3 curlp_in_cell(const FieldP& p, int tet)
{
  const auto& mesh = p.space.mesh();
  const auto& te = mesh.tet_edges(tet);
  Mat3 r = Mat3::Zero();
  for (int k = 0; k < 6; ++k)
  {
    const Vec3 c = edge_basis_curl(mesh, tet, k);
    for (int i = 0; i < 3; ++i)
      r.row(i) += p.coeffs[p.space.dof(i, te[k])] * c.transpose();
  }
  return r;
}

Vec3 evaluate_u(const FieldU& u, const Vec3& x)
{
  const int t = locate_or_throw(u.space.mesh(), x);
  return u_in_cell(u, t, u.space.mesh().barycentric(t, x));
}

Mat3 evaluate_Du(const FieldU& u, const Vec3& x)
{
  return du_in_cell(u, locate_or_throw(u.space.mesh(), x));
}

Mat3 evaluate_P(const FieldP& p, const Vec3& x)
{
  const int t = locate_or_throw(p.space.mesh(), x);
  return p_in_cell(p, t, p.space.mesh().barycentric(t, x));
}

Mat3 evaluate_CurlP(const FieldP& p, const Vec3& x)
{
  return curlp_in_cell(p, locate_or_throw(p.space.mesh(), x));
}

std::vector<Vec3> evaluate_u(const FieldU& u, std::span<const Vec3> points)
{
  std::vector<Vec3> r;
  r.reserve(points.size());
  for (const auto& x : points)
    r.push_back(evaluate_u(u, x));
  return r;
}

std::vector<Mat3> evaluate_Du(const FieldU& u, std::span<const Vec3> points)
{
  std::vector<Mat3> r;
  r.reserve(points.size());
  for (const auto& x : points)
    r.push_back(evaluate_Du(u, x));
  return r;
}

std::vector<Mat3> evaluate_P(const FieldP& p, std::span<const Vec3> points)
{
  std::vector<Mat3> r;
  r.reserve(points.size());
  for (const auto& x : points)
    r.push_back(evaluate_P(p, x));
  return r;
}

std::vector<Mat3> evaluate_CurlP(const FieldP& p, std::span<const Vec3> points)
{
  std::vector<Mat3> r;
  r.reserve(points.size());
  for (const auto& x : points)
    r.push_back(evaluate_CurlP(p, x));
  return r;
}

// ---------------------------------------------------------------------------
// interpolation

FieldU interpolate_u(const H1VectorSpace& space, const VectorFunction& f)
{
  FieldU u = zero_field(space);
  const auto& verts = space.mesh().vertices();
  for (int v = 0; v < space.mesh().num_vertices(); ++v)
    u.coeffs.segment<3>(H1VectorSpace::dof(v, 0)) = f(verts[v]);
  return u;
}

FieldP interpolate_P(const HCurlTensorSpace& space, const TensorFunction& g)
{
  FieldP p = zero_field(space);
  const auto& mesh = space.mesh();
  const auto& gl = gauss_legendre(5);
  for (int e = 0; e < mesh.num_edges(); ++e)
  {
    const Vec3& xa = mesh.vertices()[mesh.edges()[e][0]];
    const Vec3 t = mesh.vertices()[mesh.edges()[e][1]] - xa;
    Vec3 moment = Vec3::Zero();
    for (std::size_t q = 0; q < gl.nodes.size(); ++q)
      moment += gl.weights[q] * (g(xa + gl.nodes[q] * t) * t);
    for (int i = 0; i < 3; ++i)
      p.coeffs[space.dof(i, e)] = moment[i];
  }
  return p;
}

// ---------------------------------------------------------------------------
// assembly

std::string to_string(FormKind kind)
{
  switch (kind)
  {
  case FormKind::mass_u:
    return "mass_u";
  case FormKind::symgrad_symgrad:
    return "symgrad_symgrad";
  case FormKind::coupling_symgradU_symP:
    return "coupling_symgradU_symP";
  case FormKind::symP_symP:
    return "symP_symP";
  case FormKind::mass_P:
    return "mass_P";
  case FormKind::curlcurl:
    return "curlcurl";
  }
  return "unknown";
}

namespace
{

using Mat9x12 = Eigen::Matrix<double, 9, 12>;
using Mat9x18 = Eigen::Matrix<double, 9, 18>;

struct LocalIndex
{
  std::array<int, 12> u;
  std::array<int, 18> p;
};

LocalIndex local_index(const Mesh& mesh, const HCurlTensorSpace& ps, int offset, int t)
{
  LocalIndex idx{};
  const auto& v = mesh.tets()[t];
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 3; ++k)
      idx.u[3 * a + k] = H1VectorSpace::dof(v[a], k);
  const auto& te = mesh.tet_edges(t);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k)
      idx.p[6 * i + k] = offset + ps.dof(i, te[k]);
  return idx;
}

/// Flattened sym(e_k (x) grad l_a) for every local u dof.
Mat9x12 symgrad_matrix(const std::array<Vec3, 4>& g)
{
  Mat9x12 m = Mat9x12::Zero();
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 3; ++k)
    {
      Mat3 e = Mat3::Zero();
      e.row(k) = g[a].transpose();
      m.col(3 * a + k) = flatten(sym(e));
    }
  return m;
}

/// Flattened (e_i (x) v_k) for per-edge row vectors v_k.
Mat9x18 row_matrix(const std::array<Vec3, 6>& v, bool symmetric)
{
  Mat9x18 m = Mat9x18::Zero();
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 6; ++k)
    {
      Mat3 e = Mat3::Zero();
      e.row(i) = v[k].transpose();
      m.col(6 * i + k) = flatten(symmetric ? sym(e) : e);
    }
  return m;
}

int default_order(FormKind kind, const TensorField* coeff)
{
  const int extra = (coeff != nullptr && !coeff->is_constant()) ? 1 : 0;
  switch (kind)
  {
  case FormKind::symP_symP:
    return 2 + extra;
  case FormKind::coupling_symgradU_symP:
    return 1 + extra;
  case FormKind::symgrad_symgrad:
  case FormKind::curlcurl:
    return extra;
  default:
    return 2;
  }
}

} // namespace

SparseMatrix assemble(FormKind kind, const TensorField* coeff, const H1VectorSpace& us,
                      const HCurlTensorSpace& ps, int quad_order)
{
  const bool needs_coeff = kind != FormKind::mass_u && kind != FormKind::mass_P;
  const TensorField unit = TensorField::identity();
  if (needs_coeff && coeff == nullptr)
    coeff = &unit;
  const Mesh& mesh = us.mesh();
  const int offset = us.dim();
  const int n = us.dim() + ps.dim();
  if (quad_order <= 0)
    quad_order = std::max(2, default_order(kind, needs_coeff ? coeff : nullptr));
  const auto& rule = tet_rule(quad_order);

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_tets()) *
                   (kind == FormKind::mass_u || kind == FormKind::symgrad_symgrad ? 144 : 648));

  Eigen::Matrix<double, 12, 12> kuu;
  Eigen::Matrix<double, 12, 18> kup;
  Eigen::Matrix<double, 18, 18> kpp;

  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const auto& g = mesh.grad_lambda(t);
    const double vol = mesh.volume(t);
    const LocalIndex idx = local_index(mesh, ps, offset, t);
    kuu.setZero();
    kup.setZero();
    kpp.setZero();

    std::array<Vec3, 6> curls;
    for (int k = 0; k < 6; ++k)
      curls[k] = edge_basis_curl(mesh, t, k);

    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      const auto& bary = rule.points[q];
      const double w = 6.0 * vol * rule.weights[q];
      const Vec3 x = mesh.point(t, bary);
      const Mat9 c = needs_coeff ? coeff->at(x) : Mat9::Identity();
      std::array<Vec3, 6> basis;
      for (int k = 0; k < 6; ++k)
        basis[k] = edge_basis(mesh, t, k, bary);

      switch (kind)
      {
      case FormKind::mass_u:
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            for (int k = 0; k < 3; ++k)
              kuu(3 * a + k, 3 * b + k) += w * bary[a] * bary[b];
        break;
      case FormKind::symgrad_symgrad:
      {
        const Mat9x12 gs = symgrad_matrix(g);
        kuu.noalias() += w * gs.transpose() * (c * gs);
        break;
      }
      case FormKind::coupling_symgradU_symP:
      {
        const Mat9x12 gs = symgrad_matrix(g);
        const Mat9x18 pm = row_matrix(basis, true);
        kup.noalias() += w * gs.transpose() * (c * pm);
        break;
      }
      case FormKind::symP_symP:
      {
        const Mat9x18 pm = row_matrix(basis, true);
        kpp.noalias() += w * pm.transpose() * (c * pm);
        break;
      }
      case FormKind::mass_P:
      {
        const Mat9x18 pm = row_matrix(basis, false);
        kpp.noalias() += w * pm.transpose() * pm;
        break;
      }
      case FormKind::curlcurl:
      {
        const Mat9x18 cm = row_matrix(curls, false);
        kpp.noalias() += w * cm.transpose() * (c * cm);
        break;
      }
      }
    }

    switch (kind)
    {
    case FormKind::mass_u:
    case FormKind::symgrad_symgrad:
    {
      const Eigen::Matrix<double, 12, 12> s = 0.5 * (kuu + kuu.transpose());
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j)
          if (s(i, j) != 0.0)
            triplets.emplace_back(idx.u[i], idx.u[j], s(i, j));
      break;
    }
    case FormKind::coupling_symgradU_symP:
      for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 18; ++j)
          if (kup(i, j) != 0.0)
          {
            triplets.emplace_back(idx.u[i], idx.p[j], kup(i, j));
            triplets.emplace_back(idx.p[j], idx.u[i], kup(i, j));
          }
      break;
    default:
    {
      const Eigen::Matrix<double, 18, 18> s = 0.5 * (kpp + kpp.transpose());
      for (int i = 0; i < 18; ++i)
        for (int j = 0; j < 18; ++j)
          if (s(i, j) != 0.0)
            triplets.emplace_back(idx.p[i], idx.p[j], s(i, j));
      break;
    }
    }
  }

  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

void apply_essential_bc(SparseMatrix& matrix, Vector& rhs, const std::vector<bool>& mask)
{
  matrix.prune([&](Eigen::Index row, Eigen::Index col, double) { return !mask[row] && !mask[col]; });
  std::vector<Eigen::Triplet<double>> diag;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i])
    {
      diag.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
      rhs[static_cast<Eigen::Index>(i)] = 0.0;
    }
  if (diag.empty())
    return;
  SparseMatrix d(matrix.rows(), matrix.cols());
  d.setFromTriplets(diag.begin(), diag.end());
  matrix += d;
}

std::vector<bool> combined_mask(const H1VectorSpace& us, const HCurlTensorSpace& ps)
{
  std::vector<bool> mask = us.boundary_mask();
  mask.insert(mask.end(), ps.boundary_mask().begin(), ps.boundary_mask().end());
  return mask;
}

Vector load_vector(const H1VectorSpace& us, const HCurlTensorSpace& ps, const VectorFunction& f,
                   const TensorFunction& m, int quad_order)
{
  const Mesh& mesh = us.mesh();
  const int offset = us.dim();
  Vector b = Vector::Zero(us.dim() + ps.dim());
  const auto& rule = tet_rule(quad_order);
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const double vol = mesh.volume(t);
    const LocalIndex idx = local_index(mesh, ps, offset, t);
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      const auto& bary = rule.points[q];
      const double w = 6.0 * vol * rule.weights[q];
      const Vec3 x = mesh.point(t, bary);
      if (f)
      {
        const Vec3 fx = f(x);
        for (int a = 0; a < 4; ++a)
          for (int k = 0; k < 3; ++k)
            b[idx.u[3 * a + k]] += w * bary[a] * fx[k];
      }
      if (m)
      {
        const Mat3 mx = m(x);
        for (int k = 0; k < 6; ++k)
        {
          const Vec3 wk = edge_basis(mesh, t, k, bary);
          for (int i = 0; i < 3; ++i)
            b[idx.p[6 * i + k]] += w * mx.row(i).dot(wk);
        }
      }
    }
  }
  return b;
}

// ---------------------------------------------------------------------------
// norms

double integrate(const Mesh& mesh, const std::function<double(int, const Vec3&)>& f, int quad_order)
{
  const auto& rule = tet_rule(quad_order);
  double s = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      cell += rule.weights[q] * f(t, mesh.point(t, rule.points[q]));
    s += 6.0 * mesh.volume(t) * cell;
  }
  return s;
}

Norms norms(const FieldU& u)
{
  const Mesh& mesh = u.space.mesh();
  const auto& rule = tet_rule(2);
  double l2 = 0.0, grad = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const double vol = mesh.volume(t);
    for (std::size_t q = 0; q < rule.size(); ++q)
      l2 += 6.0 * vol * rule.weights[q] * u_in_cell(u, t, rule.points[q]).squaredNorm();
    grad += vol * du_in_cell(u, t).squaredNorm();
  }
  return {std::sqrt(l2), std::sqrt(l2 + grad)};
}

Norms norms(const FieldP& p)
{
  const Mesh& mesh = p.space.mesh();
  const auto& rule = tet_rule(2);
  double l2 = 0.0, curl = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
  {
    const double vol = mesh.volume(t);
    for (std::size_t q = 0; q < rule.size(); ++q)
      l2 += 6.0 * vol * rule.weights[q] * p_in_cell(p, t, rule.points[q]).squaredNorm();
    curl += vol * curlp_in_cell(p, t).squaredNorm();
  }
  return {std::sqrt(l2), std::sqrt(l2 + curl)};
}

double l2_error(const FieldU& u, const VectorFunction& exact, int quad_order)
{
  const Mesh& mesh = u.space.mesh();
  const auto& rule = tet_rule(quad_order);
  double s = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      const Vec3 x = mesh.point(t, rule.points[q]);
      s += 6.0 * mesh.volume(t) * rule.weights[q] * (u_in_cell(u, t, rule.points[q]) - exact(x)).squaredNorm();
    }
  return std::sqrt(s);
}

double l2_error(const FieldP& p, const TensorFunction& exact, int quad_order)
{
  const Mesh& mesh = p.space.mesh();
  const auto& rule = tet_rule(quad_order);
  double s = 0.0;
  for (int t = 0; t < mesh.num_tets(); ++t)
    for (std::size_t q = 0; q < rule.size(); ++q)
    {
      const Vec3 x = mesh.point(t, rule.points[q]);
      s += 6.0 * mesh.volume(t) * rule.weights[q] * (p_in_cell(p, t, rule.points[q]) - exact(x)).squaredNorm();
    }
  return std::sqrt(s);
}

void export_matrix_market(const SparseMatrix& matrix, const std::string& path)
{
  if (!Eigen::saveMarket(matrix, path))
    throw Error("could not write matrix market file " + path);
}

} // namespace micromorph::fespace
