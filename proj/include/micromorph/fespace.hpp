#pragma once

#include "micromorph/geometry.hpp"
#include "micromorph/quadrature.hpp"
#include "micromorph/tensor_field.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace micromorph::fespace
{

using geometry::Mesh;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;

using VectorFunction = std::function<Vec3(const Vec3&)>;
using TensorFunction = std::function<Mat3(const Vec3&)>;

/// Continuous P1 vector fields; dof 3*v + component.
class H1VectorSpace
{
public:
  explicit H1VectorSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int dim() const { return 3 * mesh_->num_vertices(); }
  static int dof(int vertex, int component) { return 3 * vertex + component; }
  /// All components at boundary vertices.
  const std::vector<bool>& boundary_mask() const { return *mask_; }

private:
  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const std::vector<bool>> mask_;
};

/// Lowest-order first-kind edge elements, one independent field per row of
/// the tensor; dof row * #edges + edge. Global edge direction runs from the
/// lower to the higher vertex id.
class HCurlTensorSpace
{
public:
  explicit HCurlTensorSpace(std::shared_ptr<const Mesh> mesh);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int dim() const { return 3 * mesh_->num_edges(); }
  int dof(int row, int edge) const { return row * mesh_->num_edges() + edge; }
  /// Edges on the boundary, all rows: zero tangential trace row-wise.
  const std::vector<bool>& boundary_mask() const { return *mask_; }

private:
  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const std::vector<bool>> mask_;
};

struct FieldU
{
  H1VectorSpace space;
  Vector coeffs;
};

struct FieldP
{
  HCurlTensorSpace space;
  Vector coeffs;
};

FieldU zero_field(const H1VectorSpace& space);
FieldP zero_field(const HCurlTensorSpace& space);

/// Zero out the constrained dofs.
void constrain(FieldU& u);
void constrain(FieldP& p);

// -- evaluation -------------------------------------------------------------

/// Whitney function of local edge k (global orientation applied).
Vec3 edge_basis(const Mesh& mesh, int tet, int k, const std::array<double, 4>& bary);
/// Its curl, 2 grad(l_a) x grad(l_b) (global orientation applied).
Vec3 edge_basis_curl(const Mesh& mesh, int tet, int k);

Vec3 u_in_cell(const FieldU& u, int tet, const std::array<double, 4>& bary);
Mat3 du_in_cell(const FieldU& u, int tet);
Mat3 p_in_cell(const FieldP& p, int tet, const std::array<double, 4>& bary);
Mat3 curlp_in_cell(const FieldP& p, int tet);

/// Point evaluation. On cell interfaces the lowest-id containing cell is used.
/// Throws PointOutsideDomain for points outside the closure of the mesh.
Vec3 evaluate_u(const FieldU& u, const Vec3& x);
Mat3 evaluate_Du(const FieldU& u, const Vec3& x);
Mat3 evaluate_P(const FieldP& p, const Vec3& x);
Mat3 evaluate_CurlP(const FieldP& p, const Vec3& x);

std::vector<Vec3> evaluate_u(const FieldU& u, std::span<const Vec3> points);
std::vector<Mat3> evaluate_Du(const FieldU& u, std::span<const Vec3> points);
std::vector<Mat3> evaluate_P(const FieldP& p, std::span<const Vec3> points);
std::vector<Mat3> evaluate_CurlP(const FieldP& p, std::span<const Vec3> points);

// -- interpolation ----------------------------------------------------------

/// Vertex values.
FieldU interpolate_u(const H1VectorSpace& space, const VectorFunction& f);
/// Tangential edge moments of each row: int_e <G_row, t> with t = x_b - x_a.
FieldP interpolate_P(const HCurlTensorSpace& space, const TensorFunction& g);

// -- assembly ---------------------------------------------------------------

enum class FormKind
{
  mass_u,                 ///< <u, v>
  symgrad_symgrad,        ///< <C sym Du, sym Dv>
  coupling_symgradU_symP, ///< <C sym Du, sym Q> + transpose
  symP_symP,              ///< <C sym P, sym Q>
  mass_P,                 ///< <P, Q>
  curlcurl,               ///< <C Curl P, Curl Q>
};

std::string to_string(FormKind kind);

/// Assemble a bilinear form on the combined (u, P) index space of size
/// dim_u + dim_P; P dofs are offset by dim_u. mass forms ignore `coeff`.
/// quad_order <= 0 picks the lowest exact order for the coefficient.
SparseMatrix assemble(FormKind kind, const TensorField* coeff, const H1VectorSpace& us,
                      const HCurlTensorSpace& ps, int quad_order = 0);

/// Rows and columns of masked dofs replaced by identity, rhs zeroed there.
void apply_essential_bc(SparseMatrix& matrix, Vector& rhs, const std::vector<bool>& mask);

/// Boundary mask on the combined (u, P) index space.
std::vector<bool> combined_mask(const H1VectorSpace& us, const HCurlTensorSpace& ps);

/// Load vector on the combined space: (int f.v, int <M, Q>).
Vector load_vector(const H1VectorSpace& us, const HCurlTensorSpace& ps, const VectorFunction& f,
                   const TensorFunction& m, int quad_order = 6);

// -- norms ------------------------------------------------------------------

struct Norms
{
  double l2 = 0.0;
  double full = 0.0; ///< H1 for u, H(Curl) for P
};

Norms norms(const FieldU& u);
Norms norms(const FieldP& p);

double l2_error(const FieldU& u, const VectorFunction& exact, int quad_order = 6);
double l2_error(const FieldP& p, const TensorFunction& exact, int quad_order = 6);

/// Integrate a scalar function over the mesh cells with the given rule.
double integrate(const Mesh& mesh, const std::function<double(int tet, const Vec3& x)>& f,
                 int quad_order);

void export_matrix_market(const SparseMatrix& matrix, const std::string& path);

} // namespace micromorph::fespace
