#pragma once

#include "micromorph/common.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace micromorph::geometry
{

enum class Shape
{
  unit_cube,
  l_prism, ///< (0,2)^2 minus [1,2)^2, times (0,1)
  box,
};

/// A planar piece of the boundary with its outward normal.
struct BoundaryPatch
{
  Vec3 normal;
  int axis;      ///< normal is +-e_axis
  double offset; ///< plane x[axis] == offset
  Vec3 lo, hi;   ///< closed rectangle spanned by the patch
};

/// A bounded Lipschitz polyhedron with exact membership tests.
struct DomainSpec
{
  Shape shape = Shape::unit_cube;
  Vec3 extent{1.0, 1.0, 1.0}; ///< only used by Shape::box

  static DomainSpec unit_cube() { return {}; }
  static DomainSpec l_prism() { return {Shape::l_prism, {2.0, 2.0, 1.0}}; }
  static DomainSpec box(double a, double b, double c) { return {Shape::box, {a, b, c}}; }

  std::string name() const;
  Vec3 bbox_min() const { return Vec3::Zero(); }
  Vec3 bbox_max() const;
  double volume() const;
  double diameter() const { return bbox_max().norm(); }

  /// Open-set membership.
  bool contains(const Vec3& x) const;
  /// Membership in the closure, with an absolute slack.
  bool contains_closure(const Vec3& x, double tol = 1e-12) const;
  /// Euclidean distance to the boundary for x in the closure, 0 outside.
  double boundary_distance(const Vec3& x) const;

  std::vector<BoundaryPatch> boundary_patches() const;

  /// Point on the re-entrant edge (L-prism) or a face centre (boxes).
  Vec3 default_boundary_point() const;
};

/// Exterior cone attached at a boundary point. `neighborhood` is the radius r
/// of the ball B_r(x0) on whose boundary points the cone has been validated.
struct ConeSpec
{
  Vec3 axis;
  double half_angle;
  double rho;
  Vec3 x0;
  double neighborhood;

  bool contains_direction(const Vec3& h) const;
};

/// Conforming tetrahedral mesh; immutable once built.
class Mesh
{
public:
  static constexpr std::array<std::array<int, 2>, 6> local_edges{
      {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

  Mesh(DomainSpec domain, std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets);

  const DomainSpec& domain() const { return domain_; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_tets() const { return static_cast<int>(tets_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_faces() const { return static_cast<int>(faces_.size()); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 4>>& tets() const { return tets_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<std::array<int, 3>>& faces() const { return faces_; }

  const std::array<int, 6>& tet_edges(int t) const { return tet_edges_[t]; }
  /// +1 when the local edge (a,b) runs from lower to higher global id.
  const std::array<int, 6>& tet_edge_signs(int t) const { return tet_edge_signs_[t]; }
  const std::array<int, 4>& tet_faces(int t) const { return tet_faces_[t]; }
  /// Number of tets sharing each face.
  int face_multiplicity(int f) const { return face_count_[f]; }

  bool boundary_vertex(int v) const { return boundary_vertex_[v]; }
  bool boundary_edge(int e) const { return boundary_edge_[e]; }
  bool boundary_face(int f) const { return face_count_[f] == 1; }

  double volume(int t) const { return volume_[t]; }
  double signed_volume(int t) const;
  double total_volume() const;
  double boundary_area() const;
  /// Gradients of the four barycentric coordinates (constant per tet).
  const std::array<Vec3, 4>& grad_lambda(int t) const { return grad_lambda_[t]; }
  std::array<double, 4> barycentric(int t, const Vec3& x) const;
  Vec3 point(int t, const std::array<double, 4>& bary) const;
  double max_edge_length() const;

  /// Lowest-id tet whose closure contains x (slack 1e-12 in barycentric
  /// coordinates), or -1.
  int locate(const Vec3& x) const;

private:
  void build_connectivity();
  void build_locator();

  DomainSpec domain_;
  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 4>> tets_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<std::array<int, 6>> tet_edges_;
  std::vector<std::array<int, 6>> tet_edge_signs_;
  std::vector<std::array<int, 4>> tet_faces_;
  std::vector<int> face_count_;
  std::vector<bool> boundary_vertex_, boundary_edge_;
  std::vector<double> volume_;
  std::vector<std::array<Vec3, 4>> grad_lambda_;
  std::vector<Mat3> inverse_jacobian_;

  // uniform bucket grid over the bounding box
  Vec3 bucket_origin_;
  Vec3 bucket_size_;
  std::array<int, 3> bucket_dims_{};
  std::vector<int> bucket_start_;
  std::vector<int> bucket_tets_;
};

/// Structured Kuhn mesh: n cells per unit length, each cube split into 6 tets.
Mesh build_mesh(const DomainSpec& domain, int n);

/// Uniform red refinement, every tet split into 8. Old vertex ids are kept.
Mesh refine(const Mesh& mesh);

bool point_in_domain(const DomainSpec& domain, const Vec3& x);

/// Exterior cone at x0. Throws NotOnBoundary when x0 is not within 1e-12 of
/// the boundary.
ConeSpec exterior_cone(const DomainSpec& domain, const Vec3& x0, double neighborhood = 0.45,
                       double rho = 0.1);

/// Sampling test of the exterior-cone invariant: for sampled boundary points
/// x in B_r(x0) and sampled h in the cone with |h| < rho, x + h lies outside.
bool verify_exterior_cone(const DomainSpec& domain, const ConeSpec& cone, int samples,
                          std::uint64_t seed);

/// Uniformly distributed direction inside the open cone (used for sampling).
Vec3 sample_cone_direction(const ConeSpec& cone, double u1, double u2);

} // namespace micromorph::geometry
