#pragma once

#include "micromorph/fespace.hpp"
#include "micromorph/geometry.hpp"

#include <cstdint>
#include <functional>

namespace micromorph::transform
{

using fespace::FieldP;
using fespace::FieldU;
using fespace::TensorFunction;
using fespace::VectorFunction;
using geometry::ConeSpec;
using geometry::DomainSpec;

/// Radial C^2 bump: phi = 1 on B_{r/2}(center), 0 outside B_r(center),
/// quintic smoothstep in between.
struct CutoffSpec
{
  Vec3 center = Vec3::Zero();
  double radius = 0.45;

  static CutoffSpec make(const Vec3& center, double radius);

  double phi(const Vec3& x) const;
  Vec3 grad(const Vec3& x) const;
  /// sup |grad phi| = 3.75 / r, attained on the sphere |x - center| = 3r/4.
  double grad_bound() const { return 3.75 / radius; }
};

/// T_h(x) = x + phi(x) h with h in the exterior cone and |h| < h0.
struct InnerVariation
{
  CutoffSpec cutoff;
  ConeSpec cone;
  Vec3 h = Vec3::Zero();

  /// Throws ConfigError when h is outside the cone, |h| >= h0, or the cutoff
  /// ball is larger than the ball on which the cone was validated. h = 0 is
  /// accepted.
  static InnerVariation make(const CutoffSpec& cutoff, const ConeSpec& cone, const Vec3& h);

  /// delta = 1 / (2 sup|grad phi|)
  double delta() const { return 0.5 / cutoff.grad_bound(); }
  /// h0 = min(delta, rho)
  double h0() const { return std::min(delta(), cone.rho); }
};

/// Variation at the default boundary point of the domain with the default
/// cutoff radius min(0.45, cone neighborhood) and h = 0.
InnerVariation default_variation(const DomainSpec& domain);
/// Same cutoff and cone with shift h, validated as in make().
InnerVariation with_shift(const InnerVariation& iv, const Vec3& h);

Vec3 t_h(const InnerVariation& iv, const Vec3& x);
Mat3 dt_h(const InnerVariation& iv, const Vec3& x);
double det_dt_h(const InnerVariation& iv, const Vec3& x);
/// Sherman-Morrison inverse of D T_h.
Mat3 inv_dt_h(const InnerVariation& iv, const Vec3& x);
/// S_h = T_h^{-1} by the contraction x <- y - phi(x) h, to |T_h(x) - y| <= 1e-13.
Vec3 s_h(const InnerVariation& iv, const Vec3& y);

// -- pullbacks --------------------------------------------------------------
// Fields are extended by zero outside the domain; the evaluators below never
// re-interpolate.

/// x -> u~(T_h(x))
VectorFunction tau_h(const InnerVariation& iv, const FieldU& u);
/// x -> Du~(T_h(x)) D T_h(x)
TensorFunction tau_h_gradient(const InnerVariation& iv, const FieldU& u);
/// x -> P~(T_h(x)) D T_h(x)
TensorFunction pullback_Th(const InnerVariation& iv, const FieldP& p);
/// Curl of the pullback by the exact identity
/// det D T_h (Curl P~)(T_h x) (D T_h)^{-T}.
TensorFunction pullback_curl(const InnerVariation& iv, const FieldP& p);
/// y -> det D S_h(y) M(S_h y) (D S_h(y))^{-T}
TensorFunction piola_Ph(const InnerVariation& iv, const TensorFunction& m);
/// y -> det D S_h(y) (Div M)(S_h y)
VectorFunction piola_div(const InnerVariation& iv, const VectorFunction& div_m);

// -- identity checks --------------------------------------------------------

struct IdentityReport
{
  double max_defect = 0.0; ///< max |lhs - rhs| / max(1, |rhs|)
  int points = 0;          ///< sample points that passed the smoothness filter
};

/// Curl of the pullback by 4th-order central differences against the exact
/// identity, at quadrature points whose stencils and stencil images stay in
/// one cell each and away from the cutoff's transition spheres. Points with
/// |x - x0| >= radius_fraction * r are skipped (0.5 keeps the plateau only).
IdentityReport curl_identity_check(const InnerVariation& iv, const FieldP& p, double step = 1e-3,
                                   double radius_fraction = 1.0);

/// Div of the Piola transform by 4th-order central differences against
/// det D S_h (Div M) o S_h. The truncation error scales like step^4 times
/// fifth derivatives of the cutoff, about 1e-5 at step 1e-3 for r ~ 0.45.
IdentityReport div_identity_check(const InnerVariation& iv, const TensorFunction& m,
                                  const VectorFunction& div_m, double step = 5e-4);

struct AdjointReport
{
  double lhs = 0.0;
  double rhs = 0.0;
  double defect = 0.0;        ///< |lhs - rhs| / (1 + |lhs|)
  double defect_refined = 0.0; ///< same with every cell split into 8
};

/// int <T_h(P), M> dx against int <P, P_h(M)> dy. The left side is
/// integrated over the curved cells S_h(K) via x = S_h(y).
AdjointReport adjoint_check(const InnerVariation& iv, const FieldP& p, const TensorFunction& m,
                            int quad_order = 6);

// -- difference quotients ---------------------------------------------------

/// Integral over a slice of B_r(x0) cut into lines parallel to h. Lines are
/// laid out on a polar grid over the transverse disk.
struct LineQuadrature
{
  int radial = 48;  ///< Gauss points in the transverse radius
  int angular = 96; ///< trapezoid points in angle
  int gauss = 5;    ///< Gauss points per smooth piece of a line
};

struct DiffQuotientReport
{
  double u_l2 = 0.0;     ///< |u - tau_h u|^2_{L2}
  double u_h1 = 0.0;     ///< |u - tau_h u|^2_{H1}
  double p_l2 = 0.0;     ///< |P - T_h P|^2_{L2}
  double p_hcurl = 0.0;  ///< |P - T_h P|^2_{H(Curl)}
  double quotient = 0.0; ///< (u_h1 + p_hcurl) / |h|
};

DiffQuotientReport diff_quotient(const InnerVariation& iv, const FieldU& u, const FieldP& p,
                                 const LineQuadrature& lq = {});

struct PairingReport
{
  double pairing = 0.0; ///< |int <T_h(P) - P, M>|
  double bound = 0.0;   ///< |h| |P|_{H(Curl)} |M|_{H(Div)}
  double ratio = 0.0;
};

/// Difference pairing with M in H(Div), computed in y via the Piola side:
/// int <P, P_h(M) - M> dy.
PairingReport divcurl_pairing_check(const InnerVariation& iv, const FieldP& p, const TensorFunction& m,
                                    const VectorFunction& div_m, int quad_order = 6);

// -- mapping properties -----------------------------------------------------

struct FuzzReport
{
  int samples = 0;
  int exterior_violations = 0; ///< x outside, T_h(x) inside
  int interior_violations = 0; ///< y inside, S_h(y) outside
  double min_det = 1.0;
  double max_roundtrip = 0.0; ///< max |s_h(t_h(x)) - x|
};

/// Random h in the cone with |h| < h0 and random points around B_r(x0),
/// including points on the boundary.
FuzzReport mapping_property_fuzz(const DomainSpec& domain, int samples, std::uint64_t seed);

struct BoundReport
{
  double sampled = 0.0;     ///< sup det + sup 1/det + sup |DT| + sup |DT^{-1}|
  double closed_form = 0.0; ///< (1 + |h|G) + 1/(1 - |h|G) + (1 + |h|G) + 1/(1 - |h|G)
};

/// Uniform bound of the Jacobian quantities for one shift, sampled at random
/// points plus the extremal sphere |x - x0| = 3r/4 along +-h.
BoundReport uniform_bound(const InnerVariation& iv, int samples, std::uint64_t seed);

} // namespace micromorph::transform
