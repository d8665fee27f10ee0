#pragma once

#include "micromorph/energy.hpp"
#include "micromorph/solve.hpp"
#include "micromorph/transform.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace micromorph::analysis
{

using energy::MaterialModel;
using fespace::FieldP;
using fespace::FieldU;
using fespace::SparseMatrix;
using fespace::Vector;
using geometry::DomainSpec;
using geometry::Mesh;

// -- Helmholtz decomposition ------------------------------------------------

struct HelmholtzSplit
{
  std::shared_ptr<const Mesh> mesh;
  std::function<Vec3(const Vec3&)> p;
  Vector potential;                    ///< P1 vertex values, zero on the boundary
  std::function<Vec3(const Vec3&)> q; ///< p - D v
  int cg_iterations = 0;
  double norm_p2 = 0.0;  ///< |p|^2
  double norm_dv2 = 0.0; ///< |D v|^2
  double norm_q2 = 0.0;  ///< |q|^2
  double cross = 0.0;    ///< <D v, q>
  double weak_div = 0.0; ///< max_w |<q, D w>| over P1 hat functions w

  Vec3 grad_potential(const Vec3& x) const;
};

/// v solves <Dv, Dw> = <p, Dw> for all w in P1_0 by CG to 1e-10.
HelmholtzSplit helmholtz_decompose(std::shared_ptr<const Mesh> mesh, std::function<Vec3(const Vec3&)> p,
                                   int quad_order = 4);
/// One row of an edge field.
HelmholtzSplit helmholtz_decompose(const FieldP& p, int row);

// -- incompatible Korn constant ---------------------------------------------

struct KornReport
{
  double constant = 0.0;   ///< c~_h = 1 / lambda_min
  double lambda_min = 0.0;
  int iterations = 0;
  int free_dofs = 0;
  double residual = 0.0;   ///< relative residual of the Ritz pair
  Vector eigenvector;      ///< on the full P space, zero on the boundary
};

/// Smallest eigenvalue of A x = lambda B x with A = |sym P|^2 + |Curl P|^2
/// and B = |P|^2 on the constrained edge space, by shift-invert Lanczos
/// (A factored once). Stops when the relative Ritz residual is below tol.
KornReport korn_constant(std::shared_ptr<const Mesh> mesh, double tol = 1e-8, int max_steps = 3000);

/// |P|^2 / (|sym P|^2 + |Curl P|^2)
double korn_rayleigh(const FieldP& p);

// -- Besov difference quotients ---------------------------------------------

/// Field evaluated on the probe grid. `value` gives D^m of the field for the
/// m the sampler was built for; `components` entries of the result are used.
struct FieldSampler
{
  std::string name;
  int m = 0;
  int components = 9;
  std::function<Vec9(const Vec3&)> value;
};

FieldSampler sample_u(const FieldU& u);   ///< m = 0
FieldSampler sample_Du(const FieldU& u);  ///< m = 1
FieldSampler sample_P(const FieldP& p);   ///< m = 0
FieldSampler sample_CurlP(const FieldP& p);
/// Analytic field for calibration, m = 0.
FieldSampler sample_function(std::string name, int components, std::function<Vec9(const Vec3&)> f);

struct ProbeGrid
{
  double spacing = 1.0 / 128.0;
  /// fractional offsets of the midpoints inside a grid cell; chosen so no
  /// point lies on a plane x_i = c or x_i - x_j = c of a Kuhn mesh
  Vec3 offset{0.5123, 0.4871, 0.5309};
};

/// |h|^{-2 sigma} * midpoint integral over Omega_eta of |f(x + h) - f(x)|^2.
/// h must be a multiple of the grid spacing along a coordinate axis.
/// Throws EmptyInteriorRegion when Omega_eta holds no grid point.
double besov_quotient(const DomainSpec& domain, const FieldSampler& f, double sigma, const Vec3& h, double eta,
                      const ProbeGrid& grid = {});

struct ProbeRow
{
  int k;
  double h;
  int direction;
  double integral;
  double quotient;
};

struct ProbeOptions
{
  double h_bar = 0.5;
  int k_min = 2;
  int k_max = 6;
  double sigma = 0.5;
  /// fields whose largest sampled entry is at most this are reported as zero
  double zero_threshold = 0.0;
  ProbeGrid grid;
};

struct ProbeReport
{
  std::string field;
  int m = 0;
  double sigma = 0.5;
  double eta = 0.0;
  std::vector<ProbeRow> rows;
  bool zero_field = false;
  double beta = 0.0;   ///< pooled slope of log integral against log |h|
  double s_est = 0.0;  ///< m + beta/2, capped at m + 1
  double s_lo = 0.0;   ///< 95% band
  double s_hi = 0.0;
  bool capped = false;

  std::string describe() const;
};

/// Dyadic sweep h = 2^-k h_bar e_d, d = 0..2, with eta = 2 max|h|, and a
/// pooled least-squares slope with one intercept per direction.
ProbeReport regularity_index(const DomainSpec& domain, const FieldSampler& f, const ProbeOptions& opts = {});

// -- regularity experiment --------------------------------------------------

struct QuotientRow
{
  int k;
  double h;
  transform::DiffQuotientReport q;
};

struct RegularityOptions
{
  double tol_s = 0.15;
  double max_ratio = 10.0;
  int k_min = 2;
  int k_max = 6;
  ProbeOptions probe;
  transform::LineQuadrature lines;
  double solve_tol = 0.0; ///< 0 keeps the solver default
  bool sweep = true;      ///< run the diff_quotient sweep
};

struct Verdict
{
  std::string name;
  bool pass = false;
  std::string detail;
};

struct RegularityReport
{
  std::shared_ptr<const solve::Solution> solution;
  solve::SolveReport solve;
  ProbeReport u, p, curl_p;
  std::vector<QuotientRow> quotients;
  double quotient_ratio = 0.0;
  std::vector<Verdict> verdicts;
  bool all_pass() const;
};

/// Solve on `mesh`, probe u (m = 1), P and Curl P (m = 0), and sweep the
/// difference quotient along the exterior cone axis at the default boundary
/// point.
RegularityReport regularity_experiment(std::shared_ptr<const Mesh> mesh, const MaterialModel& model,
                                       const solve::LoadSpec& loads, const RegularityOptions& opts = {});

} // namespace micromorph::analysis
