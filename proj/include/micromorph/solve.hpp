#pragma once

#include "micromorph/energy.hpp"

#include <optional>
#include <string>

namespace micromorph::solve
{

using energy::LinearCoefficients;
using energy::MaterialModel;
using energy::NonlinearParams;
using fespace::FieldP;
using fespace::FieldU;
using fespace::TensorFunction;
using fespace::Vector;
using fespace::VectorFunction;
using geometry::Mesh;

/// Body force f and moment M with its row-wise divergence. Empty callables
/// mean zero. Manufactured presets also carry the exact solution.
struct LoadSpec
{
  std::string name = "zero";
  VectorFunction f;
  TensorFunction m;
  VectorFunction div_m;

  VectorFunction u_exact;
  TensorFunction du_exact;
  TensorFunction p_exact;
  TensorFunction curlp_exact;

  Vec3 f_at(const Vec3& x) const { return f ? f(x) : Vec3::Zero(); }
  Mat3 m_at(const Vec3& x) const { return m ? m(x) : Mat3::Zero(); }
  Vec3 div_m_at(const Vec3& x) const { return div_m ? div_m(x) : Vec3::Zero(); }
  bool has_exact() const { return static_cast<bool>(u_exact); }
};

LoadSpec zero_loads();
LoadSpec body_force(const Vec3& f);
/// Polynomial (u*, P*) vanishing (tangentially for P*) on the boundary of a
/// box domain, with f and M derived for identity coefficients.
LoadSpec manufactured(const geometry::DomainSpec& domain);
LoadSpec scaled(const LoadSpec& loads, double s);

/// Combined load vector (int f.v, int <M, Q>).
Vector load_vector(const fespace::H1VectorSpace& us, const fespace::HCurlTensorSpace& ps, const LoadSpec& loads);

struct SolveReport
{
  std::string method;
  int iterations = 0;
  bool converged = false;
  /// Euler-Lagrange residual on free dofs relative to the load vector.
  double residual = 0.0;
  /// Final preconditioned gradient norm relative to the initial one
  /// (nonlinear path only).
  double relative_gradient = 0.0;
  double energy = 0.0;
  double norm_u_h1 = 0.0;
  double norm_p_hcurl = 0.0;
  std::optional<double> apriori_ratio;
  /// Cumulative energy change after each accepted step (nonlinear path).
  std::vector<double> energy_history;
};

struct Solution
{
  FieldU u;
  FieldP p;
  SolveReport report;
};

struct LinearOptions
{
  double tol = 1e-10;
  int max_iter = 0; ///< 0: 10 * number of dofs
};

struct NonlinearOptions
{
  double tol = 1e-8;
  int max_iter = 10000;
  double armijo = 1e-4;
  /// Optional starting state on the combined space (constrained dofs are zeroed).
  std::optional<Vector> initial;
};

Solution solve_linear(std::shared_ptr<const Mesh> mesh, const LinearCoefficients& c, const LoadSpec& loads,
                      const LinearOptions& opts = {});

Solution solve_nonlinear(std::shared_ptr<const Mesh> mesh, const NonlinearParams& p, const LoadSpec& loads,
                         const NonlinearOptions& opts = {});

/// Dispatch on the model; tol <= 0 picks the default of the path.
Solution solve_model(std::shared_ptr<const Mesh> mesh, const MaterialModel& model, const LoadSpec& loads,
                     double tol = 0.0);

/// Norm of the discrete energy gradient minus the load vector on free dofs.
double el_residual(const FieldU& u, const FieldP& p, const MaterialModel& model, const LoadSpec& loads);

/// (|u|_H1 + |P|_H(Curl)) / (|f| + |M| + |Div M|). Throws ZeroLoad.
double apriori_check(const FieldU& u, const FieldP& p, const LoadSpec& loads);

/// Combined coefficient vector [u; P].
Vector combined(const FieldU& u, const FieldP& p);

} // namespace micromorph::solve
