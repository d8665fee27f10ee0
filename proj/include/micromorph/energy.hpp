#pragma once

#include "micromorph/fespace.hpp"
#include "micromorph/tensor_field.hpp"

#include <cstdint>
#include <variant>

namespace micromorph::energy
{

using fespace::H1VectorSpace;
using fespace::HCurlTensorSpace;
using fespace::SparseMatrix;
using fespace::Vector;

/// Coefficients of the quadratic density. ce and cmicro act on Sym(3),
/// lc on all of R^{3x3}.
struct LinearCoefficients
{
  TensorField ce = TensorField::identity();
  TensorField cmicro = TensorField::identity();
  TensorField lc = TensorField::identity();

  static LinearCoefficients identity() { return {}; }

  /// Symmetry and positive definiteness at the corners of the box (the
  /// smallest eigenvalue of an affine family is concave, so corners suffice).
  /// Throws NonPositiveCoefficient.
  void validate(const Vec3& lo, const Vec3& hi) const;

  /// Lipschitz constant of x -> W(x, Q) / (1 + |Q|^2).
  double w1_lipschitz() const;
};

struct NonlinearParams
{
  double q = 1.5;
  double alpha = 2.0 / 3.0;

  /// alpha defaults to 1/q. Throws ConfigError("q") / ConfigError("alpha").
  static NonlinearParams make(double q);
  static NonlinearParams make(double q, double alpha);
  void validate() const;
};

using MaterialModel = std::variant<LinearCoefficients, NonlinearParams>;

/// (F, P, C) standing in for (Du, P, Curl P).
struct StateTriple
{
  Mat3 F = Mat3::Zero();
  Mat3 P = Mat3::Zero();
  Mat3 C = Mat3::Zero();

  double squared_norm() const { return F.squaredNorm() + P.squaredNorm() + C.squaredNorm(); }
};

struct Gradient
{
  Mat3 dF = Mat3::Zero();
  Mat3 dP = Mat3::Zero();
  Mat3 dC = Mat3::Zero();

  double norm() const { return std::sqrt(dF.squaredNorm() + dP.squaredNorm() + dC.squaredNorm()); }
};

double w_linear(const Vec3& x, const StateTriple& s, const LinearCoefficients& c);
Gradient dw_linear(const Vec3& x, const StateTriple& s, const LinearCoefficients& c);
double w_nonlinear(const StateTriple& s, const NonlinearParams& p);
Gradient dw_nonlinear(const StateTriple& s, const NonlinearParams& p);

double w(const Vec3& x, const StateTriple& s, const MaterialModel& m);
Gradient dw(const Vec3& x, const StateTriple& s, const MaterialModel& m);

/// Lipschitz metadata of the model (0 for the nonlinear model).
double w1_lipschitz(const MaterialModel& m);

/// Largest observed |W(x,Q) - W(y,Q)| / (|x-y| (1 + |Q|^2)) over random
/// pairs x, y in the box and random states Q.
double check_w1_lipschitz(const MaterialModel& m, int samples, std::uint64_t seed,
                          const Vec3& lo = Vec3::Zero(), const Vec3& hi = Vec3::Ones());

/// The identity tensors used by the nonlinear model for its quadratic part.
LinearCoefficients quadratic_part(const MaterialModel& m);

/// Discrete energy on the combined (u, P) vector, without loads unless a load
/// vector is given: 1/2 x'Kx - b'x + sum_K alpha |K| |Curl P|_K|^q.
class EnergyFunctional
{
public:
  EnergyFunctional(const H1VectorSpace& us, const HCurlTensorSpace& ps, const MaterialModel& model,
                   Vector load = Vector());

  int dim() const { return static_cast<int>(k_.rows()); }
  const SparseMatrix& quadratic() const { return k_; }
  const Vector& load() const { return b_; }
  const std::vector<bool>& mask() const { return mask_; }
  const MaterialModel& model() const { return model_; }

  double value(const Vector& x) const;
  /// Gradient, zero on constrained dofs.
  Vector gradient(const Vector& x) const;
  /// value(x + s) - value(x) without cancellation.
  double difference(const Vector& x, const Vector& s) const;

  /// Hessian of the power term with |Curl P| floored at `floor` per cell,
  /// restricted to free dofs. Empty when alpha = 0.
  SparseMatrix power_hessian(const Vector& x, double floor) const;
  /// max over cells of |Curl P|.
  double max_curl(const Vector& x) const;

  /// Zero the constrained dofs.
  void constrain(Vector& x) const;

private:
  double power_term(const Vector& x) const;
  Mat3 cell_curl(const Vector& x, int t) const;

  H1VectorSpace us_;
  HCurlTensorSpace ps_;
  MaterialModel model_;
  SparseMatrix k_;
  Vector b_;
  std::vector<bool> mask_;
  double alpha_ = 0.0;
  double q_ = 2.0;
  // per cell: global indices of the 18 P dofs (row-major by matrix row) and
  // the curls of the six local edge functions
  std::vector<std::array<int, 18>> cell_dofs_;
  std::vector<std::array<Vec3, 6>> cell_curls_;
};

/// Quadratic stiffness matrix of the linear density on the combined space.
SparseMatrix assemble_linear(const LinearCoefficients& c, const H1VectorSpace& us, const HCurlTensorSpace& ps);

/// int W(x, (Du, P, Curl P)) dx evaluated by quadrature through w().
double energy_by_quadrature(const fespace::FieldU& u, const fespace::FieldP& p, const MaterialModel& m,
                            int quad_order = 6);

struct ConvexityReport
{
  double min_ratio;
  int pairs;
};

/// min over pairs of the Bregman gap of the stored energy divided by
/// |v-u|^2_{H1} + |Q-P|^2_{H(Curl)}. Throws NonPositiveGap if a gap is <= 0.
ConvexityReport check_convexity_gap(const EnergyFunctional& e, const H1VectorSpace& us,
                                    const HCurlTensorSpace& ps,
                                    const std::vector<std::pair<Vector, Vector>>& pairs);

} // namespace micromorph::energy
