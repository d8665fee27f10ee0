#pragma once

#include "micromorph/common.hpp"

namespace micromorph
{

/// Fourth-order tensor field acting on row-major flattened 3x3 matrices,
/// affine in x: C(x) = base + sum_j x_j slope[j].
struct TensorField
{
  Mat9 base = Mat9::Identity();
  std::array<Mat9, 3> slope{Mat9::Zero(), Mat9::Zero(), Mat9::Zero()};

  static TensorField identity() { return {}; }
  static TensorField scaled(double s) { return {s * Mat9::Identity()}; }
  /// 2 mu sym + lambda tr(.) Id
  static TensorField isotropic(double mu, double lambda);
  /// (offset + g.x) * base
  static TensorField affine_scalar(const Mat9& base, double offset, const Vec3& g);

  Mat9 at(const Vec3& x) const
  {
    return base + x[0] * slope[0] + x[1] * slope[1] + x[2] * slope[2];
  }
  bool is_constant() const
  {
    return slope[0].isZero(0.0) && slope[1].isZero(0.0) && slope[2].isZero(0.0);
  }
  /// Bound on ||C(x) - C(y)||_op / |x - y|.
  double lipschitz() const;

  TensorField operator+(const TensorField& other) const;
};

/// 9x9 matrix of the map A -> sym A on flattened matrices.
Mat9 symmetrizer();

} // namespace micromorph
