#include "micromorph/tensor_field.hpp"

#include <cmath>

namespace micromorph
{

Mat9 symmetrizer()
{
  Mat9 s = Mat9::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
    {
      s(3 * i + j, 3 * i + j) += 0.5;
      s(3 * i + j, 3 * j + i) += 0.5;
    }
  return s;
}

TensorField TensorField::isotropic(double mu, double lambda)
{
  Mat9 trace = Mat9::Zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      trace(4 * i, 4 * j) = 1.0;
  return {2.0 * mu * symmetrizer() + lambda * trace};
}

TensorField TensorField::affine_scalar(const Mat9& base, double offset, const Vec3& g)
{
  TensorField t;
  t.base = offset * base;
  for (int j = 0; j < 3; ++j)
    t.slope[j] = g[j] * base;
  return t;
}

double TensorField::lipschitz() const
{
  double s = 0.0;
  for (const auto& m : slope)
  {
    const double n = Eigen::SelfAdjointEigenSolver<Mat9>(0.5 * (m + m.transpose()))
                         .eigenvalues()
                         .cwiseAbs()
                         .maxCoeff();
    // non-symmetric slopes fall back to the Frobenius norm
    const double op = m.isApprox(m.transpose()) ? n : m.norm();
    s += op * op;
  }
  return std::sqrt(s);
}

TensorField TensorField::operator+(const TensorField& other) const
{
  TensorField t;
  t.base = base + other.base;
  for (int j = 0; j < 3; ++j)
    t.slope[j] = slope[j] + other.slope[j];
  return t;
}

} // namespace micromorph
