#pragma once

#include "micromorph/common.hpp"

#include <map>

namespace micromorph
{

/// Polynomial in (x, y, z) with exact differentiation.
class Poly3
{
public:
  using Exponent = std::array<int, 3>;

  Poly3() = default;
  Poly3(double c); // NOLINT: constants convert implicitly
  static Poly3 var(int i);
  static Poly3 monomial(double c, int a, int b, int d);

  double operator()(const Vec3& x) const;
  Poly3 diff(int i) const;
  int degree() const;

  friend Poly3 operator+(const Poly3& a, const Poly3& b);
  friend Poly3 operator-(const Poly3& a, const Poly3& b);
  friend Poly3 operator*(const Poly3& a, const Poly3& b);
  Poly3 operator-() const;

  const std::map<Exponent, double>& terms() const { return terms_; }

private:
  void add(const Exponent& e, double c);
  std::map<Exponent, double> terms_;
};

using PolyVec = std::array<Poly3, 3>;
using PolyMat = std::array<std::array<Poly3, 3>, 3>;

Vec3 eval(const PolyVec& v, const Vec3& x);
Mat3 eval(const PolyMat& m, const Vec3& x);

PolyMat gradient(const PolyVec& v);
PolyMat transpose(const PolyMat& m);
PolyMat sym(const PolyMat& m);
PolyMat operator+(const PolyMat& a, const PolyMat& b);
PolyMat operator-(const PolyMat& a, const PolyMat& b);
/// Row-wise curl and divergence.
PolyMat curl(const PolyMat& m);
PolyVec div(const PolyMat& m);

} // namespace micromorph
