#include "micromorph/polynomial.hpp"

#include <cmath>

namespace micromorph
{

Poly3::Poly3(double c)
{
  if (c != 0.0)
    terms_[{0, 0, 0}] = c;
}

Poly3 Poly3::var(int i)
{
  Exponent e{0, 0, 0};
  e[i] = 1;
  Poly3 p;
  p.terms_[e] = 1.0;
  return p;
}

Poly3 Poly3::monomial(double c, int a, int b, int d)
{
  Poly3 p;
  p.add({a, b, d}, c);
  return p;
}

void Poly3::add(const Exponent& e, double c)
{
  if (c == 0.0)
    return;
  auto [it, fresh] = terms_.emplace(e, c);
  if (!fresh)
  {
    it->second += c;
    if (it->second == 0.0)
      terms_.erase(it);
  }
}

double Poly3::operator()(const Vec3& x) const
{
  double s = 0.0;
  for (const auto& [e, c] : terms_)
  {
    double m = c;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < e[i]; ++k)
        m *= x[i];
    s += m;
  }
  return s;
}

Poly3 Poly3::diff(int i) const
{
  Poly3 p;
  for (const auto& [e, c] : terms_)
    if (e[i] > 0)
    {
      Exponent f = e;
      --f[i];
      p.add(f, c * e[i]);
    }
  return p;
}

int Poly3::degree() const
{
  int d = 0;
  for (const auto& [e, c] : terms_)
    d = std::max(d, e[0] + e[1] + e[2]);
  return d;
}

Poly3 operator+(const Poly3& a, const Poly3& b)
{
  Poly3 p = a;
  for (const auto& [e, c] : b.terms_)
    p.add(e, c);
  return p;
}

Poly3 Poly3::operator-() const
{
  Poly3 p;
  for (const auto& [e, c] : terms_)
    p.add(e, -c);
  return p;
}

Poly3 operator-(const Poly3& a, const Poly3& b) { return a + (-b); }

Poly3 operator*(const Poly3& a, const Poly3& b)
{
  Poly3 p;
  for (const auto& [e, c] : a.terms_)
    for (const auto& [f, d] : b.terms_)
      p.add({e[0] + f[0], e[1] + f[1], e[2] + f[2]}, c * d);
  return p;
}

Vec3 eval(const PolyVec& v, const Vec3& x) { return {v[0](x), v[1](x), v[2](x)}; }

Mat3 eval(const PolyMat& m, const Vec3& x)
{
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r(i, j) = m[i][j](x);
  return r;
}

PolyMat gradient(const PolyVec& v)
{
  PolyMat g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      g[i][j] = v[i].diff(j);
  return g;
}

PolyMat transpose(const PolyMat& m)
{
  PolyMat t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      t[i][j] = m[j][i];
  return t;
}

PolyMat sym(const PolyMat& m)
{
  PolyMat s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s[i][j] = 0.5 * (m[i][j] + m[j][i]);
  return s;
}

PolyMat operator+(const PolyMat& a, const PolyMat& b)
{
  PolyMat s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s[i][j] = a[i][j] + b[i][j];
  return s;
}

PolyMat operator-(const PolyMat& a, const PolyMat& b)
{
  PolyMat s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      s[i][j] = a[i][j] - b[i][j];
  return s;
}

PolyMat curl(const PolyMat& m)
{
  PolyMat c;
  for (int i = 0; i < 3; ++i)
  {
    const auto& w = m[i];
    c[i][0] = w[2].diff(1) - w[1].diff(2);
    c[i][1] = w[0].diff(2) - w[2].diff(0);
    c[i][2] = w[1].diff(0) - w[0].diff(1);
  }
  return c;
}

PolyVec div(const PolyMat& m)
{
  PolyVec d;
  for (int i = 0; i < 3; ++i)
    d[i] = m[i][0].diff(0) + m[i][1].diff(1) + m[i][2].diff(2);
  return d;
}

} // namespace micromorph
