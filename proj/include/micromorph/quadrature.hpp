#pragma once

#include <array>
#include <vector>

namespace micromorph::fespace
{

/// Quadrature on the reference tetrahedron, points in barycentric
/// coordinates, weights summing to the reference volume 1/6.
struct QuadratureRule
{
  int order = 0;
  std::vector<std::array<double, 4>> points;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }
};

/// Collapsed Gauss-Legendre rule exact for polynomials of total degree
/// <= order. Rules are built once and cached.
const QuadratureRule& tet_rule(int order);

/// Gauss-Legendre nodes and weights on [0,1].
struct LineRule
{
  std::vector<double> nodes;
  std::vector<double> weights;
};
const LineRule& gauss_legendre(int n);

} // namespace micromorph::fespace
