#include "micromorph/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace micromorph::fespace
{

namespace
{

LineRule compute_gauss_legendre(int n)
{
  LineRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i)
  {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it)
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k)
      {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1)
        p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16)
        break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k)
    {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

QuadratureRule collapsed_rule(int order)
{
  // Duffy map from the unit cube: x = a, y = b(1-a), z = c(1-a)(1-b),
  // Jacobian (1-a)^2 (1-b).
  const auto& ga = gauss_legendre((order + 4) / 2);
  const auto& gb = gauss_legendre((order + 3) / 2);
  const auto& gc = gauss_legendre((order + 2) / 2);
  QuadratureRule rule;
  rule.order = order;
  for (std::size_t i = 0; i < ga.nodes.size(); ++i)
    for (std::size_t j = 0; j < gb.nodes.size(); ++j)
      for (std::size_t k = 0; k < gc.nodes.size(); ++k)
      {
        const double a = ga.nodes[i], b = gb.nodes[j], c = gc.nodes[k];
        const double x = a;
        const double y = b * (1.0 - a);
        const double z = c * (1.0 - a) * (1.0 - b);
        rule.points.push_back({1.0 - x - y - z, x, y, z});
        rule.weights.push_back(ga.weights[i] * gb.weights[j] * gc.weights[k] * (1.0 - a) * (1.0 - a) *
                               (1.0 - b));
      }
  return rule;
}

QuadratureRule four_point_rule()
{
  // classical symmetric rule, degree 2
  const double a = 0.5854101966249685;
  const double b = 0.1381966011250105;
  QuadratureRule rule;
  rule.order = 2;
  rule.points = {{a, b, b, b}, {b, a, b, b}, {b, b, a, b}, {b, b, b, a}};
  rule.weights.assign(4, 1.0 / 24.0);
  return rule;
}

std::mutex cache_mutex;

} // namespace

const LineRule& gauss_legendre(int n)
{
  if (n < 1)
    throw std::invalid_argument("gauss_legendre: n must be positive");
  static std::map<int, LineRule> cache;
  std::lock_guard lock(cache_mutex);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

const QuadratureRule& tet_rule(int order)
{
  if (order < 1 || order > 12)
    throw std::invalid_argument("tet_rule: unsupported order");
  static std::map<int, QuadratureRule> cache;
  {
    std::lock_guard lock(cache_mutex);
    auto it = cache.find(order);
    if (it != cache.end())
      return it->second;
  }
  QuadratureRule rule = order <= 2 ? four_point_rule() : collapsed_rule(order);
  std::lock_guard lock(cache_mutex);
  return cache.emplace(order, std::move(rule)).first->second;
}

} // namespace micromorph::fespace
