#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>

namespace micromorph
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

inline Mat3 sym(const Mat3& a) { return 0.5 * (a + a.transpose()); }

/// Row-major flattening, entry (i,j) goes to 3*i+j.
inline Vec9 flatten(const Mat3& a)
{
  Vec9 v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      v[3 * i + j] = a(i, j);
  return v;
}

inline Mat3 unflatten(const Vec9& v)
{
  Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a(i, j) = v[3 * i + j];
  return a;
}

// Errors. Everything numerical derives from NumericalError so the CLI can map
// it to exit code 3; configuration problems map to 2.

class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error
{
public:
  ConfigError(std::string key, const std::string& what)
      : Error("config error [" + key + "]: " + what), key_(std::move(key))
  {
  }
  const std::string& key() const { return key_; }

private:
  std::string key_;
};

class NumericalError : public Error
{
public:
  using Error::Error;
};

class NotOnBoundary : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class PointOutsideDomain : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError
{
public:
  NoConvergence(const std::string& what, int iterations)
      : NumericalError(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations)
  {
  }
  int iterations() const { return iterations_; }

private:
  int iterations_;
};

class LineSearchStall : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class ZeroLoad : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class EmptyInteriorRegion : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class NonPositiveCoefficient : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

class NonPositiveGap : public NumericalError
{
public:
  using NumericalError::NumericalError;
};

} // namespace micromorph
