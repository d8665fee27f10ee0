#pragma once

#include "micromorph/analysis.hpp"
#include "micromorph/energy.hpp"
#include "micromorph/solve.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace micromorph::config
{

/// Experiments the runner knows.
const std::vector<std::string>& experiments();

/// Everything a run needs. Keys in the text formats are "section.key"; see
/// README for the list.
struct RunConfig
{
  std::string experiment;
  geometry::DomainSpec domain = geometry::DomainSpec::unit_cube();
  /// mesh levels, n = 2^level cells per unit length
  std::vector<int> levels{2};

  std::string model = "linear"; ///< linear | nonlinear | both
  energy::LinearCoefficients linear = energy::LinearCoefficients::identity();
  energy::NonlinearParams nonlinear;

  std::string load_preset = "zero"; ///< zero | body_force | manufactured
  Vec3 force = Vec3::Zero();
  Mat3 moment = Mat3::Zero(); ///< constant moment, so Div M = 0
  double load_scale = 1.0;

  double solve_tol = 0.0; ///< 0: solver default
  std::vector<double> shifts{0.05, 0.025};
  int fuzz_samples = 10000;
  int rayleigh_samples = 20;
  analysis::RegularityOptions regularity;

  std::string out_dir = "out";
  std::uint64_t seed = 42;
  bool write_vtk = true;
  int threads = 1;

  int finest_n() const;
  std::vector<energy::MaterialModel> models() const;
  solve::LoadSpec loads() const;
};

/// Flat "section.key" -> value map.
using KeyValues = std::map<std::string, std::string>;

KeyValues read_ini(const std::string& text);
KeyValues read_json(const std::string& text);

/// Builds and validates a config. Unknown keys and bad values throw
/// ConfigError naming the key.
RunConfig from_key_values(const KeyValues& kv);

/// Reads a file; JSON when the name ends in .json, key-value INI otherwise.
RunConfig load_file(const std::string& path);

} // namespace micromorph::config
