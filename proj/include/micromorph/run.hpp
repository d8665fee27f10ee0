#pragma once

#include "micromorph/config.hpp"
#include "micromorph/io.hpp"

#include <iosfwd>
#include <map>
#include <memory>

namespace micromorph::run
{

using analysis::Verdict;
using config::RunConfig;

struct FieldOutput
{
  std::string name; ///< file stem
  std::shared_ptr<const solve::Solution> solution;
};

struct ExperimentResult
{
  std::string experiment;
  std::vector<Verdict> verdicts;
  io::Json results = io::Json::object();
  std::map<std::string, io::CsvTable> tables; ///< file name -> table
  std::vector<FieldOutput> fields;

  bool pass() const;
};

ExperimentResult solve_experiment(const RunConfig& c);
ExperimentResult verify_transforms(const RunConfig& c);
ExperimentResult korn_experiment(const RunConfig& c);
ExperimentResult helmholtz_experiment(const RunConfig& c);
/// Besov indices of the solved fields without the diff_quotient sweep.
ExperimentResult probe_experiment(const RunConfig& c);
ExperimentResult full_regularity(const RunConfig& c);

ExperimentResult run_experiment(const RunConfig& c);

/// summary.json, one CSV per table, VTK per field unless disabled.
void write_artifacts(const ExperimentResult& r, const RunConfig& c, const std::string& dir);

/// Exit codes.
enum ExitCode : int
{
  exit_pass = 0,
  exit_verdict_failure = 1,
  exit_config_error = 2,
  exit_numerical_failure = 3,
};

/// Runs, writes artifacts, prints one line per verdict to `log`, and maps
/// errors to exit codes: ConfigError -> 2, any other failure -> 3.
int run(const RunConfig& c, std::ostream& log);

} // namespace micromorph::run
