#include "micromorph/run.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
  using namespace micromorph;
  CLI::App app{"micromorph: relaxed micromorphic model experiments"};
  std::string experiment, config_path, out_dir;
  int threads = 0;
  app.add_option("experiment", experiment, "experiment to run")
      ->required()
      ->check(CLI::IsMember(config::experiments()));
  app.add_option("--config", config_path, "key-value (.ini) or JSON (.json) configuration")->required();
  app.add_option("--threads", threads, "cap on worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "output directory (overrides run.out)");
  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& e)
  {
    const int code = app.exit(e);
    return code == 0 ? run::exit_pass : run::exit_config_error;
  }

  config::RunConfig c;
  try
  {
    c = config::load_file(config_path);
    if (!c.experiment.empty() && c.experiment != experiment)
      throw ConfigError("run.experiment", "config names '" + c.experiment + "' but the command line asks for '" +
                                              experiment + "'");
  }
  catch (const ConfigError& e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return run::exit_config_error;
  }
  c.experiment = experiment;
  if (!out_dir.empty())
    c.out_dir = out_dir;
  if (threads > 0)
    c.threads = threads;
  return run::run(c, std::cout);
}
