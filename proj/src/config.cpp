#include "micromorph/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace micromorph::config
{

const std::vector<std::string>& experiments()
{
  static const std::vector<std::string> names{"solve", "verify-transforms", "korn", "helmholtz", "probe",
                                              "full-regularity"};
  return names;
}

int RunConfig::finest_n() const
{
  return 1 << *std::max_element(levels.begin(), levels.end());
}

std::vector<energy::MaterialModel> RunConfig::models() const
{
  if (model == "linear")
    return {linear};
  if (model == "nonlinear")
    return {nonlinear};
  return {linear, nonlinear};
}

solve::LoadSpec RunConfig::loads() const
{
  solve::LoadSpec l;
  if (load_preset == "manufactured")
    l = solve::manufactured(domain);
  else if (load_preset == "body_force")
  {
    l = solve::body_force(force);
    if (!moment.isZero(0.0))
    {
      const Mat3 m = moment;
      l.m = [m](const Vec3&) { return m; };
      l.div_m = [](const Vec3&) { return Vec3::Zero(); };
    }
  }
  else
    l = solve::zero_loads();
  return load_scale == 1.0 ? l : solve::scaled(l, load_scale);
}

// -- readers ----------------------------------------------------------------------

namespace
{

std::string trim(const std::string& s)
{
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos)
    return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& s)
{
  const auto p = s.find_first_of(";#");
  return trim(p == std::string::npos ? s : s.substr(0, p));
}

} // namespace

KeyValues read_ini(const std::string& text)
{
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try
  {
    boost::property_tree::ini_parser::read_ini(in, tree);
  }
  catch (const boost::property_tree::ini_parser_error& e)
  {
    throw ConfigError("config", std::string("malformed key-value file: ") + e.message() + " at line " +
                                    std::to_string(e.line()));
  }
  KeyValues kv;
  for (const auto& [section, body] : tree)
  {
    if (body.empty())
      throw ConfigError(section, "key outside of a [section]");
    for (const auto& [key, value] : body)
      kv[section + "." + key] = strip_comment(value.data());
  }
  return kv;
}

KeyValues read_json(const std::string& text)
{
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse(text);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object())
    throw ConfigError("config", "top level must be an object of sections");
  auto scalar = [](const std::string& key, const nlohmann::json& v) -> std::string {
    if (v.is_string())
      return v.get<std::string>();
    if (v.is_boolean())
      return v.get<bool>() ? "true" : "false";
    if (v.is_number())
      return v.dump();
    throw ConfigError(key, "expected a string, number or boolean");
  };
  KeyValues kv;
  for (const auto& [section, body] : j.items())
  {
    if (!body.is_object())
      throw ConfigError(section, "section must be an object");
    for (const auto& [key, v] : body.items())
    {
      const std::string name = section + "." + key;
      if (v.is_array())
      {
        std::string s;
        for (const auto& e : v)
          s += (s.empty() ? "" : " ") + scalar(name, e);
        kv[name] = s;
      }
      else
        kv[name] = scalar(name, v);
    }
  }
  return kv;
}

// -- typed access -------------------------------------------------------------------

namespace
{

class Reader
{
public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  bool has(const std::string& key)
  {
    used_.insert(key);
    return kv_.count(key) > 0;
  }
  const std::string& raw(const std::string& key) const { return kv_.at(key); }

  std::vector<double> numbers(const std::string& key)
  {
    std::istringstream in(raw(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok)
    {
      std::size_t pos = 0;
      double v = 0.0;
      try
      {
        v = std::stod(tok, &pos);
      }
      catch (const std::exception&)
      {
        pos = 0;
      }
      if (pos != tok.size() || !std::isfinite(v))
        throw ConfigError(key, "not a number: '" + tok + "'");
      out.push_back(v);
    }
    if (out.empty())
      throw ConfigError(key, "expected at least one number");
    return out;
  }
  double number(const std::string& key)
  {
    const auto v = numbers(key);
    if (v.size() != 1)
      throw ConfigError(key, "expected a single number");
    return v[0];
  }
  int integer(const std::string& key)
  {
    const double v = number(key);
    if (v != std::floor(v) || std::abs(v) > 1e9)
      throw ConfigError(key, "expected an integer");
    return static_cast<int>(v);
  }
  bool boolean(const std::string& key)
  {
    const std::string& s = raw(key);
    if (s == "true" || s == "1" || s == "yes")
      return true;
    if (s == "false" || s == "0" || s == "no")
      return false;
    throw ConfigError(key, "expected true or false");
  }
  std::string choice(const std::string& key, const std::vector<std::string>& allowed)
  {
    const std::string& s = raw(key);
    if (std::find(allowed.begin(), allowed.end(), s) == allowed.end())
    {
      std::string list;
      for (const auto& a : allowed)
        list += (list.empty() ? "" : ", ") + a;
      throw ConfigError(key, "'" + s + "' is not one of: " + list);
    }
    return s;
  }

  void reject_unknown() const
  {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k))
        throw ConfigError(k, "unknown key");
  }

private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

TensorField coefficient(Reader& r, const std::string& key)
{
  std::istringstream in(r.raw(key));
  std::string kind;
  in >> kind;
  std::vector<double> args;
  double v;
  while (in >> v)
    args.push_back(v);
  if (!in.eof())
    throw ConfigError(key, "bad coefficient arguments");
  if (kind == "identity" && args.empty())
    return TensorField::identity();
  if (kind == "scaled" && args.size() == 1)
    return TensorField::scaled(args[0]);
  if (kind == "isotropic" && args.size() == 2)
    return TensorField::isotropic(args[0], args[1]);
  throw ConfigError(key, "expected 'identity', 'scaled s' or 'isotropic mu lambda'");
}

} // namespace

RunConfig from_key_values(const KeyValues& kv)
{
  Reader r(kv);
  RunConfig c;

  if (r.has("run.experiment"))
    c.experiment = r.choice("run.experiment", experiments());
  if (r.has("run.seed"))
  {
    const double s = r.number("run.seed");
    if (s < 0 || s != std::floor(s) || s > 9.007e15)
      throw ConfigError("run.seed", "seed must be a nonnegative integer");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (r.has("run.out"))
    c.out_dir = r.raw("run.out");
  if (r.has("run.threads"))
    c.threads = r.integer("run.threads");
  if (c.threads < 1)
    throw ConfigError("run.threads", "need at least one thread");

  if (r.has("geometry.domain"))
  {
    const std::string d = r.choice("geometry.domain", {"unit_cube", "l_prism", "box"});
    if (d == "l_prism")
      c.domain = geometry::DomainSpec::l_prism();
    else if (d == "box")
    {
      if (!r.has("geometry.extent"))
        throw ConfigError("geometry.extent", "a box needs three positive extents");
      const auto e = r.numbers("geometry.extent");
      if (e.size() != 3 || *std::min_element(e.begin(), e.end()) <= 0.0)
        throw ConfigError("geometry.extent", "a box needs three positive extents");
      for (double x : e)
        if (x != std::floor(x))
          throw ConfigError("geometry.extent", "box extents must be whole numbers for the Kuhn mesh");
      c.domain = geometry::DomainSpec::box(e[0], e[1], e[2]);
    }
  }
  if (c.domain.shape != geometry::Shape::box && r.has("geometry.extent"))
    throw ConfigError("geometry.extent", "only used with domain = box");
  if (r.has("geometry.levels"))
  {
    c.levels.clear();
    for (double v : r.numbers("geometry.levels"))
    {
      if (v != std::floor(v) || v < 0 || v > 6)
        throw ConfigError("geometry.levels", "levels are integers in 0..6 (n = 2^level)");
      c.levels.push_back(static_cast<int>(v));
    }
    if (!std::is_sorted(c.levels.begin(), c.levels.end()) ||
        std::adjacent_find(c.levels.begin(), c.levels.end()) != c.levels.end())
      throw ConfigError("geometry.levels", "levels must be strictly increasing");
  }

  if (r.has("energy.model"))
    c.model = r.choice("energy.model", {"linear", "nonlinear", "both"});
  {
    double q = c.nonlinear.q;
    if (r.has("energy.q"))
      q = r.number("energy.q");
    const double alpha = r.has("energy.alpha") ? r.number("energy.alpha") : 1.0 / q;
    c.nonlinear = energy::NonlinearParams::make(q, alpha);
  }
  for (auto [key, field] : {std::pair{"energy.ce", &c.linear.ce}, std::pair{"energy.cmicro", &c.linear.cmicro},
                            std::pair{"energy.lc", &c.linear.lc}})
    if (r.has(key))
      *field = coefficient(r, key);
  try
  {
    c.linear.validate(c.domain.bbox_min(), c.domain.bbox_max());
  }
  catch (const NonPositiveCoefficient& e)
  {
    throw ConfigError("energy", e.what());
  }

  if (r.has("loads.preset"))
    c.load_preset = r.choice("loads.preset", {"zero", "body_force", "manufactured"});
  if (r.has("loads.f"))
  {
    const auto f = r.numbers("loads.f");
    if (f.size() != 3)
      throw ConfigError("loads.f", "expected three numbers");
    c.force = Vec3(f[0], f[1], f[2]);
  }
  if (r.has("loads.m"))
  {
    const auto m = r.numbers("loads.m");
    if (m.size() != 9)
      throw ConfigError("loads.m", "expected nine numbers, row-major");
    for (int i = 0; i < 9; ++i)
      c.moment(i / 3, i % 3) = m[i];
  }
  if (c.load_preset != "body_force" && (!c.force.isZero(0.0) || !c.moment.isZero(0.0)))
    throw ConfigError("loads.f", "f and m are only used with preset = body_force");
  if (c.load_preset == "manufactured" && c.domain.shape == geometry::Shape::l_prism)
    throw ConfigError("loads.preset", "the manufactured preset needs a box-shaped domain");
  if (r.has("loads.scale"))
    c.load_scale = r.number("loads.scale");

  if (r.has("solve.tol"))
  {
    c.solve_tol = r.number("solve.tol");
    if (!(c.solve_tol > 0.0))
      throw ConfigError("solve.tol", "tolerance must be positive");
  }

  if (r.has("transform.h"))
  {
    c.shifts = r.numbers("transform.h");
    for (double h : c.shifts)
      if (!(h > 0.0))
        throw ConfigError("transform.h", "shift lengths must be positive");
  }
  if (r.has("transform.samples"))
    c.fuzz_samples = r.integer("transform.samples");
  if (c.fuzz_samples < 1)
    throw ConfigError("transform.samples", "need at least one sample");

  auto& ro = c.regularity;
  if (r.has("analysis.tol_s"))
    ro.tol_s = r.number("analysis.tol_s");
  if (!(ro.tol_s > 0.0))
    throw ConfigError("analysis.tol_s", "tolerance must be positive");
  if (r.has("analysis.max_ratio"))
    ro.max_ratio = r.number("analysis.max_ratio");
  if (!(ro.max_ratio >= 1.0))
    throw ConfigError("analysis.max_ratio", "ratio bound must be >= 1");
  if (r.has("analysis.k_min"))
    ro.k_min = ro.probe.k_min = r.integer("analysis.k_min");
  if (r.has("analysis.k_max"))
    ro.k_max = ro.probe.k_max = r.integer("analysis.k_max");
  if (ro.k_min < 1 || ro.k_max < ro.k_min || ro.k_max > 12)
    throw ConfigError("analysis.k_min", "need 1 <= k_min <= k_max <= 12");
  if (r.has("analysis.h_bar"))
    ro.probe.h_bar = r.number("analysis.h_bar");
  if (!(ro.probe.h_bar > 0.0))
    throw ConfigError("analysis.h_bar", "h_bar must be positive");
  if (r.has("analysis.grid"))
  {
    const int g = r.integer("analysis.grid");
    if (g < 4 || g > 1024)
      throw ConfigError("analysis.grid", "grid points per unit length in 4..1024");
    ro.probe.grid.spacing = 1.0 / g;
  }
  if (r.has("analysis.sigma"))
    ro.probe.sigma = r.number("analysis.sigma");
  if (!(ro.probe.sigma > 0.0 && ro.probe.sigma < 1.0))
    throw ConfigError("analysis.sigma", "sigma must lie in (0, 1)");
  {
    // every dyadic shift has to land on the probe grid
    const double steps = ro.probe.h_bar * std::ldexp(1.0, -ro.k_max) / ro.probe.grid.spacing;
    if (std::abs(steps - std::round(steps)) > 1e-9 || std::round(steps) < 1)
      throw ConfigError("analysis.h_bar", "h_bar * 2^-k_max must be a multiple of the grid spacing");
  }
  if (r.has("analysis.rayleigh_samples"))
    c.rayleigh_samples = r.integer("analysis.rayleigh_samples");
  if (c.rayleigh_samples < 0)
    throw ConfigError("analysis.rayleigh_samples", "must be >= 0");
  ro.solve_tol = c.solve_tol;

  if (r.has("output.vtk"))
    c.write_vtk = r.boolean("output.vtk");

  r.reject_unknown();
  return c;
}

RunConfig load_file(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  return from_key_values(json ? read_json(ss.str()) : read_ini(ss.str()));
}

} // namespace micromorph::config
