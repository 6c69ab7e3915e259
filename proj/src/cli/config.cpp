#include "fusemean/cli/config.hpp"

#include "fusemean/errors.hpp"
#include "fusemean/expr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace fusemean::cli {

namespace {

void
reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where)
{
  if (!obj.is_object())
    throw ValidationError("config: " + where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("config: unknown key '" + it.key() + "' in " + where);
}

double
as_double(const Json& v, const std::string& name)
{
  if (v.is_number())
    return v.get<double>();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf" || s == "Infinity")
      return std::numeric_limits<double>::infinity();
  }
  throw ValidationError("config: " + name + " must be a number");
}

double
as_finite(const Json& v, const std::string& name)
{
  if (!v.is_number())
    throw ValidationError("config: " + name + " must be a number");
  return v.get<double>();
}

std::int64_t
as_int(const Json& v, const std::string& name)
{
  if (!v.is_number_integer())
    throw ValidationError("config: " + name + " must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t
as_uint(const Json& v, const std::string& name)
{
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ValidationError("config: " + name + " must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string
as_string(const Json& v, const std::string& name)
{
  if (!v.is_string())
    throw ValidationError("config: " + name + " must be a string");
  return v.get<std::string>();
}

bool
as_bool(const Json& v, const std::string& name)
{
  if (!v.is_boolean())
    throw ValidationError("config: " + name + " must be a boolean");
  return v.get<bool>();
}

std::vector<double>
as_doubles(const Json& v, const std::string& name, bool allow_inf)
{
  if (!v.is_array())
    throw ValidationError("config: " + name + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : v)
    out.push_back(allow_inf ? as_double(e, name) : as_finite(e, name));
  return out;
}

Pattern
as_pattern(const Json& v, const std::string& name)
{
  if (!v.is_array())
    throw ValidationError("config: " + name + " entries must be arrays of 1-based indices");
  Pattern s;
  for (const auto& e : v) {
    auto j = as_int(e, name);
    if (j < 1)
      throw ValidationError("config: " + name + " indices are 1-based");
    s.push_back(static_cast<int>(j - 1));
  }
  std::sort(s.begin(), s.end());
  return s;
}

Generator
parse_generator(const std::string& s)
{
  for (Generator g : { Generator::BIVARIATE_GAUSSIAN, Generator::TRIVARIATE_STANDARD_GAUSSIAN,
                       Generator::PRODUCT_FINITE, Generator::CUSTOM_FINITE })
    if (generator_name(g) == s)
      return g;
  throw ValidationError("config: unknown generator '" + s + "'");
}

EstimatorKind
parse_estimator(const std::string& s)
{
  for (EstimatorKind k : { EstimatorKind::CROSSFIT, EstimatorKind::USTAT, EstimatorKind::COMPLETE_CASE })
    if (estimator_name(k) == s)
      return k;
  throw ValidationError("config: unknown estimator '" + s + "'");
}

} // namespace

EstimatorConfig
apply(const EstimatorOverrides& o, EstimatorConfig base)
{
  if (o.M)
    base.M = *o.M;
  if (o.eta)
    base.eta = *o.eta;
  if (o.h)
    base.h = *o.h;
  if (o.T)
    base.T = *o.T;
  if (o.seed)
    base.seed = *o.seed;
  if (o.ustat_budget)
    base.ustat_budget = *o.ustat_budget;
  if (o.max_chains)
    base.max_chains = *o.max_chains;
  return base;
}

Pattern
parse_pattern_key(const std::string& key)
{
  std::string body = key;
  if (!body.empty() && body.front() == '{' && body.back() == '}')
    body = body.substr(1, body.size() - 2);
  Pattern s;
  std::stringstream in(body);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      int j = std::stoi(part, &used);
      if (used != part.size() && part.find_first_not_of(' ', used) != std::string::npos)
        throw std::invalid_argument("trailing");
      if (j < 1)
        throw std::invalid_argument("index");
      s.push_back(j - 1);
    } catch (const std::exception&) {
      throw ValidationError("config: malformed pattern key '" + key + "'");
    }
  }
  if (s.empty())
    throw ValidationError("config: malformed pattern key '" + key + "'");
  std::sort(s.begin(), s.end());
  return s;
}

FiniteSupportDistribution
parse_distribution(const Json& j, const std::string& where)
{
  if (j.contains("atoms")) {
    reject_unknown(j, { "atoms", "probabilities" }, where);
    if (!j["atoms"].is_array() || !j.contains("probabilities") || !j["probabilities"].is_array())
      throw ValidationError("config: " + where + " needs arrays 'atoms' and 'probabilities'");
    std::vector<std::vector<double>> atoms, probs;
    for (const auto& a : j["atoms"])
      atoms.push_back(as_doubles(a, where + ".atoms", false));
    for (const auto& p : j["probabilities"])
      probs.push_back(as_doubles(p, where + ".probabilities", false));
    return FiniteSupportDistribution::product(atoms, probs);
  }
  reject_unknown(j, { "support", "probabilities" }, where);
  if (!j.contains("support") || !j["support"].is_array() || !j.contains("probabilities"))
    throw ValidationError("config: " + where + " needs 'support' and 'probabilities'");
  std::vector<std::vector<double>> support;
  for (const auto& x : j["support"])
    support.push_back(as_doubles(x, where + ".support", false));
  return { support, as_doubles(j["probabilities"], where + ".probabilities", false) };
}

RunConfig
parse_config(const Json& j, const std::filesystem::path& base_dir)
{
  reject_unknown(j,
                 { "data", "d", "patterns", "a", "declared_bound", "shifts", "estimator", "ustat",
                   "alpha", "output", "threads", "oracle", "scenario" },
                 "config");
  RunConfig c;
  c.raw = j;
  if (j.contains("data")) {
    const Json& d = j["data"];
    reject_unknown(d, { "path", "header" }, "data");
    if (!d.contains("path"))
      throw ValidationError("config: data.path is required");
    DataSource src;
    std::filesystem::path p = as_string(d["path"], "data.path");
    src.path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
    if (d.contains("header"))
      src.header = as_bool(d["header"], "data.header");
    c.data = src;
  }
  if (j.contains("d"))
    c.d = static_cast<int>(as_int(j["d"], "d"));
  if (j.contains("patterns")) {
    if (!j["patterns"].is_array())
      throw ValidationError("config: patterns must be an array");
    std::vector<Pattern> ps;
    for (const auto& p : j["patterns"])
      ps.push_back(as_pattern(p, "patterns"));
    c.patterns = ps;
  }
  if (j.contains("a"))
    c.a = as_string(j["a"], "a");
  if (j.contains("declared_bound"))
    c.declared_bound = as_finite(j["declared_bound"], "declared_bound");
  if (j.contains("shifts")) {
    const Json& s = j["shifts"];
    if (!s.is_object())
      throw ValidationError("config: shifts must be an object");
    for (auto it = s.begin(); it != s.end(); ++it)
      c.shifts[parse_pattern_key(it.key())] = as_string(it.value(), "shifts." + it.key());
  }
  if (j.contains("estimator")) {
    const Json& e = j["estimator"];
    reject_unknown(e, { "M", "eta", "h", "T", "seed", "ustat_budget", "max_chains" }, "estimator");
    if (e.contains("M"))
      c.estimator.M = static_cast<int>(as_int(e["M"], "estimator.M"));
    if (e.contains("eta"))
      c.estimator.eta = as_finite(e["eta"], "estimator.eta");
    if (e.contains("h"))
      c.estimator.h = as_finite(e["h"], "estimator.h");
    if (e.contains("T"))
      c.estimator.T = as_finite(e["T"], "estimator.T");
    if (e.contains("seed"))
      c.estimator.seed = as_uint(e["seed"], "estimator.seed");
    if (e.contains("ustat_budget"))
      c.estimator.ustat_budget = as_uint(e["ustat_budget"], "estimator.ustat_budget");
    if (e.contains("max_chains"))
      c.estimator.max_chains = as_uint(e["max_chains"], "estimator.max_chains");
  }
  if (j.contains("ustat")) {
    const Json& u = j["ustat"];
    reject_unknown(u, { "M", "h", "eta", "enumeration", "budget", "seed", "exact_cap" }, "ustat");
    if (u.contains("M"))
      c.ustat.M = static_cast<int>(as_int(u["M"], "ustat.M"));
    if (u.contains("h"))
      c.ustat.h = as_finite(u["h"], "ustat.h");
    if (u.contains("eta"))
      c.ustat.eta = as_finite(u["eta"], "ustat.eta");
    if (u.contains("enumeration")) {
      auto e = as_string(u["enumeration"], "ustat.enumeration");
      if (e == "EXACT")
        c.ustat.enumeration = Enumeration::EXACT;
      else if (e == "SUBSAMPLED")
        c.ustat.enumeration = Enumeration::SUBSAMPLED;
      else
        throw ValidationError("config: ustat.enumeration must be EXACT or SUBSAMPLED");
    }
    if (u.contains("budget"))
      c.ustat.budget = as_uint(u["budget"], "ustat.budget");
    if (u.contains("seed"))
      c.ustat.seed = as_uint(u["seed"], "ustat.seed");
    if (u.contains("exact_cap"))
      c.ustat.exact_cap = as_uint(u["exact_cap"], "ustat.exact_cap");
  }
  if (j.contains("alpha")) {
    c.alpha = as_finite(j["alpha"], "alpha");
    if (!(c.alpha > 0.0 && c.alpha < 1.0))
      throw ValidationError("config: alpha must lie in (0, 1)");
  }
  if (j.contains("output"))
    c.output = as_string(j["output"], "output");
  if (j.contains("threads"))
    c.threads = static_cast<std::size_t>(as_uint(j["threads"], "threads"));
  if (j.contains("oracle")) {
    const Json& o = j["oracle"];
    reject_unknown(o, { "kind", "rho", "lambda", "distribution", "M", "eta", "max_chains" }, "oracle");
    OracleSpec spec;
    if (!o.contains("kind"))
      throw ValidationError("config: oracle.kind is required");
    spec.kind = as_string(o["kind"], "oracle.kind");
    static const std::set<std::string> kinds{ "gaussian", "exact", "gradient_descent", "chains",
                                              "product", "monotone_mcar", "monotone_shifted" };
    if (!kinds.count(spec.kind))
      throw ValidationError("config: unknown oracle kind '" + spec.kind + "'");
    if (o.contains("rho"))
      spec.rho = as_finite(o["rho"], "oracle.rho");
    if (o.contains("lambda"))
      spec.lambda = as_doubles(o["lambda"], "oracle.lambda", true);
    if (o.contains("distribution"))
      spec.distribution = parse_distribution(o["distribution"], "oracle.distribution");
    if (o.contains("M"))
      spec.M = static_cast<int>(as_int(o["M"], "oracle.M"));
    if (o.contains("eta"))
      spec.eta = as_finite(o["eta"], "oracle.eta");
    if (o.contains("max_chains"))
      spec.max_chains = as_uint(o["max_chains"], "oracle.max_chains");
    c.oracle = spec;
  }
  if (j.contains("scenario")) {
    const Json& s = j["scenario"];
    reject_unknown(s,
                   { "generator", "rho", "distribution", "lambda", "n", "replications", "seed", "estimator" },
                   "scenario");
    ScenarioSpec spec;
    if (!s.contains("generator") || !s.contains("n") || !s.contains("lambda"))
      throw ValidationError("config: scenario needs generator, n and lambda");
    spec.generator = parse_generator(as_string(s["generator"], "scenario.generator"));
    if (s.contains("rho"))
      spec.rho = as_finite(s["rho"], "scenario.rho");
    if (s.contains("distribution"))
      spec.distribution = parse_distribution(s["distribution"], "scenario.distribution");
    spec.lambda = as_doubles(s["lambda"], "scenario.lambda", false);
    spec.n = static_cast<std::size_t>(as_uint(s["n"], "scenario.n"));
    if (s.contains("replications"))
      spec.replications = static_cast<std::size_t>(as_uint(s["replications"], "scenario.replications"));
    if (s.contains("seed"))
      spec.seed = as_uint(s["seed"], "scenario.seed");
    if (s.contains("estimator"))
      spec.estimator = parse_estimator(as_string(s["estimator"], "scenario.estimator"));
    c.scenario = spec;
  }
  return c;
}

RunConfig
load_config(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ValidationError("cannot read config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

PatternSet
make_patterns(const RunConfig& c, int d)
{
  if (!c.patterns)
    throw ValidationError("config: patterns are required");
  return { d, *c.patterns };
}

Functional
make_functional(const RunConfig& c, int d)
{
  if (!c.a)
    throw ValidationError("config: the functional 'a' is required");
  Functional f = expr::make_functional(expr::parse(*c.a, d), *c.a);
  f.declared_bound = c.declared_bound;
  return f;
}

ShiftSpec
make_shifts(const RunConfig& c, const PatternSet& patterns)
{
  if (c.shifts.empty())
    return ShiftSpec::mcar();
  std::map<Pattern, ShiftFunction> fns;
  for (const auto& [s, src] : c.shifts) {
    if (!patterns.index_of(s))
      throw ValidationError("config: shift given for unlisted pattern " + format_pattern(s));
    fns[s] = expr::make_shift(expr::parse_restricted(src, patterns.dimension(), s));
  }
  return ShiftSpec::shifted(std::move(fns));
}

Json
to_json(const EstimatorConfig& c)
{
  Json j;
  j["M"] = c.M;
  j["eta"] = c.eta;
  j["h"] = c.h;
  j["T"] = c.T;
  j["seed"] = c.seed;
  j["ustat_budget"] = c.ustat_budget ? Json(*c.ustat_budget) : Json(nullptr);
  j["max_chains"] = c.max_chains;
  return j;
}

Json
to_json(const UStatConfig& c)
{
  Json j;
  j["M"] = c.M;
  j["h"] = c.h;
  j["eta"] = c.eta ? Json(*c.eta) : Json(nullptr);
  j["enumeration"] = c.enumeration == Enumeration::EXACT ? "EXACT" : "SUBSAMPLED";
  j["budget"] = c.budget;
  j["seed"] = c.seed;
  j["exact_cap"] = c.exact_cap;
  return j;
}

Json
patterns_json(const PatternSet& p)
{
  Json out = Json::array();
  for (const auto& s : p.patterns()) {
    Json one = Json::array();
    for (int v : s)
      one.push_back(v + 1);
    out.push_back(one);
  }
  return out;
}

} // namespace fusemean::cli
