#include "adaptgd/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "adaptgd/accel.hpp"
#include "adaptgd/adaptive.hpp"
#include "adaptgd/baselines.hpp"
#include "adaptgd/datasets.hpp"
#include "adaptgd/diagnostics.hpp"
#include "adaptgd/problems.hpp"
#include "adaptgd/sgd.hpp"

namespace fs = std::filesystem;

namespace adaptgd {

// Schema ---------------------------------------------------------------------

namespace {

enum class ParamType { Number, Integer, String, NumberOrSymbol };

struct ParamRule {
  std::string name;
  ParamType type;
  Json fallback;  // null: required
  std::vector<std::string> symbols = {};
};

using Schema = std::vector<ParamRule>;

const std::map<std::string, Schema>& problem_schemas() {
  static const std::map<std::string, Schema> schemas = {
      {"delta_quadratic", {{"delta", ParamType::Number, 0.01}}},
      {"random_quadratic",
       {{"dim", ParamType::Integer, 10},
        {"mu", ParamType::Number, 0.01},
        {"L", ParamType::Number, 1.0},
        {"seed", ParamType::Integer, 0}}},
      {"logistic_synthetic",
       {{"n", ParamType::Integer, 200},
        {"dim", ParamType::Integer, 20},
        {"seed", ParamType::Integer, 0},
        {"gamma", ParamType::NumberOrSymbol, "1/n", {"1/n"}}}},
      {"logistic_libsvm",
       {{"path", ParamType::String, nullptr},
        {"num_features", ParamType::Integer, 0},
        {"gamma", ParamType::NumberOrSymbol, "1/n", {"1/n"}}}},
      {"matrix_factorization_synthetic",
       {{"rows", ParamType::Integer, 100},
        {"cols", ParamType::Integer, 80},
        {"true_rank", ParamType::Integer, 5},
        {"rank", ParamType::Integer, 10},
        {"seed", ParamType::Integer, 0}}},
      {"movielens",
       {{"path", ParamType::String, nullptr},
        {"rows", ParamType::Integer, 943},
        {"cols", ParamType::Integer, 1682},
        {"rank", ParamType::Integer, 10}}},
      {"cubic_synthetic",
       {{"dim", ParamType::Integer, 50},
        {"M", ParamType::Number, 10.0},
        {"seed", ParamType::Integer, 0}}},
      {"quartic", {}},
      {"interpolating_ls",
       {{"n", ParamType::Integer, 100},
        {"dim", ParamType::Integer, 20},
        {"mu", ParamType::Number, 0.1},
        {"L", ParamType::Number, 1.0},
        {"seed", ParamType::Integer, 0}}},
      {"stochastic_quadratics",
       {{"n", ParamType::Integer, 50},
        {"dim", ParamType::Integer, 10},
        {"mu", ParamType::Number, 0.1},
        {"L", ParamType::Number, 1.0},
        {"seed", ParamType::Integer, 0}}},
  };
  return schemas;
}

const Schema kLineSearchSchema = {{"init_step", ParamType::Number, 1.0},
                                  {"backtrack", ParamType::Number, 0.5},
                                  {"sufficient_decrease", ParamType::Number, 1e-4},
                                  {"max_halvings", ParamType::Integer, 60}};

const std::map<std::string, Schema>& method_schemas() {
  static const std::map<std::string, Schema> schemas = {
      {"adgd", {{"lambda0", ParamType::Number, 1e-10}}},
      {"adgd_plus", {{"lambda0", ParamType::Number, 1e-10}}},
      {"adgd_sc", {{"lambda0", ParamType::Number, 1e-10}}},
      {"adgd_general", {{"lambda0", ParamType::Number, 1e-10}, {"alpha", ParamType::Number, 0.5}}},
      {"adgd_known_l", {{"L", ParamType::NumberOrSymbol, "meta", {"meta"}}}},
      {"adgd_accel",
       {{"lambda0", ParamType::Number, 1e-10},
        {"Lambda0", ParamType::NumberOrSymbol, "1/lambda0", {"1/lambda0"}}}},
      {"gd", {{"lambda", ParamType::NumberOrSymbol, "1/L", {"1/L"}}}},
      {"nesterov",
       {{"lambda", ParamType::NumberOrSymbol, "1/L", {"1/L"}},
        {"beta", ParamType::NumberOrSymbol, "sequence", {"sequence"}}}},
      {"nesterov_sc",
       {{"L", ParamType::NumberOrSymbol, "meta", {"meta"}},
        {"mu", ParamType::NumberOrSymbol, "meta", {"meta"}}}},
      {"nesterov_ls", kLineSearchSchema},
      {"polyak", {{"f_star", ParamType::NumberOrSymbol, "meta", {"meta"}}}},
      {"bb1", {{"lambda0", ParamType::Number, 1e-10}}},
      {"bb2", {{"lambda0", ParamType::Number, 1e-10}}},
      {"armijo", kLineSearchSchema},
      {"sgd",
       {{"alpha", ParamType::Number, 0.5},
        {"option", ParamType::String, "biased", {"biased", "unbiased"}},
        {"batch_size", ParamType::Integer, 1},
        {"lambda0", ParamType::Number, 1e-10}}},
  };
  return schemas;
}

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) config_fail(where, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) config_fail(where, "unknown key '" + key + "'");
}

Json normalize_params(const Json& given, const Schema& schema, const std::string& where) {
  std::set<std::string> allowed;
  for (const auto& rule : schema) allowed.insert(rule.name);
  reject_unknown(given, allowed, where);

  Json out = Json::object();
  for (const auto& rule : schema) {
    const std::string at = where + "." + rule.name;
    if (!given.contains(rule.name)) {
      if (rule.fallback.is_null()) config_fail(at, "required parameter missing");
      out[rule.name] = rule.fallback;
      continue;
    }
    const Json& v = given.at(rule.name);
    switch (rule.type) {
      case ParamType::Number:
        if (!v.is_number()) config_fail(at, "expected a number");
        out[rule.name] = v.get<double>();
        break;
      case ParamType::Integer:
        if (!v.is_number_integer() || v.get<long long>() < 0)
          config_fail(at, "expected a nonnegative integer");
        out[rule.name] = v.get<long long>();
        break;
      case ParamType::String:
        if (!v.is_string()) config_fail(at, "expected a string");
        if (!rule.symbols.empty() &&
            std::find(rule.symbols.begin(), rule.symbols.end(), v.get<std::string>()) ==
                rule.symbols.end())
          config_fail(at, "unsupported value '" + v.get<std::string>() + "'");
        out[rule.name] = v;
        break;
      case ParamType::NumberOrSymbol:
        if (v.is_number()) {
          out[rule.name] = v.get<double>();
        } else if (v.is_string() && std::find(rule.symbols.begin(), rule.symbols.end(),
                                              v.get<std::string>()) != rule.symbols.end()) {
          out[rule.name] = v;
        } else {
          config_fail(at, "expected a number or '" + rule.symbols.front() + "'");
        }
        break;
    }
  }
  return out;
}

bool valid_label(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  reject_unknown(j, {"name", "problem", "methods", "termination", "seeds", "x0", "output_dir",
                     "threads", "reference"},
                 "config");
  ExperimentConfig c;
  if (j.contains("name")) {
    if (!j["name"].is_string()) config_fail("config.name", "expected a string");
    c.name = j["name"];
  }

  if (!j.contains("problem")) config_fail("config", "missing 'problem'");
  const Json& p = j["problem"];
  if (!p.is_object() || !p.contains("kind") || !p["kind"].is_string())
    config_fail("config.problem", "expected an object with a string 'kind'");
  c.problem.kind = p["kind"];
  const auto ps = problem_schemas().find(c.problem.kind);
  if (ps == problem_schemas().end())
    config_fail("config.problem.kind", "unknown problem kind '" + c.problem.kind + "'");
  reject_unknown(p, {"kind", "params"}, "config.problem");
  c.problem.params =
      normalize_params(p.value("params", Json::object()), ps->second, "config.problem.params");

  if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty())
    config_fail("config.methods", "expected a nonempty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < j["methods"].size(); ++i) {
    const Json& m = j["methods"][i];
    const std::string at = "config.methods[" + std::to_string(i) + "]";
    reject_unknown(m, {"type", "label", "params", "must_converge"}, at);
    if (!m.contains("type") || !m["type"].is_string()) config_fail(at, "missing string 'type'");
    MethodSpec spec;
    spec.type = m["type"];
    const auto ms = method_schemas().find(spec.type);
    if (ms == method_schemas().end()) config_fail(at, "unknown method type '" + spec.type + "'");
    spec.label = spec.type;
    if (m.contains("label")) {
      if (!m["label"].is_string()) config_fail(at + ".label", "expected a string");
      spec.label = m["label"];
    }
    if (!valid_label(spec.label)) config_fail(at + ".label", "use letters, digits, '_', '-', '.'");
    if (!labels.insert(spec.label).second) config_fail(at + ".label", "duplicate label");
    if (m.contains("must_converge")) {
      if (!m["must_converge"].is_boolean()) config_fail(at + ".must_converge", "expected a bool");
      spec.must_converge = m["must_converge"];
    }
    spec.params = normalize_params(m.value("params", Json::object()), ms->second, at + ".params");
    c.methods.push_back(std::move(spec));
  }

  if (j.contains("termination")) {
    const Json& t = j["termination"];
    reject_unknown(t, {"grad_tol", "max_iter", "divergence_cap"}, "config.termination");
    if (t.contains("grad_tol")) {
      if (!t["grad_tol"].is_number()) config_fail("config.termination.grad_tol", "expected a number");
      c.termination.grad_tol = t["grad_tol"];
    }
    if (t.contains("max_iter")) {
      if (!t["max_iter"].is_number_integer())
        config_fail("config.termination.max_iter", "expected an integer");
      c.termination.max_iter = t["max_iter"];
    }
    if (t.contains("divergence_cap")) {
      if (!t["divergence_cap"].is_number())
        config_fail("config.termination.divergence_cap", "expected a number");
      c.termination.divergence_cap = t["divergence_cap"];
    }
  }
  c.termination.validate();

  if (j.contains("seeds")) {
    if (!j["seeds"].is_array() || j["seeds"].empty())
      config_fail("config.seeds", "expected a nonempty array");
    c.seeds.clear();
    for (const auto& s : j["seeds"]) {
      if (!s.is_number_integer() || s.get<long long>() < 0)
        config_fail("config.seeds", "seeds are nonnegative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (j.contains("x0")) {
    if (!j["x0"].is_string() || (j["x0"] != "zeros" && j["x0"] != "normal"))
      config_fail("config.x0", "expected \"zeros\" or \"normal\"");
    c.x0 = j["x0"];
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string() || j["output_dir"].get<std::string>().empty())
      config_fail("config.output_dir", "expected a nonempty string");
    c.output_dir = j["output_dir"];
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0)
      config_fail("config.threads", "expected a nonnegative integer");
    c.threads = j["threads"];
  }
  if (j.contains("reference")) {
    const Json& r = j["reference"];
    reject_unknown(r, {"grad_tol", "max_iter"}, "config.reference");
    if (r.contains("grad_tol")) {
      if (!r["grad_tol"].is_number() || !(r["grad_tol"].get<double>() > 0.0))
        config_fail("config.reference.grad_tol", "expected a positive number");
      c.reference_grad_tol = r["grad_tol"];
    }
    if (r.contains("max_iter")) {
      if (!r["max_iter"].is_number_integer() || r["max_iter"].get<int>() < 1)
        config_fail("config.reference.max_iter", "expected a positive integer");
      c.reference_max_iter = r["max_iter"];
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return from_json(j);
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["name"] = name;
  j["problem"] = {{"kind", problem.kind}, {"params", problem.params}};
  j["methods"] = Json::array();
  for (const auto& m : methods)
    j["methods"].push_back({{"type", m.type},
                            {"label", m.label},
                            {"params", m.params},
                            {"must_converge", m.must_converge}});
  j["termination"] = {{"grad_tol", termination.grad_tol},
                      {"max_iter", termination.max_iter},
                      {"divergence_cap", termination.divergence_cap}};
  j["seeds"] = seeds;
  j["x0"] = x0;
  j["output_dir"] = output_dir;
  j["threads"] = threads;
  j["reference"] = {{"grad_tol", reference_grad_tol}, {"max_iter", reference_max_iter}};
  return j;
}

// Problems -------------------------------------------------------------------

std::string resolve_data_path(const std::string& path) {
  if (fs::path(path).is_absolute()) return path;
  const char* root = std::getenv(kDataEnv);
  if (root == nullptr || *root == '\0') return path;
  return (fs::path(root) / path).string();
}

namespace {

int int_param(const Json& params, const char* key) { return params.at(key).get<int>(); }
double num_param(const Json& params, const char* key) { return params.at(key).get<double>(); }

std::function<Vector(std::uint64_t, const std::string&)> gaussian_start(int dim) {
  return [dim](std::uint64_t seed, const std::string& mode) -> Vector {
    if (mode == "zeros") return Vector::Zero(dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x(i) = normal(rng);
    return x;
  };
}

template <class P>
ProblemInstance own(P problem, bool convex) {
  auto ptr = std::make_shared<const P>(std::move(problem));
  ProblemInstance inst;
  inst.meta = ptr->meta();
  inst.convex = convex;
  inst.initial_point = gaussian_start(ptr->dim());
  if constexpr (std::is_base_of_v<StochasticObjective, P>) inst.stochastic = ptr.get();
  inst.objective = std::move(ptr);
  return inst;
}

double gamma_param(const Json& params, int n) {
  const Json& g = params.at("gamma");
  return g.is_string() ? 1.0 / n : g.get<double>();
}

ProblemInstance factorization_instance(MatrixFactorizationProblem problem) {
  const int m = static_cast<int>(problem.A().rows());
  const int n = static_cast<int>(problem.A().cols());
  const int r = problem.rank();
  auto ptr = std::make_shared<const MatrixFactorizationProblem>(std::move(problem));
  ProblemInstance inst;
  inst.meta = ptr->meta();
  inst.convex = false;
  // (0, 0) is a stationary point, so both modes draw a seeded normal start.
  inst.initial_point = [m, n, r](std::uint64_t seed, const std::string&) {
    return mf_initial_point(m, n, r, seed);
  };
  inst.objective = std::move(ptr);
  return inst;
}

}  // namespace

ProblemInstance build_problem(const ProblemSpec& spec) {
  const Json& p = spec.params;
  const std::string& k = spec.kind;
  if (k == "delta_quadratic") return own(make_delta_quadratic(num_param(p, "delta")), true);
  if (k == "random_quadratic")
    return own(make_random_quadratic(int_param(p, "dim"), num_param(p, "mu"), num_param(p, "L"),
                                     p.at("seed").get<std::uint64_t>()),
               true);
  if (k == "logistic_synthetic") {
    const int n = int_param(p, "n");
    return own(make_synthetic_logistic(n, int_param(p, "dim"), p.at("seed").get<std::uint64_t>(),
                                       gamma_param(p, std::max(n, 1))),
               true);
  }
  if (k == "logistic_libsvm") {
    LabeledData data = load_libsvm(resolve_data_path(p.at("path")), int_param(p, "num_features"));
    const double gamma = gamma_param(p, static_cast<int>(data.A.rows()));
    return own(LogisticProblem(std::move(data.A), std::move(data.b), gamma), true);
  }
  if (k == "matrix_factorization_synthetic") {
    const int true_rank = int_param(p, "true_rank");
    const int rank = int_param(p, "rank");
    MatrixFactorizationProblem problem(
        make_low_rank_matrix(int_param(p, "rows"), int_param(p, "cols"), true_rank,
                             p.at("seed").get<std::uint64_t>()),
        rank);
    if (true_rank <= rank) problem.set_exact_low_rank();
    return factorization_instance(std::move(problem));
  }
  if (k == "movielens") {
    RatingsData data =
        load_movielens(resolve_data_path(p.at("path")), int_param(p, "rows"), int_param(p, "cols"));
    return factorization_instance(MatrixFactorizationProblem(std::move(data.A), int_param(p, "rank")));
  }
  if (k == "cubic_synthetic") {
    auto problem = std::make_shared<const CubicRegProblem>(make_cubic_synthetic(
        int_param(p, "dim"), num_param(p, "M"), p.at("seed").get<std::uint64_t>()));
    ProblemInstance inst;
    inst.convex = true;
    inst.initial_point = gaussian_start(problem->dim());
    inst.objective = std::move(problem);
    return inst;
  }
  if (k == "quartic") {
    ProblemInstance inst;
    inst.objective = std::make_shared<const FunctionObjective>(make_quartic());
    inst.meta.x_star = Vector::Zero(1);
    inst.meta.f_star = 0.0;
    inst.initial_point = gaussian_start(1);
    return inst;
  }
  if (k == "interpolating_ls")
    return own(make_interpolating_ls(int_param(p, "n"), int_param(p, "dim"), num_param(p, "mu"),
                                     num_param(p, "L"), p.at("seed").get<std::uint64_t>()),
               true);
  if (k == "stochastic_quadratics")
    return own(make_stochastic_quadratics(int_param(p, "n"), int_param(p, "dim"),
                                          num_param(p, "mu"), num_param(p, "L"),
                                          p.at("seed").get<std::uint64_t>()),
               true);
  throw ConfigError("unknown problem kind '" + k + "'");
}

// Traces ---------------------------------------------------------------------

namespace {

std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

}  // namespace

void write_trace_csv(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << kCsvHeader << '\n';
  for (const auto& r : trace.rows) {
    out << r.k << ',' << csv_number(r.f_value) << ',' << csv_number(r.grad_norm) << ','
        << csv_number(r.lambda) << ',' << csv_number(r.theta) << ',' << csv_number(r.energy) << ','
        << csv_number(r.ergodic_gap) << ',' << r.oracle_calls << '\n';
  }
}

// Runner ---------------------------------------------------------------------

namespace {

struct Reference {
  std::optional<double> f;
  std::optional<Vector> x;
  std::string source = "none";
};

double require_meta(const std::optional<double>& v, const std::string& what,
                    const std::string& label) {
  if (!v) throw ConfigError(label + ": problem supplies no " + what);
  return *v;
}

double resolve_number(const Json& v, const std::optional<double>& meta_value,
                      const std::string& what, const std::string& label) {
  return v.is_number() ? v.get<double>() : require_meta(meta_value, what, label);
}

LineSearchParams line_search_from(const Json& p) {
  LineSearchParams ls;
  ls.init_step = p.at("init_step");
  ls.backtrack = p.at("backtrack");
  ls.sufficient_decrease = p.at("sufficient_decrease");
  ls.max_halvings = p.at("max_halvings");
  return ls;
}

std::unique_ptr<Method> make_method(const MethodSpec& m, const ProblemInstance& inst,
                                    const Reference& ref) {
  const Json& p = m.params;
  const auto& t = m.type;
  const auto L = inst.meta.L_global;
  if (t == "adgd" || t == "adgd_plus" || t == "adgd_sc" || t == "adgd_general") {
    AdaptiveConfig cfg;
    cfg.rule = t == "adgd"        ? AdaptiveRule::Standard
               : t == "adgd_plus" ? AdaptiveRule::Plus
               : t == "adgd_sc"   ? AdaptiveRule::StronglyConvex
                                  : AdaptiveRule::General;
    cfg.lambda0 = p.at("lambda0");
    if (t == "adgd_general") cfg.alpha = p.at("alpha");
    return std::make_unique<AdaptiveGradientDescent>(cfg);
  }
  if (t == "adgd_known_l") {
    AdaptiveConfig cfg;
    cfg.rule = AdaptiveRule::KnownL;
    cfg.L = resolve_number(p.at("L"), L, "global L", m.label);
    cfg.check_lipschitz = true;
    return std::make_unique<AdaptiveGradientDescent>(cfg);
  }
  if (t == "adgd_accel") {
    AccelConfig cfg;
    cfg.lambda0 = p.at("lambda0");
    cfg.Lambda0 = p.at("Lambda0").is_number() ? p.at("Lambda0").get<double>() : 0.0;
    return std::make_unique<AdaptiveAccelerated>(cfg);
  }
  BaselineConfig b;
  if (t == "gd") {
    b.variant = BaselineVariant::GD;
    b.lambda = p.at("lambda").is_number() ? p.at("lambda").get<double>()
                                          : 1.0 / require_meta(L, "global L", m.label);
  } else if (t == "nesterov") {
    b.variant = BaselineVariant::Nesterov;
    b.lambda = p.at("lambda").is_number() ? p.at("lambda").get<double>()
                                          : 1.0 / require_meta(L, "global L", m.label);
    if (p.at("beta").is_number()) b.beta = p.at("beta").get<double>();
  } else if (t == "nesterov_sc") {
    const double Lv = resolve_number(p.at("L"), L, "global L", m.label);
    const double mu = resolve_number(p.at("mu"), inst.meta.mu_global, "mu", m.label);
    return std::make_unique<Nesterov>(Nesterov::strongly_convex(Lv, mu));
  } else if (t == "nesterov_ls") {
    b.variant = BaselineVariant::NesterovLS;
    b.ls_params = line_search_from(p);
  } else if (t == "polyak") {
    b.variant = BaselineVariant::Polyak;
    b.f_star = resolve_number(p.at("f_star"), ref.f, "f* (and no reference)", m.label);
  } else if (t == "bb1" || t == "bb2") {
    b.variant = t == "bb1" ? BaselineVariant::BB1 : BaselineVariant::BB2;
    b.lambda0 = p.at("lambda0");
  } else if (t == "armijo") {
    b.variant = BaselineVariant::ArmijoGD;
    b.ls_params = line_search_from(p);
  } else {
    throw ConfigError("unknown method type '" + t + "'");
  }
  return make_baseline(b);
}

SgdConfig sgd_config(const MethodSpec& m, std::uint64_t seed) {
  SgdConfig cfg;
  cfg.alpha = m.params.at("alpha");
  cfg.option = m.params.at("option") == "unbiased" ? SgdOption::UnbiasedFreshSample
                                                   : SgdOption::BiasedSameSample;
  cfg.batch_size = m.params.at("batch_size");
  cfg.lambda0 = m.params.at("lambda0");
  cfg.seed = seed;
  return cfg;
}

bool certifiable(const std::string& type) {
  return type == "adgd" || type == "adgd_sc" || type == "adgd_general";
}

std::optional<ConstructionSpec> construction_spec(const MethodSpec& m, const ProblemInstance& inst) {
  ConstructionSpec s;
  if (m.type == "adgd") s.rule = AdaptiveRule::Standard;
  else if (m.type == "adgd_sc") s.rule = AdaptiveRule::StronglyConvex;
  else if (m.type == "adgd_general") {
    s.rule = AdaptiveRule::General;
    s.alpha = m.params.at("alpha");
  } else if (m.type == "adgd_known_l") {
    s.rule = AdaptiveRule::KnownL;
    s.L = m.params.at("L").is_number() ? m.params.at("L").get<double>() : *inst.meta.L_global;
  } else if (m.type == "adgd_plus") {
    s.rule = AdaptiveRule::Plus;
  } else {
    return std::nullopt;
  }
  return s;
}

CellResult run_cell(const ExperimentConfig& config, const MethodSpec& m, std::uint64_t seed,
                    const ProblemInstance& inst, const Reference& ref) {
  CellResult cell;
  cell.label = m.label;
  cell.method = m.type;
  cell.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Vector x0 = inst.initial_point(seed, config.x0);
    RunOptions options;
    const bool certify = inst.convex && certifiable(m.type) && (inst.meta.has_solution() || ref.x);
    options.record_iterates = certify;

    if (m.type == "sgd") {
      if (inst.stochastic == nullptr)
        throw ConfigError(m.label + ": problem has no finite-sum structure for sgd");
      cell.trace = run_sgd(sgd_config(m, seed), *inst.stochastic, x0, config.termination, options);
    } else {
      auto method = make_method(m, inst, ref);
      cell.trace = run(*method, *inst.objective, x0, config.termination, options);
    }

    if (certify) {
      ProblemMeta meta = inst.meta;
      if (!meta.has_solution()) {
        meta.x_star = *ref.x;
        meta.f_star = *ref.f;
      }
      const EnergyWeights w = m.type == "adgd_general"
                                  ? EnergyWeights::general(m.params.at("alpha").get<double>())
                                  : EnergyWeights{};
      const ConvexCertificate c = certify_convex_trace(cell.trace, *inst.objective, meta, w);
      cell.violations["energy_inequality"] = c.lemma_violations;
      cell.violations["energy_monotonicity"] = c.monotonicity_violations;
      cell.violations["ergodic_certificate"] = c.certificate_violations;
      cell.violations["negative_weights"] = c.negative_weights;
      if (meta.L_global) cell.violations["rate_DL_over_k"] = c.rate_violations;
      for (auto& row : cell.trace.rows) row.x.resize(0);
    }
    if (const auto spec = construction_spec(m, inst)) {
      const ConstructionCheck cc = check_construction(cell.trace, *spec);
      cell.violations["growth"] = cc.growth_violations;
      cell.violations["curvature"] = cc.curvature_violations;
      if (spec->rule == AdaptiveRule::KnownL) cell.violations["known_l_ledger"] = cc.ledger_violations;
      if (inst.meta.L_global && inst.convex && spec->rule != AdaptiveRule::Plus) {
        const double L = *inst.meta.L_global;
        const double floor = stepsize_floor(spec->rule, spec->alpha, L);
        cell.violations["stepsize_floor"] = count_stepsize_floor_violations(cell.trace, floor);
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    cell.error = e.what();
  }
  cell.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

Reference compute_reference(const ExperimentConfig& config, const ProblemInstance& inst,
                            std::ostream& log) {
  Reference ref;
  if (inst.meta.f_star) {
    ref.f = inst.meta.f_star;
    ref.x = inst.meta.x_star;
    ref.source = "meta";
    return ref;
  }
  if (!inst.objective->has_value()) return ref;

  const fs::path cache = fs::path(config.output_dir) / "reference.json";
  const Json key = {{"problem", {{"kind", config.problem.kind}, {"params", config.problem.params}}},
                    {"x0", config.x0},
                    {"seed", config.seeds.front()},
                    {"grad_tol", config.reference_grad_tol},
                    {"max_iter", config.reference_max_iter}};
  if (std::ifstream in(cache); in) {
    try {
      const Json cached = Json::parse(in);
      if (cached.at("key") == key) {
        const auto xs = cached.at("x_ref").get<std::vector<double>>();
        ref.x = Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
        ref.f = cached.at("f_ref").get<double>();
        ref.source = "reference (cached)";
        return ref;
      }
    } catch (const std::exception&) {
      // Stale or corrupt cache: recompute.
    }
  }

  log << "computing reference solution (grad_tol " << config.reference_grad_tol << ")\n";
  const ProblemMeta meta =
      reference_meta(*inst.objective, inst.initial_point(config.seeds.front(), config.x0),
                     config.reference_grad_tol, config.reference_max_iter);
  ref.x = meta.x_star;
  ref.f = meta.f_star;
  ref.source = "reference";
  std::ofstream out(cache);
  if (out) {
    Json j;
    j["key"] = key;
    j["f_ref"] = *ref.f;
    j["x_ref"] = std::vector<double>(ref.x->data(), ref.x->data() + ref.x->size());
    out << j.dump(1) << '\n';
  }
  return ref;
}

Json cell_summary(const CellResult& c, const ExperimentConfig& config,
                  const std::optional<double>& f_ref) {
  Json j;
  j["label"] = c.label;
  j["method"] = c.method;
  j["seed"] = c.seed;
  j["status"] = c.error.empty() ? to_string(c.trace.status) : "error";
  if (!c.error.empty()) j["error"] = c.error;
  j["iterations"] = c.trace.iterations();
  j["oracle_calls"] = c.trace.oracle_calls();
  const TraceRow* last = c.trace.rows.empty() ? nullptr : &c.trace.rows.back();
  j["final_f"] = last ? json_number(last->f_value) : Json(nullptr);
  j["final_grad_norm"] = last ? json_number(last->grad_norm) : Json(nullptr);
  j["final_gap"] = last && f_ref ? json_number(last->f_value - *f_ref) : Json(nullptr);

  Json to_tol = nullptr;
  Json to_gap = nullptr;
  for (const auto& r : c.trace.rows) {
    if (to_tol.is_null() && r.grad_norm <= config.termination.grad_tol) to_tol = r.k;
    if (to_gap.is_null() && f_ref && r.f_value - *f_ref <= 1e-6) to_gap = r.k;
  }
  j["iterations_to_grad_tol"] = to_tol;
  j["iterations_to_gap_1e-6"] = to_gap;
  j["wall_seconds"] = c.wall_seconds;
  j["violations"] = c.violations;
  return j;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log) {
  const ProblemInstance inst = build_problem(config.problem);
  fs::create_directories(config.output_dir);
  const Reference ref = compute_reference(config, inst, log);

  // Resolve every method once up front so configuration errors surface before any run.
  for (const auto& m : config.methods)
    if (m.type != "sgd") make_method(m, inst, ref);
    else if (inst.stochastic == nullptr)
      throw ConfigError(m.label + ": problem has no finite-sum structure for sgd");

  struct Job {
    const MethodSpec* method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.methods)
    for (auto s : config.seeds) jobs.push_back({&m, s});

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t width = config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw;

  ExperimentResult result;
  result.f_ref = ref.f;
  result.cells.resize(jobs.size());
  for (std::size_t begin = 0; begin < jobs.size(); begin += width) {
    const std::size_t end = std::min(jobs.size(), begin + width);
    std::vector<std::future<CellResult>> pending;
    for (std::size_t i = begin; i < end; ++i)
      pending.push_back(std::async(std::launch::async, [&, i] {
        return run_cell(config, *jobs[i].method, jobs[i].seed, inst, ref);
      }));
    for (std::size_t i = begin; i < end; ++i) result.cells[i] = pending[i - begin].get();
  }

  Json cells = Json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const CellResult& c = result.cells[i];
    const std::string file = c.label + "_seed" + std::to_string(c.seed) + ".csv";
    write_trace_csv(c.trace, (fs::path(config.output_dir) / file).string());
    cells.push_back(cell_summary(c, config, ref.f));
    log << c.label << " seed " << c.seed << ": "
        << (c.error.empty() ? to_string(c.trace.status) : "error: " + c.error) << " after "
        << c.trace.iterations() << " iterations\n";
    const bool failed = !c.error.empty() || c.trace.status == RunStatus::Diverged;
    if (failed && jobs[i].method->must_converge) result.exit_code = kExitDiverged;
  }

  result.summary["name"] = config.name;
  result.summary["config"] = config.to_json();
  result.summary["f_ref"] = ref.f ? Json(*ref.f) : Json(nullptr);
  result.summary["f_ref_source"] = ref.source;
  result.summary["cells"] = std::move(cells);
  std::ofstream out(fs::path(config.output_dir) / "summary.json");
  if (!out) throw Error("cannot write summary.json");
  out << result.summary.dump(2) << '\n';
  return result;
}

// Commands -------------------------------------------------------------------

int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig config = ExperimentConfig::load(config_path);
    const ExperimentResult result = run_experiment(config, out);
    if (result.exit_code == kExitDiverged)
      err << "a method marked must_converge diverged or failed\n";
    return result.exit_code;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << '\n';
    return kExitDataset;
  } catch (const nlohmann::json::exception& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
}

namespace {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

CsvTable read_csv(const fs::path& path) {
  CsvTable t;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return t;
  t.header = split_csv(line);
  while (std::getline(in, line))
    if (!line.empty()) t.rows.push_back(split_csv(line));
  return t;
}

}  // namespace

int cmd_plotdata(const std::string& dir, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> traces;
  std::error_code ec;
  if (fs::is_directory(dir, ec))
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".csv")
        traces.push_back(entry.path());
  std::sort(traces.begin(), traces.end());
  if (traces.empty()) {
    err << "no trace files in " << dir << '\n';
    return kExitDataset;
  }

  std::vector<CsvTable> tables;
  for (const auto& p : traces) tables.push_back(read_csv(p));

  std::optional<double> f_ref;
  if (std::ifstream in(fs::path(dir) / "summary.json"); in) {
    try {
      const Json s = Json::parse(in);
      if (s.contains("f_ref") && s["f_ref"].is_number()) f_ref = s["f_ref"].get<double>();
    } catch (const std::exception&) {
    }
  }
  if (!f_ref) {
    for (const auto& t : tables) {
      const int fc = t.column("f");
      if (fc < 0) continue;
      for (const auto& r : t.rows)
        if (fc < static_cast<int>(r.size()) && !r[fc].empty())
          f_ref = std::min(f_ref.value_or(kInf), std::stod(r[fc]));
    }
  }

  const fs::path plot_dir = fs::path(dir) / "plot";
  fs::create_directories(plot_dir);
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const CsvTable& t = tables[i];
    const int ic = t.column("iter");
    const int fc = t.column("f");
    const int lc = t.column("lambda");
    if (ic < 0) {
      err << "skipping " << traces[i].filename().string() << ": no iter column\n";
      continue;
    }
    const std::string stem = traces[i].stem().string();
    std::ofstream gap(plot_dir / (stem + "_gap.dat"));
    std::ofstream lam(plot_dir / (stem + "_lambda.dat"));
    for (const auto& r : t.rows) {
      auto cell = [&](int c) -> const std::string* {
        return c >= 0 && c < static_cast<int>(r.size()) && !r[c].empty() ? &r[c] : nullptr;
      };
      if (const auto* f = cell(fc); f && f_ref) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", std::stod(*f) - *f_ref);
        gap << r[ic] << ' ' << buf << '\n';
      }
      if (const auto* l = cell(lc)) lam << r[ic] << ' ' << *l << '\n';
    }
    out << "wrote " << (plot_dir / (stem + "_gap.dat")).string() << " and "
        << (plot_dir / (stem + "_lambda.dat")).string() << '\n';
  }
  return kExitOk;
}

}  // namespace adaptgd
