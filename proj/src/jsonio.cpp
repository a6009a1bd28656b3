#include "ctmed/jsonio.hpp"

#include "ctmed/csv.hpp"
#include "ctmed/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

namespace ctmed {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed, const std::string& origin) {
  std::set<std::string> ok;
  for (const char* k : allowed) ok.insert(k);
  for (const auto& item : j.items()) {
    if (!ok.count(item.key())) {
      throw config_error(origin + ": unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error(std::string("bad value for key '") + key + "'");
  }
}

KernelFamily parse_kernel_family(const std::string& s, const std::string& origin) {
  if (s == "gaussian") return KernelFamily::Gaussian;
  if (s == "epanechnikov") return KernelFamily::Epanechnikov;
  throw config_error(origin + ": unknown kernel family '" + s + "'");
}

NuisanceFamily parse_nuisance_family(const std::string& s, const std::string& origin) {
  if (s == "linear") return NuisanceFamily::Linear;
  if (s == "kernel") return NuisanceFamily::Kernel;
  throw config_error(origin + ": unknown nuisance family '" + s + "'");
}

EstimatorKind parse_estimator(const std::string& s, const std::string& origin) {
  if (s == "triple_robust") return EstimatorKind::TripleRobust;
  if (s == "plugin") return EstimatorKind::Plugin;
  throw config_error(origin + ": unknown estimator '" + s + "'");
}

MisspecPattern parse_pattern(const std::string& s, const std::string& origin) {
  if (s == "none") return MisspecPattern::None;
  if (s == "gamma") return MisspecPattern::Gamma;
  if (s == "alpha") return MisspecPattern::Alpha;
  if (s == "lambda") return MisspecPattern::Lambda;
  if (s == "gamma_alpha") return MisspecPattern::GammaAlpha;
  if (s == "gamma_lambda") return MisspecPattern::GammaLambda;
  if (s == "alpha_lambda") return MisspecPattern::AlphaLambda;
  throw config_error(origin + ": unknown misspecification pattern '" + s + "'");
}

DgpSpec parse_dgp(const json& j, const std::string& origin) {
  check_keys(j, "dgp",
             {"name", "a_x", "var_a", "m0", "m_a", "m_x", "var_m", "y0", "y_a", "y_m", "y_x",
              "var_y", "y_am", "seed"},
             origin);
  DgpSpec d;
  d.name = get_or<std::string>(j, "name", d.name);
  d.a_x = get_or<double>(j, "a_x", d.a_x);
  d.var_a = get_or<double>(j, "var_a", d.var_a);
  d.m0 = get_or<double>(j, "m0", d.m0);
  d.m_a = get_or<double>(j, "m_a", d.m_a);
  d.m_x = get_or<double>(j, "m_x", d.m_x);
  d.var_m = get_or<double>(j, "var_m", d.var_m);
  d.y0 = get_or<double>(j, "y0", d.y0);
  d.y_a = get_or<double>(j, "y_a", d.y_a);
  d.y_m = get_or<double>(j, "y_m", d.y_m);
  d.y_x = get_or<double>(j, "y_x", d.y_x);
  d.var_y = get_or<double>(j, "var_y", d.var_y);
  d.y_am = get_or<double>(j, "y_am", d.y_am);
  d.seed = get_or<std::uint64_t>(j, "seed", d.seed);
  return d;
}

KernelSpec parse_kernel(const json& j, const std::string& origin) {
  check_keys(j, "kernel", {"family", "bandwidth_constant", "treatment_dim"}, origin);
  KernelSpec k;
  if (j.contains("family")) {
    k.family = parse_kernel_family(j.at("family").get<std::string>(), origin);
  }
  k.bandwidth_constant = get_or<double>(j, "bandwidth_constant", k.bandwidth_constant);
  k.treatment_dim = get_or<int>(j, "treatment_dim", k.treatment_dim);
  return k;
}

NuisanceConfig parse_nuisance(const json& j, const std::string& origin) {
  check_keys(j, "nuisance",
             {"gamma_family", "alpha_family", "lambda_family", "gamma_interactions",
              "trim_floor", "quadrature"},
             origin);
  NuisanceConfig n;
  if (j.contains("gamma_family")) {
    n.gamma_family = parse_nuisance_family(j.at("gamma_family").get<std::string>(), origin);
  }
  if (j.contains("alpha_family")) {
    n.alpha_family = parse_nuisance_family(j.at("alpha_family").get<std::string>(), origin);
  }
  if (j.contains("lambda_family")) {
    n.lambda_family = parse_nuisance_family(j.at("lambda_family").get<std::string>(), origin);
  }
  n.gamma_interactions = get_or<bool>(j, "gamma_interactions", n.gamma_interactions);
  n.trim_floor = get_or<double>(j, "trim_floor", n.trim_floor);
  if (j.contains("quadrature")) {
    const json& q = j.at("quadrature");
    check_keys(q, "quadrature", {"n_points", "half_width_sigmas"}, origin);
    n.quadrature.n_points = get_or<int>(q, "n_points", n.quadrature.n_points);
    n.quadrature.half_width_sigmas =
        get_or<double>(q, "half_width_sigmas", n.quadrature.half_width_sigmas);
  }
  return n;
}

std::vector<TreatmentPair> parse_pairs(const json& j, const std::string& origin) {
  if (!j.is_array() || j.empty()) {
    throw config_error(origin + ": 'pairs' must be a non-empty array");
  }
  std::vector<TreatmentPair> pairs;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw config_error(origin + ": each pair must be a two-number array [a, a_prime]");
    }
    pairs.push_back(TreatmentPair::scalar(p[0].get<double>(), p[1].get<double>()));
  }
  return pairs;
}

}  // namespace

FileConfig parse_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw config_error(origin + ": config root must be an object");
  check_keys(j, "config",
             {"dgp", "kernel", "nuisance", "folds", "fixed_bandwidth", "pairs", "seed",
              "experiment", "workers"},
             origin);

  FileConfig cfg;
  if (j.contains("dgp")) {
    cfg.dgp = parse_dgp(j.at("dgp"), origin);
    cfg.has_dgp = true;
  }
  if (j.contains("kernel")) cfg.estimator.kernel = parse_kernel(j.at("kernel"), origin);
  if (j.contains("nuisance")) cfg.estimator.nuisance = parse_nuisance(j.at("nuisance"), origin);
  cfg.estimator.folds = get_or<int>(j, "folds", cfg.estimator.folds);
  cfg.estimator.seed = get_or<std::uint64_t>(j, "seed", cfg.estimator.seed);
  if (j.contains("fixed_bandwidth") && !j.at("fixed_bandwidth").is_null()) {
    cfg.estimator.fixed_bandwidth = j.at("fixed_bandwidth").get<double>();
  }
  if (j.contains("pairs")) cfg.pairs = parse_pairs(j.at("pairs"), origin);
  cfg.workers = get_or<int>(j, "workers", cfg.workers);
  if (cfg.workers < 1) throw config_error(origin + ": workers must be at least 1");

  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    check_keys(e, "experiment", {"n_grid", "reps", "estimators", "patterns"}, origin);
    ExperimentSpec& spec = cfg.experiment;
    spec.dgp = cfg.dgp;
    spec.kernel = cfg.estimator.kernel;
    spec.nuisance = cfg.estimator.nuisance;
    spec.folds = cfg.estimator.folds;
    spec.base_seed = cfg.estimator.seed;
    spec.pairs = cfg.pairs;
    if (!e.contains("n_grid")) throw config_error(origin + ": experiment needs 'n_grid'");
    spec.n_grid = e.at("n_grid").get<std::vector<std::size_t>>();
    spec.reps = get_or<int>(e, "reps", spec.reps);
    if (e.contains("estimators")) {
      spec.estimators.clear();
      for (const json& s : e.at("estimators")) {
        spec.estimators.push_back(parse_estimator(s.get<std::string>(), origin));
      }
    } else {
      spec.estimators = {EstimatorKind::TripleRobust};
    }
    if (e.contains("patterns")) {
      spec.patterns.clear();
      for (const json& s : e.at("patterns")) {
        spec.patterns.push_back(parse_pattern(s.get<std::string>(), origin));
      }
    } else {
      spec.patterns = {MisspecPattern::None};
    }
    cfg.has_experiment = true;
  }
  return cfg;
}

FileConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

namespace {

json pair_json(const TreatmentPair& pair) {
  json p;
  p["a"] = std::vector<double>(pair.a.data(), pair.a.data() + pair.a.size());
  p["a_prime"] =
      std::vector<double>(pair.a_prime.data(), pair.a_prime.data() + pair.a_prime.size());
  return p;
}

json result_json(const EstimateResult& r) {
  json j;
  j["psi_hat"] = r.psi_hat;
  j["se"] = r.se;
  j["ci_lower"] = r.ci_lower;
  j["ci_upper"] = r.ci_upper;
  j["h_used"] = r.h_used;
  j["n"] = r.n;
  j["per_fold"] = r.per_fold;
  j["pair"] = pair_json(r.pair);
  return j;
}

json effect_json(const EffectEstimate& e) {
  json j;
  j["value"] = e.value;
  j["se"] = e.se;
  j["ci_lower"] = e.ci_lower;
  j["ci_upper"] = e.ci_upper;
  return j;
}

json decomposition_json(const EffectDecomposition& d) {
  json j;
  j["pair"] = pair_json(d.pair);
  j["ace"] = effect_json(d.ace);
  j["nde"] = effect_json(d.nde);
  j["nie"] = effect_json(d.nie);
  json c;
  c["psi_aa"] = result_json(d.psi_aa);
  c["psi_a_aprime"] = result_json(d.psi_aap);
  c["psi_aprime_aprime"] = result_json(d.psi_apap);
  j["components"] = c;
  return j;
}

}  // namespace

std::string to_json(const EstimateResult& result) { return result_json(result).dump(2) + "\n"; }

std::string to_json(const EffectDecomposition& decomposition) {
  return decomposition_json(decomposition).dump(2) + "\n";
}

std::string estimates_to_json(const std::vector<EffectDecomposition>& rows) {
  json j = json::array();
  for (const auto& d : rows) j.push_back(decomposition_json(d));
  json root;
  root["estimates"] = j;
  return root.dump(2) + "\n";
}

std::string estimates_to_csv(const std::vector<EffectDecomposition>& rows) {
  std::ostringstream out;
  out << "a,a_prime,psi_hat,psi_se,psi_ci_lower,psi_ci_upper,"
         "ace,ace_se,ace_ci_lower,ace_ci_upper,"
         "nde,nde_se,nde_ci_lower,nde_ci_upper,"
         "nie,nie_se,nie_ci_lower,nie_ci_upper,h_used,n\n";
  for (const auto& d : rows) {
    const EstimateResult& r = d.psi_aap;
    out << format_double(d.pair.a(0)) << "," << format_double(d.pair.a_prime(0)) << ","
        << format_double(r.psi_hat) << "," << format_double(r.se) << ","
        << format_double(r.ci_lower) << "," << format_double(r.ci_upper) << ","
        << format_double(d.ace.value) << "," << format_double(d.ace.se) << ","
        << format_double(d.ace.ci_lower) << "," << format_double(d.ace.ci_upper) << ","
        << format_double(d.nde.value) << "," << format_double(d.nde.se) << ","
        << format_double(d.nde.ci_lower) << "," << format_double(d.nde.ci_upper) << ","
        << format_double(d.nie.value) << "," << format_double(d.nie.se) << ","
        << format_double(d.nie.ci_lower) << "," << format_double(d.nie.ci_upper) << ","
        << format_double(r.h_used) << "," << r.n << "\n";
  }
  return out.str();
}

std::string report_to_json(const ExperimentReport& report, bool zero_wall_ms) {
  json cells = json::array();
  for (const CellReport& c : report.cells) {
    json j;
    j["estimator"] = estimator_name(c.estimator);
    j["n"] = c.n;
    j["a"] = std::vector<double>(c.pair.a.data(), c.pair.a.data() + c.pair.a.size());
    j["a_prime"] = std::vector<double>(c.pair.a_prime.data(),
                                       c.pair.a_prime.data() + c.pair.a_prime.size());
    j["pattern"] = pattern_name(c.pattern);
    j["psi0"] = c.psi0;
    j["bias"] = c.bias;
    j["sd"] = c.sd;
    j["rmse"] = c.rmse;
    j["mean_se"] = c.mean_se;
    j["coverage"] = c.coverage;
    j["skew"] = c.skew;
    j["kurtosis"] = c.kurtosis;
    j["reps_requested"] = c.reps_requested;
    j["reps_completed"] = c.reps_completed;
    j["wall_ms"] = zero_wall_ms ? 0.0 : c.wall_ms;
    json failures = json::array();
    for (const RepFailure& f : c.failures) {
      json fj;
      fj["rep"] = f.rep;
      fj["seed"] = f.seed;
      fj["message"] = f.message;
      failures.push_back(fj);
    }
    j["failures"] = failures;
    cells.push_back(j);
  }
  json root;
  root["cells"] = cells;
  return root.dump(2) + "\n";
}

std::string oracle_to_json(const DgpSpec& dgp, const std::vector<TreatmentPair>& pairs) {
  json rows = json::array();
  for (const TreatmentPair& p : pairs) {
    const EffectTruth t = oracle_effects(dgp, p);
    json j;
    j["a"] = p.a(0);
    j["a_prime"] = p.a_prime(0);
    j["psi0"] = oracle_psi(dgp, p);
    j["nde"] = t.nde;
    j["nie"] = t.nie;
    j["ace"] = t.ace;
    rows.push_back(j);
  }
  json root;
  root["dgp"] = dgp.name;
  root["oracle"] = rows;
  return root.dump(2) + "\n";
}

std::string oracle_to_csv(const DgpSpec& dgp, const std::vector<TreatmentPair>& pairs) {
  std::ostringstream out;
  out << "a,a_prime,psi0,nde,nie,ace\n";
  for (const TreatmentPair& p : pairs) {
    const EffectTruth t = oracle_effects(dgp, p);
    out << format_double(p.a(0)) << "," << format_double(p.a_prime(0)) << ","
        << format_double(oracle_psi(dgp, p)) << "," << format_double(t.nde) << ","
        << format_double(t.nie) << "," << format_double(t.ace) << "\n";
  }
  return out.str();
}

}  // namespace ctmed
