#include "asyncnet/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace asyncnet {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) {
  throw ConfigError("validation error: " + message);
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      fail("unknown key '" + item.key() + "' in " + where);
  }
}

double require_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail("field '" + field + "' must be a number");
  return j.get<double>();
}

int require_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) fail("field '" + field + "' must be an integer");
  return j.get<int>();
}

// Scalar-or-law field: a number, an explicit per-entry array, or one of
// {"uniform": [lo, hi]} and {"choices": [...]}. Draws happen in entry
// order so materialization is reproducible.
struct ScalarLaw {
  enum class Kind { kConstant, kArray, kUniform, kChoices } kind = Kind::kConstant;
  double constant = 0.0;
  std::vector<double> array;
  double lo = 0.0, hi = 0.0;
  std::vector<double> choices;

  static ScalarLaw parse(const json& j, const std::string& field) {
    ScalarLaw law;
    if (j.is_number()) {
      law.kind = Kind::kConstant;
      law.constant = j.get<double>();
      return law;
    }
    if (j.is_array()) {
      law.kind = Kind::kArray;
      for (const auto& v : j) {
        if (!v.is_number()) fail("field '" + field + "' must hold numbers");
        law.array.push_back(v.get<double>());
      }
      return law;
    }
    if (j.is_object()) {
      reject_unknown_keys(j, "'" + field + "'", {"uniform", "choices"});
      if (j.contains("uniform")) {
        const auto& u = j.at("uniform");
        if (!u.is_array() || u.size() != 2)
          fail("field '" + field + "'.uniform must be [lo, hi]");
        law.kind = Kind::kUniform;
        law.lo = u[0].get<double>();
        law.hi = u[1].get<double>();
        return law;
      }
      if (j.contains("choices")) {
        law.kind = Kind::kChoices;
        for (const auto& v : j.at("choices")) law.choices.push_back(v.get<double>());
        if (law.choices.empty()) fail("field '" + field + "'.choices is empty");
        return law;
      }
    }
    fail("field '" + field + "' has an unsupported form");
  }

  double draw(Rng& rng) const {
    switch (kind) {
      case Kind::kConstant: return constant;
      case Kind::kUniform: return rng.uniform(lo, hi);
      case Kind::kChoices: return choices[rng.index(choices.size())];
      case Kind::kArray: break;
    }
    fail("internal: array law cannot be drawn");
  }

  Eigen::VectorXd materialize(int n, Rng& rng, const std::string& field) const {
    Eigen::VectorXd out(n);
    if (kind == Kind::kArray) {
      if (static_cast<int>(array.size()) != n)
        fail("field '" + field + "' must have one entry per agent");
      for (int i = 0; i < n; ++i) out[i] = array[i];
      return out;
    }
    for (int i = 0; i < n; ++i) out[i] = draw(rng);
    return out;
  }
};

TopologySpec parse_topology(const json& j, std::uint64_t default_seed) {
  if (!j.is_object()) fail("field 'topology' must be an object");
  reject_unknown_keys(j, "'topology'", {"type", "n", "edges", "radius", "seed"});
  TopologySpec spec;
  if (!j.contains("type")) fail("missing field 'topology.type'");
  spec.type = j.at("type").get<std::string>();
  if (!j.contains("n")) fail("missing field 'topology.n'");
  spec.n = require_int(j.at("n"), "topology.n");
  if (spec.n < 1) fail("field 'topology.n' must be at least 1");
  spec.seed = j.contains("seed")
                  ? j.at("seed").get<std::uint64_t>()
                  : default_seed;
  if (spec.type == "random_geometric") {
    if (!j.contains("radius")) fail("missing field 'topology.radius'");
    spec.radius = require_number(j.at("radius"), "topology.radius");
  } else if (spec.type == "edges") {
    if (!j.contains("edges")) fail("missing field 'topology.edges'");
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) fail("edges must be [a, b] pairs");
      spec.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
    }
  } else if (spec.type != "ring" && spec.type != "full") {
    fail("unknown topology type '" + spec.type + "'");
  }
  return spec;
}

Topology build_from_spec(const TopologySpec& spec) {
  if (spec.type == "ring") return ring_topology(spec.n);
  if (spec.type == "full") return full_topology(spec.n);
  if (spec.type == "edges") return topology_from_edges(spec.n, spec.edges);
  return random_geometric_topology(spec.n, spec.radius, spec.seed);
}

}  // namespace

BernoulliAsyncModel ExperimentConfig::make_model() const {
  return BernoulliAsyncModel(topology, q, eta,
                             Eigen::VectorXd::Constant(topology.n_agents, mu));
}

std::vector<AgentDataProfile> ExperimentConfig::make_profiles() const {
  std::vector<AgentDataProfile> profiles(topology.n_agents);
  for (int k = 0; k < topology.n_agents; ++k) {
    if (!r_u_explicit.empty())
      profiles[k].r_u = r_u_explicit[k].cast<std::complex<double>>();
    else
      profiles[k].r_u =
          sigma_u2[k] * Eigen::MatrixXcd::Identity(m, m);
    profiles[k].sigma_xi2 = sigma_xi2[k];
  }
  return profiles;
}

ScenarioTruth ExperimentConfig::make_truth() const {
  return ScenarioTruth{w_o, make_profiles()};
}

SimOptions ExperimentConfig::make_sim_options() const {
  SimOptions opts;
  opts.iterations = iterations;
  opts.trials = trials;
  opts.tail_fraction = tail_fraction;
  opts.fusion_t = fusion_t;
  opts.fusion_pool = fusion_pool;
  opts.real_data = real_data;
  opts.base_seed = seed;
  opts.enabled = strategies;
  opts.threads = threads;
  return opts;
}

ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("parse error: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error: ") + e.what());
  }
  return config_from_json(doc, seed_override);
}

ExperimentConfig config_from_json(const nlohmann::json& doc,
                                  std::optional<std::uint64_t> seed_override) {
  if (!doc.is_object()) throw ConfigError("validation error: document must be an object");
  reject_unknown_keys(doc, "config",
                      {"topology", "seed", "m", "mu", "q", "eta", "sigma_u2",
                       "r_u", "sigma_xi2", "w_o", "alpha", "real_data",
                       "second_moment", "simulation", "strategies"});
  ExperimentConfig cfg;
  cfg.seed = doc.contains("seed") ? doc.at("seed").get<std::uint64_t>() : 1;
  if (seed_override) cfg.seed = *seed_override;

  if (!doc.contains("topology")) fail("missing field 'topology'");
  cfg.topology_spec = parse_topology(doc.at("topology"), cfg.seed);
  cfg.topology = build_from_spec(cfg.topology_spec);
  const int n = cfg.topology.n_agents;

  if (!doc.contains("m")) fail("missing field 'm'");
  cfg.m = require_int(doc.at("m"), "m");
  if (cfg.m < 1) fail("field 'm' must be at least 1");
  if (!doc.contains("mu")) fail("missing field 'mu'");
  cfg.mu = require_number(doc.at("mu"), "mu");
  if (!(cfg.mu > 0.0)) fail("field 'mu' must be positive");

  // Materialization stream: laws are drawn once, in a fixed order, and
  // the drawn values are what the run uses and what the report records.
  Rng rng(cfg.seed, streams::kConfig);

  if (!doc.contains("eta")) fail("missing field 'eta'");
  cfg.eta = Eigen::MatrixXd::Zero(n, n);
  if (doc.at("eta").is_array() && !doc.at("eta").empty() &&
      doc.at("eta").front().is_array()) {
    const auto& rows = doc.at("eta");
    if (static_cast<int>(rows.size()) != n) fail("field 'eta' must be N x N");
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(rows[r].size()) != n) fail("field 'eta' must be N x N");
      for (int c = 0; c < n; ++c) cfg.eta(r, c) = rows[r][c].get<double>();
    }
  } else {
    const ScalarLaw eta_law = ScalarLaw::parse(doc.at("eta"), "eta");
    if (eta_law.kind == ScalarLaw::Kind::kArray)
      fail("field 'eta' arrays must be N x N nested rows");
    for (int k = 0; k < n; ++k)
      for (int l : cfg.topology.neighbors[k]) {
        if (l == k) continue;
        cfg.eta(l, k) = eta_law.draw(rng);
      }
  }
  for (int k = 0; k < n; ++k)
    for (int l : cfg.topology.neighbors[k]) {
      if (l == k) continue;
      if (!(cfg.eta(l, k) > 0.0 && cfg.eta(l, k) <= 1.0))
        fail("field 'eta' entries must lie in (0,1]");
    }

  if (!doc.contains("q")) fail("missing field 'q'");
  cfg.q = ScalarLaw::parse(doc.at("q"), "q").materialize(n, rng, "q");
  for (int k = 0; k < n; ++k)
    if (!(cfg.q[k] > 0.0 && cfg.q[k] <= 1.0))
      fail("field 'q' entries must lie in (0,1]");

  cfg.sigma_u2 = doc.contains("sigma_u2")
                     ? ScalarLaw::parse(doc.at("sigma_u2"), "sigma_u2")
                           .materialize(n, rng, "sigma_u2")
                     : Eigen::VectorXd::Ones(n);
  for (int k = 0; k < n; ++k)
    if (!(cfg.sigma_u2[k] > 0.0)) fail("field 'sigma_u2' entries must be positive");

  if (doc.contains("r_u")) {
    const auto& arr = doc.at("r_u");
    if (static_cast<int>(arr.size()) != n)
      fail("field 'r_u' must hold one matrix per agent");
    for (const auto& mat : arr) {
      Eigen::MatrixXd ru(cfg.m, cfg.m);
      if (static_cast<int>(mat.size()) != cfg.m * cfg.m)
        fail("field 'r_u' matrices must be M x M row-major");
      for (int r = 0; r < cfg.m; ++r)
        for (int c = 0; c < cfg.m; ++c) ru(r, c) = mat[r * cfg.m + c].get<double>();
      cfg.r_u_explicit.push_back(ru);
    }
  }

  cfg.sigma_xi2 = doc.contains("sigma_xi2")
                      ? ScalarLaw::parse(doc.at("sigma_xi2"), "sigma_xi2")
                            .materialize(n, rng, "sigma_xi2")
                      : Eigen::VectorXd::Constant(n, 0.01);
  for (int k = 0; k < n; ++k)
    if (!(cfg.sigma_xi2[k] > 0.0)) fail("field 'sigma_xi2' entries must be positive");

  cfg.w_o = Eigen::VectorXcd::Zero(cfg.m);
  if (!doc.contains("w_o") ||
      (doc.at("w_o").is_string() && doc.at("w_o") == "random_unit")) {
    for (int i = 0; i < cfg.m; ++i) cfg.w_o[i] = rng.cgaussian();
    cfg.w_o.normalize();
  } else if (doc.at("w_o").is_array()) {
    const auto& arr = doc.at("w_o");
    if (static_cast<int>(arr.size()) != cfg.m)
      fail("field 'w_o' must have M entries");
    for (int i = 0; i < cfg.m; ++i) {
      const auto& e = arr[i];
      if (!e.is_array() || e.size() != 2) fail("'w_o' entries must be [re, im]");
      cfg.w_o[i] = std::complex<double>(e[0].get<double>(), e[1].get<double>());
    }
  } else {
    fail("field 'w_o' must be \"random_unit\" or an array of [re, im] pairs");
  }

  cfg.alpha = doc.contains("alpha") ? require_number(doc.at("alpha"), "alpha") : 0.0;
  if (cfg.alpha < 0.0) fail("field 'alpha' must be nonnegative");
  cfg.real_data = doc.contains("real_data") && doc.at("real_data").get<bool>();

  if (doc.contains("second_moment")) {
    const auto& sm = doc.at("second_moment");
    reject_unknown_keys(sm, "'second_moment'",
                        {"mode", "enumeration_threshold", "mc_samples"});
    if (sm.contains("mode")) {
      const std::string mode = sm.at("mode").get<std::string>();
      if (mode == "auto")
        cfg.second_moment.mode = SecondMomentOptions::Mode::kAuto;
      else if (mode == "exact")
        cfg.second_moment.mode = SecondMomentOptions::Mode::kExact;
      else if (mode == "monte_carlo")
        cfg.second_moment.mode = SecondMomentOptions::Mode::kMonteCarlo;
      else
        fail("second_moment.mode must be auto|exact|monte_carlo");
    }
    if (sm.contains("enumeration_threshold"))
      cfg.second_moment.enumeration_threshold =
          require_int(sm.at("enumeration_threshold"), "enumeration_threshold");
    if (sm.contains("mc_samples"))
      cfg.second_moment.mc_samples = sm.at("mc_samples").get<long>();
  }
  cfg.second_moment.mc_seed = cfg.seed;

  if (doc.contains("simulation")) {
    const auto& sim = doc.at("simulation");
    reject_unknown_keys(sim, "'simulation'",
                        {"trials", "iterations", "tail_fraction", "fusion_t",
                         "fusion_pool", "threads"});
    if (sim.contains("trials")) cfg.trials = require_int(sim.at("trials"), "trials");
    if (sim.contains("iterations"))
      cfg.iterations = require_int(sim.at("iterations"), "iterations");
    if (sim.contains("tail_fraction"))
      cfg.tail_fraction = require_number(sim.at("tail_fraction"), "tail_fraction");
    if (sim.contains("fusion_t"))
      cfg.fusion_t = require_int(sim.at("fusion_t"), "fusion_t");
    if (sim.contains("fusion_pool"))
      cfg.fusion_pool = require_int(sim.at("fusion_pool"), "fusion_pool");
    if (sim.contains("threads")) cfg.threads = require_int(sim.at("threads"), "threads");
  }
  if (cfg.trials < 1) fail("field 'simulation.trials' must be at least 1");
  if (cfg.iterations < 1) fail("field 'simulation.iterations' must be at least 1");
  if (!(cfg.tail_fraction > 0.0 && cfg.tail_fraction <= 1.0))
    fail("field 'simulation.tail_fraction' must lie in (0,1]");
  if (cfg.fusion_t < 1) fail("field 'simulation.fusion_t' must be at least 1");
  if (cfg.fusion_pool < 0) fail("field 'simulation.fusion_pool' must be nonnegative");

  if (doc.contains("strategies")) {
    const auto& st = doc.at("strategies");
    reject_unknown_keys(st, "'strategies'",
                        {"dist_async", "dist_sync", "cent_async", "cent_sync"});
    const auto get = [&](const char* name, int idx) {
      if (st.contains(name)) cfg.strategies[idx] = st.at(name).get<bool>();
    };
    get("dist_async", 0);
    get("dist_sync", 1);
    get("cent_async", 2);
    get("cent_sync", 3);
  }
  return cfg;
}

nlohmann::ordered_json preset_document(const std::string& name) {
  nlohmann::ordered_json doc;
  if (name == "paper-fig3") {
    doc["topology"] = {{"type", "random_geometric"}, {"n", 100}, {"radius", 0.18}, {"seed", 3}};
    doc["seed"] = 3;
    doc["m"] = 2;
    doc["mu"] = 0.002;
    doc["eta"] = {{"uniform", {0.4, 0.8}}};
    doc["q"] = {{"choices", {0.3, 0.5, 0.7, 0.9}}};
    doc["sigma_u2"] = {{"uniform", {0.5, 2.0}}};
    doc["sigma_xi2"] = {{"uniform", {0.01, 0.1}}};
    doc["simulation"] = {{"trials", 100}, {"iterations", 6000}, {"fusion_t", 100}};
  } else if (name == "desk") {
    doc["topology"] = {{"type", "random_geometric"}, {"n", 20}, {"radius", 0.5}, {"seed", 7}};
    doc["seed"] = 7;
    doc["m"] = 2;
    doc["mu"] = 0.005;
    doc["eta"] = {{"uniform", {0.4, 0.8}}};
    doc["q"] = {{"choices", {0.3, 0.5, 0.7, 0.9}}};
    doc["sigma_u2"] = {{"uniform", {0.5, 2.0}}};
    doc["sigma_xi2"] = {{"uniform", {0.01, 0.1}}};
    doc["simulation"] = {{"trials", 50}, {"iterations", 3000}, {"fusion_t", 100}, {"tail_fraction", 0.3}};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  return doc;
}

ExperimentConfig preset(const std::string& name) {
  return config_from_json(preset_document(name));
}

nlohmann::ordered_json config_to_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  // Emit the realized edge list so the document stands on its own.
  nlohmann::ordered_json edges = nlohmann::ordered_json::array();
  for (auto [a, b] : config.topology.edges) edges.push_back({a, b});
  j["topology"] = {{"type", "edges"},
                   {"n", config.topology.n_agents},
                   {"edges", edges}};
  j["seed"] = config.seed;
  j["m"] = config.m;
  j["mu"] = config.mu;
  nlohmann::ordered_json eta_rows = nlohmann::ordered_json::array();
  for (int r = 0; r < config.topology.n_agents; ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int c = 0; c < config.topology.n_agents; ++c) row.push_back(config.eta(r, c));
    eta_rows.push_back(row);
  }
  j["eta"] = eta_rows;
  j["q"] = std::vector<double>(config.q.data(), config.q.data() + config.q.size());
  if (config.r_u_explicit.empty()) {
    j["sigma_u2"] = std::vector<double>(config.sigma_u2.data(),
                                        config.sigma_u2.data() + config.sigma_u2.size());
  } else {
    nlohmann::ordered_json rus = nlohmann::ordered_json::array();
    for (const auto& ru : config.r_u_explicit) {
      std::vector<double> flat;
      for (int r = 0; r < ru.rows(); ++r)
        for (int c = 0; c < ru.cols(); ++c) flat.push_back(ru(r, c));
      rus.push_back(flat);
    }
    j["r_u"] = rus;
  }
  j["sigma_xi2"] = std::vector<double>(config.sigma_xi2.data(),
                                       config.sigma_xi2.data() + config.sigma_xi2.size());
  nlohmann::ordered_json wo = nlohmann::ordered_json::array();
  for (int i = 0; i < config.w_o.size(); ++i)
    wo.push_back({config.w_o[i].real(), config.w_o[i].imag()});
  j["w_o"] = wo;
  j["alpha"] = config.alpha;
  j["real_data"] = config.real_data;
  const char* mode = config.second_moment.mode == SecondMomentOptions::Mode::kExact
                         ? "exact"
                         : config.second_moment.mode == SecondMomentOptions::Mode::kMonteCarlo
                               ? "monte_carlo"
                               : "auto";
  j["second_moment"] = {{"mode", mode},
                        {"enumeration_threshold", config.second_moment.enumeration_threshold},
                        {"mc_samples", config.second_moment.mc_samples}};
  j["simulation"] = {{"trials", config.trials},
                     {"iterations", config.iterations},
                     {"tail_fraction", config.tail_fraction},
                     {"fusion_t", config.fusion_t},
                     {"fusion_pool", config.fusion_pool}};
  j["strategies"] = {{"dist_async", config.strategies[0]},
                     {"dist_sync", config.strategies[1]},
                     {"cent_async", config.strategies[2]},
                     {"cent_sync", config.strategies[3]}};
  return j;
}

}  // namespace asyncnet
