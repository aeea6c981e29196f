#include "emv/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "emv/error.hpp"

namespace emv {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

// Reads j[key] into out when present, otherwise records the default.
template <class T>
void read(const json& j, const char* key, T& out, const std::string& where,
          std::vector<std::string>* defaulted) {
  if (!j.contains(key)) {
    if (defaulted) defaulted->push_back(where + "/" + key);
    return;
  }
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "/" + key + " has the wrong type");
  }
}

template <class Enum, class Parse>
void read_enum(const json& j, const char* key, Enum& out, Parse parse, const std::string& where,
               std::vector<std::string>* defaulted) {
  std::string text;
  bool present = j.contains(key);
  read(j, key, text, where, defaulted);
  if (present) out = parse(text);
}

}  // namespace

std::string_view to_string(ReturnKind k) {
  switch (k) {
    case ReturnKind::constant: return "constant";
    case ReturnKind::normal: return "normal";
    case ReturnKind::skewed_t: return "skewed_t";
  }
  return "constant";
}

ReturnKind return_kind_from_string(std::string_view s) {
  if (s == "constant") return ReturnKind::constant;
  if (s == "normal") return ReturnKind::normal;
  if (s == "skewed_t") return ReturnKind::skewed_t;
  throw ConfigError("unknown return kind '" + std::string(s) + "' (constant|normal|skewed_t)");
}

std::string_view to_string(MeanConvention c) {
  return c == MeanConvention::gross ? "gross" : "net";
}

MeanConvention convention_from_string(std::string_view s) {
  if (s == "gross") return MeanConvention::gross;
  if (s == "net") return MeanConvention::net;
  throw ConfigError("unknown mean convention '" + std::string(s) + "' (gross|net)");
}

std::string_view to_string(ActionMode m) { return m == ActionMode::sample ? "sample" : "mean"; }

ActionMode action_mode_from_string(std::string_view s) {
  if (s == "sample") return ActionMode::sample;
  if (s == "mean") return ActionMode::mean;
  throw ConfigError("unknown action mode '" + std::string(s) + "' (sample|mean)");
}

json to_json(const ReturnSpec& s) {
  json j = {{"kind", to_string(s.kind)},
            {"annual_mean", s.annual_mean},
            {"annual_vol", s.annual_vol},
            {"convention", to_string(s.convention)},
            {"vol_is_variance", s.vol_is_variance}};
  if (s.kind == ReturnKind::skewed_t) {
    j["dof"] = s.dof;
    j["skew"] = s.skew;
  }
  return j;
}

json to_json(const MarketModel& m) {
  return {{"p0", m.chain.p0},
          {"P11", m.chain.P11()},
          {"P12", m.chain.P12()},
          {"P21", m.chain.P21()},
          {"P22", m.chain.P22()},
          {"dt", m.dt},
          {"e0", {to_json(m.e0[0]), to_json(m.e0[1])}},
          {"e1", {to_json(m.e1[0]), to_json(m.e1[1])}},
          {"q", {to_json(m.q[0]), to_json(m.q[1])}}};
}

json to_json(const RunConfig& c) {
  json training = {{"algo", to_string(c.algo)},
                   {"signal", to_string(c.signal)},
                   {"eta_theta", c.hyper.eta_theta},
                   {"eta_vartheta", c.hyper.eta_vartheta},
                   {"eta_psi", c.hyper.eta_psi},
                   {"eta_phi", c.hyper.eta_phi},
                   {"alpha", c.hyper.alpha},
                   {"N", c.hyper.N},
                   {"m", c.hyper.m},
                   {"n_iter", c.hyper.n_iter},
                   {"batch", c.hyper.batch}};
  training["clip"] = c.hyper.clip ? json(*c.hyper.clip) : json(nullptr);
  return {{"seed", c.seed},
          {"market", to_json(c.market)},
          {"problem",
           {{"x0", c.problem.x0},
            {"l0", c.problem.l0},
            {"lambda", c.problem.lambda},
            {"d", c.problem.d},
            {"T", c.problem.T}}},
          {"training", training},
          {"evaluation",
           {{"n_paths", c.eval.n_paths},
            {"action", to_string(c.eval.action)},
            {"threads", c.eval.threads}}}};
}

ReturnSpec return_spec_from_json(const json& j, const ReturnSpec& fallback, const std::string& where,
                                 std::vector<std::string>* defaulted) {
  reject_unknown(j, {"kind", "annual_mean", "annual_vol", "dof", "skew", "convention", "vol_is_variance"},
                 where);
  ReturnSpec s = fallback;
  read_enum(j, "kind", s.kind, return_kind_from_string, where, defaulted);
  read(j, "annual_mean", s.annual_mean, where, defaulted);
  read(j, "annual_vol", s.annual_vol, where, defaulted);
  if (s.kind == ReturnKind::skewed_t) {
    read(j, "dof", s.dof, where, defaulted);
    read(j, "skew", s.skew, where, defaulted);
  } else if (j.contains("dof") || j.contains("skew")) {
    throw ConfigError(where + ": dof and skew apply to skewed_t only");
  }
  read_enum(j, "convention", s.convention, convention_from_string, where, defaulted);
  read(j, "vol_is_variance", s.vol_is_variance, where, defaulted);
  return s;
}

MarketModel market_from_json(const json& j, std::vector<std::string>* defaulted) {
  const std::string where = "/market";
  reject_unknown(j, {"p0", "P11", "P12", "P21", "P22", "dt", "e0", "e1", "q"}, where);
  const MarketModel base = default_market();
  double dt = base.dt;
  read(j, "dt", dt, where, defaulted);
  double p0 = base.chain.p0;
  read(j, "p0", p0, where, defaulted);

  // Each row may be given by either entry; if both are given they must agree.
  Matrix2 P = base.chain.P;
  for (int i = 0; i < 2; ++i) {
    const std::string stay = "P" + std::to_string(i + 1) + std::to_string(i + 1);
    const std::string leave = "P" + std::to_string(i + 1) + std::to_string(2 - i);
    const bool has_stay = j.contains(stay), has_leave = j.contains(leave);
    double vs = P[i][i], vl = P[i][1 - i];
    read(j, stay.c_str(), vs, where, has_leave ? nullptr : defaulted);
    read(j, leave.c_str(), vl, where, has_stay ? nullptr : defaulted);
    if (has_stay && !has_leave) vl = 1.0 - vs;
    if (has_leave && !has_stay) vs = 1.0 - vl;
    P[i][i] = vs;
    P[i][1 - i] = vl;
  }

  std::array<std::array<ReturnSpec, 2>, 3> specs = {base.e0, base.e1, base.q};
  const char* names[3] = {"e0", "e1", "q"};
  for (int a = 0; a < 3; ++a) {
    if (!j.contains(names[a])) {
      if (defaulted) defaulted->push_back(where + "/" + names[a]);
      continue;
    }
    const json& pair = j.at(names[a]);
    if (!pair.is_array() || pair.size() != 2) {
      throw ConfigError(where + "/" + names[a] + " must be an array of two return specs");
    }
    for (int r = 0; r < 2; ++r) {
      specs[a][r] = return_spec_from_json(pair[r], specs[a][r],
                                          where + "/" + names[a] + "/" + std::to_string(r), defaulted);
    }
  }
  return MarketModel::make(RegimeChain::make(P, p0), specs[0], specs[1], specs[2], dt);
}

void RunConfig::validate() const {
  problem.validate();
  hyper.validate();
  check_signal(algo, signal);
  if (hyper.dt != market.dt) throw ConfigError("training dt differs from the market dt");
  if (hyper.seed != seed) throw ConfigError("training seed differs from the run seed");
  if (eval.n_paths < 2) throw ConfigError("evaluation needs at least 2 paths");
}

RunConfig config_from_json(const json& j, const std::string& base_dir) {
  reject_unknown(j, {"seed", "market", "problem", "training", "evaluation"}, "config");
  RunConfig c;
  auto* def = &c.defaulted;
  read(j, "seed", c.seed, "", def);

  if (!j.contains("market")) {
    def->push_back("/market");
  } else if (j.at("market").is_string()) {
    std::filesystem::path p = j.at("market").get<std::string>();
    if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
    c.market = market_from_json(parse_json(read_text_file(p.string()), p.string()), def);
  } else {
    c.market = market_from_json(j.at("market"), def);
  }

  const json empty = json::object();
  const json& pj = j.contains("problem") ? j.at("problem") : empty;
  reject_unknown(pj, {"x0", "l0", "lambda", "d", "T"}, "/problem");
  read(pj, "x0", c.problem.x0, "/problem", def);
  read(pj, "l0", c.problem.l0, "/problem", def);
  read(pj, "lambda", c.problem.lambda, "/problem", def);
  read(pj, "d", c.problem.d, "/problem", def);
  read(pj, "T", c.problem.T, "/problem", def);
  c.problem.w = c.problem.d;

  const json& tj = j.contains("training") ? j.at("training") : empty;
  reject_unknown(tj,
                 {"algo", "signal", "eta_theta", "eta_vartheta", "eta_psi", "eta_phi", "alpha", "N",
                  "m", "n_iter", "batch", "clip"},
                 "/training");
  read_enum(tj, "algo", c.algo, algo_from_string, "/training", def);
  c.signal = signal_of(c.algo);
  read_enum(tj, "signal", c.signal, signal_kind_from_string, "/training", def);
  Hyperparams& h = c.hyper;
  read(tj, "eta_theta", h.eta_theta, "/training", def);
  read(tj, "eta_vartheta", h.eta_vartheta, "/training", def);
  read(tj, "eta_psi", h.eta_psi, "/training", def);
  read(tj, "eta_phi", h.eta_phi, "/training", def);
  read(tj, "alpha", h.alpha, "/training", def);
  read(tj, "N", h.N, "/training", def);
  read(tj, "m", h.m, "/training", def);
  read(tj, "n_iter", h.n_iter, "/training", def);
  read(tj, "batch", h.batch, "/training", def);
  if (!tj.contains("clip")) {
    def->push_back("/training/clip");
  } else if (tj.at("clip").is_null()) {
    h.clip.reset();
  } else {
    double clip = 0.0;
    read(tj, "clip", clip, "/training", def);
    h.clip = clip;
  }
  h.dt = c.market.dt;
  h.seed = c.seed;

  const json& ej = j.contains("evaluation") ? j.at("evaluation") : empty;
  reject_unknown(ej, {"n_paths", "action", "threads"}, "/evaluation");
  read(ej, "n_paths", c.eval.n_paths, "/evaluation", def);
  read_enum(ej, "action", c.eval.action, action_mode_from_string, "/evaluation", def);
  read(ej, "threads", c.eval.threads, "/evaluation", def);

  c.validate();
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + " is not valid JSON: " + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  const auto dir = std::filesystem::path(path).parent_path();
  return config_from_json(parse_json(read_text_file(path), path), dir.empty() ? "." : dir.string());
}

MarketModel load_market(const std::string& path) {
  return market_from_json(parse_json(read_text_file(path), path));
}

json resolved_readings(const RunConfig& c) {
  const TrainEnvironment env = default_environment(c.algo, c.signal);
  json r;
  r["initial_multiplier"] = c.problem.d;
  r["gradient_clip"] = c.hyper.clip ? json(*c.hyper.clip) : json(nullptr);
  r["episodes_per_iteration"] = c.hyper.batch;
  r["learner_signal"] = to_string(c.signal);
  r["training_dynamics"] = to_string(env.sim.dynamics);
  r["training_dynamics_weights"] = to_string(env.sim.env_signal);
  r["basis_time_unit"] = "years";
  r["annual_to_period"] = "linear in dt";
  r["policy_gradient_critic"] = "after the critic step";
  r["evaluation_action"] = to_string(c.eval.action);
  return r;
}

}  // namespace emv
