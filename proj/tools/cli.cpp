#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "CLI11.hpp"

#include "emv/closed_form.hpp"
#include "emv/config.hpp"
#include "emv/data_ingest.hpp"
#include "emv/digest.hpp"
#include "emv/empirical.hpp"
#include "emv/error.hpp"
#include "emv/eval.hpp"
#include "emv/filter.hpp"
#include "emv/improvement.hpp"
#include "emv/rl.hpp"

namespace emv::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  std::string out = "out";

  // train
  std::string algo;
  int iters = -1;
  std::string signal;
  std::string resume;
  bool no_clip = false;
  int batch = 0;

  // evaluate, simulate, policy-eval
  std::vector<std::string> checkpoints;
  std::vector<std::string> analytic;
  std::string policy;
  int paths = 0;
  unsigned threads = 0;
  std::string action;
  std::string analytic_action = "mean";
  int episodes = 1;
  std::string dynamics = "market";

  // improve
  int horizon = 6;
  std::string improve_iters = "auto";

  // ingest
  std::string prices;
  std::string freq = "daily";
  bool label = false;
  bool estimate = false;
  double gamma1 = 0.24;
  double gamma2 = 0.19;
};

struct Parser {
  CLI::App app{"Mean-variance asset-liability learning under regime switching", "emv"};
  Options o;
  std::map<std::string, CLI::App*> subs;

  Parser() {
    app.require_subcommand(1);
    app.add_option("--config", o.config, "run configuration (JSON)");
    app.add_option("--seed", o.seed, "seed overriding the configuration");
    app.add_option("--out", o.out, "output directory")->capture_default_str();

    auto* train = sub("train", "train CoEMV, PoEMV-1 or PoEMV-2 (or all three)");
    train->add_option("--algo", o.algo, "coemv|poemv1|poemv2|all (default: config)");
    train->add_option("--iters", o.iters, "iterations (default: config)");
    train->add_option("--signal", o.signal, "PoEMV-2 signal: expectation|unconditional");
    train->add_option("--resume", o.resume, "checkpoint to continue from");
    train->add_flag("--no-clip", o.no_clip, "disable gradient clipping");
    train->add_option("--batch", o.batch, "episodes per iteration (default: config)");

    auto* evaluate = sub("evaluate", "out-of-sample mean, variance and Sharpe ratio");
    evaluate->add_option("--checkpoint", o.checkpoints, "learned policy checkpoint (repeatable)");
    evaluate->add_option("--analytic", o.analytic, "coemv_opt|poemv_opt|poemv_sub (repeatable)");
    evaluate->add_option("--paths", o.paths, "evaluation paths (default: config)");
    evaluate->add_option("--threads", o.threads, "worker threads, 0 = all cores");
    evaluate->add_option("--action", o.action, "learned policies: sample|mean (default: config)");
    evaluate->add_option("--analytic-action", o.analytic_action, "analytic policies: sample|mean")
        ->capture_default_str();

    auto* simulate = sub("simulate", "simulate episodes and write them as CSV");
    simulate->add_option("--policy", o.policy, "coemv_opt|poemv_opt|poemv_sub");
    simulate->add_option("--checkpoint", o.checkpoints, "learned policy checkpoint");
    simulate->add_option("--episodes", o.episodes, "number of episodes")->capture_default_str();
    simulate->add_option("--dynamics", o.dynamics, "market|filtered")->capture_default_str();
    simulate->add_option("--action", o.action, "sample|mean (default: sample)");

    auto* improve = sub("improve", "policy improvement from a random initial family");
    improve->add_option("--T", o.horizon, "horizon in periods")->capture_default_str();
    improve->add_option("--iters", o.improve_iters, "auto or a count")->capture_default_str();

    sub("filter-demo", "true regime, filtered and expected signal along one path");

    auto* ingest = sub("ingest", "label a price series and estimate a market");
    ingest->add_option("--prices", o.prices, "CSV with header date,close")->required();
    ingest->add_option("--freq", o.freq, "daily|monthly")->capture_default_str();
    ingest->add_flag("--label", o.label, "write bull/bear labels");
    ingest->add_flag("--estimate", o.estimate, "write the estimate and a market JSON");
    ingest->add_option("--gamma1", o.gamma1, "bull threshold")->capture_default_str();
    ingest->add_option("--gamma2", o.gamma2, "bear threshold")->capture_default_str();

    auto* peval = sub("policy-eval", "dump policy coefficients and variances per period");
    peval->add_option("--policy", o.policy, "coemv_opt|poemv_opt|poemv_sub");
    peval->add_option("--checkpoint", o.checkpoints, "learned policy checkpoint");
  }

  CLI::App* sub(const std::string& name, const std::string& help) {
    CLI::App* s = app.add_subcommand(name, help);
    s->fallthrough();
    subs[name] = s;
    return s;
  }

  void parse(const std::vector<std::string>& args) {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  }

  std::string command() const {
    for (const auto& [name, s] : subs) {
      if (s->parsed()) return name;
    }
    return "";
  }

  json flags() const {
    json f = json::object();
    auto record = [&](const CLI::App& a) {
      for (const CLI::Option* opt : a.get_options()) {
        if (opt->get_lnames().empty() || opt->count() == 0) continue;
        const std::string name = "--" + opt->get_lnames().front();
        if (name == "--help") continue;
        if (opt->get_items_expected_max() == 0) {
          f[name] = true;
        } else {
          f[name] = opt->results();
        }
      }
    };
    record(app);
    record(*subs.at(command()));
    return f;
  }
};

// Translates CLI11 parse failures into ConfigError.
void parse_or_throw(Parser& p, const std::vector<std::string>& args) {
  try {
    p.parse(args);
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
}

class Run {
 public:
  Run(Parser& p, std::ostream& out) : p_(p), o_(p.o), out_(out) {}

  int execute() {
    const std::string cmd = p_.command();
    if (cmd == "train") return train();
    if (cmd == "evaluate") return evaluate();
    if (cmd == "simulate") return simulate();
    if (cmd == "improve") return improve();
    if (cmd == "filter-demo") return filter_demo();
    if (cmd == "ingest") return ingest();
    return policy_eval();
  }

 private:
  Parser& p_;
  const Options& o_;
  std::ostream& out_;
  RunConfig cfg_;
  json artifacts_ = json::object();

  void load_config(bool required) {
    if (o_.config.empty()) {
      if (required) throw ConfigError("--config is required for " + p_.command());
      cfg_ = config_from_json(json::object());
    } else {
      cfg_ = emv::load_config(o_.config);
    }
    if (p_.app.get_option("--seed")->count() > 0) {
      cfg_.seed = o_.seed;
      cfg_.hyper.seed = o_.seed;
    }
  }

  void write(const std::string& name, const std::string& content) {
    fs::create_directories(o_.out);
    std::ofstream f(fs::path(o_.out) / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (fs::path(o_.out) / name).string());
    f << content;
    artifacts_[name] = digest_hex(content);
  }

  void write_manifest(const json& extra = json::object()) {
    json m;
    m["format"] = "emv-manifest/1";
    m["command"] = p_.command();
    m["flags"] = p_.flags();
    m["config"] = to_json(cfg_);
    m["config_digest"] = digest_hex(m["config"].dump());
    m["defaulted"] = cfg_.defaulted;
    m["readings"] = resolved_readings(cfg_);
    m["artifacts"] = artifacts_;
    for (const auto& [k, v] : extra.items()) m[k] = v;
    const std::string text = m.dump(2) + "\n";
    fs::create_directories(o_.out);
    std::ofstream(fs::path(o_.out) / "manifest.json", std::ios::binary) << text;
  }

  GaussianPolicy analytic_policy(const std::string& name, const ProblemSpec& spec) const {
    switch (policy_kind_from_string(name)) {
      case PolicyKind::coemv_opt: return coemv_optimal_policy(cfg_.market, spec);
      case PolicyKind::poemv_opt: return poemv_optimal_policy(cfg_.market, spec);
      case PolicyKind::poemv_sub: return poemv_suboptimal_policy(cfg_.market, spec);
      default: throw ConfigError("--policy/--analytic takes coemv_opt, poemv_opt or poemv_sub");
    }
  }

  TrainState read_checkpoint(const std::string& path, Hyperparams& h) const {
    TrainState s;
    load_checkpoint(read_text_file(path), s, h);
    if (h.dt != cfg_.market.dt) {
      throw ConfigError("checkpoint " + path + " was trained with dt " + std::to_string(h.dt) +
                        ", the configuration uses " + std::to_string(cfg_.market.dt));
    }
    return s;
  }

  // The single policy selected by --policy or --checkpoint.
  GaussianPolicy chosen_policy() const {
    if (o_.policy.empty() == o_.checkpoints.empty()) {
      throw ConfigError("give exactly one of --policy or --checkpoint");
    }
    if (!o_.policy.empty()) return analytic_policy(o_.policy, cfg_.problem);
    if (o_.checkpoints.size() != 1) throw ConfigError("give a single --checkpoint");
    Hyperparams h;
    const TrainState s = read_checkpoint(o_.checkpoints[0], h);
    return learned_policy(s, cfg_.problem.T, h.dt);
  }

  int train() {
    load_config(true);
    if (o_.no_clip) cfg_.hyper.clip.reset();
    if (o_.batch > 0) cfg_.hyper.batch = o_.batch;
    if (o_.iters >= 0) cfg_.hyper.n_iter = o_.iters;

    std::vector<Algo> algos;
    if (o_.algo == "all") {
      if (!o_.resume.empty()) throw ConfigError("--resume takes a single algorithm");
      algos = {Algo::coemv, Algo::poemv1, Algo::poemv2};
    } else {
      if (!o_.algo.empty()) cfg_.algo = algo_from_string(o_.algo);
      algos = {cfg_.algo};
    }
    if (!o_.algo.empty() && o_.algo != "all" && o_.signal.empty()) cfg_.signal = signal_of(cfg_.algo);
    if (!o_.signal.empty()) {
      if (algos.size() != 1) throw ConfigError("--signal takes a single algorithm");
      cfg_.signal = signal_kind_from_string(o_.signal);
    }
    cfg_.validate();

    for (Algo a : algos) {
      const SignalKind signal = algos.size() == 1 ? cfg_.signal : signal_of(a);
      Hyperparams h = cfg_.hyper;
      TrainState s;
      if (!o_.resume.empty()) {
        s = read_checkpoint(o_.resume, h);
        if (!o_.algo.empty() && s.algo != a) throw ConfigError("checkpoint algorithm differs from --algo");
        a = s.algo;
        h.n_iter = cfg_.hyper.n_iter;
        if (p_.app.get_option("--seed")->count() > 0 && h.seed != cfg_.seed) {
          throw ConfigError("--seed differs from the checkpoint's seed");
        }
        if (h.n_iter < s.completed) throw ConfigError("--iters is below the checkpoint's progress");
      } else {
        s = initial_state(a, h, cfg_.problem, signal);
      }
      train_continue(s, cfg_.market, h, cfg_.problem, default_environment(a, s.signal));

      const std::string name(to_string(a));
      std::ostringstream hist;
      write_history_csv(hist, s);
      write("history_" + name + ".csv", hist.str());
      write("checkpoint_" + name + ".json", checkpoint_json(s, h) + "\n");
      double tail = 0.0;
      const std::size_t k = std::min<std::size_t>(s.history.size(), 1000);
      for (std::size_t i = s.history.size() - k; i < s.history.size(); ++i) {
        tail += s.history[i].terminal_net_wealth;
      }
      out_ << name << ": " << s.completed << " iterations, w = " << s.w;
      if (k > 0) out_ << ", mean terminal surplus over the last " << k << " = " << tail / k;
      out_ << '\n';
    }
    json extra;
    if (!o_.resume.empty()) extra["resumed_from_digest"] = digest_hex(read_text_file(o_.resume));
    write_manifest(extra);
    return 0;
  }

  int evaluate() {
    load_config(true);
    if (o_.paths > 0) cfg_.eval.n_paths = o_.paths;
    if (p_.subs.at("evaluate")->get_option("--paths")->count() > 0 && o_.paths < 2) {
      throw ConfigError("--paths must be at least 2");
    }
    if (!o_.action.empty()) cfg_.eval.action = action_mode_from_string(o_.action);
    cfg_.eval.threads = o_.threads;
    cfg_.validate();
    if (o_.checkpoints.empty() && o_.analytic.empty()) {
      throw ConfigError("nothing to evaluate: give --checkpoint and/or --analytic");
    }
    EvalOptions eo;
    eo.n_paths = cfg_.eval.n_paths;
    eo.seed = cfg_.seed;
    eo.threads = cfg_.eval.threads;
    eo.sim.dynamics = Dynamics::market;
    const std::string digest = digest_hex(to_json(cfg_).dump());

    std::vector<EvalReport> reports;
    for (const auto& name : o_.analytic) {
      eo.sim.action = action_mode_from_string(o_.analytic_action);
      EvalReport r = out_of_sample(analytic_policy(name, cfg_.problem), cfg_.market, cfg_.problem, eo);
      r.digest = digest;
      reports.push_back(r);
    }
    for (const auto& path : o_.checkpoints) {
      Hyperparams h;
      const TrainState s = read_checkpoint(path, h);
      eo.sim.action = cfg_.eval.action;
      EvalReport r = out_of_sample(learned_policy(s, cfg_.problem.T, h.dt), cfg_.market, cfg_.problem, eo);
      r.label = std::string(to_string(s.algo));
      r.digest = digest;
      reports.push_back(r);
    }
    std::ostringstream csv;
    write_report_csv(csv, reports);
    write("report.csv", csv.str());
    out_ << format_table(reports);
    write_manifest();
    return 0;
  }

  int simulate() {
    load_config(false);
    if (o_.episodes < 1) throw ConfigError("--episodes must be at least 1");
    const GaussianPolicy pol = chosen_policy();
    SimulationOptions so;
    so.dynamics = dynamics_from_string(o_.dynamics);
    so.action = o_.action.empty() ? ActionMode::sample : action_mode_from_string(o_.action);
    so.env_signal = pol.signal() == SignalKind::regime ? SignalKind::filter : pol.signal();
    for (int k = 0; k < o_.episodes; ++k) {
      Stream rng(cfg_.seed, static_cast<std::uint64_t>(k));
      const Episode ep = simulate_episode(cfg_.market, pol, cfg_.problem.T, cfg_.problem.x0,
                                          cfg_.problem.l0, rng, so);
      std::ostringstream os;
      write_episode_csv(os, ep);
      write("episode_" + std::to_string(k) + ".csv", os.str());
    }
    out_ << "wrote " << o_.episodes << " episode(s) to " << o_.out << '\n';
    write_manifest();
    return 0;
  }

  int improve() {
    load_config(false);
    if (o_.horizon < 1) throw ConfigError("--T must be at least 1");
    int fixed = -1;
    if (o_.improve_iters != "auto") {
      try {
        std::size_t used = 0;
        fixed = std::stoi(o_.improve_iters, &used);
        if (used != o_.improve_iters.size() || fixed < 0) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ConfigError("--iters takes 'auto' or a nonnegative count");
      }
    }
    cfg_.problem.T = o_.horizon;
    const ProblemSpec& spec = cfg_.problem;
    const MomentSchedule sched = signal_schedule(
        SignalKind::filter, cfg_.market.chain, {cfg_.market.moments(1), cfg_.market.moments(2)}, spec.T);
    const ScheduleTerms terms(sched);
    Stream rng(cfg_.seed, 0);
    const InitialPolicyFamily family = InitialPolicyFamily::random(spec.T, rng);

    std::vector<IteratedPolicy> trace;
    if (fixed < 0) {
      trace = iterate_to_convergence(family, terms, spec, 0).trace;
    } else {
      trace.push_back(make_iterated(family.policy(spec), terms, spec));
      for (int n = 0; n < fixed; ++n) trace.push_back(improve_once(trace.back(), terms, spec));
    }
    std::ostringstream os;
    os << "iter,t,coef_x,coef_l,intercept,variance,objective\n" << std::setprecision(17);
    for (const auto& it : trace) {
      for (int t = 0; t < spec.T; ++t) {
        const AffineGaussian& g = it.policy[t];
        os << it.n << ',' << t << ',' << g.coef_x << ',' << g.coef_l << ',' << g.intercept << ','
           << g.variance << ',' << it.objective[t](spec.x0, spec.l0) << '\n';
      }
    }
    write("improve.csv", os.str());
    out_ << "iterations: " << trace.back().n << ", objective at t = 0: "
         << trace.back().objective[0](spec.x0, spec.l0) << '\n';
    write_manifest();
    return 0;
  }

  int filter_demo() {
    load_config(false);
    const int T = cfg_.problem.T;
    const RegimeChain& c = cfg_.market.chain;
    const std::vector<double> p_hat = deterministic_signal_path(SignalKind::filter, c, T);
    const std::vector<double> p_tilde = deterministic_signal_path(SignalKind::expectation, c, T);
    Stream rng(cfg_.seed, 0);
    int regime = initial_regime(c, rng);
    std::ostringstream os;
    os << "t,true_regime,p_hat,p_tilde\n" << std::setprecision(17);
    for (int t = 0; t <= T; ++t) {
      os << t << ',' << regime << ',' << p_hat[t] << ',' << p_tilde[t] << '\n';
      if (t < T) regime = step_regime(regime, c, rng);
    }
    write("filter_demo.csv", os.str());
    out_ << "wrote " << T + 1 << " rows to " << (fs::path(o_.out) / "filter_demo.csv").string() << '\n';
    write_manifest();
    return 0;
  }

  int ingest() {
    load_config(false);
    if (!o_.label && !o_.estimate) throw ConfigError("ingest needs --label and/or --estimate");
    const Frequency f = frequency_from_string(o_.freq);
    const PriceSeries s = load_price_csv(o_.prices, f);
    const RegimeLabels labels = label_regimes(s, o_.gamma1, o_.gamma2);
    if (o_.label) {
      std::ostringstream os;
      os << "date,close,phase\n" << std::setprecision(17);
      for (std::size_t i = 0; i < s.size(); ++i) {
        os << s.dates[i] << ',' << s.closes[i] << ','
           << (labels.labels[i] == MarketPhase::bull ? "bull" : "bear") << '\n';
      }
      write("labels.csv", os.str());
      out_ << labels.segments.size() << " segment(s)\n";
    }
    if (o_.estimate) {
      const PhaseEstimate e = estimate_params(s, labels);
      json ej = {{"mean", e.mean},
                 {"variance", e.variance},
                 {"n_returns", e.n_returns},
                 {"mean_sojourn", e.mean_sojourn},
                 {"P12", e.P12},
                 {"P21", e.P21},
                 {"gamma1", o_.gamma1},
                 {"gamma2", o_.gamma2},
                 {"frequency", to_string(f)}};
      write("estimate.json", ej.dump(2) + "\n");
      const MarketModel& b = cfg_.market;
      const MarketModel base =
          MarketModel::make(b.chain, b.e0, b.e1, b.q, 1.0 / periods_per_year(f));
      write("market.json", to_json(model_from_estimate(e, base)).dump(2) + "\n");
      out_ << std::setprecision(6) << "bull mean " << e.mean[0] << ", bear mean " << e.mean[1]
           << ", P12 " << e.P12 << ", P21 " << e.P21 << '\n';
    }
    write_manifest({{"input_digest", digest_hex(read_text_file(o_.prices))}});
    return 0;
  }

  int policy_eval() {
    load_config(false);
    const GaussianPolicy pol = chosen_policy();
    const int T = cfg_.problem.T;
    std::ostringstream os;
    os << "t,signal,coef_x,coef_l,intercept,variance\n" << std::setprecision(17);
    const bool by_regime = pol.signal() == SignalKind::regime;
    const std::vector<double> path =
        by_regime ? std::vector<double>{} : deterministic_signal_path(pol.signal(), cfg_.market.chain, T);
    for (int t = 0; t < T; ++t) {
      const std::vector<double> signals = by_regime ? std::vector<double>{1.0, 2.0}
                                                    : std::vector<double>{path[t]};
      for (double sv : signals) {
        const AffineGaussian g = pol.at(t, sv);
        os << t << ',' << sv << ',' << g.coef_x << ',' << g.coef_l << ',' << g.intercept << ','
           << g.variance << '\n';
      }
    }
    write("policy.csv", os.str());
    out_ << "wrote " << T << " periods to " << (fs::path(o_.out) / "policy.csv").string() << '\n';
    write_manifest();
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  try {
    p.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = p.app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }
  try {
    return Run(p, out).execute();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

json invocation(const std::vector<std::string>& args) {
  Parser p;
  parse_or_throw(p, args);
  return {{"command", p.command()}, {"flags", p.flags()}};
}

std::vector<std::string> arguments(const json& inv) {
  std::vector<std::string> args{inv.at("command").get<std::string>()};
  for (const auto& [name, value] : inv.at("flags").items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(name);
      continue;
    }
    for (const auto& v : value) {
      args.push_back(name);
      args.push_back(v.get<std::string>());
    }
  }
  return args;
}

}  // namespace emv::cli
