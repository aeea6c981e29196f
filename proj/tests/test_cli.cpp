#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "emv/closed_form.hpp"
#include "emv/config.hpp"
#include "emv/error.hpp"
#include "emv/eval.hpp"
#include "emv/filter.hpp"
#include "emv/rl.hpp"

using namespace emv;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("emv_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string slurp(const std::string& path) { return read_text_file(path); }

// Small problem so CLI runs stay fast.
std::string small_config(const TempDir& dir, int T = 40) {
  const std::string path = dir / "config.json";
  std::ofstream(path) << json{{"seed", 5},
                              {"problem", {{"T", T}}},
                              {"training", {{"n_iter", 20}}},
                              {"evaluation", {{"n_paths", 64}}}}
                             .dump();
  return path;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("help, usage errors and exit codes") {
  CHECK(run({"--help"}).code == 0);
  for (const char* sub : {"train", "evaluate", "simulate", "improve", "filter-demo", "ingest",
                          "policy-eval"}) {
    const Result r = run({sub, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("Usage") != std::string::npos);
  }
  CHECK(run({}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({"train", "--bogus"}).code == 1);
  CHECK(run({"improve", "--T", "six"}).code == 1);
  const Result missing = run({"train"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--config") != std::string::npos);
  CHECK(run({"train", "--config", "/nonexistent.json"}).code == 1);
  CHECK(run({"ingest"}).code == 1);  // --prices is required
}

TEST_CASE("every flag round-trips through the recorded invocation") {
  const std::vector<std::vector<std::string>> cases = {
      {"train", "--config", "c.json", "--algo", "poemv2", "--signal", "unconditional", "--iters",
       "30", "--no-clip", "--batch", "2", "--seed", "9", "--out", "o"},
      {"train", "--resume", "k.json", "--config", "c.json"},
      {"--seed", "3", "evaluate", "--checkpoint", "a.json", "--checkpoint", "b.json", "--analytic",
       "coemv_opt", "--paths", "10", "--threads", "2", "--action", "mean", "--analytic-action",
       "sample"},
      {"simulate", "--policy", "poemv_opt", "--episodes", "3", "--dynamics", "filtered", "--action",
       "mean"},
      {"improve", "--T", "6", "--iters", "auto"},
      {"filter-demo", "--out", "x"},
      {"ingest", "--prices", "p.csv", "--freq", "monthly", "--label", "--estimate", "--gamma1",
       "0.3", "--gamma2", "0.2"},
      {"policy-eval", "--checkpoint", "k.json"}};
  for (const auto& args : cases) {
    CAPTURE(args[0]);
    const json once = cli::invocation(args);
    const json twice = cli::invocation(cli::arguments(once));
    CHECK(once == twice);
    CHECK(cli::arguments(twice) == cli::arguments(once));
  }
  CHECK_THROWS_AS(cli::invocation({"train", "--iters", "x"}), ConfigError);
}

TEST_CASE("train writes artifacts, reruns are byte-identical, resume continues exactly") {
  TempDir dir("train");
  const std::string cfg = small_config(dir);
  REQUIRE(run({"train", "--config", cfg, "--out", dir / "a"}).code == 0);
  REQUIRE(run({"train", "--config", cfg, "--out", dir / "a2"}).code == 0);
  for (const char* f : {"history_poemv1.csv", "checkpoint_poemv1.json"}) {
    CHECK(slurp(dir / (std::string("a/") + f)) == slurp(dir / (std::string("a2/") + f)));
  }
  const json ma = parse_json(slurp(dir / "a/manifest.json"), "m");
  const json ma2 = parse_json(slurp(dir / "a2/manifest.json"), "m");
  CHECK(ma["artifacts"] == ma2["artifacts"]);
  CHECK(ma["config"] == ma2["config"]);
  CHECK(ma["readings"]["initial_multiplier"] == 8.0);
  CHECK(ma["flags"]["--config"] == json::array({cfg}));
  CHECK(cli::invocation(cli::arguments(ma)) == json{{"command", ma["command"]}, {"flags", ma["flags"]}});

  // Same manifest from the recorded invocation reproduces the artifacts.
  const std::string before = slurp(dir / "a/checkpoint_poemv1.json");
  REQUIRE(run(cli::arguments(ma)).code == 0);
  CHECK(slurp(dir / "a/checkpoint_poemv1.json") == before);
  CHECK(parse_json(slurp(dir / "a/manifest.json"), "m") == ma);

  REQUIRE(run({"train", "--config", cfg, "--iters", "8", "--out", dir / "half"}).code == 0);
  REQUIRE(run({"train", "--config", cfg, "--resume", dir / "half/checkpoint_poemv1.json", "--out",
               dir / "rest"})
              .code == 0);
  CHECK(slurp(dir / "rest/checkpoint_poemv1.json") == before);
  CHECK(slurp(dir / "rest/history_poemv1.csv") == slurp(dir / "a/history_poemv1.csv"));

  CHECK(run({"train", "--config", cfg, "--resume", dir / "half/checkpoint_poemv1.json", "--algo",
             "coemv", "--out", dir / "bad"})
            .code == 1);
  CHECK(run({"train", "--config", cfg, "--algo", "coemv", "--signal", "filter", "--out", dir / "bad"})
            .code == 1);
}

TEST_CASE("train --algo all produces one history per learner") {
  TempDir dir("all");
  const std::string cfg = small_config(dir);
  const Result r = run({"train", "--config", cfg, "--algo", "all", "--iters", "10", "--out", dir / "o"});
  REQUIRE(r.code == 0);
  for (const char* a : {"coemv", "poemv1", "poemv2"}) {
    CHECK(fs::exists(dir / (std::string("o/history_") + a + ".csv")));
    CHECK(r.out.find(a) != std::string::npos);
  }
}

TEST_CASE("evaluate analytic and learned policies") {
  TempDir dir("eval");
  const std::string cfg = small_config(dir);
  REQUIRE(run({"train", "--config", cfg, "--out", dir / "t"}).code == 0);
  const Result r = run({"evaluate", "--config", cfg, "--analytic", "coemv_opt", "--checkpoint",
                        dir / "t/checkpoint_poemv1.json", "--out", dir / "e"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Sharpe") != std::string::npos);
  const auto rows = csv_rows(slurp(dir / "e/report.csv"));
  REQUIRE(rows.size() == 3u);
  CHECK(rows[0][0] == "algo");
  CHECK(rows[1][0] == "coemv_opt");
  CHECK(rows[2][0] == "poemv1");
  CHECK(rows[1][4] == "64");

  // Independent recomputation of the analytic row through the library.
  const RunConfig c = load_config(cfg);
  EvalOptions eo;
  eo.n_paths = 64;
  eo.seed = 5;
  eo.sim.action = ActionMode::mean;
  const EvalReport lib = out_of_sample(coemv_optimal_policy(c.market, c.problem), c.market, c.problem, eo);
  CHECK(std::stod(rows[1][1]) == doctest::Approx(lib.mean).epsilon(1e-15));

  CHECK(run({"evaluate", "--config", cfg, "--analytic", "coemv_opt", "--paths", "1", "--out",
             dir / "x"})
            .code == 1);
  CHECK(run({"evaluate", "--config", cfg, "--out", dir / "x"}).code == 1);
  CHECK(run({"evaluate", "--config", cfg, "--analytic", "learned", "--out", dir / "x"}).code == 1);

  // A checkpoint trained at another frequency does not match this configuration.
  const std::string monthly = dir / "monthly.json";
  std::ofstream(monthly) << json{{"market", {{"dt", 1.0 / 12.0}}}, {"problem", {{"T", 12}}}}.dump();
  REQUIRE(run({"train", "--config", monthly, "--iters", "2", "--out", dir / "m"}).code == 0);
  CHECK(run({"evaluate", "--config", cfg, "--checkpoint", dir / "m/checkpoint_poemv1.json", "--out",
             dir / "x"})
            .code == 1);
}

TEST_CASE("simulate matches the library episode") {
  TempDir dir("sim");
  const std::string cfg = small_config(dir);
  REQUIRE(run({"simulate", "--config", cfg, "--policy", "poemv_opt", "--episodes", "2", "--out",
               dir / "s"})
              .code == 0);
  const RunConfig c = load_config(cfg);
  for (int k = 0; k < 2; ++k) {
    Stream rng(5, static_cast<std::uint64_t>(k));
    const Episode ep = simulate_episode(c.market, poemv_optimal_policy(c.market, c.problem),
                                        c.problem.T, c.problem.x0, c.problem.l0, rng);
    std::ostringstream os;
    write_episode_csv(os, ep);
    CHECK(slurp(dir / ("s/episode_" + std::to_string(k) + ".csv")) == os.str());
  }
  CHECK(run({"simulate", "--config", cfg, "--out", dir / "x"}).code == 1);
  CHECK(run({"simulate", "--config", cfg, "--policy", "coemv_opt", "--dynamics", "hidden", "--out",
             dir / "x"})
            .code == 1);
}

TEST_CASE("filter-demo columns follow the filter recursions") {
  TempDir dir("filter");
  const std::string cfg = small_config(dir, 300);
  REQUIRE(run({"filter-demo", "--config", cfg, "--out", dir / "f"}).code == 0);
  const auto rows = csv_rows(slurp(dir / "f/filter_demo.csv"));
  REQUIRE(rows.size() == 302u);
  CHECK(rows[0] == std::vector<std::string>{"t", "true_regime", "p_hat", "p_tilde"});
  const RegimeChain chain = default_market().chain;
  double p = chain.p0;
  for (int t = 0; t <= 300; ++t) {
    const auto& r = rows[static_cast<std::size_t>(t) + 1];
    CHECK(std::stoi(r[0]) == t);
    CHECK((r[1] == "1" || r[1] == "2"));
    CHECK(std::stod(r[2]) == doctest::Approx(p).epsilon(1e-14));
    // p_tilde = E[regime] = 2 - Prob(regime 1).
    CHECK(std::stod(r[3]) == doctest::Approx(2.0 - regime_one_probability(chain.p0, chain.P, t)));
    p = update_filter(p, chain.P);
  }
}

TEST_CASE("improve converges to the optimal policy") {
  TempDir dir("improve");
  const Result r = run({"improve", "--T", "6", "--iters", "auto", "--out", dir / "i"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "i/improve.csv"));
  CHECK(rows[0][6] == "objective");
  // The last iterate's laws equal the closed-form optimum.
  const RunConfig c = config_from_json(json::object());
  ProblemSpec spec = c.problem;
  spec.T = 6;
  const ScheduleTerms terms(signal_schedule(SignalKind::filter, c.market.chain,
                                            {c.market.moments(1), c.market.moments(2)}, 6));
  const int last = std::stoi(rows.back()[0]);
  CHECK(last <= 6);
  int checked = 0;
  for (const auto& row : rows) {
    if (row[0] != std::to_string(last)) continue;
    const AffineGaussian g = optimal_affine(std::stoi(row[1]), terms, spec);
    CHECK(std::stod(row[2]) == doctest::Approx(g.coef_x).epsilon(1e-9));
    CHECK(std::stod(row[3]) == doctest::Approx(g.coef_l).epsilon(1e-9));
    CHECK(std::stod(row[4]) == doctest::Approx(g.intercept).epsilon(1e-9));
    CHECK(std::stod(row[5]) == doctest::Approx(g.variance).epsilon(1e-9));
    ++checked;
  }
  CHECK(checked == 6);
  REQUIRE(run({"improve", "--T", "4", "--iters", "2", "--out", dir / "j"}).code == 0);
  CHECK(csv_rows(slurp(dir / "j/improve.csv")).size() == 1u + 3u * 4u);
  CHECK(run({"improve", "--iters", "soon", "--out", dir / "x"}).code == 1);
}

TEST_CASE("ingest labels and estimates a price file") {
  TempDir dir("ingest");
  const std::string prices = dir / "p.csv";
  {
    std::ofstream f(prices);
    f << "date,close\n";
    // Rise 30%, fall 25%, rise 30%, fall 25%: two bull and two bear segments.
    const double closes[] = {100, 110, 120, 130, 115, 97.5, 110, 126.75, 110, 95};
    for (int i = 0; i < 10; ++i) f << "2020-01-" << (i < 9 ? "0" : "") << i + 1 << ',' << closes[i] << '\n';
  }
  const Result r = run({"ingest", "--prices", prices, "--label", "--estimate", "--out", dir / "o"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "o/labels.csv"));
  REQUIRE(rows.size() == 11u);
  CHECK(rows[1][2] == "bull");
  CHECK(rows[4][2] == "bear");
  CHECK(rows[7][2] == "bull");
  const json est = parse_json(slurp(dir / "o/estimate.json"), "e");
  // Bull spells of 3 and 2 periods, bear spells of 2 and 2 (the last observation has no return).
  CHECK(est["P12"].get<double>() == doctest::Approx(0.4));
  CHECK(est["P21"].get<double>() == doctest::Approx(0.5));
  const MarketModel m = load_market(dir / "o/market.json");
  CHECK(m.chain.P12() == doctest::Approx(0.4));
  CHECK(m.e1[0].annual_mean == doctest::Approx(est["mean"][0].get<double>()));

  CHECK(run({"ingest", "--prices", prices, "--out", dir / "x"}).code == 1);
  CHECK(run({"ingest", "--prices", dir / "none.csv", "--label", "--out", dir / "x"}).code == 1);
  CHECK(run({"ingest", "--prices", prices, "--freq", "weekly", "--label", "--out", dir / "x"}).code == 1);
}

TEST_CASE("policy-eval dumps the laws") {
  TempDir dir("peval");
  const std::string cfg = small_config(dir, 12);
  REQUIRE(run({"policy-eval", "--config", cfg, "--policy", "coemv_opt", "--out", dir / "p"}).code == 0);
  const auto rows = csv_rows(slurp(dir / "p/policy.csv"));
  REQUIRE(rows.size() == 1u + 2u * 12u);  // one row per regime per period
  const RunConfig c = load_config(cfg);
  const GaussianPolicy pol = coemv_optimal_policy(c.market, c.problem);
  const AffineGaussian g = pol.at(5, 2.0);
  CHECK(rows[1 + 2 * 5 + 1][1] == "2");
  CHECK(std::stod(rows[1 + 2 * 5 + 1][2]) == doctest::Approx(g.coef_x).epsilon(1e-15));
  CHECK(std::stod(rows[1 + 2 * 5 + 1][5]) == doctest::Approx(g.variance).epsilon(1e-15));

  REQUIRE(run({"train", "--config", cfg, "--iters", "3", "--out", dir / "t"}).code == 0);
  REQUIRE(run({"policy-eval", "--config", cfg, "--checkpoint", dir / "t/checkpoint_poemv1.json",
               "--out", dir / "q"})
              .code == 0);
  CHECK(csv_rows(slurp(dir / "q/policy.csv")).size() == 13u);
  CHECK(run({"policy-eval", "--config", cfg, "--policy", "coemv_opt", "--checkpoint",
             dir / "t/checkpoint_poemv1.json", "--out", dir / "x"})
            .code == 1);
}

TEST_CASE("numerical failure maps to exit code 2") {
  TempDir dir("diverge");
  const std::string cfg = dir / "c.json";
  std::ofstream(cfg) << json{{"problem", {{"T", 30}}},
                             {"training", {{"eta_theta", 1e3}, {"eta_vartheta", 1e3}, {"clip", nullptr}}}}
                            .dump();
  const Result r = run({"train", "--config", cfg, "--iters", "50", "--out", dir / "o"});
  CHECK(r.code == 2);
  CHECK(r.err.find("training") != std::string::npos);
}
