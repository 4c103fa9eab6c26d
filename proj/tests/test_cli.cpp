#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aseg/config.hpp"
#include "aseg/experiment.hpp"
#include "aseg/trace.hpp"
#include "fixtures.hpp"

using namespace aseg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("aseg_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig small_config(const fs::path& out, KeyValues extra = {}) {
  KeyValues kv{{"synth.d", "8"},          {"synth.points_per_node", "30"},
               {"fed.M", "6"},            {"fed.B", "2"},
               {"iterations", "5"},       {"solver.kind", "exact"},
               {"output", out.string()}};
  kv.insert(kv.end(), extra.begin(), extra.end());
  return build_config(kv);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ASEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream in("# comment\nsynth.d = 4\nfed.M = 10\n\nfed.B=3   # trailing\n");
  const auto kv = read_key_values(in);
  REQUIRE(kv.size() == 3);
  CHECK(kv[1] == std::pair<std::string, std::string>{"fed.M", "10"});
  CHECK(kv[2].second == "3");

  const auto cfg = build_config(kv);
  CHECK(cfg.M == 10);
  CHECK(cfg.plan.B == 3);

  SUBCASE("later assignments win") {
    CHECK(build_config({{"synth.d", "4"}, {"fed.B", "3"}, {"fed.B", "5"}}).plan.B == 5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(build_config({{"no.such.key", "1"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"synth.d", "4"}, {"fed.M", "abc"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"fed.M", "4"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"synth.d", "4"}, {"tuning", "set7"}}), ConfigError);
    CHECK_THROWS_AS(build_config({{"data.path", "x.libsvm"}, {"synth.d", "4"}}), ConfigError);
    CHECK_THROWS_AS(split_assignment("novalue"), ConfigError);
    std::istringstream bad("fed.M = 3\nthis line has no equals\n");
    try {
      read_key_values(bad);
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find('2') != std::string::npos);
    }
  }
  SUBCASE("documented keys") {
    CHECK(config_keys().count("solver.kind") == 1);
    CHECK(config_keys().count("fed.B") == 1);
  }
}

TEST_CASE("config hash tracks meaningful fields only") {
  const auto base = small_config("/tmp/a");
  CHECK(base.hash().size() == 16);
  CHECK(small_config("/tmp/b").hash() == base.hash());
  CHECK(small_config("/tmp/a", {{"fed.B", "2"}}).hash() == base.hash());
  for (const auto& [k, v] : KeyValues{{"fed.B", "3"},
                                      {"iterations", "6"},
                                      {"solver.kind", "svrg"},
                                      {"noise.kind", "gaussian"},
                                      {"tuning", "set2"},
                                      {"synth.seed", "9"},
                                      {"seeds", "1,2"},
                                      {"lambda", "0.5"}})
    CHECK_MESSAGE(small_config("/tmp/a", {{k, v}}).hash() != base.hash(), k);
}

TEST_CASE("trace csv round trip") {
  std::vector<TraceRow> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].k = i;
    rows[i].phi = 1.0 / 3.0 * std::pow(10.0, -static_cast<double>(i) * 7);
    rows[i].gap = i == 1 ? std::nan("") : 0.1 + i;
    rows[i].dist_sq = 2e-300;
    rows[i].contacts = static_cast<std::int64_t>(4 * i);
    rows[i].normalized_rounds = 0.4 * static_cast<double>(i);
    rows[i].grad_norm_sq = 123456.789;
  }
  std::stringstream ss;
  write_trace_csv(ss, rows);
  CHECK(ss.str().rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  const auto back = read_trace_csv(ss);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].k == rows[i].k);
    CHECK(back[i].phi == rows[i].phi);
    CHECK((std::isnan(rows[i].gap) ? std::isnan(back[i].gap) : back[i].gap == rows[i].gap));
    CHECK(back[i].dist_sq == rows[i].dist_sq);
    CHECK(back[i].contacts == rows[i].contacts);
    CHECK(back[i].normalized_rounds == rows[i].normalized_rounds);
  }
  std::istringstream wrong("k,phi\n0,1\n");
  CHECK_THROWS_AS(read_trace_csv(wrong), ParseError);
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("run writes traces and recomputable aggregates") {
  const auto out = scratch("run");
  const auto cfg = small_config(out, {{"seeds", "1,2,3"}, {"noise.kind", "gaussian"},
                                      {"noise.scale", "0.1"}});
  const auto rep = cmd_run(cfg);
  REQUIRE(rep.traces.size() == 3);

  std::vector<std::vector<TraceRow>> loaded;
  for (auto s : {1, 2, 3}) {
    const auto path = out / ("trace_seed" + std::to_string(s) + ".csv");
    REQUIRE(fs::exists(path));
    loaded.push_back(read_trace_csv(path.string()));
    CHECK(loaded.back().size() == cfg.iterations + 1);
  }
  CHECK(loaded[0].back().phi != loaded[1].back().phi);

  const auto agg = read_aggregate_csv((out / "aggregate.csv").string());
  REQUIRE(agg.size() == cfg.iterations + 1);
  for (std::size_t k = 0; k < agg.size(); ++k) {
    double sum = 0, sum_phi = 0;
    for (const auto& t : loaded) sum += t[k].gap, sum_phi += t[k].phi;
    const double mean = sum / 3, mean_phi = sum_phi / 3;
    double ss = 0;
    for (const auto& t : loaded) ss += (t[k].gap - mean) * (t[k].gap - mean);
    CHECK(agg[k].gap_mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(agg[k].phi_mean == doctest::Approx(mean_phi).epsilon(1e-12));
    CHECK(agg[k].gap_std == doctest::Approx(std::sqrt(ss / 2)).epsilon(1e-9));
    CHECK(agg[k].contacts_mean == static_cast<double>(2 * cfg.plan.B * k));
  }
  const auto meta = slurp(out / "meta.txt");
  CHECK(meta.find("config_hash=" + cfg.hash()) != std::string::npos);
  CHECK(meta.find("delta=") != std::string::npos);

  SUBCASE("equal seeds give equal traces") {
    const auto twin = cmd_run(small_config(scratch("run_twin"), {{"seeds", "1,1"}}));
    CHECK(twin.traces[0].rows.back().phi == twin.traces[1].rows.back().phi);
  }
}

TEST_CASE("estimate reports the module constants") {
  const auto out = scratch("estimate");
  const auto cfg = small_config(out);
  const auto text = cmd_estimate(cfg);
  for (const char* key : {"mu=", "L=", "delta=", "sigma_sim_sq="})
    CHECK_MESSAGE(text.find(std::string("\n") + key) != std::string::npos, key);
  const auto p = build_problem(cfg);
  CHECK(text.find("delta=" + format_double(p.constants.delta) + "\n") != std::string::npos);
  CHECK(fs::exists(out / "estimate.txt"));

  SUBCASE("identical nodes give a near-zero delta") {
    const auto same = build_problem(small_config(out, {{"synth.hetero", "0"}, {"synth.exact_gram", "true"}}));
    CHECK(same.constants.delta <= 1e-10);
  }
}

TEST_CASE("sweep and compare") {
  SUBCASE("a one-value B sweep matches run") {
    const auto cfg = small_config(scratch("sweep"));
    const auto reps = cmd_sweep(cfg, SweepAxis::B, {"2"});
    const auto direct = cmd_run(small_config(scratch("sweep_direct")));
    REQUIRE(reps.size() == 1);
    CHECK(reps[0].traces[0].rows.back().phi == direct.traces[0].rows.back().phi);
    CHECK(fs::exists(fs::path(cfg.output) / "sweep.csv"));
  }
  SUBCASE("contact arithmetic for B = 1, M = 50") {
    const auto cfg = small_config(scratch("compare"), {{"fed.M", "50"}, {"fed.B", "1"}});
    const auto rep = cmd_compare(cfg);
    const auto& a = rep.aseg.traces[0].rows;
    const auto& e = rep.aeg.traces[0].rows;
    CHECK(a[1].contacts - a[0].contacts == 2);
    CHECK(e[1].contacts - e[0].contacts == 98);
    for (std::size_t k = 1; k < e.size(); ++k) CHECK(e[k].contacts > e[k - 1].contacts);
    CHECK(fs::exists(fs::path(cfg.output) / "compare.csv"));
  }
  CHECK_THROWS_AS(parse_sweep_axis("colour"), ConfigError);
}

TEST_CASE("command-line tool") {
  const auto dir = scratch("tool");
  const std::string base =
      " -s synth.d=6 -s synth.points_per_node=20 -s fed.M=4 -s fed.B=2 -s solver.kind=exact";

  CHECK(run_cli("run" + base + " -s iterations=1 -o " + (dir / "one").string()) == 0);
  const auto rows = read_trace_csv((dir / "one" / "trace_seed1.csv").string());
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].k == 0);
  CHECK(rows[1].k == 1);

  CHECK(run_cli("run" + base + " -s no.such.key=1") == 2);
  CHECK(run_cli("run -c " + (dir / "missing.cfg").string()) == 2);
  CHECK(run_cli("bogus-subcommand") == 2);
  CHECK(run_cli("--list-keys") == 0);
  CHECK(run_cli("estimate" + base + " -o " + (dir / "est").string()) == 0);

  std::ofstream(dir / "file.cfg") << "synth.d = 6\nsynth.points_per_node = 20\nfed.M = 4\n"
                                     "fed.B = 3\niterations = 2\nsolver.kind = exact\n";
  CHECK(run_cli("run -c " + (dir / "file.cfg").string() + " -s fed.B=2 -o " +
                (dir / "override").string()) == 0);
  const auto ov = read_trace_csv((dir / "override" / "trace_seed1.csv").string());
  CHECK(ov.back().contacts == 2 * 2 * 2);

  const std::string env_cmd = "ASEG_SEED=7 " + std::string(ASEG_CLI_PATH) + " run" + base +
                              " -s iterations=1 -o " + (dir / "env").string() + " >/dev/null 2>&1";
  CHECK(std::system(env_cmd.c_str()) == 0);
  CHECK(fs::exists(dir / "env" / "trace_seed7.csv"));

  const std::string diverge = " -s tuning=manual -s tuning.theta=100 -s tuning.tau=0.5"
                              " -s tuning.eta=1000 -s tuning.alpha=1 -s iterations=200";
  CHECK(run_cli("run" + base + diverge + " -o " + (dir / "div").string()) == 3);
}
