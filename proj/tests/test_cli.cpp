#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rlqr/cli.hpp"
#include "rlqr/errors.hpp"
#include "rlqr/net.hpp"
#include "rlqr/net_io.hpp"

using namespace rlqr;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / "rlqr_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small-but-real training setup that finishes in well under a second.
std::vector<std::string> tiny_train_args(const fs::path& out,
                                         const std::string& seed) {
  return {"train",          "--out",
          out.string(),     "--seed",
          seed,             "--td3.steps",
          "60",             "--td3.warmup",
          "32",             "--td3.batch",
          "16",             "--td3.hidden1",
          "8",              "--td3.hidden2",
          "6",              "--td3.eval_interval",
          "30",             "--td3.eval_episodes",
          "2",              "--td3.checkpoints",
          "0,30",           "--env.episode_len",
          "50"};
}

}  // namespace

TEST_CASE("config resolution round trips through a manifest") {
  Config c;
  c.set("seed", "1234");
  c.set("env.mass", "0.5");
  c.set("td3.steps", "17");
  c.set("td3.variant", "init_only");
  c.set("td3.optimizer", "adam");
  c.set("bias.m", "0.3");
  c.set("fit.max_rounds", "7");
  c.set("criticfit.nsd_tol", "1e-9");
  ResolvedConfig r = resolve_config(c);
  CHECK(r.seed == 1234);
  CHECK(r.env.mass == 0.5);
  CHECK(r.td3.steps == 17);
  CHECK(r.td3.variant == Variant::InitOnly);
  CHECK(r.td3.optimizer == OptimizerKind::Adam);
  CHECK(r.bias.m == 0.3);
  CHECK(r.fit_max_rounds == 7);
  CHECK(r.cf_nsd_tol == 1e-9);
  // untouched keys land on their defaults
  CHECK(r.env.torque_max == 0.8);
  CHECK(r.td3.gamma == 0.99);

  Config full = to_config(r);
  ResolvedConfig r2 = resolve_config(full);
  CHECK(r2.seed == r.seed);
  CHECK(r2.env.mass == r.env.mass);
  CHECK(r2.env.dt == r.env.dt);
  CHECK(r2.td3.steps == r.td3.steps);
  CHECK(r2.td3.variant == r.td3.variant);
  CHECK(r2.td3.optimizer == r.td3.optimizer);
  CHECK(r2.bias.m == r.bias.m);
  CHECK(r2.fit_max_rounds == r.fit_max_rounds);
  CHECK(r2.cf_nsd_tol == r.cf_nsd_tol);
  CHECK(r2.k_reg == r.k_reg);

  // and a manifest written to disk parses back to the same thing
  fs::path dir = fresh_dir("roundtrip");
  fs::path mf = dir / "manifest.txt";
  full.write(mf.string(), "test manifest");
  ResolvedConfig r3 = resolve_config(Config::from_file(mf.string()));
  CHECK(r3.seed == r.seed);
  CHECK(r3.td3.variant == r.td3.variant);
  CHECK(r3.env.mass == r.env.mass);
}

TEST_CASE("unknown keys and bad values are rejected") {
  Config c;
  c.set("td3.stepz", "5");
  CHECK_THROWS_AS(resolve_config(c), ConfigError);

  Config c2;
  c2.set("td3.variant", "bogus");
  CHECK_THROWS_AS(resolve_config(c2), ConfigError);

  Config c3;
  c3.set("td3.steps", "many");
  CHECK_THROWS_AS(resolve_config(c3), ConfigError);
}

TEST_CASE("seed can be forced from the environment") {
  Config c;
  c.set("seed", "5");
  setenv("RLQR_SEED", "777", 1);
  ResolvedConfig r = resolve_config(c);
  unsetenv("RLQR_SEED");
  CHECK(r.seed == 777);
  ResolvedConfig r2 = resolve_config(c);
  CHECK(r2.seed == 5);
}

TEST_CASE("bad invocations exit with a usage error") {
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"frobnicate"}) == 2);
  CHECK(run_cli({"train", "positional"}) == 2);
  CHECK(run_cli({"train", "--td3.steps"}) == 2);          // missing value
  CHECK(run_cli({"fit", "--mode", "exact"}) == 2);        // no checkpoint
  CHECK(run_cli({"train", "--no.such.key", "1"}) == 2);   // unknown config key
  CHECK(run_cli({"help"}) == 0);
}

TEST_CASE("gain printout command succeeds") {
  CHECK(run_cli({"lqr"}) == 0);
}

TEST_CASE("training writes artifacts and reruns reproduce them") {
  fs::path a = fresh_dir("train_a");
  fs::path b = fresh_dir("train_b");
  fs::path c = fresh_dir("train_c");
  REQUIRE(run_cli(tiny_train_args(a, "11")) == 0);
  REQUIRE(run_cli(tiny_train_args(b, "11")) == 0);
  REQUIRE(run_cli(tiny_train_args(c, "12")) == 0);

  for (const char* f :
       {"manifest.txt", "metrics.csv", "actor_final.txt", "critic1_final.txt",
        "critic2_final.txt", "actor_0.txt", "actor_30.txt"}) {
    CHECK(fs::exists(a / f));
  }
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "actor_final.txt") == slurp(b / "actor_final.txt"));
  CHECK(slurp(a / "metrics.csv") != slurp(c / "metrics.csv"));

  // the saved manifest reproduces the run byte for byte
  fs::path d = fresh_dir("train_d");
  REQUIRE(run_cli({"train", "--config", (a / "manifest.txt").string(), "--out",
                   d.string()}) == 0);
  CHECK(slurp(a / "metrics.csv") == slurp(d / "metrics.csv"));
  CHECK(slurp(a / "actor_final.txt") == slurp(d / "actor_final.txt"));

  // metrics rows: header + one per eval interval
  std::string metrics = slurp(a / "metrics.csv");
  CHECK(count_lines(metrics) == 3);
  CHECK(metrics.rfind("step,eval_return_mean,eval_return_std,min_abs_bias,"
                      "actor_loss,critic_loss\n", 0) == 0);
}

TEST_CASE("fit, eval and heatmap run against a saved checkpoint") {
  fs::path train_dir = fresh_dir("pipeline_train");
  REQUIRE(run_cli(tiny_train_args(train_dir, "21")) == 0);
  std::string actor = (train_dir / "actor_final.txt").string();

  fs::path fit_dir = fresh_dir("pipeline_fit");
  REQUIRE(run_cli({"fit", "--checkpoint", actor, "--mode", "exact", "--out",
                   fit_dir.string()}) == 0);
  CHECK(fs::exists(fit_dir / "actor_fitted.txt"));
  std::string report = slurp(fit_dir / "fit_report.txt");
  CHECK(report.find("mode=exact") != std::string::npos);
  CHECK(report.find("gain_error=") != std::string::npos);
  // the fitted network still loads
  NetworkParams fitted = load_network((fit_dir / "actor_fitted.txt").string());
  CHECK(fitted.num_layers() == 3);

  fs::path eval_dir = fresh_dir("pipeline_eval");
  REQUIRE(run_cli({"eval", "--checkpoint", actor, "--trials", "3", "--duration",
                   "1.0", "--trajectories", "--out", eval_dir.string()}) == 0);
  std::string ev = slurp(eval_dir / "eval.csv");
  CHECK(count_lines(ev) == 4);  // header + one row per trial
  CHECK(ev.rfind("trial,theta0,cost,final_theta,final_theta_dot,exited\n", 0) ==
        0);
  CHECK(fs::exists(eval_dir / "eval_summary.txt"));
  for (int i = 0; i < 3; ++i) {
    std::string traj = slurp(eval_dir / ("traj_" + std::to_string(i) + ".csv"));
    CHECK(count_lines(traj) == 101);  // header + 1 s of 10 ms steps
  }

  fs::path hm_dir = fresh_dir("pipeline_heatmap");
  REQUIRE(run_cli({"heatmap", "--checkpoint", actor, "--res-theta", "5",
                   "--res-theta-dot", "4", "--out", hm_dir.string()}) == 0);
  std::string hm = slurp(hm_dir / "heatmap.csv");
  CHECK(count_lines(hm) == 21);  // header + 5 * 4 grid points
  std::string lq = slurp(hm_dir / "heatmap_lqr.csv");
  CHECK(count_lines(lq) == 21);
  CHECK(hm.rfind("theta,theta_dot,u\n", 0) == 0);
}
