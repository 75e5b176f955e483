#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#ifndef MVPI_CLI_PATH
#error "MVPI_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = fs::temp_directory_path() / ("mvpi_cli_out_" +
                                                    std::to_string(counter++) + ".txt");
  const std::string cmd = std::string(MVPI_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  fs::remove(log);
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("mvpi_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small dataset so every subcommand stays fast.
const std::string kSmallSynth =
    " --set synth.num_attributes=5 --set synth.num_objects=4 --set synth.feature_dim=16"
    " --set synth.train_samples=48 --set synth.val_samples=8 --set synth.test_samples=16"
    " --set synth.composition_pool=12";

const std::string kSmallModel =
    " --set backbone.token_dim=16 --set backbone.embed_dim=16"
    " --set integrator.heads=2 --set training.epochs=2 --set training.batch_size=16";

}  // namespace

TEST_CASE("synth writes a manifest and the run is byte-identical under reruns") {
  const fs::path a = fresh_dir("synth_a"), b = fresh_dir("synth_b");
  auto ra = run_cli("synth --seed 13 --out " + a.string() + kSmallSynth);
  REQUIRE(ra.exit_code == 0);
  CHECK(fs::exists(a / "manifest.json"));
  CHECK(fs::exists(a / "latent_truth.json"));

  auto rb = run_cli("synth --seed 13 --out " + b.string() + kSmallSynth);
  REQUIRE(rb.exit_code == 0);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  CHECK(slurp(a / "latent_truth.json") == slurp(b / "latent_truth.json"));

  // a different seed changes the bytes
  const fs::path c = fresh_dir("synth_c");
  run_cli("synth --seed 14 --out " + c.string() + kSmallSynth);
  CHECK(slurp(a / "manifest.json") != slurp(c / "manifest.json"));
}

TEST_CASE("train, eval, stats and bench run end to end") {
  const fs::path data = fresh_dir("e2e_data"), run = fresh_dir("e2e_run");
  REQUIRE(run_cli("synth --seed 5 --out " + data.string() + kSmallSynth).exit_code == 0);
  const std::string with_data =
      " --set data.manifest=" + (data / "manifest.json").string() + kSmallModel;

  auto tr = run_cli("train --seed 5 --out " + run.string() + with_data + " --freeze-check");
  REQUIRE(tr.exit_code == 0);
  CHECK(tr.output.find("freeze-check passed") != std::string::npos);
  CHECK(fs::exists(run / "checkpoint.json"));
  CHECK(fs::exists(run / "train_log.ndjson"));

  auto ev = run_cli("eval --seed 5 --world both --out " + run.string() + with_data);
  REQUIRE(ev.exit_code == 0);
  const auto metrics = nlohmann::json::parse(slurp(run / "metrics.json"));
  CHECK(metrics.contains("closed"));
  CHECK(metrics.contains("open"));
  CHECK(metrics["checkpoint_hash_mismatch"] == false);
  CHECK(metrics["closed"]["exact_match"].get<double>() >= 0.0);
  CHECK(metrics["closed"]["exact_match"].get<double>() <= 1.0);

  auto st = run_cli("stats --out " + run.string() +
                    " --set data.manifest=" + (data / "manifest.json").string());
  REQUIRE(st.exit_code == 0);
  const auto stats = nlohmann::json::parse(slurp(run / "stats.json"));
  CHECK(stats["total_images"].get<int>() == 72);

  auto be = run_cli("bench --seed 5 --out " + run.string() + with_data +
                    " --set bench.samples=8 --set bench.warmup=2 --set bench.baseline=true");
  REQUIRE(be.exit_code == 0);
  const auto eff = nlohmann::json::parse(slurp(run / "efficiency.json"));
  // dual branch: |A| + |O| = 9; baseline: |A| x |O| = 20 (open world)
  CHECK(eff["dual_branch"]["text_encode_calls"].get<int>() == 9);
  CHECK(eff["pair_baseline"]["text_encode_calls"].get<int>() == 20);
}

TEST_CASE("resume continues from the checkpoint instead of restarting") {
  const fs::path data = fresh_dir("resume_data"), run = fresh_dir("resume_run");
  REQUIRE(run_cli("synth --seed 5 --out " + data.string() + kSmallSynth).exit_code == 0);
  const std::string with_data =
      " --set data.manifest=" + (data / "manifest.json").string() + kSmallModel;

  REQUIRE(run_cli("train --seed 5 --out " + run.string() + with_data).exit_code == 0);
  auto before = nlohmann::json::parse(slurp(run / "checkpoint.json"));
  auto re = run_cli("train --seed 5 --resume --out " + run.string() + with_data);
  REQUIRE(re.exit_code == 0);
  auto after = nlohmann::json::parse(slurp(run / "checkpoint.json"));
  CHECK(after["epochs_done"].get<int>() ==
        before["epochs_done"].get<int>() + 2);
  CHECK(after["optimizer_steps"].get<int>() >
        before["optimizer_steps"].get<int>());
}

TEST_CASE("validation failures exit with code 1") {
  // unknown config key
  auto r1 = run_cli("synth --set synth.bogus_key=1 --out " +
                    fresh_dir("bad1").string());
  CHECK(r1.exit_code == 1);

  // missing manifest path
  auto r2 = run_cli("train --out " + fresh_dir("bad2").string());
  CHECK(r2.exit_code == 1);

  // malformed --set
  auto r3 = run_cli("stats --set nonsense --out " + fresh_dir("bad3").string());
  CHECK(r3.exit_code == 1);

  // infeasible holdout
  auto r4 = run_cli("synth --out " + fresh_dir("bad4").string() +
                    " --set synth.composition_pool=2 --set synth.unseen_holdout=0.01");
  CHECK(r4.exit_code == 1);

  // nonexistent config file
  auto r5 = run_cli("eval --config /nonexistent/mvpi.toml --out " +
                    fresh_dir("bad5").string());
  CHECK(r5.exit_code == 1);
}

TEST_CASE("config file values apply and --set overrides them") {
  const fs::path dir = fresh_dir("cfgfile");
  const fs::path cfg = dir / "run.toml";
  {
    std::ofstream out(cfg);
    out << "seed = 21\n\n[synth]\n";
    out << "num_attributes = 5\nnum_objects = 4\nfeature_dim = 16\n";
    out << "train_samples = 48\nval_samples = 8\ntest_samples = 16\n";
    out << "composition_pool = 12\n";
  }
  auto ra = run_cli("synth --config " + cfg.string() + " --out " + dir.string());
  REQUIRE(ra.exit_code == 0);
  CHECK(ra.output.find("|A|: 5") != std::string::npos);

  const fs::path dir2 = fresh_dir("cfgfile2");
  auto rb = run_cli("synth --config " + cfg.string() + " --set synth.num_attributes=7 --out " +
                    dir2.string());
  REQUIRE(rb.exit_code == 0);
  CHECK(rb.output.find("|A|: 7") != std::string::npos);
}
