// Command-line entry points: synth, train, eval, stats, bench.
//
// Exit codes: 0 success, 1 validation error, 2 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvpi/mvpi.hpp"

namespace fs = std::filesystem;
using namespace mvpi;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 7;
  bool seed_set = false;
  std::string out_dir = ".";
  std::string world;
};

ConfigMap load_config(const CommonArgs& args) {
  ConfigMap cfg = args.config_path.empty() ? ConfigMap() : ConfigMap::parse_file(args.config_path);
  for (const auto& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::invalid_config, "--set expects section.key=value, got: " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate_known(run_config_schema());
  return cfg;
}

std::uint64_t effective_seed(const CommonArgs& args, const ConfigMap& cfg) {
  if (args.seed_set) return args.seed;
  return static_cast<std::uint64_t>(cfg.get_int("seed", 7));
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write: " + path.string());
  out << j.dump(2) << "\n";
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "TOML config file");
  cmd->add_option("--set", args.overrides, "override: section.key=value")->take_all();
  cmd->add_option("--seed", args.seed, "RNG seed")->each([&args](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--out", args.out_dir, "output directory");
}

int cmd_synth(const CommonArgs& args) {
  ConfigMap cfg = load_config(args);
  const std::uint64_t seed = effective_seed(args, cfg);
  auto [manifest, truth] = generate_synthetic(synth_config_from(cfg), seed);
  fs::create_directories(args.out_dir);
  const fs::path manifest_path = fs::path(args.out_dir) / "manifest.json";
  save_manifest(manifest, manifest_path.string());

  nlohmann::json sidecar;
  sidecar["seed"] = seed;
  auto& unseen = sidecar["unseen_compositions"] = nlohmann::json::array();
  for (const auto& label : truth.unseen_compositions) {
    nlohmann::json jl;
    jl["object"] = manifest.vocab().object_name(label.object);
    auto& attrs = jl["attrs"] = nlohmann::json::array();
    for (AttributeId a : label.attr_set) attrs.push_back(manifest.vocab().attribute_name(a));
    unseen.push_back(jl);
  }
  write_json(sidecar, fs::path(args.out_dir) / "latent_truth.json");

  DatasetStats stats = compute_stats(manifest);
  std::cout << "wrote " << manifest_path.string() << "\n"
            << "samples: " << manifest.samples().size()
            << "  |A|: " << manifest.vocab().num_attributes()
            << "  |O|: " << manifest.vocab().num_objects() << "\n"
            << "seen compositions: " << manifest.seen_compositions().size()
            << "  unseen: " << manifest.unseen_compositions().size() << "\n"
            << "avg_attr: " << stats.avg_attr << "  avg_obj: " << stats.avg_obj << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args, bool resume, bool freeze_check) {
  ConfigMap cfg = load_config(args);
  const std::uint64_t seed = effective_seed(args, cfg);
  const std::string manifest_path = cfg.get_string("data.manifest", "");
  if (manifest_path.empty())
    throw Error(ErrorCode::invalid_config, "train: data.manifest is required");
  DatasetManifest manifest = load_manifest(manifest_path);
  DualBranchModel model = make_model(cfg, manifest.vocab(), seed);
  TrainConfig train_cfg = train_config_from(cfg, seed);

  fs::create_directories(args.out_dir);
  const fs::path ckpt_path = fs::path(args.out_dir) / "checkpoint.json";
  const fs::path log_path = fs::path(args.out_dir) / "train_log.ndjson";

  AdamW optimizer(train_cfg.learning_rate, train_cfg.weight_decay);
  std::uint64_t start_epoch = 0;
  if (resume) {
    CheckpointMeta meta = load_checkpoint(model.params(), ckpt_path.string());
    if (meta.config_hash != cfg.hash_hex())
      std::cerr << "warning: checkpoint config hash mismatch\n";
    optimizer.set_steps(meta.optimizer_steps);
    start_epoch = meta.epochs_done;
  }

  // Snapshot of the frozen stores for --freeze-check.
  const Eigen::MatrixXd frozen_attr = model.vocab_embedding().attribute_rows();
  const Eigen::MatrixXd frozen_obj = model.vocab_embedding().object_rows();

  std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
  for (std::uint64_t epoch = start_epoch; epoch < start_epoch + train_cfg.epochs; ++epoch) {
    auto records = train_epoch(model, manifest, train_cfg, optimizer, epoch);
    double total = 0.0;
    for (const auto& r : records) {
      nlohmann::json j;
      j["epoch"] = r.epoch;
      j["step"] = r.step;
      j["loss_a"] = r.loss_attr;
      j["loss_o"] = r.loss_obj;
      j["loss_total"] = r.loss_total;
      log << j.dump() << "\n";
      total += r.loss_total;
    }
    std::cout << "epoch " << epoch << " mean loss "
              << total / static_cast<double>(records.size()) << "\n";
  }

  if (freeze_check) {
    if (frozen_attr != model.vocab_embedding().attribute_rows() ||
        frozen_obj != model.vocab_embedding().object_rows()) {
      std::cerr << "freeze-check failed: vocab embeddings changed during training\n";
      return 1;
    }
    std::cout << "freeze-check passed\n";
  }

  CheckpointMeta meta;
  meta.config_hash = cfg.hash_hex();
  meta.optimizer_steps = optimizer.steps();
  meta.epochs_done = start_epoch + train_cfg.epochs;
  save_checkpoint(model.params(), meta, ckpt_path.string());
  std::cout << "wrote " << ckpt_path.string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  ConfigMap cfg = load_config(args);
  const std::uint64_t seed = effective_seed(args, cfg);
  DatasetManifest manifest = load_manifest(cfg.get_string("data.manifest", ""));
  DualBranchModel model = make_model(cfg, manifest.vocab(), seed);

  const fs::path ckpt_path = fs::path(args.out_dir) / "checkpoint.json";
  bool hash_mismatch = false;
  if (fs::exists(ckpt_path)) {
    CheckpointMeta meta = load_checkpoint(model.params(), ckpt_path.string());
    if (meta.config_hash != cfg.hash_hex()) {
      std::cerr << "warning: checkpoint config hash mismatch\n";
      hash_mismatch = true;
    }
  } else {
    std::cerr << "note: no checkpoint at " << ckpt_path.string() << ", evaluating fresh init\n";
  }

  std::vector<World> worlds;
  const std::string world = args.world.empty() ? cfg.get_string("evaluation.world", "open")
                                               : args.world;
  if (world == "both") {
    worlds = {World::closed, World::open};
  } else {
    worlds = {parse_world(world)};
  }

  nlohmann::json j;
  j["config_hash"] = cfg.hash_hex();
  j["checkpoint_hash_mismatch"] = hash_mismatch;
  for (World w : worlds) {
    EvalOptions opt;
    opt.world = w;
    MetricsReport report = evaluate(model, manifest, opt);
    j[world_name(w)] = report_to_json(report);
    std::cout << world_name(w) << ": exact_match " << report.exact_match << "  top1_p "
              << report.top1_p << "  top5_r " << report.top5_r << "  coverage "
              << report.coverage << "  auc " << report.auc << "\n";
  }
  fs::create_directories(args.out_dir);
  write_json(j, fs::path(args.out_dir) / "metrics.json");
  return 0;
}

int cmd_stats(const CommonArgs& args) {
  ConfigMap cfg = load_config(args);
  DatasetManifest manifest = load_manifest(cfg.get_string("data.manifest", ""));
  DatasetStats stats = compute_stats(manifest);
  fs::create_directories(args.out_dir);
  write_json(stats_to_json(stats), fs::path(args.out_dir) / "stats.json");

  std::cout << "images: " << stats.total_images << "\n"
            << "avg_attr: " << stats.avg_attr << "\n"
            << "avg_obj: " << stats.avg_obj << "\n"
            << "attrs-per-image histogram (proportions):\n";
  for (const auto& [k, v] : stats.label_count_histogram)
    std::cout << "  " << k << ": " << static_cast<double>(v) / static_cast<double>(stats.total_images)
              << "\n";
  return 0;
}

int cmd_bench(const CommonArgs& args) {
  ConfigMap cfg = load_config(args);
  const std::uint64_t seed = effective_seed(args, cfg);
  DatasetManifest manifest = load_manifest(cfg.get_string("data.manifest", ""));
  DualBranchModel model = make_model(cfg, manifest.vocab(), seed);

  const fs::path ckpt_path = fs::path(args.out_dir) / "checkpoint.json";
  if (fs::exists(ckpt_path)) load_checkpoint(model.params(), ckpt_path.string());

  const auto n = static_cast<std::size_t>(cfg.get_int("bench.samples", 100));
  const auto warmup = static_cast<std::size_t>(cfg.get_int("bench.warmup", 10));
  EfficiencyReport dual = bench_dual_branch(model, manifest, n, warmup);

  nlohmann::json j;
  j["dual_branch"] = efficiency_to_json(dual);
  std::cout << "dual-branch: text_encode_calls " << dual.text_encode_calls
            << " (cached per-image: " << dual.cached_text_calls_per_image << ")"
            << ", median ms/image " << dual.wall_clock_per_image_ms << "\n";

  if (cfg.get_bool("bench.baseline", false)) {
    SolutionSpace open_space = build_solution_space(manifest, World::open);
    PairBaselineModel baseline(model_config_from(cfg, seed), manifest.vocab(),
                               open_space.ordered_pairs(), make_backbone(cfg, seed));
    EfficiencyReport base = bench_pair_baseline(baseline, manifest, n, warmup);
    j["pair_baseline"] = efficiency_to_json(base);
    std::cout << "pair baseline: text_encode_calls " << base.text_encode_calls
              << ", median ms/image " << base.wall_clock_per_image_ms << "\n";
    if (base.text_encode_calls > 0 && dual.text_encode_calls > 0)
      std::cout << "text-encode call ratio: "
                << static_cast<double>(base.text_encode_calls) /
                       static_cast<double>(dual.text_encode_calls)
                << "x\n";
  }
  fs::create_directories(args.out_dir);
  write_json(j, fs::path(args.out_dir) / "efficiency.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-attribute compositional zero-shot learning toolkit"};
  app.require_subcommand(1);

  CommonArgs args;
  bool resume = false, freeze_check = false;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset manifest");
  add_common(synth, args);

  auto* train = app.add_subcommand("train", "train the dual-branch model");
  add_common(train, args);
  train->add_flag("--resume", resume, "continue from an existing checkpoint");
  train->add_flag("--freeze-check", freeze_check, "verify frozen stores are untouched");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, args);
  eval->add_option("--world", args.world, "closed|open|both");

  auto* stats = app.add_subcommand("stats", "dataset statistics report");
  add_common(stats, args);

  auto* bench = app.add_subcommand("bench", "efficiency benchmark");
  add_common(bench, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(args);
    if (train->parsed()) return cmd_train(args, resume, freeze_check);
    if (eval->parsed()) return cmd_eval(args);
    if (stats->parsed()) return cmd_stats(args);
    if (bench->parsed()) return cmd_bench(args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
