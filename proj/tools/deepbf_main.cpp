// deepbf: simulate, subsample, beamform, train, evaluate and benchmark.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "deepbf/commands.hpp"

namespace {

using namespace deepbf;
namespace fs = std::filesystem;

Config config_from(const std::string& path, const std::vector<std::string>& overrides) {
  Config cfg = path.empty() ? Config{} : load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void print_rows(const std::vector<MetricRow>& rows) { std::cout << io::metrics_csv(rows); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepBF learned ultrasound beamformer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string dataset;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate RF frames into a dataset directory");
  std::optional<std::string> variant_opt;
  sim->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  sim->add_option("--set", overrides, "Override one config key (key=value), repeatable");
  sim->add_option("--seed", seed, "Dataset seed (overrides config 'seed')");
  sim->add_option("--variant", variant_opt, "Acquisition mode")->check(CLI::IsMember({"focused", "planewave"}));
  sim->add_option("--out", out, "Output dataset directory")->required();

  // mask
  auto* mask = app.add_subcommand("mask", "Write a subsampling mask for a dataset");
  double factor = 1.0;
  mask->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  mask->add_option("--factor", factor, "Subsampling factor")->required();
  mask->add_option("--seed", seed, "Mask seed");
  mask->add_option("--out", out, "Mask file")->required();

  // beamform
  auto* bf = app.add_subcommand("beamform", "Reconstruct B-mode images (PGM + .db) and metric rows");
  commands::BeamformOptions bopt;
  std::optional<std::string> checkpoint, mask_file;
  bf->add_option("--dataset", bopt.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  bf->add_option("--method", bopt.method, "das or deepbf")->check(CLI::IsMember({"das", "deepbf"}));
  bf->add_option("--factor", bopt.factor, "Subsampling factor");
  bf->add_option("--seed", seed, "Mask seed");
  bf->add_option("--checkpoint", checkpoint, "Trained network (deepbf)")->check(CLI::ExistingFile);
  bf->add_option("--mask", mask_file, "Mask file from 'mask' (focused only)")->check(CLI::ExistingFile);
  bf->add_option("--split", bopt.split, "Frames to process")->check(CLI::IsMember({"train", "val", "test", "all"}));
  bf->add_option("--dynamic-range", bopt.dynamic_range_db, "Display dynamic range, dB");
  bf->add_flag("!--no-roi", bopt.use_roi, "Skip CNR / GCNR");
  bf->add_option("--out", bopt.out_dir, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train DeepBF on a dataset's train split");
  std::optional<int> epochs;
  std::optional<std::string> loss_csv;
  tr->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
  tr->add_option("--set", overrides, "Override one config key (key=value), repeatable");
  tr->add_option("--variant", variant_opt, "Network variant")->check(CLI::IsMember({"focused", "planewave"}));
  tr->add_option("--epochs", epochs, "Override train.epochs")->check(CLI::PositiveNumber);
  tr->add_option("--seed", seed, "Override train.seed");
  tr->add_option("--loss-csv", loss_csv, "Per-epoch loss CSV (default <out>.loss.csv)");
  tr->add_option("--out", out, "Checkpoint path")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "DAS vs DeepBF metrics per subsampling factor on the test split");
  commands::EvalOptions eopt;
  ev->add_option("--dataset", eopt.dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--checkpoint", checkpoint, "Trained network (omit for DAS only)")->check(CLI::ExistingFile);
  ev->add_option("--factor", eopt.factors, "Factors to evaluate (repeatable)");
  ev->add_option("--seed", seed, "Mask seed");
  ev->add_flag("!--no-roi", eopt.use_roi, "Skip CNR / GCNR");
  ev->add_option("--out", out, "Summary CSV (also printed)");

  // bench
  auto* be = app.add_subcommand("bench", "Per-depth-plane inference latency");
  std::size_t planes = 128, batch = 32;
  be->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  be->add_option("--checkpoint", checkpoint, "Trained network")->required()->check(CLI::ExistingFile);
  be->add_option("--planes", planes, "Depth planes to time (>= 100 recommended)");
  be->add_option("--batch", batch, "Planes per batched forward call");
  be->add_option("--out", out, "Also write the report as CSV");

  // render
  auto* re = app.add_subcommand("render", "Convert a .db image to 8-bit PGM");
  std::string image;
  re->add_option("image", image, ".db image from 'beamform'")->required()->check(CLI::ExistingFile);
  re->add_option("--out", out, "PGM path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      Config cfg = config_from(config_path, overrides);
      if (seed) cfg.seed = *seed;
      if (variant_opt) cfg.sim.mode = nn::variant_from_string(*variant_opt);
      const auto m = commands::simulate(cfg, out);
      std::cout << "wrote " << m.frames.size() << " frames to " << out << "\n";
    } else if (mask->parsed()) {
      const auto m = commands::make_mask(dataset, factor, seed.value_or(0), out);
      std::cout << "wrote " << to_string(m.kind) << " mask [" << m.n_planes << " x " << m.width
                << "], n_keep " << m.n_keep << " to " << out << "\n";
    } else if (bf->parsed()) {
      bopt.seed = seed.value_or(0);
      if (checkpoint) bopt.checkpoint = *checkpoint;
      if (mask_file) bopt.mask = *mask_file;
      print_rows(commands::beamform(bopt, &std::cerr));
    } else if (tr->parsed()) {
      commands::TrainOptions topt;
      topt.dataset = dataset;
      topt.cfg = config_from(config_path, overrides);
      if (seed) topt.cfg.train.seed = *seed;
      if (variant_opt) topt.variant = nn::variant_from_string(*variant_opt);
      topt.epochs = epochs;
      topt.out_checkpoint = out;
      if (loss_csv) topt.loss_csv = *loss_csv;
      commands::train(topt, &std::cerr);
    } else if (ev->parsed()) {
      eopt.seed = seed.value_or(0);
      if (checkpoint) eopt.checkpoint = *checkpoint;
      if (!out.empty()) eopt.out_csv = out;
      print_rows(commands::evaluate(eopt, &std::cerr));
    } else if (be->parsed()) {
      const auto report = commands::bench(dataset, *checkpoint, planes, batch);
      const std::string text = commands::format_bench(report);
      std::cout << text;
      if (!out.empty()) io::write_text(out, text);
    } else if (re->parsed()) {
      commands::render(image, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
