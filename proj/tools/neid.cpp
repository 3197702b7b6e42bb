// Command-line surface for the two-stream low-light enhancement network:
// train / eval / enhance / synth / report.
#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "neid/checkpoint.hpp"
#include "neid/dataset.hpp"
#include "neid/metrics.hpp"
#include "neid/png_io.hpp"
#include "neid/trainer.hpp"
#include "svg_plot.hpp"

namespace fs = std::filesystem;
using namespace neid;

namespace {

DatasetLayout layout_from(const std::string& s) {
  if (s == "generic") return DatasetLayout::generic;
  if (s == "lol") return DatasetLayout::lol;
  throw InvalidCode("unknown layout: " + s);
}

struct TrainCli {
  std::string config_path;
  std::string data_dir;
  std::string layout = "generic";
  std::string out_dir;
  std::string variant;
  std::string eval_mode;
  std::string resume;
  std::uint64_t seed = 0;
  int epochs = 0;
  int steps_per_epoch = -1;
  int batch_size = 0;
  int eval_every = -1;
  int levels = 0;
  int base_channels = 0;
  int patch = 0;
  double clip_norm = -1.0;
};

int run_train(const TrainCli& cli, const CLI::App& cmd) {
  TrainConfig cfg;
  if (!cli.config_path.empty()) {
    cfg = TrainConfig::from_json_file(cli.config_path);
  }
  // explicit flags override config-file keys
  if (cmd.count("--variant")) cfg.arch.variant = variant_from_name(cli.variant);
  if (cmd.count("--seed")) cfg.seed = cli.seed;
  if (cmd.count("--epochs")) cfg.epochs = cli.epochs;
  if (cmd.count("--steps-per-epoch")) cfg.steps_per_epoch = cli.steps_per_epoch;
  if (cmd.count("--batch-size")) cfg.batch_size = cli.batch_size;
  if (cmd.count("--eval-every")) cfg.eval_every = cli.eval_every;
  if (cmd.count("--levels")) cfg.arch.levels = cli.levels;
  if (cmd.count("--base-channels")) cfg.arch.base_channels = cli.base_channels;
  if (cmd.count("--patch")) cfg.patch = cli.patch;
  if (cmd.count("--clip-norm")) cfg.clip_norm = cli.clip_norm;
  if (cmd.count("--eval-mode")) {
    cfg.eval_mode = cli.eval_mode == "patch" ? EvalMode::patch : EvalMode::full_image;
  }

  auto ds = scan_paired_dataset(cli.data_dir, layout_from(cli.layout));
  train(cfg, ds.train, ds.eval, cli.out_dir,
        cli.resume.empty() ? fs::path{} : fs::path(cli.resume));
  std::cout << "training complete; outputs under " << cli.out_dir << "\n";
  return 0;
}

struct EvalCli {
  std::string checkpoint;
  std::string data_dir;
  std::string layout = "generic";
  std::string mode = "full_image";
  std::string split = "auto";
  std::string out_path;
  std::string csv_path;
  bool quantize = false;
};

int run_eval(const EvalCli& cli) {
  Checkpoint ckpt = load_checkpoint(cli.checkpoint);
  auto ds = scan_paired_dataset(cli.data_dir, layout_from(cli.layout));
  const std::vector<PairedSample>* samples = &ds.train;
  if (cli.split == "eval" || (cli.split == "auto" && !ds.eval.empty())) {
    if (ds.eval.empty()) throw EmptyDataset("dataset has no eval split");
    samples = &ds.eval;
  }
  const EvalMode mode =
      cli.mode == "patch" ? EvalMode::patch : EvalMode::full_image;
  MetricsReport report = evaluate(ckpt, *samples, mode, cli.quantize);
  if (cli.out_path.empty()) {
    std::cout << report.to_json() << "\n";
  } else {
    report.write_json(cli.out_path);
    std::cout << "report written to " << cli.out_path << "\n";
  }
  if (!cli.csv_path.empty()) report.write_csv(cli.csv_path);
  return 0;
}

struct EnhanceCli {
  std::string checkpoint;
  std::string input;
  std::string output;
  bool no_downsample = false;
};

int run_enhance(const EnhanceCli& cli) {
  Checkpoint ckpt = load_checkpoint(cli.checkpoint);
  Model<float> model(ckpt.arch);
  const ForwardFn forward = [&](const Tensor<float>& x) {
    return model.forward(ckpt.params, x, Mode::infer).le_image;
  };
  Image low = load_png(cli.input);
  Image enhanced =
      enhance_full_image(low, ckpt.arch.levels, forward, cli.no_downsample);
  save_png(enhanced, cli.output);
  std::cout << "wrote " << cli.output << " (" << enhanced.width << "x"
            << enhanced.height << ")\n";
  return 0;
}

struct ReportCli {
  std::vector<std::string> runs;
  std::string out_dir = ".";
};

int run_report(const ReportCli& cli) {
  fs::create_directories(cli.out_dir);
  std::vector<plot::Series> loss_series;
  std::vector<plot::Series> psnr_series;
  struct Row {
    std::string name;
    double psnr = 0, ssim = 0, best_psnr = 0;
    bool have = false;
  };
  std::vector<Row> rows;

  for (const std::string& run : cli.runs) {
    const fs::path dir(run);
    const std::string name = dir.filename().empty()
                                 ? dir.parent_path().filename().string()
                                 : dir.filename().string();
    Row row;
    row.name = name;

    // loss trace
    plot::Series loss;
    loss.label = name;
    std::ifstream log(dir / "logs" / "loss.jsonl");
    for (std::string line; std::getline(log, line);) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("total") || !j["total"].is_number()) continue;
      loss.x.push_back(j["step"].get<double>());
      loss.y.push_back(j["total"].get<double>());
    }
    // thin long traces for the plot
    if (loss.x.size() > 2000) {
      plot::Series thin;
      thin.label = loss.label;
      const std::size_t stride = loss.x.size() / 2000 + 1;
      for (std::size_t i = 0; i < loss.x.size(); i += stride) {
        thin.x.push_back(loss.x[i]);
        thin.y.push_back(loss.y[i]);
      }
      loss = std::move(thin);
    }
    if (!loss.x.empty()) loss_series.push_back(std::move(loss));

    // eval curve
    plot::Series psnr_curve;
    psnr_curve.label = name;
    std::map<int, MetricsReport> reports;
    const fs::path reports_dir = dir / "reports";
    if (fs::is_directory(reports_dir)) {
      for (const auto& entry : fs::directory_iterator(reports_dir)) {
        const std::string fname = entry.path().filename().string();
        int epoch = -1;
        if (std::sscanf(fname.c_str(), "eval_epoch%d.json", &epoch) == 1) {
          reports.emplace(epoch, MetricsReport::read_json(entry.path()));
        }
      }
    }
    for (const auto& [epoch, report] : reports) {
      psnr_curve.x.push_back(epoch);
      psnr_curve.y.push_back(report.mean_psnr);
      row.best_psnr = std::max(row.best_psnr, report.mean_psnr);
      row.psnr = report.mean_psnr;
      row.ssim = report.mean_ssim;
      row.have = true;
    }
    if (!psnr_curve.x.empty()) psnr_series.push_back(std::move(psnr_curve));
    rows.push_back(std::move(row));
  }

  plot::write_line_chart(fs::path(cli.out_dir) / "loss_curve.svg",
                         "Training loss", "step", "total loss", loss_series);
  plot::write_line_chart(fs::path(cli.out_dir) / "psnr_curve.svg",
                         "Evaluation PSNR", "epoch", "mean PSNR (dB)",
                         psnr_series);

  std::ofstream table(fs::path(cli.out_dir) / "table.md");
  if (!table) throw IoError("cannot write table.md");
  table << "| Run | PSNR (dB) | SSIM | Best PSNR (dB) |\n";
  table << "|-----|-----------|------|----------------|\n";
  table.setf(std::ios::fixed);
  table.precision(2);
  for (const auto& row : rows) {
    if (row.have) {
      table << "| " << row.name << " | " << row.psnr << " | " << row.ssim
            << " | " << row.best_psnr << " |\n";
    } else {
      table << "| " << row.name << " | - | - | - |\n";
    }
  }
  std::cout << "report artifacts written to " << cli.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream low-light image enhancement (LE/DR/FF)"};
  app.require_subcommand(1);

  TrainCli train_cli;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train_cli.config_path, "JSON config file");
  train_cmd->add_option("--data", train_cli.data_dir, "Dataset root")->required();
  train_cmd->add_option("--layout", train_cli.layout, "Dataset layout")
      ->check(CLI::IsMember({"generic", "lol"}));
  train_cmd->add_option("--out", train_cli.out_dir, "Output directory")->required();
  train_cmd->add_option("--variant", train_cli.variant, "Architecture variant")
      ->check(CLI::IsMember({"unet", "le", "le_dr", "full"}));
  train_cmd->add_option("--seed", train_cli.seed, "RNG seed");
  train_cmd->add_option("--epochs", train_cli.epochs, "Number of epochs");
  train_cmd->add_option("--steps-per-epoch", train_cli.steps_per_epoch,
                        "Steps per epoch (0 = ceil(N/batch))");
  train_cmd->add_option("--batch-size", train_cli.batch_size, "Batch size");
  train_cmd->add_option("--eval-every", train_cli.eval_every,
                        "Epochs between eval passes (0 disables)");
  train_cmd->add_option("--levels", train_cli.levels, "Encoder levels");
  train_cmd->add_option("--base-channels", train_cli.base_channels,
                        "Channels at the first level");
  train_cmd->add_option("--patch", train_cli.patch, "Training crop size");
  train_cmd->add_option("--clip-norm", train_cli.clip_norm,
                        "Global gradient-norm clip (0 disables)");
  train_cmd->add_option("--eval-mode", train_cli.eval_mode, "Eval pipeline")
      ->check(CLI::IsMember({"patch", "full_image"}));
  train_cmd->add_option("--resume", train_cli.resume, "Checkpoint to resume from");

  EvalCli eval_cli;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_cli.checkpoint, "Checkpoint directory")
      ->required();
  eval_cmd->add_option("--data", eval_cli.data_dir, "Dataset root")->required();
  eval_cmd->add_option("--layout", eval_cli.layout, "Dataset layout")
      ->check(CLI::IsMember({"generic", "lol"}));
  eval_cmd->add_option("--mode", eval_cli.mode, "Evaluation pipeline")
      ->check(CLI::IsMember({"patch", "full_image"}));
  eval_cmd->add_option("--split", eval_cli.split, "Which split to score")
      ->check(CLI::IsMember({"auto", "train", "eval"}));
  eval_cmd->add_option("--out", eval_cli.out_path, "Report JSON path (default stdout)");
  eval_cmd->add_option("--csv", eval_cli.csv_path, "Also write per-image CSV");
  eval_cmd->add_flag("--quantize", eval_cli.quantize,
                     "Apply the 8-bit round trip before scoring");

  EnhanceCli enhance_cli;
  auto* enhance_cmd = app.add_subcommand("enhance", "Enhance one PNG");
  enhance_cmd->add_option("--checkpoint", enhance_cli.checkpoint, "Checkpoint directory")
      ->required();
  enhance_cmd->add_option("--input", enhance_cli.input, "Input PNG")->required();
  enhance_cmd->add_option("--output", enhance_cli.output, "Output PNG")->required();
  enhance_cmd->add_flag("--no-downsample", enhance_cli.no_downsample,
                        "Feed the image directly; output is 2x its size");

  int synth_count = 4;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--count", synth_count, "Number of pairs");
  synth_cmd->add_option("--seed", synth_seed, "RNG seed");

  ReportCli report_cli;
  auto* report_cmd = app.add_subcommand("report", "Render plots and a summary table");
  report_cmd->add_option("--runs", report_cli.runs, "Run directories")->required();
  report_cmd->add_option("--out", report_cli.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help exits 0, any usage error exits 1
  }

  try {
    if (*train_cmd) return run_train(train_cli, *train_cmd);
    if (*eval_cmd) return run_eval(eval_cli);
    if (*enhance_cmd) return run_enhance(enhance_cli);
    if (*synth_cmd) {
      make_synthetic_dataset(synth_out, synth_count, synth_seed);
      std::cout << "wrote " << synth_count << " pairs under " << synth_out << "\n";
      return 0;
    }
    if (*report_cmd) return run_report(report_cli);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
