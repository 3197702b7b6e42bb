#include "neid/trainer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "neid/parallel.hpp"
#include "neid/png_io.hpp"

namespace neid {

void LrSchedule::validate() const {
  if (base <= 0.0) throw InvalidSize("LrSchedule: base rate must be positive");
  int prev = -1;
  for (const auto& drop : drops) {
    if (drop.epoch <= prev) {
      throw InvalidSize("LrSchedule: drop epochs must be strictly increasing");
    }
    if (drop.lr <= 0.0) throw InvalidSize("LrSchedule: rates must be positive");
    prev = drop.epoch;
  }
}

double lr_at(int epoch, const LrSchedule& schedule) {
  if (epoch < 0) throw InvalidSize("lr_at: epoch must be nonnegative");
  double rate = schedule.base;
  for (const auto& drop : schedule.drops) {
    if (epoch >= drop.epoch) rate = drop.lr;
  }
  return rate;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidSize("TrainConfig: epochs must be >= 1");
  if (batch_size < 1) throw InvalidSize("TrainConfig: batch_size must be >= 1");
  if (patch < 2 || patch % arch.divisor() != 0) {
    throw InvalidSize("TrainConfig: patch must be a multiple of 2^levels");
  }
  lr.validate();
  arch.validate();
  loss.validate();
}

namespace {

const char* eval_mode_name(EvalMode m) {
  return m == EvalMode::patch ? "patch" : "full_image";
}

EvalMode eval_mode_from_name(const std::string& s) {
  if (s == "patch") return EvalMode::patch;
  if (s == "full_image" || s == "full") return EvalMode::full_image;
  throw InvalidCode("unknown eval mode: " + s);
}

}  // namespace

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["lr"]["base"] = lr.base;
  j["lr"]["drops"] = nlohmann::json::array();
  for (const auto& d : lr.drops) {
    j["lr"]["drops"].push_back({{"epoch", d.epoch}, {"lr", d.lr}});
  }
  j["adam"] = {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}};
  j["seed"] = seed;
  j["arch"] = {{"levels", arch.levels},
               {"base_channels", arch.base_channels},
               {"scale", arch.scale},
               {"variant", variant_name(arch.variant)}};
  j["loss"] = {{"delta", loss.delta},
               {"lambda_mse", loss.lambda_mse},
               {"lambda_color", loss.lambda_color}};
  j["steps_per_epoch"] = steps_per_epoch;
  j["eval_every"] = eval_every;
  j["clip_norm"] = clip_norm;
  j["patch"] = patch;
  j["eval_mode"] = eval_mode_name(eval_mode);
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad config JSON: ") + e.what());
  }
  TrainConfig cfg;
  try {
    if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
    if (j.contains("lr")) {
      const auto& l = j["lr"];
      if (l.contains("base")) cfg.lr.base = l["base"].get<double>();
      if (l.contains("drops")) {
        cfg.lr.drops.clear();
        for (const auto& d : l["drops"]) {
          cfg.lr.drops.push_back({d.at("epoch").get<int>(), d.at("lr").get<double>()});
        }
      }
    }
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      if (a.contains("beta1")) cfg.adam.beta1 = a["beta1"].get<double>();
      if (a.contains("beta2")) cfg.adam.beta2 = a["beta2"].get<double>();
      if (a.contains("eps")) cfg.adam.eps = a["eps"].get<double>();
    }
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("arch")) {
      const auto& a = j["arch"];
      if (a.contains("levels")) cfg.arch.levels = a["levels"].get<int>();
      if (a.contains("base_channels")) cfg.arch.base_channels = a["base_channels"].get<int>();
      if (a.contains("scale")) cfg.arch.scale = a["scale"].get<int>();
      if (a.contains("variant")) cfg.arch.variant = variant_from_name(a["variant"].get<std::string>());
    }
    if (j.contains("loss")) {
      const auto& l = j["loss"];
      if (l.contains("delta")) cfg.loss.delta = l["delta"].get<double>();
      if (l.contains("lambda_mse")) cfg.loss.lambda_mse = l["lambda_mse"].get<double>();
      if (l.contains("lambda_color")) cfg.loss.lambda_color = l["lambda_color"].get<double>();
    }
    if (j.contains("steps_per_epoch")) cfg.steps_per_epoch = j["steps_per_epoch"].get<int>();
    if (j.contains("eval_every")) cfg.eval_every = j["eval_every"].get<int>();
    if (j.contains("clip_norm")) cfg.clip_norm = j["clip_norm"].get<double>();
    if (j.contains("patch")) cfg.patch = j["patch"].get<int>();
    if (j.contains("eval_mode")) cfg.eval_mode = eval_mode_from_name(j["eval_mode"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad config JSON: ") + e.what());
  }
  return cfg;
}

TrainConfig TrainConfig::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot read config " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

MetricsReport evaluate_with(const std::vector<PairedSample>& samples,
                            const EnhanceFn& fn, bool quantize) {
  if (samples.empty()) throw EmptyDataset("evaluate: no samples");
  MetricsReport report;
  report.per_image.resize(samples.size());
  parallel_for(0, static_cast<std::int64_t>(samples.size()), [&](std::int64_t i) {
    auto [low, high] = load_pair(samples[i]);
    Image pred = fn(low);
    if (quantize) pred = quantize8(pred);
    report.per_image[i] = {samples[i].id, psnr(pred, high), ssim(pred, high)};
  });
  report.compute_means();
  return report;
}

namespace {

int round_up(int v, int multiple) {
  return ((v + multiple - 1) / multiple) * multiple;
}

}  // namespace

Image enhance_full_image(const Image& low, int levels, const ForwardFn& forward,
                         bool no_downsample) {
  const int div = 1 << levels;
  if (no_downsample) {
    const Image padded =
        pad_reflect(low, round_up(low.height, div), round_up(low.width, div));
    Tensor<float> out = forward(image_to_tensor<float>(padded));
    Image full = tensor_to_image(out);
    return crop(full, 0, 0, 2 * low.height, 2 * low.width);
  }
  // Pad so the halved image is still a multiple of 2^levels.
  const Image padded = pad_reflect(low, round_up(low.height, 2 * div),
                                   round_up(low.width, 2 * div));
  const Image half = bicubic_resize(padded, padded.height / 2, padded.width / 2);
  Tensor<float> out = forward(image_to_tensor<float>(half));
  Image full = tensor_to_image(out);
  return crop(full, 0, 0, low.height, low.width);
}

MetricsReport evaluate_params(const ParamMap<float>& params, const ArchConfig& arch,
                              const std::vector<PairedSample>& samples,
                              EvalMode mode, bool quantize, int patch) {
  if (samples.empty()) throw EmptyDataset("evaluate: no samples");
  if (mode == EvalMode::patch && patch % arch.divisor() != 0) {
    throw InvalidSize("evaluate: patch must be a multiple of 2^levels");
  }
  Model<float> model(arch);
  const ForwardFn forward = [&](const Tensor<float>& x) {
    return model.forward(params, x, Mode::infer).le_image;
  };

  MetricsReport report;
  report.per_image.resize(samples.size());
  parallel_for(0, static_cast<std::int64_t>(samples.size()), [&](std::int64_t i) {
    auto [low, high] = load_pair(samples[i]);
    Image pred, ref;
    if (mode == EvalMode::full_image) {
      pred = enhance_full_image(low, arch.levels, forward);
      ref = std::move(high);
    } else {
      // Center 256 crop pipeline mirroring training.
      const Image low_pad = pad_reflect(low, patch, patch);
      const Image high_pad = pad_reflect(high, patch, patch);
      const int y0 = (low_pad.height - patch) / 2;
      const int x0 = (low_pad.width - patch) / 2;
      const Image low_patch = crop(low_pad, y0, x0, patch, patch);
      ref = crop(high_pad, y0, x0, patch, patch);
      const Image half = bicubic_resize(low_patch, patch / 2, patch / 2);
      pred = tensor_to_image(forward(image_to_tensor<float>(half)));
    }
    if (quantize) pred = quantize8(pred);
    report.per_image[i] = {samples[i].id, psnr(pred, ref), ssim(pred, ref)};
  });
  report.compute_means();
  return report;
}

MetricsReport evaluate(const Checkpoint& ckpt,
                       const std::vector<PairedSample>& samples, EvalMode mode,
                       bool quantize, const std::optional<ArchConfig>& expected_arch) {
  if (expected_arch &&
      expected_arch->fingerprint() != ckpt.arch.fingerprint()) {
    throw FingerprintMismatch("checkpoint arch " + ckpt.arch.canonical() +
                              " does not match expected " +
                              expected_arch->canonical());
  }
  return evaluate_params(ckpt.params, ckpt.arch, samples, mode, quantize);
}

namespace {

double grad_l2_norm(const ParamMap<float>& grads) {
  double acc = 0.0;
  for (const auto& [name, g] : grads) {
    for (float v : g.data) acc += static_cast<double>(v) * v;
  }
  return std::sqrt(acc);
}

void scale_grads(ParamMap<float>& grads, float factor) {
  for (auto& [name, g] : grads) {
    for (float& v : g.data) v *= factor;
  }
}

}  // namespace

Checkpoint train(const TrainConfig& cfg,
                 const std::vector<PairedSample>& train_samples,
                 const std::vector<PairedSample>& eval_samples,
                 const std::filesystem::path& out_dir,
                 const std::filesystem::path& resume_from) {
  cfg.validate();
  if (train_samples.empty()) throw EmptyDataset("train: no training samples");

  std::filesystem::create_directories(out_dir / "checkpoints");
  std::filesystem::create_directories(out_dir / "logs");
  std::filesystem::create_directories(out_dir / "reports");

  Model<float> model(cfg.arch);
  Checkpoint ckpt;
  ckpt.arch = cfg.arch;
  ckpt.config_json = cfg.to_json();

  Rng sampler(cfg.seed + 0x9E3779B97F4A7C15ULL);
  bool resuming = false;
  if (!resume_from.empty()) {
    Checkpoint loaded = load_checkpoint(resume_from);
    if (loaded.arch.fingerprint() != cfg.arch.fingerprint()) {
      throw FingerprintMismatch("resume checkpoint arch " +
                                loaded.arch.canonical() + " != config arch " +
                                cfg.arch.canonical());
    }
    ckpt.params = std::move(loaded.params);
    ckpt.adam = std::move(loaded.adam);
    ckpt.epoch = loaded.epoch;
    sampler = Rng::deserialize(loaded.sampler_state);
    resuming = true;
  } else {
    Rng init_rng(cfg.seed);
    ckpt.params = model.init_params(init_rng);
  }

  const int steps_per_epoch =
      cfg.steps_per_epoch > 0
          ? cfg.steps_per_epoch
          : static_cast<int>((train_samples.size() + cfg.batch_size - 1) /
                             cfg.batch_size);

  std::ofstream log(out_dir / "logs" / "loss.jsonl",
                    resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot open loss log under " + out_dir.string());

  const std::vector<PairedSample>& eval_set =
      eval_samples.empty() ? train_samples : eval_samples;
  double best_psnr = -std::numeric_limits<double>::infinity();

  auto write_eval = [&](int completed_epochs) {
    MetricsReport report = evaluate_params(ckpt.params, cfg.arch, eval_set,
                                           cfg.eval_mode, false, cfg.patch);
    char name[32];
    std::snprintf(name, sizeof(name), "eval_epoch%04d.json", completed_epochs);
    report.write_json(out_dir / "reports" / name);
    if (report.mean_psnr > best_psnr) {
      best_psnr = report.mean_psnr;
      save_checkpoint(ckpt, out_dir / "checkpoints" / "best");
    }
    return report;
  };

  PairCache cache(64);
  const PairLoader loader = [&cache](const PairedSample& s) { return cache(s); };

  if (cfg.eval_every > 0 && !resuming) write_eval(0);

  for (int epoch = static_cast<int>(ckpt.epoch); epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg.lr);
    for (int step = 0; step < steps_per_epoch; ++step) {
      Batch batch = sample_training_batch(train_samples, cfg.batch_size, sampler,
                                          cfg.patch, loader);
      ForwardCache<float> fwd_cache;
      ModelOutputs<float> outputs =
          model.forward(ckpt.params, batch.input, Mode::train, &fwd_cache);

      Tensor<float> grad_le, grad_dr;
      const bool has_dr = cfg.arch.has_dr();
      LossBreakdown bd =
          total_loss(outputs, batch.target_le, batch.target_dr, cfg.loss, has_dr,
                     &grad_le, has_dr ? &grad_dr : nullptr);

      const std::int64_t global_step =
          static_cast<std::int64_t>(epoch) * steps_per_epoch + step;
      // Non-finite components become strings ("nan", "inf") so the offending
      // step is readable in the log.
      auto loss_field = [](double v) -> nlohmann::json {
        if (std::isnan(v)) return "nan";
        if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
        return v;
      };
      nlohmann::json line = {{"step", global_step}, {"epoch", epoch},
                             {"lr", lr},           {"huber", loss_field(bd.huber)},
                             {"mse", loss_field(bd.mse)},
                             {"color_h", loss_field(bd.color_h)},
                             {"color_s", loss_field(bd.color_s)},
                             {"total", loss_field(bd.total)}};
      log << line.dump() << '\n';
      log.flush();

      if (!std::isfinite(bd.total) || !std::isfinite(bd.huber) ||
          !std::isfinite(bd.mse) || !std::isfinite(bd.color_h) ||
          !std::isfinite(bd.color_s)) {
        throw NonFiniteLoss("non-finite loss at step " +
                            std::to_string(global_step));
      }

      ParamMap<float> grads = model.backward(
          ckpt.params, fwd_cache, outputs, grad_le,
          (has_dr && outputs.dr_image) ? &grad_dr : nullptr);

      if (cfg.clip_norm > 0.0) {
        const double norm = grad_l2_norm(grads);
        if (norm > cfg.clip_norm) {
          scale_grads(grads, static_cast<float>(cfg.clip_norm / norm));
        }
      }
      adam_step(ckpt.params, grads, ckpt.adam, lr, cfg.adam);
    }

    ckpt.epoch = epoch + 1;
    ckpt.sampler_state = sampler.serialize();

    const bool eval_now =
        (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0) ||
        epoch + 1 == cfg.epochs;
    if (eval_now) {
      write_eval(epoch + 1);
      save_checkpoint(ckpt, out_dir / "checkpoints" / "latest");
    }
  }

  ckpt.sampler_state = sampler.serialize();
  save_checkpoint(ckpt, out_dir / "checkpoints" / "latest");
  return ckpt;
}

}  // namespace neid
