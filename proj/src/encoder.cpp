#include "rinr/encoder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>

#include "rinr/decoder.hpp"
#include "rinr/error.hpp"
#include "rinr/metrics.hpp"
#include "rinr/parallel.hpp"

namespace rinr {

void EncodeConfig::validate() const {
  arch.validate();
  if (!(round1_lr > 0.0) || !(retrain_lr > 0.0)) throw InvalidInput("learning rates must be > 0");
  if (round1_steps <= 0 || retrain_steps <= 0) throw InvalidInput("step counts must be > 0");
  if (!(iterative_prune_ratio >= 0.0 && iterative_prune_ratio < 1.0))
    throw InvalidInput("iterative prune ratio must lie in [0, 1)");
  if (loss_samples < 1) throw InvalidInput("loss_samples must be >= 1");
  PruneSchedule::by_name(schedule);
}

double cosine_lr(double lr0, long step, long total) {
  if (total <= 0) return lr0;
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

namespace {

double native_psnr(const InrModel& model, const ImageBuffer& image) {
  return psnr(decode(model, image.height, image.width), image).psnr_db;
}

}  // namespace

void train(InrModel& model, const ImageBuffer& image, double lr, long steps, int round,
           EncodeReport& report, int loss_samples) {
  if (model.quantized()) throw InvalidInput("cannot train a quantized model");
  const auto grid = CoordinateGrid::raster(image.height, image.width);
  const std::span<const float> targets(image.pixels);
  AdamState<float> adam(model);
  const long every = std::max<long>(1, steps / std::max(1, loss_samples));
  for (long t = 0; t < steps; ++t) {
    LossAndGrad<float> lg;
    try {
      lg = loss_and_grad<float>(model, grid, targets);
    } catch (const NumericError& e) {
      throw TrainingError(std::string("round ") + std::to_string(round) + " diverged: " + e.what(), t);
    }
    if (t % every == 0 || t + 1 == steps) report.loss_curve.push_back({round, t, lg.loss});
    adam_step<float>(model, adam, lg.grads, cosine_lr(lr, t, steps));
  }
  for (const auto& L : model.layers) {
    for (float v : L.w)
      if (!std::isfinite(v)) throw TrainingError("round " + std::to_string(round) + " diverged", steps);
    for (float v : L.b)
      if (!std::isfinite(v)) throw TrainingError("round " + std::to_string(round) + " diverged", steps);
  }
}

EncodeResult fit_round1(const ImageBuffer& image, const EncodeConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  EncodeResult r;
  r.model = init(cfg.arch, cfg.seed);
  r.model.source_h = image.height;
  r.model.source_w = image.width;
  train(r.model, image, cfg.round1_lr, cfg.round1_steps, 1, r.report, cfg.loss_samples);
  r.report.psnr_after_round.push_back(native_psnr(r.model, image));
  r.report.final_prune_ratio = r.model.prune_ratio();
  r.report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

InrModel dynamic_prune(const InrModel& model, const PruneSchedule& schedule, double psnr_db,
                       PruneScope scope) {
  return prune_l1(model, dynamic_ratio(schedule, psnr_db), scope);
}

EncodeResult fit_full(const ImageBuffer& image, const EncodeConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  EncodeResult r = fit_round1(image, cfg);
  auto& rep = r.report;
  const auto schedule = PruneSchedule::by_name(cfg.schedule);

  if (!cfg.skip_round2) {
    r.model = prune_l1(r.model, cfg.iterative_prune_ratio, cfg.prune_scope);
    ++rep.prune_events;
    rep.psnr_after_masking.push_back(native_psnr(r.model, image));
    train(r.model, image, cfg.retrain_lr, cfg.retrain_steps, 2, rep, cfg.loss_samples);
    rep.psnr_after_round.push_back(native_psnr(r.model, image));
  }

  rep.dynamic_target_ratio = dynamic_ratio(schedule, rep.psnr_after_round.back());
  r.model = prune_l1(r.model, rep.dynamic_target_ratio, cfg.prune_scope);
  ++rep.prune_events;
  rep.psnr_after_masking.push_back(native_psnr(r.model, image));
  train(r.model, image, cfg.retrain_lr, cfg.retrain_steps, 3, rep, cfg.loss_samples);
  rep.psnr_after_round.push_back(native_psnr(r.model, image));

  rep.final_prune_ratio = r.model.prune_ratio();
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(global_seed ^ mix(index));
}

DatasetEncoding encode_dataset(const std::vector<NamedImage>& images, const EncodeConfig& cfg,
                               int parallelism, FailurePolicy policy) {
  if (images.empty()) throw InvalidInput("encode_dataset needs at least one image");
  cfg.validate();
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (images[i].id == images[j].id) throw InvalidInput("duplicate image id '" + images[i].id + "'");

  std::vector<std::optional<EncodeResult>> results(images.size());
  std::vector<std::string> errors(images.size());
  parallel_for(images.size(), parallelism, [&](std::size_t i) {
    EncodeConfig c = cfg;
    c.seed = derive_seed(cfg.seed, i);
    try {
      results[i] = fit_full(images[i].image, c);
    } catch (const Error& e) {
      if (policy == FailurePolicy::fail_fast) throw;
      errors[i] = e.what();
    }
  });

  DatasetEncoding out;
  double psnr_sum = 0.0, ratio_sum = 0.0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!results[i]) {
      out.failures.push_back({i, images[i].id, errors[i]});
      continue;
    }
    psnr_sum += results[i]->report.final_psnr();
    ratio_sum += results[i]->report.final_prune_ratio;
    out.archive.records.push_back({images[i].id, std::move(results[i]->model)});
    out.reports.push_back(std::move(results[i]->report));
  }
  if (!out.reports.empty()) {
    out.mean_psnr = psnr_sum / static_cast<double>(out.reports.size());
    out.mean_prune_ratio = ratio_sum / static_cast<double>(out.reports.size());
  }
  return out;
}

}  // namespace rinr
