#pragma once

// Per-image fitting: overfit (round 1), fixed-ratio prune + retrain (round 2),
// PSNR-driven prune + retrain (round 3).

#include <cstdint>
#include <string>
#include <vector>

#include "rinr/archive.hpp"
#include "rinr/compressor.hpp"
#include "rinr/image.hpp"
#include "rinr/inr_net.hpp"

namespace rinr {

struct EncodeConfig {
  Architecture arch = Architecture::from_layers(3, 15);
  double round1_lr = 5e-4;
  long round1_steps = 5000;
  double retrain_lr = 2e-4;
  long retrain_steps = 10000;
  double iterative_prune_ratio = 0.20;
  bool skip_round2 = false;
  std::string schedule = "cifar";
  PruneScope prune_scope = PruneScope::global;
  std::uint64_t seed = 0;
  /// Loss curve samples kept per round.
  int loss_samples = 100;

  void validate() const;
};

/// lr0 * (1 + cos(pi * step / total)) / 2: lr0 at step 0, exactly 0 at step == total.
double cosine_lr(double lr0, long step, long total);

struct LossSample {
  int round = 0;
  long step = 0;
  double loss = 0.0;  // MSE
};

struct EncodeReport {
  /// Native-resolution PSNR (normalized domain) after each executed round.
  std::vector<double> psnr_after_round;
  /// PSNR right after each pruning event, before retraining.
  std::vector<double> psnr_after_masking;
  double final_prune_ratio = 0.0;
  /// Total ratio the dynamic schedule asked for in round 3.
  double dynamic_target_ratio = 0.0;
  int prune_events = 0;
  std::vector<LossSample> loss_curve;
  double wall_time = 0.0;

  double final_psnr() const { return psnr_after_round.empty() ? 0.0 : psnr_after_round.back(); }
};

struct EncodeResult {
  InrModel model;
  EncodeReport report;
};

/// Full-batch Adam with cosine decay from `lr` to 0 over `steps`, under the
/// model's current mask. Appends to report.loss_curve. Throws TrainingError
/// when the loss turns non-finite.
void train(InrModel& model, const ImageBuffer& image, double lr, long steps, int round,
           EncodeReport& report, int loss_samples = 100);

/// Dense overfit of one image.
EncodeResult fit_round1(const ImageBuffer& image, const EncodeConfig& cfg);

/// Prunes to the schedule's total ratio for `psnr_db` (existing zeros count).
InrModel dynamic_prune(const InrModel& model, const PruneSchedule& schedule, double psnr_db,
                       PruneScope scope = PruneScope::global);

/// Round 1, optional round 2, round 3.
EncodeResult fit_full(const ImageBuffer& image, const EncodeConfig& cfg);

/// Seed for image `index` under a global seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index);

struct NamedImage {
  std::string id;
  ImageBuffer image;
};

enum class FailurePolicy { fail_fast, skip };

struct EncodeFailure {
  std::size_t index = 0;
  std::string id;
  std::string message;
};

struct DatasetEncoding {
  DatasetArchive archive;
  std::vector<EncodeReport> reports;  // parallel to archive.records
  std::vector<EncodeFailure> failures;
  double mean_psnr = 0.0;
  double mean_prune_ratio = 0.0;
};

/// Fits every image independently (seed derived from (cfg.seed, index)) on up
/// to `parallelism` threads. Record order follows input order. Under `skip`
/// failed images are left out and listed in `failures`; under `fail_fast` the
/// first failure is rethrown.
DatasetEncoding encode_dataset(const std::vector<NamedImage>& images, const EncodeConfig& cfg,
                               int parallelism = 1, FailurePolicy policy = FailurePolicy::skip);

}  // namespace rinr
