#pragma once

// Magnitude pruning (fixed-ratio and PSNR-driven) and hidden-layer affine
// quantization of InrModel weights. Biases are never pruned or quantized.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rinr/inr_net.hpp"

namespace rinr {

/// Piecewise-linear PSNR -> total prune ratio, saturating outside its pieces.
struct PruneSchedule {
  struct Piece {
    double psnr_lo;
    double psnr_hi;
    double slope;
    double intercept;
  };

  std::string name;
  double below = 0.0;  // ratio for psnr < pieces.front().psnr_lo
  double above = 0.0;  // ratio for psnr > pieces.back().psnr_hi
  std::vector<Piece> pieces;

  /// 0 below 30 dB, 0.05 * psnr - 1.5 on [30, 35], 0.25 above.
  static PruneSchedule cifar();
  /// 0.2 below 35 dB, 0.04 * psnr - 1.2 on [35, 40], 0.4 above.
  static PruneSchedule large();
  /// "cifar", or "large" (aliases "flowers", "imagenet"). Throws InvalidInput otherwise.
  static PruneSchedule by_name(const std::string& name);
  static std::vector<std::string> names();

  /// Throws InvalidInput when pieces are empty, unordered or leave gaps.
  void validate() const;
};

/// Target total prune ratio for an image reconstructed at `psnr_db`.
/// +infinity maps to the upper saturation value; NaN is rejected.
double dynamic_ratio(const PruneSchedule& schedule, double psnr_db);

enum class PruneScope { global, per_layer };

/// Zeroes the round(ratio * N) smallest-magnitude weights, N being the weight
/// entries of the whole model (global) or of each layer (per_layer).
/// Entries already pruned count toward the target and are never revived, so a
/// ratio below the current sparsity leaves the mask unchanged. Ties are broken
/// by (layer, row, col). Throws StructuralError if some layer would lose every
/// weight, InvalidInput for ratio outside [0, 1) or a quantized model.
InrModel prune_l1(const InrModel& model, double total_ratio, PruneScope scope = PruneScope::global);

/// Layer-wise affine quantization of the hidden layers (never the first or
/// last weight matrix). Over the kept weights of each hidden layer:
/// scale = (max - min) / (2^bits - 1), zero_point = round(-min / scale),
/// code = clamp(round(w / scale) + zero_point). A constant layer keeps its value
/// exactly (scale 1, offset = value). Weights of the returned model already hold
/// the dequantized values.
InrModel quantize(const InrModel& model, QuantMode mode);

/// Rebuilds full-precision weights from the codes and drops the quantization
/// metadata. Identity for unquantized models. Throws FormatError when the code
/// books are missing or malformed.
InrModel dequantize(const InrModel& model);

/// Value encoded by `code` under `q`.
float dequantize_code(const LayerQuant& q, std::uint16_t code);

struct WeightHistogram {
  double lo = 0.0;
  double hi = 0.0;
  /// Fractions of the kept weights per uniform bin over [lo, hi]; sums to 1.
  std::vector<double> density;
  double mean = 0.0;
  double stddev = 0.0;
  /// Excess kurtosis (0 for a Gaussian); 0 when stddev is 0.
  double kurtosis = 0.0;

  std::size_t occupied_bins() const;
};

/// Distribution of the kept weights of `layer`. A layer whose kept weights are
/// all equal lands in a single bin.
WeightHistogram weight_histogram(const InrModel& model, std::size_t layer, int bins = 64);

}  // namespace rinr
