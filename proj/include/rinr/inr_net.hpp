#pragma once

// Sine-activated coordinate MLP: shapes, initialization, forward pass,
// analytic gradients and Adam updates.
//
// Layer l computes z = W_l a + b_l. Hidden layers emit sin(omega * z), the
// last layer emits z unchanged. Weight matrices are row-major (out x in).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rinr {

struct Architecture {
  /// Layer widths including input (2) and output (3), e.g. {2, 15, 15, 3}.
  std::vector<int> dims;
  double omega = 30.0;

  /// Throws InvalidInput unless dims = {2, ..., 3}, every width >= 1, omega > 0.
  void validate() const;

  /// Number of weight matrices.
  std::size_t num_layers() const { return dims.empty() ? 0 : dims.size() - 1; }

  /// `layers` weight matrices with `hidden` units between each pair, so
  /// from_layers(3, 15) is {2, 15, 15, 3}.
  static Architecture from_layers(int layers, int hidden, double omega = 30.0);

  /// "2-15-15-3" style label.
  std::string label() const;

  bool operator==(const Architecture&) const = default;
};

/// Weights plus biases over every layer.
std::size_t param_count(const Architecture& arch);
/// Weight-matrix entries only (the population pruning acts on).
std::size_t weight_count(const Architecture& arch);

enum class QuantMode : std::uint8_t { none = 0, affine8 = 1, affine16 = 2 };

const char* to_string(QuantMode mode);
int quant_bits(QuantMode mode);

/// Affine code book of one layer. Dequantized weight = offset + scale * (code - zero_point).
/// `offset` is zero except for constant layers, which keep their value there
/// with scale 1 and all codes 0.
struct LayerQuant {
  bool quantized = false;
  float scale = 1.0f;
  std::int32_t zero_point = 0;
  float offset = 0.0f;
  std::vector<std::uint16_t> codes;  // one per weight entry; pruned entries hold 0

  bool operator==(const LayerQuant&) const = default;
};

struct QuantInfo {
  QuantMode mode = QuantMode::none;
  std::vector<LayerQuant> layers;  // empty when mode == none

  bool layer_quantized(std::size_t l) const { return l < layers.size() && layers[l].quantized; }
  bool operator==(const QuantInfo&) const = default;
};

template <typename T>
struct LayerWeights {
  int in = 0;
  int out = 0;
  std::vector<T> w;  // out * in, row-major
  std::vector<T> b;  // out

  T& at(int row, int col) { return w[static_cast<std::size_t>(row) * in + col]; }
  const T& at(int row, int col) const { return w[static_cast<std::size_t>(row) * in + col]; }
  bool operator==(const LayerWeights&) const = default;
};

template <typename T>
struct BasicInrModel {
  Architecture arch;
  std::vector<LayerWeights<T>> layers;
  /// Per-layer keep flags over the weight entries (1 = kept). Biases are never masked.
  std::vector<std::vector<std::uint8_t>> mask;
  QuantInfo quant;
  int source_h = 0;
  int source_w = 0;

  /// Throws FormatError when layer, mask or quantization shapes disagree with arch.
  void validate() const;
  /// Forces w to 0 wherever the mask is 0.
  void apply_mask();
  std::size_t pruned_count() const;
  /// Pruned fraction of the weight entries.
  double prune_ratio() const;
  bool quantized() const { return quant.mode != QuantMode::none; }

  bool operator==(const BasicInrModel&) const = default;
};

using InrModel = BasicInrModel<float>;
using InrModelD = BasicInrModel<double>;

/// Same parameters at another precision. Quantization metadata is carried along.
template <typename To, typename From>
BasicInrModel<To> model_cast(const BasicInrModel<From>& src) {
  BasicInrModel<To> dst;
  dst.arch = src.arch;
  dst.mask = src.mask;
  dst.quant = src.quant;
  dst.source_h = src.source_h;
  dst.source_w = src.source_w;
  dst.layers.reserve(src.layers.size());
  for (const auto& l : src.layers) {
    LayerWeights<To> o;
    o.in = l.in;
    o.out = l.out;
    o.w.assign(l.w.begin(), l.w.end());
    o.b.assign(l.b.begin(), l.b.end());
    dst.layers.push_back(std::move(o));
  }
  return dst;
}

/// Normalized pixel centres of an H x W raster, row-major. Pixel (r, c) maps to
/// (c / (W - 1), r / (H - 1)); an axis of length 1 maps to 0.
struct CoordinateGrid {
  int height = 0;
  int width = 0;
  std::vector<double> xy;  // 2 per pixel

  static CoordinateGrid raster(int height, int width);
  std::size_t size() const { return xy.size() / 2; }
};

/// First layer ~ U(-1/in, 1/in); later layers ~ U(-sqrt(6/in)/omega, +sqrt(6/in)/omega);
/// zero biases, all-ones mask. Deterministic in (arch, seed).
template <typename T>
BasicInrModel<T> init_model(const Architecture& arch, std::uint64_t seed);

inline InrModel init(const Architecture& arch, std::uint64_t seed) {
  return init_model<float>(arch, seed);
}

/// n x 3 raw (unclamped) outputs, row-major.
template <typename T>
std::vector<T> forward(const BasicInrModel<T>& model, const CoordinateGrid& grid);

/// Evaluates pixels [begin, end) of `grid` into out[3 * (i - begin)].
/// Every pixel is computed independently, so any partition of the range
/// produces bit-identical results.
template <typename T>
void forward_range(const BasicInrModel<T>& model, const CoordinateGrid& grid, std::size_t begin,
                   std::size_t end, std::span<T> out);

enum class LossReduction { mean, sum };

template <typename T>
struct LossAndGrad {
  T loss = 0;
  std::vector<LayerWeights<T>> grads;
};

/// Squared error against `targets` (n x 3). With LossReduction::mean the loss
/// and gradients are divided by 3n. Gradients under mask == 0 are exactly 0.
template <typename T>
LossAndGrad<T> loss_and_grad(const BasicInrModel<T>& model, const CoordinateGrid& grid,
                             std::span<const T> targets,
                             LossReduction reduction = LossReduction::mean);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<LayerWeights<T>> m;
  std::vector<LayerWeights<T>> v;

  explicit AdamState(const BasicInrModel<T>& model);
};

/// One bias-corrected Adam update. Masked weights stay exactly 0.
template <typename T>
void adam_step(BasicInrModel<T>& model, AdamState<T>& state,
               const std::vector<LayerWeights<T>>& grads, double lr);

}  // namespace rinr
