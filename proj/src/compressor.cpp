#include "rinr/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rinr/error.hpp"

namespace rinr {

PruneSchedule PruneSchedule::cifar() {
  PruneSchedule s;
  s.name = "cifar";
  s.below = 0.0;
  s.above = 0.25;
  s.pieces = {{30.0, 35.0, 0.05, -1.5}};
  return s;
}

PruneSchedule PruneSchedule::large() {
  PruneSchedule s;
  s.name = "large";
  s.below = 0.2;
  s.above = 0.4;
  s.pieces = {{35.0, 40.0, 0.04, -1.2}};
  return s;
}

PruneSchedule PruneSchedule::by_name(const std::string& name) {
  if (name == "cifar") return cifar();
  if (name == "large" || name == "flowers" || name == "imagenet") return large();
  throw InvalidInput("unknown prune schedule '" + name + "'");
}

std::vector<std::string> PruneSchedule::names() { return {"cifar", "large"}; }

void PruneSchedule::validate() const {
  if (pieces.empty()) throw InvalidInput("schedule '" + name + "' has no pieces");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!(pieces[i].psnr_lo <= pieces[i].psnr_hi))
      throw InvalidInput("schedule piece bounds out of order");
    if (i > 0 && pieces[i].psnr_lo != pieces[i - 1].psnr_hi)
      throw InvalidInput("schedule pieces must be contiguous");
  }
}

double dynamic_ratio(const PruneSchedule& schedule, double psnr_db) {
  if (std::isnan(psnr_db)) throw InvalidInput("psnr must not be NaN");
  schedule.validate();
  if (psnr_db < schedule.pieces.front().psnr_lo) return schedule.below;
  for (const auto& p : schedule.pieces) {
    if (psnr_db <= p.psnr_hi) return p.slope * psnr_db + p.intercept;
  }
  return schedule.above;
}

InrModel prune_l1(const InrModel& model, double total_ratio, PruneScope scope) {
  if (!(total_ratio >= 0.0 && total_ratio < 1.0)) throw InvalidInput("prune ratio must lie in [0, 1)");
  if (model.quantized()) throw InvalidInput("prune before quantizing; model is quantized");
  model.validate();

  struct Entry {
    bool kept;
    float mag;
    std::uint32_t layer;
    std::uint32_t index;
  };
  // Already-pruned entries sort first, then by magnitude, then by position.
  auto before = [](const Entry& a, const Entry& b) {
    if (a.kept != b.kept) return !a.kept;
    if (a.mag != b.mag) return a.mag < b.mag;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.index < b.index;
  };

  InrModel out = model;
  auto prune_group = [&](std::vector<Entry>& entries) {
    const auto k = static_cast<std::size_t>(std::llround(total_ratio * static_cast<double>(entries.size())));
    if (k == 0) return;
    std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(k), entries.end(), before);
    for (std::size_t i = 0; i < k; ++i) {
      out.mask[entries[i].layer][entries[i].index] = 0;
      out.layers[entries[i].layer].w[entries[i].index] = 0.0f;
    }
  };
  auto collect = [&](std::size_t l, std::vector<Entry>& into) {
    const auto& w = model.layers[l].w;
    for (std::size_t i = 0; i < w.size(); ++i)
      into.push_back({model.mask[l][i] != 0, std::fabs(w[i]), static_cast<std::uint32_t>(l),
                      static_cast<std::uint32_t>(i)});
  };

  if (scope == PruneScope::global) {
    std::vector<Entry> all;
    all.reserve(weight_count(model.arch));
    for (std::size_t l = 0; l < model.layers.size(); ++l) collect(l, all);
    prune_group(all);
  } else {
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      std::vector<Entry> layer;
      collect(l, layer);
      prune_group(layer);
    }
  }

  for (std::size_t l = 0; l < out.mask.size(); ++l) {
    if (std::none_of(out.mask[l].begin(), out.mask[l].end(), [](std::uint8_t m) { return m != 0; }))
      throw StructuralError("pruning at ratio " + std::to_string(total_ratio) +
                            " would remove every weight of layer " + std::to_string(l));
  }
  return out;
}

float dequantize_code(const LayerQuant& q, std::uint16_t code) {
  const double v = static_cast<double>(q.offset) +
                   static_cast<double>(q.scale) * (static_cast<double>(code) - q.zero_point);
  return static_cast<float>(v);
}

InrModel quantize(const InrModel& model, QuantMode mode) {
  if (mode == QuantMode::none) throw InvalidInput("quantize needs affine8 or affine16");
  if (model.quantized()) throw InvalidInput("model is already quantized");
  model.validate();
  for (const auto& L : model.layers)
    for (float v : L.w)
      if (!std::isfinite(v)) throw NumericError("cannot quantize non-finite weights");

  const double levels = std::ldexp(1.0, quant_bits(mode)) - 1.0;
  InrModel out = model;
  out.quant.mode = mode;
  out.quant.layers.assign(model.layers.size(), LayerQuant{});
  const std::size_t n = model.layers.size();

  for (std::size_t l = 1; l + 1 < n; ++l) {
    auto& L = out.layers[l];
    const auto& keep = model.mask[l];
    LayerQuant q;
    q.quantized = true;
    q.codes.assign(L.w.size(), 0);

    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < L.w.size(); ++i) {
      if (!keep[i]) continue;
      const double v = L.w[i];
      if (!any) {
        lo = hi = v;
        any = true;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }

    if (!any || lo == hi) {
      q.scale = 1.0f;
      q.zero_point = 0;
      q.offset = static_cast<float>(lo);
    } else {
      q.scale = static_cast<float>((hi - lo) / levels);
      const double s = q.scale;
      q.zero_point = static_cast<std::int32_t>(std::lround(-lo / s));
      for (std::size_t i = 0; i < L.w.size(); ++i) {
        if (!keep[i]) continue;
        const double c = static_cast<double>(std::lround(L.w[i] / s)) + q.zero_point;
        q.codes[i] = static_cast<std::uint16_t>(std::clamp(c, 0.0, levels));
      }
    }
    for (std::size_t i = 0; i < L.w.size(); ++i) L.w[i] = keep[i] ? dequantize_code(q, q.codes[i]) : 0.0f;
    out.quant.layers[l] = std::move(q);
  }
  return out;
}

InrModel dequantize(const InrModel& model) {
  if (!model.quantized()) return model;
  if (model.quant.layers.size() != model.layers.size())
    throw FormatError("quantized model is missing its code books");
  model.validate();
  InrModel out = model;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    const auto& q = model.quant.layers[l];
    if (!q.quantized) continue;
    auto& w = out.layers[l].w;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = model.mask[l][i] ? dequantize_code(q, q.codes[i]) : 0.0f;
  }
  out.quant = QuantInfo{};
  return out;
}

std::size_t WeightHistogram::occupied_bins() const {
  return static_cast<std::size_t>(std::count_if(density.begin(), density.end(), [](double d) { return d > 0.0; }));
}

WeightHistogram weight_histogram(const InrModel& model, std::size_t layer, int bins) {
  if (layer >= model.layers.size()) throw InvalidInput("layer index out of range");
  if (bins < 1) throw InvalidInput("histogram needs at least one bin");
  std::vector<double> v;
  const auto& L = model.layers[layer];
  for (std::size_t i = 0; i < L.w.size(); ++i)
    if (model.mask[layer][i]) v.push_back(L.w[i]);

  WeightHistogram h;
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  if (v.empty()) return h;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  h.lo = *mn;
  h.hi = *mx;
  const double n = static_cast<double>(v.size());
  const double width = (h.hi - h.lo) / bins;
  for (double x : v) {
    std::size_t b = 0;
    if (width > 0.0) b = std::min<std::size_t>(static_cast<std::size_t>((x - h.lo) / width), bins - 1);
    h.density[b] += 1.0 / n;
  }
  h.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    const double d = (x - h.mean) * (x - h.mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  h.stddev = std::sqrt(m2);
  h.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
  return h;
}

}  // namespace rinr
