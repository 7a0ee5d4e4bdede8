#include "rinr/inr_net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rinr/error.hpp"

namespace rinr {

void Architecture::validate() const {
  if (dims.size() < 2) throw InvalidInput("architecture needs at least input and output widths");
  if (dims.front() != 2) throw InvalidInput("architecture input width must be 2 (x, y)");
  if (dims.back() != 3) throw InvalidInput("architecture output width must be 3 (R, G, B)");
  for (int d : dims) {
    if (d < 1) throw InvalidInput("architecture widths must be >= 1");
  }
  if (!(omega > 0.0) || !std::isfinite(omega)) throw InvalidInput("omega must be finite and > 0");
}

Architecture Architecture::from_layers(int layers, int hidden, double omega) {
  if (layers < 1) throw InvalidInput("layer count must be >= 1");
  if (layers > 1 && hidden < 1) throw InvalidInput("hidden width must be >= 1");
  Architecture a;
  a.omega = omega;
  a.dims.push_back(2);
  for (int i = 0; i + 1 < layers; ++i) a.dims.push_back(hidden);
  a.dims.push_back(3);
  return a;
}

std::string Architecture::label() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "-" : "") << dims[i];
  return os.str();
}

std::size_t param_count(const Architecture& arch) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < arch.dims.size(); ++l)
    n += static_cast<std::size_t>(arch.dims[l]) * arch.dims[l + 1] + arch.dims[l + 1];
  return n;
}

std::size_t weight_count(const Architecture& arch) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < arch.dims.size(); ++l)
    n += static_cast<std::size_t>(arch.dims[l]) * arch.dims[l + 1];
  return n;
}

const char* to_string(QuantMode mode) {
  switch (mode) {
    case QuantMode::none: return "none";
    case QuantMode::affine8: return "affine8";
    case QuantMode::affine16: return "affine16";
  }
  return "?";
}

int quant_bits(QuantMode mode) {
  switch (mode) {
    case QuantMode::affine8: return 8;
    case QuantMode::affine16: return 16;
    default: return 32;
  }
}

template <typename T>
void BasicInrModel<T>::validate() const {
  arch.validate();
  const std::size_t n = arch.num_layers();
  if (layers.size() != n) throw FormatError("layer count does not match architecture");
  if (mask.size() != n) throw FormatError("mask count does not match architecture");
  for (std::size_t l = 0; l < n; ++l) {
    const auto& L = layers[l];
    if (L.in != arch.dims[l] || L.out != arch.dims[l + 1])
      throw FormatError("layer " + std::to_string(l) + " shape does not match architecture");
    const std::size_t entries = static_cast<std::size_t>(L.in) * L.out;
    if (L.w.size() != entries || L.b.size() != static_cast<std::size_t>(L.out))
      throw FormatError("layer " + std::to_string(l) + " storage size mismatch");
    if (mask[l].size() != entries) throw FormatError("mask " + std::to_string(l) + " size mismatch");
  }
  if (quant.mode == QuantMode::none) {
    if (!quant.layers.empty()) throw FormatError("unquantized model carries layer code books");
  } else {
    if (quant.layers.size() != n) throw FormatError("quantization table size mismatch");
    for (std::size_t l = 0; l < n; ++l) {
      const auto& q = quant.layers[l];
      if (!q.quantized) {
        if (!q.codes.empty()) throw FormatError("unquantized layer carries codes");
        continue;
      }
      if (l == 0 || l + 1 == n) throw FormatError("first and last layers are never quantized");
      if (q.codes.size() != layers[l].w.size()) throw FormatError("code count mismatch");
    }
  }
}

template <typename T>
void BasicInrModel<T>::apply_mask() {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].w;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (!mask[l][i]) w[i] = T(0);
  }
}

template <typename T>
std::size_t BasicInrModel<T>::pruned_count() const {
  std::size_t z = 0;
  for (const auto& m : mask) z += static_cast<std::size_t>(std::count(m.begin(), m.end(), 0));
  return z;
}

template <typename T>
double BasicInrModel<T>::prune_ratio() const {
  const std::size_t total = weight_count(arch);
  return total ? static_cast<double>(pruned_count()) / static_cast<double>(total) : 0.0;
}

CoordinateGrid CoordinateGrid::raster(int height, int width) {
  if (height < 1 || width < 1) throw InvalidInput("raster dimensions must be >= 1");
  CoordinateGrid g;
  g.height = height;
  g.width = width;
  g.xy.resize(static_cast<std::size_t>(height) * width * 2);
  std::size_t i = 0;
  for (int r = 0; r < height; ++r) {
    const double y = height > 1 ? static_cast<double>(r) / (height - 1) : 0.0;
    for (int c = 0; c < width; ++c) {
      g.xy[i++] = width > 1 ? static_cast<double>(c) / (width - 1) : 0.0;
      g.xy[i++] = y;
    }
  }
  return g;
}

template <typename T>
BasicInrModel<T> init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  BasicInrModel<T> m;
  m.arch = arch;
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < arch.num_layers(); ++l) {
    LayerWeights<T> L;
    L.in = arch.dims[l];
    L.out = arch.dims[l + 1];
    const double bound =
        l == 0 ? 1.0 / L.in : std::sqrt(6.0 / L.in) / arch.omega;
    std::uniform_real_distribution<double> dist(-bound, bound);
    L.w.resize(static_cast<std::size_t>(L.in) * L.out);
    for (auto& x : L.w) x = static_cast<T>(dist(rng));
    L.b.assign(L.out, T(0));
    m.mask.emplace_back(L.w.size(), std::uint8_t{1});
    m.layers.push_back(std::move(L));
  }
  return m;
}

namespace {

int max_width(const Architecture& arch) {
  return *std::max_element(arch.dims.begin(), arch.dims.end());
}

template <typename T>
void check_model(const BasicInrModel<T>& model) {
  try {
    model.validate();
  } catch (const FormatError& e) {
    throw InvalidInput(std::string("model/grid mismatch: ") + e.what());
  }
}

// One pixel through the network. `a` and `z` are scratch of max width.
template <typename T>
void eval_pixel(const BasicInrModel<T>& m, T x, T y, T* out, std::vector<T>& a, std::vector<T>& z) {
  const T omega = static_cast<T>(m.arch.omega);
  a[0] = x;
  a[1] = y;
  const std::size_t n = m.layers.size();
  for (std::size_t l = 0; l < n; ++l) {
    const auto& L = m.layers[l];
    const T* w = L.w.data();
    for (int o = 0; o < L.out; ++o) {
      T acc = L.b[o];
      const T* row = w + static_cast<std::size_t>(o) * L.in;
      for (int k = 0; k < L.in; ++k) acc += row[k] * a[k];
      z[o] = acc;
    }
    if (l + 1 == n) {
      out[0] = z[0];
      out[1] = z[1];
      out[2] = z[2];
    } else {
      for (int o = 0; o < L.out; ++o) a[o] = std::sin(omega * z[o]);
    }
  }
}

template <typename T>
bool all_finite(std::span<const T> xs) {
  for (T v : xs)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace

template <typename T>
void forward_range(const BasicInrModel<T>& model, const CoordinateGrid& grid, std::size_t begin,
                   std::size_t end, std::span<T> out) {
  if (end < begin || end > grid.size()) throw InvalidInput("pixel range outside grid");
  if (out.size() < 3 * (end - begin)) throw InvalidInput("output span too small");
  const int wmax = max_width(model.arch);
  std::vector<T> a(wmax), z(wmax);
  for (std::size_t i = begin; i < end; ++i) {
    eval_pixel(model, static_cast<T>(grid.xy[2 * i]), static_cast<T>(grid.xy[2 * i + 1]),
               out.data() + 3 * (i - begin), a, z);
  }
}

template <typename T>
std::vector<T> forward(const BasicInrModel<T>& model, const CoordinateGrid& grid) {
  check_model(model);
  std::vector<T> out(grid.size() * 3);
  forward_range<T>(model, grid, 0, grid.size(), out);
  return out;
}

template <typename T>
LossAndGrad<T> loss_and_grad(const BasicInrModel<T>& model, const CoordinateGrid& grid,
                             std::span<const T> targets, LossReduction reduction) {
  check_model(model);
  const std::size_t n = grid.size();
  if (targets.size() != 3 * n) throw InvalidInput("targets must be n x 3");
  if (!all_finite<T>(targets)) throw NumericError("non-finite target values");
  for (const auto& L : model.layers) {
    if (!all_finite<T>(L.w) || !all_finite<T>(L.b)) throw NumericError("non-finite model parameters");
  }

  const std::size_t nl = model.layers.size();
  const T omega = static_cast<T>(model.arch.omega);
  const T scale = reduction == LossReduction::mean ? T(1) / static_cast<T>(3 * n) : T(1);

  LossAndGrad<T> r;
  r.grads.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    r.grads[l].in = model.layers[l].in;
    r.grads[l].out = model.layers[l].out;
    r.grads[l].w.assign(model.layers[l].w.size(), T(0));
    r.grads[l].b.assign(model.layers[l].b.size(), T(0));
  }

  // Per-layer input activations and, for hidden layers, omega*cos(omega*z).
  std::vector<std::size_t> act_off(nl + 1, 0);
  for (std::size_t l = 0; l < nl; ++l) act_off[l + 1] = act_off[l] + model.layers[l].in;
  std::vector<T> acts(act_off[nl]);
  std::vector<T> dsin(act_off[nl]);  // indexed like acts[l+1]: derivative feeding layer l+1
  const int wmax = max_width(model.arch);
  std::vector<T> z(wmax), delta(wmax), delta_prev(wmax);

  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acts[0] = static_cast<T>(grid.xy[2 * i]);
    acts[1] = static_cast<T>(grid.xy[2 * i + 1]);
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& L = model.layers[l];
      const T* a = acts.data() + act_off[l];
      for (int o = 0; o < L.out; ++o) {
        T acc = L.b[o];
        const T* row = L.w.data() + static_cast<std::size_t>(o) * L.in;
        for (int k = 0; k < L.in; ++k) acc += row[k] * a[k];
        z[o] = acc;
      }
      if (l + 1 < nl) {
        T* next = acts.data() + act_off[l + 1];
        T* d = dsin.data() + act_off[l + 1];
        for (int o = 0; o < L.out; ++o) {
          const T arg = omega * z[o];
          next[o] = std::sin(arg);
          d[o] = omega * std::cos(arg);
        }
      }
    }
    const T* y = targets.data() + 3 * i;
    for (int c = 0; c < 3; ++c) {
      const T e = z[c] - y[c];
      loss += static_cast<double>(e) * static_cast<double>(e);
      delta[c] = T(2) * e * scale;
    }
    for (std::size_t l = nl; l-- > 0;) {
      const auto& L = model.layers[l];
      auto& G = r.grads[l];
      const T* a = acts.data() + act_off[l];
      for (int o = 0; o < L.out; ++o) {
        const T d = delta[o];
        G.b[o] += d;
        T* grow = G.w.data() + static_cast<std::size_t>(o) * L.in;
        for (int k = 0; k < L.in; ++k) grow[k] += d * a[k];
      }
      if (l == 0) break;
      const T* ds = dsin.data() + act_off[l];
      for (int k = 0; k < L.in; ++k) delta_prev[k] = T(0);
      for (int o = 0; o < L.out; ++o) {
        const T d = delta[o];
        const T* row = L.w.data() + static_cast<std::size_t>(o) * L.in;
        for (int k = 0; k < L.in; ++k) delta_prev[k] += row[k] * d;
      }
      for (int k = 0; k < L.in; ++k) delta[k] = delta_prev[k] * ds[k];
    }
  }

  for (std::size_t l = 0; l < nl; ++l) {
    auto& g = r.grads[l].w;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (!model.mask[l][j]) g[j] = T(0);
  }
  r.loss = static_cast<T>(loss * static_cast<double>(scale));
  if (!std::isfinite(r.loss)) throw NumericError("loss is not finite");
  return r;
}

template <typename T>
AdamState<T>::AdamState(const BasicInrModel<T>& model) {
  for (const auto& L : model.layers) {
    LayerWeights<T> z;
    z.in = L.in;
    z.out = L.out;
    z.w.assign(L.w.size(), T(0));
    z.b.assign(L.b.size(), T(0));
    m.push_back(z);
    v.push_back(std::move(z));
  }
}

template <typename T>
void adam_step(BasicInrModel<T>& model, AdamState<T>& state,
               const std::vector<LayerWeights<T>>& grads, double lr) {
  if (grads.size() != model.layers.size() || state.m.size() != model.layers.size())
    throw InvalidInput("gradient/state layout does not match model");
  ++state.step;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T eps = static_cast<T>(state.eps);
  const T c1 = static_cast<T>(1.0 - std::pow(state.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(state.beta2, static_cast<double>(state.step)));
  const T alpha = static_cast<T>(lr);

  auto update = [&](std::vector<T>& p, std::vector<T>& m, std::vector<T>& v, const std::vector<T>& g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T(1) - b1) * g[i];
      v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
      const T mhat = m[i] / c1;
      const T vhat = v[i] / c2;
      p[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& L = model.layers[l];
    if (grads[l].w.size() != L.w.size() || grads[l].b.size() != L.b.size())
      throw InvalidInput("gradient shape mismatch at layer " + std::to_string(l));
    update(L.w, state.m[l].w, state.v[l].w, grads[l].w);
    update(L.b, state.m[l].b, state.v[l].b, grads[l].b);
  }
  model.apply_mask();
}

template struct BasicInrModel<float>;
template struct BasicInrModel<double>;
template struct AdamState<float>;
template struct AdamState<double>;
template BasicInrModel<float> init_model<float>(const Architecture&, std::uint64_t);
template BasicInrModel<double> init_model<double>(const Architecture&, std::uint64_t);
template std::vector<float> forward<float>(const BasicInrModel<float>&, const CoordinateGrid&);
template std::vector<double> forward<double>(const BasicInrModel<double>&, const CoordinateGrid&);
template void forward_range<float>(const BasicInrModel<float>&, const CoordinateGrid&, std::size_t,
                                  std::size_t, std::span<float>);
template void forward_range<double>(const BasicInrModel<double>&, const CoordinateGrid&, std::size_t,
                                   std::size_t, std::span<double>);
template LossAndGrad<float> loss_and_grad<float>(const BasicInrModel<float>&, const CoordinateGrid&,
                                                 std::span<const float>, LossReduction);
template LossAndGrad<double> loss_and_grad<double>(const BasicInrModel<double>&,
                                                   const CoordinateGrid&, std::span<const double>,
                                                   LossReduction);
template void adam_step<float>(BasicInrModel<float>&, AdamState<float>&,
                               const std::vector<LayerWeights<float>>&, double);
template void adam_step<double>(BasicInrModel<double>&, AdamState<double>&,
                                const std::vector<LayerWeights<double>>&, double);

}  // namespace rinr
