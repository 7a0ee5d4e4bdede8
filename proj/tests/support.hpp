#pragma once
// Fixtures shared by the unit and acceptance tests.

#include <cstdint>
#include <random>
#include <string>

#include "rinr/image.hpp"
#include "rinr/inr_net.hpp"

namespace rinr::test {

inline std::string data_path(const std::string& name) { return std::string(RINR_TEST_DATA) + "/" + name; }

/// Smooth two-colour linear ramp along the diagonal.
inline ImageBuffer gradient_image(int h, int w) {
  ImageBuffer img(h, w);
  const float c0[3] = {0.1f, 0.2f, 0.8f};
  const float c1[3] = {0.9f, 0.6f, 0.1f};
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const float t = 0.5f * (static_cast<float>(c) / (w - 1) + static_cast<float>(r) / (h - 1));
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = c0[ch] + t * (c1[ch] - c0[ch]);
    }
  return img;
}

inline ImageBuffer noise_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImageBuffer img(h, w);
  for (auto& v : img.pixels) v = u(rng);
  return img;
}

/// Random shape with 1-3 hidden layers of width 1-max_width.
inline Architecture random_arch(std::mt19937_64& rng, int max_hidden_layers = 3, int max_width = 8) {
  std::uniform_int_distribution<int> nh(1, max_hidden_layers), wd(1, max_width);
  Architecture a;
  a.dims.push_back(2);
  const int h = nh(rng);
  for (int i = 0; i < h; ++i) a.dims.push_back(wd(rng));
  a.dims.push_back(3);
  return a;
}

/// Initialized model with biases and weights perturbed so nothing is trivially zero.
template <typename T = float>
BasicInrModel<T> random_model(const Architecture& arch, std::uint64_t seed, double bias_scale = 0.3) {
  auto m = init_model<T>(arch, seed);
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> u(-bias_scale, bias_scale);
  for (auto& L : m.layers)
    for (auto& b : L.b) b = static_cast<T>(u(rng));
  return m;
}

}  // namespace rinr::test
