// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "rinr/archive.hpp"
#include "rinr/compressor.hpp"
#include "rinr/decoder.hpp"
#include "rinr/encoder.hpp"
#include "rinr/error.hpp"
#include "rinr/image_io.hpp"
#include "rinr/metrics.hpp"
#include "rinr/nas.hpp"
#include "support.hpp"

using namespace rinr;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const char* name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [exception: " << e.what() << "]";
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!o.pass) ++failures;
  std::printf("%s %2d %s:%s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.str().c_str(), s);
  std::fflush(stdout);
}

double mse_ref(const InrModelD& m, const CoordinateGrid& g, const std::vector<double>& t) {
  const auto y = forward<double>(m, g);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - t[i]) * (y[i] - t[i]);
  return s / static_cast<double>(y.size());
}

std::size_t effective_zeros(const InrModel& m, std::size_t l) {
  std::size_t z = 0;
  for (std::size_t i = 0; i < m.mask[l].size(); ++i) z += (!m.mask[l][i] || m.layers[l].w[i] == 0.0f) ? 1 : 0;
  return z;
}

// Record bytes of a model from its shape, storage tags and zero counts.
std::size_t record_bytes_formula(const std::string& id, const InrModel& m) {
  std::size_t n = 2 + id.size() + 4 + 4 + 8 + 1 + 2 * m.arch.dims.size() + 1;
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const std::size_t entries = m.layers[l].w.size();
    const bool q = m.quant.layer_quantized(l);
    const std::size_t value = q ? (m.quant.mode == QuantMode::affine8 ? 1 : 2) : 4;
    const std::size_t z = effective_zeros(m, l);
    n += 2 + (q ? 12 : 0);
    if (8 * z > entries) n += (entries + 7) / 8 + (entries - z) * value;
    else n += entries * value;
    n += 4 * m.layers[l].b.size();
  }
  return n + 4;
}

}  // namespace

int main() {
  const auto gradient = test::gradient_image(32, 32);
  const auto natural = io::load_image(test::data_path("chelsea32.png"));
  const auto arch = Architecture::from_layers(3, 15);
  EncodeConfig round1_cfg;
  round1_cfg.arch = arch;
  EncodeResult grad_fit, nat_fit;

  criterion(1, "gradient oracle (20 models, central differences, double)", [&](Outcome& o) {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      auto m = test::random_model<double>(test::random_arch(rng, 2, 8), 1000 + k);
      const auto g = CoordinateGrid::raster(4, 4);
      std::vector<double> t(3 * g.size());
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (auto& v : t) v = u(rng);
      const auto lg = loss_and_grad<double>(m, g, t);
      const double h = 1e-5;
      double d2 = 0.0, r2 = 0.0;
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto probe = [&](double& p, double a) {
          const double keep = p;
          p = keep + h;
          const double up = mse_ref(m, g, t);
          p = keep - h;
          const double dn = mse_ref(m, g, t);
          p = keep;
          const double fd = (up - dn) / (2 * h);
          d2 += (fd - a) * (fd - a);
          r2 += fd * fd;
        };
        for (std::size_t i = 0; i < m.layers[l].w.size(); ++i) probe(m.layers[l].w[i], lg.grads[l].w[i]);
        for (std::size_t i = 0; i < m.layers[l].b.size(); ++i) probe(m.layers[l].b[i], lg.grads[l].b[i]);
      }
      worst = std::max(worst, std::sqrt(d2 / r2));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    o.detail << " worst relative error " << worst << ", " << secs << " s";
    o.require(worst <= 1e-4, "relative error <= 1e-4");
    o.require(secs < 5.0, "runtime < 5 s");
  });

  criterion(2, "schedule exactness (10,000 points per schedule)", [&](Outcome& o) {
    auto cifar = [](double p) { return p < 30 ? 0.0 : (p <= 35 ? 0.05 * p - 1.5 : 0.25); };
    auto large = [](double p) { return p < 35 ? 0.2 : (p <= 40 ? 0.04 * p - 1.2 : 0.4); };
    double worst = 0.0;
    int below = 0, above = 0;
    for (const auto& [s, ref, lo, hi] :
         {std::tuple{PruneSchedule::cifar(), std::function<double(double)>(cifar), 20.0, 45.0},
          std::tuple{PruneSchedule::large(), std::function<double(double)>(large), 25.0, 50.0}}) {
      for (int i = 0; i < 10000; ++i) {
        const double p = lo + (hi - lo) * i / 9999.0;
        worst = std::max(worst, std::fabs(dynamic_ratio(s, p) - ref(p)));
        below += p < s.pieces.front().psnr_lo;
        above += p > s.pieces.back().psnr_hi;
      }
      for (double knot : {s.pieces.front().psnr_lo, s.pieces.back().psnr_hi}) {
        const double jump = std::fabs(dynamic_ratio(s, std::nextafter(knot, 0.0)) -
                                      dynamic_ratio(s, std::nextafter(knot, 1e9)));
        o.require(jump <= 1e-12, "continuity at knot " + std::to_string(knot));
      }
    }
    o.detail << " max |error| " << worst << ", saturated-low points " << below << ", saturated-high " << above;
    o.require(worst <= 1e-12, "exact to 1e-12");
    o.require(below > 0 && above > 0, "both saturation branches sampled");
  });

  criterion(3, "prune exactness on the 333-parameter model", [&](Outcome& o) {
    const auto m = test::random_model(arch, 3);
    const auto p = prune_l1(m, 0.20);
    // [2,15,15,3] counted by hand: 333 parameters, of which 300 are weights.
    const std::size_t weights = 2 * 15 + 15 * 15 + 15 * 3;
    const auto want = static_cast<std::size_t>(std::llround(0.20 * weights));
    o.detail << " round-2 zeros " << p.pruned_count() << " (want " << want << ")";
    o.require(param_count(arch) == 333 && weight_count(arch) == weights, "333 params / 300 weights");
    o.require(p.pruned_count() == want, "zero count == round(0.2*weights)");
    for (std::size_t l = 0; l < p.layers.size(); ++l)
      for (std::size_t i = 0; i < p.layers[l].b.size(); ++i)
        o.require(p.layers[l].b[i] == m.layers[l].b[i], "biases untouched");
    double worst = 0.0;
    for (int i = 0; i <= 100; ++i) {
      const double psnr_db = 30.0 + 0.12 * i;
      for (const auto& s : {PruneSchedule::cifar(), PruneSchedule::large()}) {
        const double r = dynamic_ratio(s, psnr_db);
        const auto d = dynamic_prune(p, s, psnr_db);
        const double frac = static_cast<double>(d.pruned_count()) / static_cast<double>(weights);
        worst = std::max(worst, std::fabs(frac - std::max(r, 0.2)));
      }
    }
    o.detail << ", worst dynamic |fraction - target| " << worst << " (bound " << 1.0 / 333 << ")";
    o.require(worst <= 1.0 / 333.0, "dynamic fraction within 1/param_count");
  });

  criterion(4, "quantization half-step bound and constant layers", [&](Outcome& o) {
    std::mt19937_64 rng(4);
    std::size_t checked = 0;
    double worst_ratio = 0.0, worst_f32 = 0.0;
    bool stored_ok = true;
    for (int k = 0; k < 200; ++k) {
      const auto a = test::random_arch(rng, 4, 24);
      auto m = test::random_model(a, 4000 + k);
      // Spread the hidden weights so code books are exercised across scales.
      const double spread = std::ldexp(1.0, static_cast<int>(rng() % 12) - 6);
      for (std::size_t l = 1; l + 1 < m.layers.size(); ++l)
        for (auto& w : m.layers[l].w) w = static_cast<float>(w * spread);
      if (k % 2) {
        try {
          m = prune_l1(m, 0.3);
        } catch (const StructuralError&) {
        }
      }
      for (auto mode : {QuantMode::affine8, QuantMode::affine16}) {
        const auto q = quantize(m, mode);
        for (std::size_t l = 1; l + 1 < m.layers.size(); ++l) {
          const auto& lq = q.quant.layers[l];
          const double scale = lq.scale;
          for (std::size_t i = 0; i < m.layers[l].w.size(); ++i) {
            if (!m.mask[l][i]) continue;
            // offset + scale * (code - zero_point), evaluated exactly from the stored parameters.
            const double deq = static_cast<double>(lq.offset) + scale * (static_cast<double>(lq.codes[i]) - lq.zero_point);
            const double orig = m.layers[l].w[i];
            worst_ratio = std::max(worst_ratio, std::fabs(deq - orig) / scale);
            // The model's f32 weight is that value rounded once to float.
            const float stored = q.layers[l].w[i];
            const double half_ulp = 0.5 * (std::nextafter(std::fabs(stored), 1e30f) - std::fabs(stored));
            const double err32 = std::fabs(static_cast<double>(stored) - orig);
            stored_ok &= stored == static_cast<float>(deq) && err32 <= scale / 2 + half_ulp;
            worst_f32 = std::max(worst_f32, err32 / scale);
            ++checked;
          }
        }
      }
    }
    o.detail << " " << checked << " kept weights, worst |error|/scale " << worst_ratio << " (after f32 storage "
             << worst_f32 << ")";
    o.require(worst_ratio <= 0.5, "|dequantized - original| <= scale/2");
    o.require(stored_ok, "f32 weight is the dequantized value rounded once");

    auto c = test::random_model(Architecture::from_layers(5, 9), 9);
    std::fill(c.layers[1].w.begin(), c.layers[1].w.end(), 0.0123f);
    std::fill(c.layers[2].w.begin(), c.layers[2].w.end(), -7.25e-3f);
    std::fill(c.layers[3].w.begin(), c.layers[3].w.end(), 0.0f);
    bool exact = true;
    for (auto mode : {QuantMode::affine8, QuantMode::affine16}) {
      const auto q = quantize(c, mode);
      for (std::size_t l = 1; l <= 3; ++l) exact &= q.layers[l].w == c.layers[l].w;
      DatasetArchive ar;
      ar.records.push_back({"c", q});
      const auto back = deserialize(serialize(ar)).records[0].model;
      for (std::size_t l = 1; l <= 2; ++l) exact &= back.layers[l].w == c.layers[l].w;
    }
    o.require(exact, "constant layers bit-exact");
  });

  criterion(5, "encode quality floor (32x32, [2,15,15,3], 5000 steps)", [&](Outcome& o) {
    const auto t0 = Clock::now();
    grad_fit = fit_round1(gradient, round1_cfg);
    const double t_grad = std::chrono::duration<double>(Clock::now() - t0).count();
    nat_fit = fit_round1(natural, round1_cfg);
    const double pg = grad_fit.report.final_psnr(), pn = nat_fit.report.final_psnr();
    o.detail << " gradient " << pg << " dB, natural " << pn << " dB, " << t_grad << " s per image";
    o.require(pg >= 35.0, "gradient >= 35 dB");
    o.require(pn >= 25.0, "natural >= 25 dB");
    o.require(t_grad < 180.0, "runtime under a few minutes");
  });

  criterion(6, "compression pipeline drop (schedule prune + affine8 <= 3 dB, affine16 <= 0.5 dB)", [&](Outcome& o) {
    for (const auto& [name, img, dense] : {std::tuple{"gradient", &gradient, &grad_fit},
                                           std::tuple{"natural", &natural, &nat_fit}}) {
      const double ref = dense->report.final_psnr();
      const auto full = fit_full(*img, round1_cfg);
      const double p8 = psnr(decode(quantize(full.model, QuantMode::affine8)), *img).psnr_db;
      const double p16 = psnr(decode(quantize(full.model, QuantMode::affine16)), *img).psnr_db;
      o.detail << " " << name << ": dense " << ref << ", pruned " << full.report.final_prune_ratio << " at "
               << full.report.final_psnr() << ", affine8 " << p8 << ", affine16 " << p16 << ";";
      o.require(ref - p8 <= 3.0, std::string(name) + " affine8 drop <= 3 dB");
      o.require(ref - p16 <= 0.5, std::string(name) + " affine16 drop <= 0.5 dB");
    }
  });

  criterion(7, "archive integrity (1,000 random models)", [&](Outcome& o) {
    std::mt19937_64 rng(7);
    int byte_ok = 0, decode_ok = 0, crc_ok = 0;
    for (int k = 0; k < 1000; ++k) {
      auto m = test::random_model(test::random_arch(rng, 3, 16), 7000 + k);
      m.source_h = 1 + static_cast<int>(rng() % 40);
      m.source_w = 1 + static_cast<int>(rng() % 40);
      try {
        m = prune_l1(m, std::uniform_real_distribution<double>(0.0, 0.6)(rng));
      } catch (const StructuralError&) {
      }
      if (rng() % 3 == 1) m = quantize(m, QuantMode::affine8);
      else if (rng() % 2) m = quantize(m, QuantMode::affine16);
      const WriteOptions opts{rng() % 4 == 0 ? FloatStorage::f16 : FloatStorage::f32};
      DatasetArchive a;
      a.records.push_back({"img" + std::to_string(k), m});
      const auto b1 = serialize(a, opts);
      const auto back = deserialize(b1);
      byte_ok += serialize(back, opts) == b1;
      if (opts.float_storage == FloatStorage::f32) decode_ok += decode(back.records[0].model) == decode(m);
      else decode_ok += decode(back.records[0].model) == decode(deserialize(serialize(back, opts)).records[0].model);
      auto bad = b1;
      bad[header_size(1) + rng() % (bad.size() - header_size(1))] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      try {
        deserialize(bad);
      } catch (const IntegrityError& e) {
        crc_ok += e.record() == 0;
      }
    }
    o.detail << " byte-identical " << byte_ok << "/1000, decode-identical " << decode_ok << "/1000, corruption detected "
             << crc_ok << "/1000";
    o.require(byte_ok == 1000 && decode_ok == 1000 && crc_ok == 1000, "all 1000");
  });

  criterion(8, "decoder determinism and resolution independence", [&](Outcome& o) {
    const auto& m = grad_fit.model;
    const auto serial = decode(m, DecodeOptions{64, 64, 1, 1 << 20});
    bool same = true;
    for (int jobs : {2, 4, 8})
      for (std::size_t tile : {1u, 100u, 1024u}) same &= decode(m, DecodeOptions{64, 64, jobs, tile}) == serial;
    std::vector<InrModel> batch{m, nat_fit.model, m};
    same &= decode_batch(batch, 32, 32, 1) == decode_batch(batch, 32, 32, 3);
    o.require(same, "parallel == serial bit-exact");
    bool clamped = true;
    for (float v : serial.pixels) clamped &= v >= 0.0f && v <= 1.0f;
    o.require(clamped && serial.height == 64 && serial.width == 64, "valid clamped 64x64 image");
    ImageBuffer down(32, 32);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        for (int ch = 0; ch < 3; ++ch)
          down.at(r, c, ch) = 0.25f * (serial.at(2 * r, 2 * c, ch) + serial.at(2 * r + 1, 2 * c, ch) +
                                       serial.at(2 * r, 2 * c + 1, ch) + serial.at(2 * r + 1, 2 * c + 1, ch));
    const double agree = psnr(down, decode(m)).psnr_db;
    o.detail << " 2x2-average vs native " << agree << " dB";
    o.require(agree >= 25.0, "agreement >= 25 dB");
  });

  criterion(9, "size accounting (25% pruned, affine8, [2,15,15,3])", [&](Outcome& o) {
    const auto q = quantize(prune_l1(grad_fit.model, 0.25), QuantMode::affine8);
    DatasetArchive a;
    a.records.push_back({"gradient", q});
    const auto s = stats(a);
    const auto formula = record_bytes_formula("gradient", q);
    o.detail << " record " << s.records[0].bytes << " bytes, formula " << formula << ", dense f32 "
             << s.records[0].dense_bytes << ", ratio " << s.ratio_vs_dense();
    o.require(s.records[0].bytes == formula, "record size == formula");
    o.require(serialize(a).size() == header_size(1) + formula, "file size == header + formula");
    o.require(s.ratio_vs_dense() < 0.5, "compressed/dense-f32 < 0.5");
  });

  criterion(10, "NAS budget soundness, omega sweep, LR divergence flag", [&](Outcome& o) {
    std::size_t archs = 0;
    EnumerateOptions eo;
    eo.min_depth = 1;
    eo.max_depth = 16;
    for (std::size_t budget : {13500u, 29000u})
      for (auto shape : {ArchShape::uniform, ArchShape::tapered})
        for (const auto& a : enumerate(budget, shape, eo).archs) {
          ++archs;
          o.require(param_count(a) * 4 <= budget, a.label() + " over budget");
        }
    o.detail << " " << archs << " archs within budget;";

    SweepAxes om{{arch}, {10.0, 30.0, 90.0}, {5e-4}, {2000}};
    const auto ot = sweep({natural}, om);
    o.require(ot.rows.size() == 3, "omega table has 3 rows");
    o.require(ot.to_csv().find("best_omega") != std::string::npos, "best_omega field present");
    o.detail << " best omega " << ot.rows[0].best_omega << ";";

    std::vector<ImageBuffer> imgs{natural, io::load_image(test::data_path("astronaut32.png")),
                                  io::load_image(test::data_path("coffee32.png"))};
    SweepAxes lr{{Architecture::from_layers(10, 32)}, {30.0}, {2e-4, 5e-4, 1e-3, 5e-3, 1e-2}, {2000}};
    const auto lt = sweep(imgs, lr);
    bool low_clean = true, high_flagged = false;
    for (const auto& r : lt.rows) {
      o.detail << " lr " << r.lr << ": min " << r.min_psnr << " dB" << (r.failed ? " FAILED" : "") << ";";
      if (r.lr < 1e-3) low_clean &= !r.failed;
      else high_flagged |= r.failed;
    }
    o.detail << (low_clean ? " no flags below 1e-3" : " flags below 1e-3 too");
    o.require(high_flagged, "divergence flagged at some lr >= 1e-3");
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
