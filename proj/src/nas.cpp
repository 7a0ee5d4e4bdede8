#include "rinr/nas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

#include "rinr/encoder.hpp"
#include "rinr/error.hpp"
#include "rinr/parallel.hpp"

namespace rinr {

ArchShape parse_shape(const std::string& name) {
  if (name == "uniform") return ArchShape::uniform;
  if (name == "tapered") return ArchShape::tapered;
  throw InvalidInput("unknown architecture shape '" + name + "'");
}

const char* to_string(ArchShape shape) { return shape == ArchShape::uniform ? "uniform" : "tapered"; }

std::vector<int> tapered_widths(int hidden, int peak, double floor) {
  std::vector<int> w(static_cast<std::size_t>(std::max(hidden, 0)));
  int dmax = 0;
  for (int i = 0; i < hidden; ++i) dmax = std::max(dmax, std::min(i, hidden - 1 - i));
  for (int i = 0; i < hidden; ++i) {
    const int d = std::min(i, hidden - 1 - i);
    const double frac = dmax ? floor + (1.0 - floor) * static_cast<double>(d) / dmax : 1.0;
    w[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::lround(peak * frac)));
  }
  return w;
}

namespace {

Architecture build(ArchShape shape, int depth, int width, const EnumerateOptions& opts) {
  Architecture a;
  a.omega = opts.omega;
  a.dims.push_back(2);
  const int hidden = depth - 1;
  if (shape == ArchShape::uniform) {
    for (int i = 0; i < hidden; ++i) a.dims.push_back(width);
  } else {
    for (int w : tapered_widths(hidden, width, opts.taper_floor)) a.dims.push_back(w);
  }
  a.dims.push_back(3);
  return a;
}

}  // namespace

Enumeration enumerate(std::size_t budget_bytes, ArchShape shape, const EnumerateOptions& opts) {
  if (opts.min_depth < 1 || opts.max_depth < opts.min_depth) throw InvalidInput("bad depth range");
  if (opts.max_width < 1) throw InvalidInput("max_width must be >= 1");
  if (!(opts.taper_floor > 0.0 && opts.taper_floor <= 1.0)) throw InvalidInput("taper_floor must lie in (0, 1]");
  Enumeration out;
  for (int depth = opts.min_depth; depth <= opts.max_depth; ++depth) {
    if (depth == 1) {
      auto a = build(shape, 1, 0, opts);
      if (dense_bytes(a) <= budget_bytes) out.archs.push_back(a);
      continue;
    }
    // dense_bytes is non-decreasing in width for both shapes: binary search the largest fit.
    int lo = 0, hi = opts.max_width;
    while (lo < hi) {
      const int mid = lo + (hi - lo + 1) / 2;
      if (dense_bytes(build(shape, depth, mid, opts)) <= budget_bytes) lo = mid;
      else hi = mid - 1;
    }
    if (lo < 1) continue;
    out.archs.push_back(build(shape, depth, lo, opts));
    if (depth > 10)
      out.warnings.push_back("depth " + std::to_string(depth) + " (" + out.archs.back().label() +
                             ") exceeds 10 layers; deep nets tend to reconstruct worse");
  }
  return out;
}

const SweepRow& SweepTable::best() const {
  if (rows.empty()) throw InvalidInput("empty sweep table");
  const SweepRow* b = &rows.front();
  for (const auto& r : rows)
    if (!std::isnan(r.mean_psnr) && (std::isnan(b->mean_psnr) || r.mean_psnr > b->mean_psnr)) b = &r;
  return *b;
}

std::string SweepTable::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "cell,arch,bytes,omega,lr,steps,mean_psnr,min_psnr,diverged,failed,best_omega\n";
  for (const auto& r : rows) {
    os << r.cell << ',' << r.arch << ',' << r.bytes << ',' << r.omega << ',' << r.lr << ',' << r.steps << ','
       << r.mean_psnr << ',' << r.min_psnr << ',' << r.diverged << ',' << (r.failed ? 1 : 0) << ','
       << r.best_omega << '\n';
  }
  return os.str();
}

SweepTable sweep(const std::vector<ImageBuffer>& images, const SweepAxes& axes, const SweepOptions& opts) {
  if (images.empty()) throw InvalidInput("sweep needs at least one image");
  if (axes.archs.empty() || axes.omegas.empty() || axes.lrs.empty() || axes.steps.empty())
    throw InvalidInput("every sweep axis needs at least one value");

  struct Cell {
    Architecture arch;
    double lr;
    long steps;
  };
  std::vector<Cell> cells;
  for (const auto& a : axes.archs)
    for (double om : axes.omegas)
      for (double lr : axes.lrs)
        for (long st : axes.steps) {
          Architecture arch = a;
          arch.omega = om;
          arch.validate();
          cells.push_back({arch, lr, st});
        }

  // One work item per (cell, image); results land in fixed slots.
  const std::size_t n_img = images.size();
  std::vector<double> psnrs(cells.size() * n_img, 0.0);
  std::vector<std::uint8_t> diverged(cells.size() * n_img, 0);
  parallel_for(cells.size() * n_img, opts.jobs, [&](std::size_t job) {
    const auto& c = cells[job / n_img];
    const std::size_t i = job % n_img;
    EncodeConfig cfg;
    cfg.arch = c.arch;
    cfg.round1_lr = c.lr;
    cfg.round1_steps = c.steps;
    cfg.seed = derive_seed(opts.seed, i);
    cfg.loss_samples = 1;
    try {
      const double p = fit_round1(images[i], cfg).report.final_psnr();
      if (std::isfinite(p) || p > 0) psnrs[job] = p;
      else diverged[job] = 1;
    } catch (const NumericError&) {
      diverged[job] = 1;
    }
  });

  SweepTable t;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    SweepRow r;
    r.cell = k;
    r.arch = cells[k].arch.label();
    r.bytes = 4 * param_count(cells[k].arch);
    r.omega = cells[k].arch.omega;
    r.lr = cells[k].lr;
    r.steps = cells[k].steps;
    double sum = 0.0;
    int ok = 0;
    r.min_psnr = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_img; ++i) {
      const std::size_t j = k * n_img + i;
      if (diverged[j]) {
        ++r.diverged;
        continue;
      }
      sum += psnrs[j];
      r.min_psnr = std::min(r.min_psnr, psnrs[j]);
      ++ok;
    }
    r.mean_psnr = ok ? sum / ok : std::numeric_limits<double>::quiet_NaN();
    if (!ok) r.min_psnr = std::numeric_limits<double>::quiet_NaN();
    r.failed = r.diverged > 0 || (ok && r.min_psnr < opts.fail_psnr);
    t.rows.push_back(std::move(r));
  }

  std::map<std::tuple<std::string, double, long>, const SweepRow*> best;
  for (const auto& r : t.rows) {
    auto& b = best[{r.arch, r.lr, r.steps}];
    if (!b || (!std::isnan(r.mean_psnr) && (std::isnan(b->mean_psnr) || r.mean_psnr > b->mean_psnr))) b = &r;
  }
  for (auto& r : t.rows) r.best_omega = best[{r.arch, r.lr, r.steps}]->omega;
  return t;
}

}  // namespace rinr
