#pragma once

// Architecture enumeration under a byte budget, plus full-factorial
// hyperparameter sweeps (architecture x omega x learning rate x steps).

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rinr/image.hpp"
#include "rinr/inr_net.hpp"

namespace rinr {

enum class ArchShape { uniform, tapered };

ArchShape parse_shape(const std::string& name);
const char* to_string(ArchShape shape);

struct EnumerateOptions {
  /// Depth counts weight matrices, so depth 3 has two hidden layers.
  int min_depth = 2;
  int max_depth = 12;
  int max_width = 256;
  /// Tapered nets: the outermost hidden layers get this fraction of the peak
  /// width, rising linearly to the peak at the middle.
  double taper_floor = 0.5;
  double omega = 30.0;
};

/// Dense f32 storage of weights + biases.
inline std::size_t dense_bytes(const Architecture& arch) { return 4 * param_count(arch); }

struct Enumeration {
  std::vector<Architecture> archs;
  /// One line per emitted architecture deeper than 10 layers.
  std::vector<std::string> warnings;
};

/// For each depth, the widest architecture of the given shape whose dense_bytes
/// fits in `budget_bytes`. Depths where even width 1 does not fit are skipped.
Enumeration enumerate(std::size_t budget_bytes, ArchShape shape, const EnumerateOptions& opts = {});

/// Hidden widths of a tapered net with `hidden` layers peaking at `peak`.
std::vector<int> tapered_widths(int hidden, int peak, double floor);

struct SweepAxes {
  std::vector<Architecture> archs;
  std::vector<double> omegas;
  std::vector<double> lrs;
  std::vector<long> steps;
};

struct SweepOptions {
  std::uint64_t seed = 0;
  int jobs = 1;
  /// A cell fails when any image diverges or reconstructs below this PSNR.
  double fail_psnr = 15.0;
};

struct SweepRow {
  std::size_t cell = 0;
  std::string arch;
  std::size_t bytes = 0;
  double omega = 0.0;
  double lr = 0.0;
  long steps = 0;
  /// Mean over images that did not diverge; NaN if all diverged.
  double mean_psnr = 0.0;
  double min_psnr = 0.0;
  int diverged = 0;
  bool failed = false;
  /// Omega with the highest mean PSNR among rows sharing (arch, lr, steps).
  double best_omega = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;

  /// Row with the highest mean PSNR.
  const SweepRow& best() const;
  std::string to_csv() const;
};

/// Runs round-1 fitting for every cell of the full factorial over every
/// image. Image i uses the same seed in every cell. Rows are ordered by cell
/// index (arch-major, then omega, lr, steps).
SweepTable sweep(const std::vector<ImageBuffer>& images, const SweepAxes& axes,
                 const SweepOptions& opts = {});

}  // namespace rinr
