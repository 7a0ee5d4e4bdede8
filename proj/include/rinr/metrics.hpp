#pragma once

#include "rinr/image.hpp"

namespace rinr {

struct PsnrReport {
  double mse = 0.0;
  /// +infinity when mse == 0.
  double psnr_db = 0.0;

  bool exact() const;
};

/// Where PSNR is measured: on the normalized floats, or after both images
/// went through the 8-bit conversion used for files.
enum class PsnrDomain { normalized, eight_bit };

/// MSE over all H*W*3 values, PSNR with peak 1.0.
/// Throws InvalidInput when the dimensions differ.
PsnrReport psnr(const ImageBuffer& a, const ImageBuffer& b,
                PsnrDomain domain = PsnrDomain::normalized);

/// 10 log10(1 / mse); +infinity for mse == 0.
double psnr_from_mse(double mse);

}  // namespace rinr
