#include "rinr/metrics.hpp"

#include <cmath>
#include <limits>

#include "rinr/error.hpp"

namespace rinr {

bool PsnrReport::exact() const { return std::isinf(psnr_db) && psnr_db > 0; }

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

PsnrReport psnr(const ImageBuffer& a, const ImageBuffer& b, PsnrDomain domain) {
  if (a.height != b.height || a.width != b.width || a.pixels.size() != b.pixels.size())
    throw InvalidInput("psnr: image dimensions differ");
  if (a.pixels.empty()) throw InvalidInput("psnr: empty image");
  if (domain == PsnrDomain::eight_bit) return psnr(a.quantized_u8(), b.quantized_u8());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    sum += d * d;
  }
  PsnrReport r;
  r.mse = sum / static_cast<double>(a.pixels.size());
  r.psnr_db = psnr_from_mse(r.mse);
  return r;
}

}  // namespace rinr
