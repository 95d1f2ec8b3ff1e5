#include "ntlc/geo.hpp"

#include <cmath>
#include <string>

#include "ntlc/errors.hpp"

namespace ntlc {
namespace {

constexpr double kSemiMajorM = 6378137.0;            // WGS84 a
constexpr double kFlattening = 1.0 / 298.257223563;  // WGS84 f
constexpr double kE2 = kFlattening * (2.0 - kFlattening);
constexpr double kPi = 3.14159265358979323846;

// Antiderivative of cos(phi) / (1 - e^2 sin^2 phi)^2 in sin(phi), up to the
// constant factor handled by the caller.
double band_integral(double phi_rad) {
  const double s = std::sin(phi_rad);
  const double e = std::sqrt(kE2);
  return 0.5 * (s / (1.0 - kE2 * s * s) +
                std::log((1.0 + e * s) / (1.0 - e * s)) / (2.0 * e));
}

}  // namespace

double pixel_area_wgs84(double center_lat_deg, double height_deg, double width_deg) {
  if (!(std::isfinite(center_lat_deg) && std::isfinite(height_deg) && std::isfinite(width_deg))) {
    throw DomainError("cell parameters must be finite");
  }
  if (height_deg < 0.0 || width_deg < 0.0) {
    throw DomainError("cell extents must be non-negative");
  }
  if (center_lat_deg < -90.0 || center_lat_deg > 90.0) {
    throw DomainError("cell center latitude outside [-90, 90]: " +
                      std::to_string(center_lat_deg));
  }
  const double lat_lo = center_lat_deg - height_deg / 2.0;
  const double lat_hi = center_lat_deg + height_deg / 2.0;
  if (lat_lo < -90.0 || lat_hi > 90.0) {
    throw DomainError("cell extends past a pole");
  }
  if (height_deg == 0.0 || width_deg == 0.0) return 0.0;

  const double dlam_rad = width_deg * kPi / 180.0;
  const double area_m2 = kSemiMajorM * kSemiMajorM * (1.0 - kE2) * dlam_rad *
                         (band_integral(lat_hi * kPi / 180.0) - band_integral(lat_lo * kPi / 180.0));
  return area_m2 / 1e6;
}

}  // namespace ntlc
