#pragma once

namespace ntlc {

/// Area in km^2 of a geographic grid cell on the WGS84 ellipsoid.
///
/// The cell is centered at center_lat_deg and spans height_deg of latitude
/// and width_deg of longitude. Uses the closed-form zone-band expression
/// (difference of band areas obtained by integrating the ellipsoidal area
/// element in latitude), which is exact up to floating-point rounding.
///
/// Throws DomainError when the cell extends past a pole, the latitude is
/// outside [-90, 90], or an extent is negative. Zero extent yields zero area.
double pixel_area_wgs84(double center_lat_deg, double height_deg, double width_deg);

}  // namespace ntlc
