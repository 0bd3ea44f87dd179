#pragma once

#include <cmath>

namespace shgl {

/// phi1(z) = (e^z - 1) / z, phi1(0) = 1.
inline double phi1(double z) {
  if (z == 0.0) return 1.0;
  return std::expm1(z) / z;
}

/// phi2(z) = (e^z - 1 - z) / z^2, phi2(0) = 1/2.
inline double phi2(double z) {
  if (std::abs(z) < 0.2) {
    double term = 0.5, sum = 0.5;
    for (int k = 1; k < 14; ++k) {
      term *= z / (k + 2);
      sum += term;
    }
    return sum;
  }
  return (std::expm1(z) - z) / (z * z);
}

}  // namespace shgl
