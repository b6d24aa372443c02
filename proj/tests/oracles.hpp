#pragma once

#include "qvelab/types.hpp"

#include <cmath>

namespace oracle {

using qvelab::Complex;

// Stieltjes transform of the semicircle law, (-z + sqrt(z^2 - 4)) / 2 on the
// branch with Im > 0 in the upper half-plane.
inline Complex m_sc(Complex z) { return 0.5 * (-z + std::sqrt(z - 2.0) * std::sqrt(z + 2.0)); }

inline double rho_sc(double tau) { return tau * tau < 4.0 ? std::sqrt(4.0 - tau * tau) / (2.0 * qvelab::kPi) : 0.0; }

// Critical mass for the two-block model, written out independently.
inline double delta_c(double l) { return std::pow(l - 2.0, 3) / (2 * l * l * l - 3 * l * l + 15 * l - 7); }

}  // namespace oracle
