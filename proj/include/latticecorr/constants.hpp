#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace latticecorr::constants {

// SI values. The effective length uses the unreduced Planck constant.
inline constexpr double planck_h = 6.62607015e-34;  // J s (exact, SI 2019)
inline constexpr double standard_gravity = 9.80665;  // m s^-2
inline constexpr double pi = 3.14159265358979323846;

struct Species {
  std::string_view name;
  double mass;  // kg
};

// Atomic masses in kg.
inline constexpr std::array<Species, 5> species_table{{
    {"cesium", 2.2069e-25},     // 133Cs
    {"rubidium87", 1.4432e-25},   // 87Rb
    {"sodium", 3.8175e-26},     // 23Na
    {"neon", 3.3198e-26},       // 20Ne (metastable)
    {"helium", 6.6465e-27},     // 4He (metastable)
}};

inline std::optional<double> species_mass(std::string_view name) {
  for (const auto& s : species_table) {
    if (s.name == name) return s.mass;
  }
  return std::nullopt;
}

}  // namespace latticecorr::constants
