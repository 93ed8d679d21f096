#pragma once

// Sinusoidal positional encoding with a geometric frequency band, for
// continuous coordinates, discretized coordinates, and view directions.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqfield/grid.hpp"
#include "cqfield/math.hpp"
#include "cqfield/vec.hpp"

namespace cqfield {

struct FrequencyBand {
  int count = 0;                   // L
  std::vector<double> frequencies; // omega_l = 2^(l-1) * pi, l = 1..L

  static FrequencyBand geometric(int levels) {
    if (levels < 1) throw std::invalid_argument("FrequencyBand: L must be >= 1");
    FrequencyBand band;
    band.count = levels;
    band.frequencies.resize(std::size_t(levels));
    constexpr double kPi = 3.14159265358979323846264338327950288;
    for (int l = 1; l <= levels; ++l)
      band.frequencies[std::size_t(l - 1)] = std::ldexp(kPi, l - 1);
    return band;
  }

  // Output width for a d-dimensional input.
  int encoded_dim(int input_dim) const { return 2 * count * input_dim; }
};

using EncodedVector = std::vector<double>;

// Core kernel: writes (sin w1 x_e, cos w1 x_e, ..., sin wL x_e, cos wL x_e)
// per element e, elements concatenated. Every consumer (per-sample API,
// batched renderer, marching cubes) funnels through this one loop so the
// piecewise-constancy guarantees are bit-level.
inline void encode_into(const FrequencyBand& band, const double* x, int dim, double* out) {
  for (int e = 0; e < dim; ++e) {
    const double v = x[e];
    double* dst = out + std::size_t(e) * std::size_t(2 * band.count);
    for (int l = 0; l < band.count; ++l) {
      double s, c;
      sincos_d(band.frequencies[std::size_t(l)] * v, s, c);
      dst[2 * l] = s;
      dst[2 * l + 1] = c;
    }
  }
}

inline EncodedVector encode(const FrequencyBand& band, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("encode: non-finite input");
  EncodedVector out(std::size_t(band.encoded_dim(int(x.size()))));
  encode_into(band, x.data(), int(x.size()), out.data());
  return out;
}

inline EncodedVector encode(const FrequencyBand& band, const Vec3& v) {
  const double buf[3] = {v.x, v.y, v.z};
  return encode(band, std::span<const double>(buf, 3));
}

// Encoding of the discretized coordinate: identical for every point in
// a voxel, bit-exact, because all such points map to the same center.
inline EncodedVector encode_discrete(const FrequencyBand& band, const GridSpec& grid,
                                     const Vec3& q) {
  if (!is_finite(q)) throw std::invalid_argument("encode_discrete: non-finite input");
  return encode(band, quantize(grid, q).center);
}

// The four network-input alternatives: which coordinate is concatenated
// raw, and which coordinate feeds the positional encoding.
enum class EncodingMode {
  kContinuous,           // raw q,      PE(q)
  kDiscrete,             // raw q~,     PE(q~)
  kMixedPeContinuous,    // raw q~,     PE(q)
  kMixedCoordContinuous, // raw q,      PE(q~)
};

inline bool mode_uses_discrete_coord(EncodingMode m) {
  return m == EncodingMode::kDiscrete || m == EncodingMode::kMixedPeContinuous;
}

inline bool mode_uses_discrete_pe(EncodingMode m) {
  return m == EncodingMode::kDiscrete || m == EncodingMode::kMixedCoordContinuous;
}

inline const char* to_string(EncodingMode m) {
  switch (m) {
    case EncodingMode::kContinuous: return "continuous";
    case EncodingMode::kDiscrete: return "discrete";
    case EncodingMode::kMixedPeContinuous: return "mixed_pe_continuous";
    case EncodingMode::kMixedCoordContinuous: return "mixed_coord_continuous";
  }
  return "?";
}

inline EncodingMode parse_encoding_mode(const std::string& s) {
  if (s == "continuous") return EncodingMode::kContinuous;
  if (s == "discrete") return EncodingMode::kDiscrete;
  if (s == "mixed_pe_continuous") return EncodingMode::kMixedPeContinuous;
  if (s == "mixed_coord_continuous") return EncodingMode::kMixedCoordContinuous;
  throw std::invalid_argument("unknown encoding mode: " + s);
}

} // namespace cqfield
