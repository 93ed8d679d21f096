#pragma once

// Scalar math kernels shared by the per-sample and batched paths.
//
// The float variants are branch-free polynomial implementations (Cephes
// and fdlibm coefficient sets) so that activation and encoding loops
// autovectorize; the double variants defer to libm. Each precision is
// self-consistent: a given instantiation always evaluates the same
// function the same way, which is what the bit-reproducibility
// guarantees are stated over.

#include <bit>
#include <cmath>
#include <cstdint>

namespace cqfield {

namespace detail {

// Round-to-nearest-even without a libm call; valid for |x| < 2^22.
inline float round_magic(float x) {
  constexpr float kMagic = 12582912.0f; // 1.5 * 2^23
  const float t = x + kMagic;
  return t - kMagic;
}

inline double round_magic(double x) {
  constexpr double kMagic = 6755399441055744.0; // 1.5 * 2^52
  const double t = x + kMagic;
  return t - kMagic;
}

inline float ldexp_fast(float x, std::int32_t n) {
  return x * std::bit_cast<float>(std::uint32_t(n + 127) << 23);
}

} // namespace detail

// exp(x) for float, ~2 ulp, defined on the full range (clamps to the
// finite result at the ends instead of returning inf).
inline float fast_expf(float x) {
  constexpr float kMax = 88.02f, kMin = -87.33f;
  x = x > kMax ? kMax : (x < kMin ? kMin : x);
  const float z = detail::round_magic(x * 1.44269504088896341f);
  float r = x - z * 0.693359375f;
  r += z * 2.12194440e-4f;
  const float r2 = r * r;
  float p = 1.9875691500e-4f;
  p = p * r + 1.3981999507e-3f;
  p = p * r + 8.3334519073e-3f;
  p = p * r + 4.1665795894e-2f;
  p = p * r + 1.6666665459e-1f;
  p = p * r + 5.0000001201e-1f;
  const float e = r2 * p + r + 1.0f;
  return detail::ldexp_fast(e, std::int32_t(z));
}

// log(1 + u) for u in [0, 1]; atanh series on the narrow range.
inline float fast_log1pf_unit(float u) {
  const float s = u / (2.0f + u);
  const float s2 = s * s;
  float p = 1.0f / 11.0f;
  p = p * s2 + 1.0f / 9.0f;
  p = p * s2 + 1.0f / 7.0f;
  p = p * s2 + 1.0f / 5.0f;
  p = p * s2 + 1.0f / 3.0f;
  p = p * s2 + 1.0f;
  return 2.0f * s * p;
}

template <class Real>
inline Real fexp(Real x) {
  if constexpr (sizeof(Real) == 4) {
    return fast_expf(x);
  } else {
    return std::exp(x);
  }
}

// softplus(x) = log(1 + e^x) and its derivative sigmoid(x), computed
// from a single exponential. Both outputs are needed by the training
// path (value forward, derivative backward).
template <class Real>
inline void softplus_sigmoid(Real x, Real& value, Real& deriv) {
  const Real nax = x < Real(0) ? x : -x; // -|x|
  const Real e = fexp(nax);              // in (0, 1]
  Real l1p;
  if constexpr (sizeof(Real) == 4) {
    l1p = fast_log1pf_unit(e);
  } else {
    l1p = std::log1p(e);
  }
  value = (x > Real(0) ? x : Real(0)) + l1p;
  const Real denom = Real(1) + e;
  deriv = x >= Real(0) ? Real(1) / denom : e / denom;
}

template <class Real>
inline Real softplus(Real x) {
  Real v, d;
  softplus_sigmoid(x, v, d);
  return v;
}

template <class Real>
inline Real sigmoid(Real x) {
  const Real e = fexp(x < Real(0) ? x : -x);
  return x >= Real(0) ? Real(1) / (Real(1) + e) : e / (Real(1) + e);
}

// sin and cos of a double argument, |x| <= 1e5 on the fast path.
// fdlibm kernel polynomials after Cody-Waite reduction by pi/2.
inline void sincos_d(double x, double& s_out, double& c_out) {
  constexpr double kInvPio2 = 6.36619772367581382433e-01;
  constexpr double kPio2Hi = 1.57079632673412561417e+00;
  constexpr double kPio2Lo = 6.07710050650619224932e-11;

  if (!(x > -1e5 && x < 1e5)) { // huge or non-finite: defer to libm
    s_out = std::sin(x);
    c_out = std::cos(x);
    return;
  }

  const double fn = detail::round_magic(x * kInvPio2);
  double r = x - fn * kPio2Hi;
  r -= fn * kPio2Lo;
  const int quadrant = int(std::int64_t(fn)) & 3;

  const double z = r * r;
  // sin kernel
  double sp = 1.58969099521155010221e-10;
  sp = sp * z + -2.50507602534068634195e-08;
  sp = sp * z + 2.75573137070700676789e-06;
  sp = sp * z + -1.98412698298579493134e-04;
  sp = sp * z + 8.33333333332248946124e-03;
  sp = sp * z + -1.66666666666666324348e-01;
  const double ks = r + r * z * sp;
  // cos kernel
  double cp = -1.13596475577881948265e-11;
  cp = cp * z + 2.08757232129817482790e-09;
  cp = cp * z + -2.75573143513906633035e-07;
  cp = cp * z + 2.48015872894767294178e-05;
  cp = cp * z + -1.38888888888741095749e-03;
  cp = cp * z + 4.16666666666666019037e-02;
  const double kc = 1.0 - 0.5 * z + z * z * cp;

  switch (quadrant) {
    case 0: s_out = ks;  c_out = kc;  break;
    case 1: s_out = kc;  c_out = -ks; break;
    case 2: s_out = -ks; c_out = -kc; break;
    default: s_out = -kc; c_out = ks; break;
  }
}

inline double clamp(double v, double lo, double hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

} // namespace cqfield
