#pragma once

// Standard normal density, distribution and quantile with tail-accurate
// evaluation (erfc based).

namespace bassmt::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;

double pdf(double x);
double cdf(double x);
// 1 - cdf(x), computed without cancellation.
double sf(double x);
// Phi(hi) - Phi(lo) for lo <= hi, accurate in both tails.
double interval_mass(double lo, double hi);
double quantile(double p);

}  // namespace bassmt::normal
