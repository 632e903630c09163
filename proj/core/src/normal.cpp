#include "bassmt/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>

namespace bassmt::normal {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
}

double pdf(double x) {
    if (!std::isfinite(x)) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

double interval_mass(double lo, double hi) {
    if (hi <= lo) return 0.0;
    if (lo >= 0.0) return sf(lo) - sf(hi);
    if (hi <= 0.0) return cdf(hi) - cdf(lo);
    return 1.0 - cdf(lo) - sf(hi);
}

double quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    // erfc_inv keeps full relative accuracy for small p.
    if (p < 0.5) return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
    return std::sqrt(2.0) * boost::math::erfc_inv(2.0 * (1.0 - p));
}

}  // namespace bassmt::normal
