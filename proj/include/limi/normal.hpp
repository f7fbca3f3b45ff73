#pragma once

namespace limi {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1). Returns -inf / +inf at 0 / 1.
double normal_quantile(double p);

}  // namespace limi
