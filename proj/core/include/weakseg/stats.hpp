#ifndef WEAKSEG_STATS_HPP
#define WEAKSEG_STATS_HPP

#include <vector>

namespace weakseg {

// Regularized incomplete beta function I_x(a, b), evaluated with the
// continued-fraction expansion (modified Lentz iteration). Accurate to ~1e-10
// for the (a, b) ranges used by the t-distribution.
double regularized_incomplete_beta(double a, double b, double x);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
};

// Two-sided paired t-test: t = mean(d) / (sd(d)/sqrt(n)) with n-1 degrees of
// freedom, p via p = I_{nu/(nu+t^2)}(nu/2, 1/2). Zero-variance differences use
// the degenerate convention p = 1 when the mean difference is 0, else p = 0.
// Throws std::invalid_argument on length mismatch or n < 2.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

} // namespace weakseg

#endif
