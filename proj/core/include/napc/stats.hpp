#pragma once

namespace napc::stats {

// Student-t machinery for the equivalence test. The regularized incomplete
// beta function I_x(a, b) is evaluated with the standard continued-fraction
// expansion (modified Lentz); quantiles invert the CDF by bisection. Verified
// against published t-table values in the test suite.

double regularized_incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

/// Inverse CDF; p in (0, 1), dof >= 1.
double student_t_quantile(double p, double dof);

}  // namespace napc::stats
