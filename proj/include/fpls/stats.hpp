#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fpls {

double mean(const Eigen::VectorXd& values);

// n-1 denominator throughout. Length >= 2 required.
double sample_variance(const Eigen::VectorXd& values);
double sample_sd(const Eigen::VectorXd& values);
double sample_covariance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Quantile with linear interpolation between closest ranks (the "type 7"
// estimator): position h = (n-1)p, value v[floor(h)] + frac(h) * delta.
// `sorted` must be ascending; prob in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double prob);

// Convenience wrapper that copies and sorts.
double quantile(std::vector<double> values, double prob);

// Inverse standard normal CDF. Rational approximation polished with one
// Halley step against erfc, accurate to ~1e-15 over (0, 1).
double normal_quantile(double p);

// Standard normal CDF and density.
double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace fpls
