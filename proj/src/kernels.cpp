#include "cmelr/kernels.hpp"

#include "cmelr/errors.hpp"
#include "cmelr/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cmelr {
namespace {

constexpr double kSqrt3 = 1.7320508075688772;

inline double eval_raw(const KernelSpec& spec, const double* x, const double* y, Index d) {
  switch (spec.family) {
    case KernelFamily::Polynomial: {
      double dot = 0.0;
      for (Index k = 0; k < d; ++k) dot += x[k] * y[k];
      const double base = spec.offset + dot;
      double out = 1.0;
      for (int p = 0; p < spec.degree; ++p) out *= base;
      return out;
    }
    case KernelFamily::Matern32: {
      double sq = 0.0;
      for (Index k = 0; k < d; ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
      const double s = kSqrt3 * std::sqrt(sq) / spec.lengthscale;
      return (1.0 + s) * std::exp(-s);
    }
    case KernelFamily::Gaussian: {
      double sq = 0.0;
      for (Index k = 0; k < d; ++k) sq += (x[k] - y[k]) * (x[k] - y[k]);
      return std::exp(-0.5 * sq / (spec.lengthscale * spec.lengthscale));
    }
  }
  return 0.0;
}

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::Polynomial: return "polynomial";
    case KernelFamily::Matern32: return "matern32";
    case KernelFamily::Gaussian: return "gaussian";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "polynomial") return KernelFamily::Polynomial;
  if (name == "matern32") return KernelFamily::Matern32;
  if (name == "gaussian") return KernelFamily::Gaussian;
  throw Error(ErrorCode::InvalidInput, "unknown kernel family '" + name + "'");
}

KernelSpec KernelSpec::polynomial(int degree, double offset) {
  KernelSpec s{KernelFamily::Polynomial, degree, offset, 1.0};
  s.validate();
  return s;
}

KernelSpec KernelSpec::matern32(double lengthscale) {
  KernelSpec s{KernelFamily::Matern32, 1, 0.0, lengthscale};
  s.validate();
  return s;
}

KernelSpec KernelSpec::gaussian(double lengthscale) {
  KernelSpec s{KernelFamily::Gaussian, 1, 0.0, lengthscale};
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  if (family == KernelFamily::Polynomial) {
    if (degree < 1) throw Error(ErrorCode::InvalidInput, "polynomial degree must be >= 1");
    if (!(offset >= 0.0)) throw Error(ErrorCode::InvalidInput, "polynomial offset must be >= 0");
  } else if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw Error(ErrorCode::InvalidInput, "lengthscale must be positive and finite");
  }
}

void validate_samples(const SampleMatrix& samples) {
  if (samples.rows() < 1 || samples.cols() < 1) {
    throw Error(ErrorCode::InvalidInput, "sample matrix is empty");
  }
  if (!samples.allFinite()) throw Error(ErrorCode::InvalidInput, "sample matrix has non-finite entries");
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2) {
  if (x.size() != x2.size()) throw Error(ErrorCode::DimensionMismatch, "kernel arguments differ in dimension");
  return eval_raw(spec, x.data(), x2.data(), static_cast<Index>(x.size()));
}

KernelMatrixSource::KernelMatrixSource(KernelSpec spec, const SampleMatrix& samples)
    : spec_(spec), samples_(samples) {
  spec_.validate();
  validate_samples(samples_);
}

double KernelMatrixSource::diag(Index i) const {
  const double* xi = samples_.row(i).data();
  return eval_raw(spec_, xi, xi, samples_.cols());
}

void KernelMatrixSource::column(Index i, std::span<double> out) const {
  const Index n = samples_.rows();
  const Index d = samples_.cols();
  const double* xi = samples_.row(i).data();
  const double* base = samples_.data();
#pragma omp parallel for schedule(static) if (n >= 8192)
  for (Index j = 0; j < n; ++j) out[static_cast<std::size_t>(j)] = eval_raw(spec_, base + j * d, xi, d);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const SampleMatrix& samples) {
  return kernel_matrix(spec, samples, samples);
}

Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const SampleMatrix& a, const SampleMatrix& b) {
  if (a.cols() != b.cols()) throw Error(ErrorCode::DimensionMismatch, "sample dimensions differ");
  Eigen::MatrixXd K(a.rows(), b.rows());
  for (Index j = 0; j < b.rows(); ++j)
    for (Index i = 0; i < a.rows(); ++i) K(i, j) = eval_raw(spec, a.row(i).data(), b.row(j).data(), a.cols());
  return K;
}

double median_heuristic(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::DegenerateSample, "median heuristic needs at least two values");

  std::vector<double> points(values.begin(), values.end());
  if (static_cast<Index>(points.size()) > kMedianSubsampleSize) {
    // Partial Fisher-Yates with a fixed stream: the subsample depends only on the input size.
    const NormalStream stream(kMedianSubsampleSeed, points.size());
    for (std::size_t i = 0; i < static_cast<std::size_t>(kMedianSubsampleSize); ++i) {
      const double u = stream.uniform_pair(i).first;
      const std::size_t j = i + static_cast<std::size_t>(u * static_cast<double>(points.size() - i));
      std::swap(points[i], points[std::min(j, points.size() - 1)]);
    }
    points.resize(static_cast<std::size_t>(kMedianSubsampleSize));
  }

  const std::size_t n = points.size();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist.push_back(std::abs(points[i] - points[j]));

  // Lower median: element ceil(M/2) in 1-based sorted order.
  const std::size_t k = (dist.size() + 1) / 2 - 1;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  const double med = dist[k];
  if (!(med > 0.0)) {
    const bool all_zero = std::all_of(dist.begin(), dist.end(), [](double v) { return v == 0.0; });
    if (all_zero) throw Error(ErrorCode::DegenerateSample, "all pairwise distances are zero");
    throw Error(ErrorCode::DegenerateSample, "median pairwise distance is zero");
  }
  return med;
}

}  // namespace cmelr
