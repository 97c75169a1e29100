#pragma once

#include "cmelr/lowrank.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>

namespace cmelr {

enum class KernelFamily { Polynomial, Matern32, Gaussian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

struct KernelSpec {
  KernelFamily family = KernelFamily::Matern32;
  int degree = 4;            // polynomial only
  double offset = 1.0;       // polynomial only
  double lengthscale = 1.0;  // matern32 / gaussian only

  static KernelSpec polynomial(int degree, double offset = 1.0);
  static KernelSpec matern32(double lengthscale);
  static KernelSpec gaussian(double lengthscale);

  // Throws InvalidInput on a non-positive lengthscale or degree, or negative offset.
  void validate() const;
};

// n x d sample points, one point per row.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Throws InvalidInput if empty or if any entry is non-finite.
void validate_samples(const SampleMatrix& samples);

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2);

// Lazy Gram matrix [k(x_i, x_j)]; columns are computed on request.
class KernelMatrixSource final : public PsdMatrixSource {
 public:
  KernelMatrixSource(KernelSpec spec, const SampleMatrix& samples);

  Index dim() const override { return samples_.rows(); }
  double diag(Index i) const override;
  void column(Index i, std::span<double> out) const override;

 private:
  KernelSpec spec_;
  const SampleMatrix& samples_;
};

// Dense Gram matrix; test-scale only.
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const SampleMatrix& samples);
// Cross matrix [k(a_i, b_j)].
Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const SampleMatrix& a, const SampleMatrix& b);

// Lower median of the pairwise distances |y_i - y_j|, i < j. Above
// kMedianSubsampleSize points the median is taken over a fixed-seed subsample.
inline constexpr Eigen::Index kMedianSubsampleSize = 2000;
inline constexpr std::uint64_t kMedianSubsampleSeed = 0x6d656469616eULL;  // "median"
double median_heuristic(std::span<const double> values);

}  // namespace cmelr
