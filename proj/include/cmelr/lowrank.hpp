#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace cmelr {

using Index = Eigen::Index;

// On-demand access to a symmetric positive semidefinite matrix. Factorizations
// only ever touch the diagonal and individual columns, so the full matrix is
// never assembled.
class PsdMatrixSource {
 public:
  virtual ~PsdMatrixSource() = default;

  virtual Index dim() const = 0;
  virtual double diag(Index i) const = 0;
  // Writes K * e_i into `out` (length dim()).
  virtual void column(Index i, std::span<double> out) const = 0;
};

// Adapter over an explicitly stored matrix; used by tests and small problems.
class DenseMatrixSource final : public PsdMatrixSource {
 public:
  explicit DenseMatrixSource(Eigen::MatrixXd matrix);

  Index dim() const override { return matrix_.rows(); }
  double diag(Index i) const override { return matrix_(i, i); }
  void column(Index i, std::span<double> out) const override;

  const Eigen::MatrixXd& matrix() const { return matrix_; }

 private:
  Eigen::MatrixXd matrix_;
};

// Output of the pivoted Cholesky factorization K ~ L L^T.
//
// The biorthogonal basis B (B^T L = I, K B = L) only has nonzero rows at the
// pivot indices; it is stored compressed as the m x m block of those rows,
// ordered like `pivots`.
struct LowRankFactors {
  Eigen::MatrixXd L;             // n x m
  Eigen::MatrixXd B_pivot_rows;  // m x m, row j is row pivots[j] of B
  std::vector<Index> pivots;     // 0-based, distinct
  double residual_trace = 0.0;   // trace(K - L L^T) at termination
  double tolerance = 0.0;
  double trace = 0.0;            // trace(K)

  Index n() const { return L.rows(); }
  Index rank() const { return L.cols(); }
  // Expands B to its n x m form.
  Eigen::MatrixXd dense_B() const;
};

// Double-orthogonal basis Q = B V with V Lambda V^T = L^T L.
struct SpectralBasis {
  Eigen::MatrixXd V;             // m x m orthogonal
  Eigen::VectorXd eigenvalues;   // descending, >= 0
  Eigen::MatrixXd Q_pivot_rows;  // m x m, rows of Q at the pivot indices

  Index rank() const { return V.cols(); }
};

struct PivotedCholeskyOptions {
  double tolerance = 0.0;
  std::optional<Index> max_rank;
};

// Greedy pivoted Cholesky; B is recovered from the pivot rows of L at the end.
// Pivots on the largest remaining Schur-complement diagonal (smallest index on
// ties) until the remaining trace is <= tolerance or max_rank is reached.
// Throws NonPsdInput, InvalidTolerance, InvalidInput.
LowRankFactors pivoted_cholesky(const PsdMatrixSource& source, const PivotedCholeskyOptions& options);

inline LowRankFactors pivoted_cholesky(const PsdMatrixSource& source, double tolerance,
                                       std::optional<Index> max_rank = std::nullopt) {
  return pivoted_cholesky(source, PivotedCholeskyOptions{tolerance, max_rank});
}

// Eigendecomposition of L^T L, eigenvalues descending and each eigenvector
// signed so that its largest-magnitude component is positive.
SpectralBasis spectral_rotation(const LowRankFactors& factors);

// Q as a dense n x m matrix (zero outside the pivot rows).
Eigen::MatrixXd dense_Q(const LowRankFactors& factors, const SpectralBasis& basis);

}  // namespace cmelr
