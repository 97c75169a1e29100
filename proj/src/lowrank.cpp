#include "cmelr/lowrank.hpp"

#include "cmelr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmelr {
namespace {

// Relative size (w.r.t. trace(K)) below which a Schur diagonal entry is
// numerically zero, and the largest negative excursion still put down to roundoff.
constexpr double kZeroRelTol = 1e-14;
constexpr double kNegativeRelTol = 1e-12;

}  // namespace

DenseMatrixSource::DenseMatrixSource(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "dense source must be square");
  }
}

void DenseMatrixSource::column(Index i, std::span<double> out) const {
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Index>(out.size())) = matrix_.col(i);
}

Eigen::MatrixXd LowRankFactors::dense_B() const {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n(), rank());
  for (Index j = 0; j < rank(); ++j) B.row(pivots[j]) = B_pivot_rows.row(j);
  return B;
}

LowRankFactors pivoted_cholesky(const PsdMatrixSource& source, const PivotedCholeskyOptions& options) {
  const double tol = options.tolerance;
  if (!(tol >= 0.0) || !std::isfinite(tol)) {
    throw Error(ErrorCode::InvalidTolerance, "tolerance must be finite and >= 0");
  }
  const Index n = source.dim();
  if (n < 1) throw Error(ErrorCode::InvalidInput, "matrix dimension must be positive");
  const Index max_rank = options.max_rank.value_or(n);
  if (max_rank < 1 || max_rank > n) {
    throw Error(ErrorCode::InvalidInput, "max_rank must lie in [1, n]");
  }

  Eigen::VectorXd d(n);
  for (Index i = 0; i < n; ++i) {
    d[i] = source.diag(i);
    if (!std::isfinite(d[i])) throw Error(ErrorCode::InvalidInput, "non-finite diagonal entry");
  }
  const double trace = d.sum();
  const double negative_floor = -kNegativeRelTol * std::abs(trace);
  const double zero_level = kZeroRelTol * std::abs(trace);

  auto clean = [&](Index i) {
    if (d[i] < negative_floor) {
      throw Error(ErrorCode::NonPsdInput,
                  "Schur complement diagonal " + std::to_string(d[i]) + " at index " +
                      std::to_string(i));
    }
    if (d[i] <= zero_level) d[i] = 0.0;
  };
  for (Index i = 0; i < n; ++i) clean(i);

  Index capacity = std::min<Index>(max_rank, 32);
  Eigen::MatrixXd L(n, capacity);
  std::vector<Index> pivots;
  Eigen::VectorXd col(n);
  Eigen::VectorXd pivot_row;

  double err = d.sum();
  Index m = 0;
  while (err > tol && m < max_rank) {
    Index p = 0;
    const double dp = d.maxCoeff(&p);  // first maximum wins ties
    if (dp <= 0.0) break;

    if (m == capacity) {
      capacity = std::min<Index>(max_rank, 2 * capacity);
      L.conservativeResize(Eigen::NoChange, capacity);
    }

    source.column(p, std::span<double>(col.data(), static_cast<std::size_t>(n)));
    const double scale = 1.0 / std::sqrt(dp);
    pivot_row = L.row(p).head(m).transpose();
    if (m > 0) col.noalias() -= L.leftCols(m) * pivot_row;
    L.col(m) = col * scale;
    // Exact values at pivot rows; the computed ones are cancellation noise.
    for (Index q : pivots) L(q, m) = 0.0;
    L(p, m) = dp * scale;
    pivots.push_back(p);

    d -= L.col(m).cwiseAbs2();
    d[p] = 0.0;
    for (Index i = 0; i < n; ++i) clean(i);
    err = d.sum();
    ++m;
  }

  LowRankFactors out;
  out.L = L.leftCols(m);
  out.pivots = std::move(pivots);
  // B's pivot block is L_p^{-T}, L_p being the lower-triangular pivot rows of L.
  Eigen::MatrixXd lp(m, m);
  for (Index j = 0; j < m; ++j) lp.row(j) = out.L.row(out.pivots[j]);
  out.B_pivot_rows = Eigen::MatrixXd::Identity(m, m);
  lp.triangularView<Eigen::Lower>().transpose().solveInPlace(out.B_pivot_rows);
  out.residual_trace = err;
  out.tolerance = tol;
  out.trace = trace;
  return out;
}

SpectralBasis spectral_rotation(const LowRankFactors& factors) {
  const Index m = factors.rank();
  if (m < 1) throw Error(ErrorCode::InvalidInput, "spectral rotation needs rank >= 1");

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m, m);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(factors.L.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::SingularSystem, "symmetric eigensolver failed");
  }

  SpectralBasis basis;
  basis.V.resize(m, m);
  basis.eigenvalues.resize(m);
  for (Index j = 0; j < m; ++j) {
    const Index src = m - 1 - j;  // Eigen sorts ascending
    basis.eigenvalues[j] = std::max(solver.eigenvalues()[src], 0.0);
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    basis.V.col(j) = v;
  }
  basis.Q_pivot_rows = factors.B_pivot_rows * basis.V;
  return basis;
}

Eigen::MatrixXd dense_Q(const LowRankFactors& factors, const SpectralBasis& basis) {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(factors.n(), basis.rank());
  for (Index j = 0; j < basis.rank(); ++j) Q.row(factors.pivots[j]) = basis.Q_pivot_rows.row(j);
  return Q;
}

}  // namespace cmelr
