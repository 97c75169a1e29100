#pragma once

#include "cmelr/kernels.hpp"
#include "cmelr/lowrank.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cmelr {

// Full-rank conditional mean embedding, F = (K_X + n lambda I)^{-1}. Dense and
// cubic in n; kept as a reference for the low-rank operator.
struct FullCmeOperator {
  Eigen::MatrixXd F;
  SampleMatrix x_train;
  SampleMatrix y_train;
  KernelSpec kernel_x;
  double lambda = 0.0;
};

inline constexpr Index kFullCmeMaxSamples = 5000;

FullCmeOperator fit_full_cme(const SampleMatrix& x_train, const SampleMatrix& y_train,
                             const KernelSpec& kernel_x, double lambda);

// [f(y_1) ... f(y_n)] F Phi_X(x)^T for every query row.
Eigen::VectorXd apply_full_cme(const FullCmeOperator& op, std::span<const double> f_values,
                               const SampleMatrix& queries);

// How the Cholesky tolerance epsilon is turned into a bound on trace(K - L L^T).
enum class TolerancePolicy {
  Absolute,         // trace(K - L L^T) <= epsilon
  RelativeToTrace,  // trace(K - L L^T) <= epsilon * trace(K)
};

std::string to_string(TolerancePolicy policy);
TolerancePolicy tolerance_policy_from_string(const std::string& name);

struct CmeOptions {
  double lambda = 0.0;
  double epsilon = 1e-5;
  TolerancePolicy policy = TolerancePolicy::RelativeToTrace;
  std::optional<Index> max_rank;
};

// Low-rank operator f -> f^T Q_Y F~ Q_X^T Phi_X(x).
//
// Q_X and Q_Y are only nonzero at their pivot rows and are stored as those
// rows. Evaluation needs k_X at the m_X pivot states only.
struct CmeOperator {
  Eigen::MatrixXd q_x;      // m_X x m_X
  Eigen::MatrixXd q_y;      // m_Y x m_Y
  Eigen::MatrixXd f_tilde;  // m_Y x m_X
  Eigen::VectorXd lambda_x; // eigenvalues of L_X^T L_X, descending
  Eigen::VectorXd lambda_y;
  SampleMatrix pivot_states_x;  // m_X x d
  std::vector<Index> pivot_indices_x;
  std::vector<Index> pivot_indices_y;
  KernelSpec kernel_x;
  KernelSpec kernel_y;
  double lambda = 0.0;
  double epsilon = 0.0;
  TolerancePolicy policy = TolerancePolicy::RelativeToTrace;
  Index n = 0;

  // Training diagnostics.
  double trace_kx = 0.0;
  double trace_ky = 0.0;
  double tolerance_x = 0.0;  // effective absolute trace bounds
  double tolerance_y = 0.0;
  double residual_trace_x = 0.0;
  double residual_trace_y = 0.0;
  double max_diag_kx = 0.0;

  // Q_X F~^T Q_Y^T (m_X x m_Y): maps f at the Y pivots to weights on the X pivots.
  Eigen::MatrixXd fold;

  Index rank_x() const { return f_tilde.cols(); }
  Index rank_y() const { return f_tilde.rows(); }
  Index state_dim() const { return pivot_states_x.cols(); }
};

// Operator together with the factorizations it was built from.
struct CmeFit {
  CmeOperator op;
  LowRankFactors factors_x;
  LowRankFactors factors_y;
  SpectralBasis basis_x;
  SpectralBasis basis_y;
};

CmeFit fit_lowrank_cme_detailed(const SampleMatrix& x_train, const SampleMatrix& y_train,
                                const KernelSpec& kernel_x, const KernelSpec& kernel_y,
                                const CmeOptions& options);

CmeOperator fit_lowrank_cme(const SampleMatrix& x_train, const SampleMatrix& y_train,
                            const KernelSpec& kernel_x, const KernelSpec& kernel_y, double lambda,
                            double epsilon, TolerancePolicy policy = TolerancePolicy::RelativeToTrace);

// F~ = (L_Y V_Y)^T (L_X V_X) (Lambda_X + n lambda I)^{-1}.
Eigen::MatrixXd lowrank_coefficients(const LowRankFactors& fx, const SpectralBasis& bx,
                                     const LowRankFactors& fy, const SpectralBasis& by, double lambda);

// Weights w (length m_X) such that the prediction at x is sum_k w_k k_X(x_{p_k}, x).
Eigen::VectorXd fold_values(const CmeOperator& op, std::span<const double> f_values);

// Continuation-value style evaluation; OpenMP-parallel over query blocks.
Eigen::VectorXd apply_cme(const CmeOperator& op, std::span<const double> f_values,
                          const SampleMatrix& queries);
// Same as apply_cme but writes into `out` and takes already folded weights.
void evaluate_weights(const CmeOperator& op, const Eigen::VectorXd& weights, const SampleMatrix& queries,
                      std::span<double> out);

namespace serial {
Eigen::VectorXd apply_cme(const CmeOperator& op, std::span<const double> f_values,
                          const SampleMatrix& queries);
}  // namespace serial

inline constexpr Index kQueryBlockSize = 4096;

// Coefficients of the H-orthogonal projection of the full-rank estimator onto
// the low-rank tensor space: (L_Y V_Y)^T F L_X V_X.
Eigen::MatrixXd project_full_to_lowrank(const FullCmeOperator& full, const LowRankFactors& fx,
                                        const SpectralBasis& bx, const LowRankFactors& fy,
                                        const SpectralBasis& by);

// n x n coefficient matrix Q_Y C Q_X^T of a low-rank estimator in the canonical
// feature basis, for any m_Y x m_X coefficient block C.
Eigen::MatrixXd expand_coefficients(const Eigen::MatrixXd& coeffs, const LowRankFactors& fx,
                                    const SpectralBasis& bx, const LowRankFactors& fy,
                                    const SpectralBasis& by);

// ||Phi_Y (A - B) Phi_X^T||_H^2 = trace((A-B)^T K_Y (A-B) K_X).
double hnorm_sq_difference(const Eigen::MatrixXd& a_coeffs, const Eigen::MatrixXd& b_coeffs,
                           const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky);

struct LowRankErrorBound {
  double delta_lr = 0.0;
  double epsilon = 0.0;
  double lambda = 0.0;
  double n = 0.0;
  double trace_kx = 0.0;
  double trace_ky = 0.0;
  double frob_f_sq = 0.0;
  bool frob_is_upper_estimate = false;
};

// delta = eps ||F||_F^2 (tr K_X + tr K_Y) + eps^2 / (n lambda)^4 tr K_X tr K_Y.
LowRankErrorBound lowrank_error_bound(double epsilon, double lambda, double n, double trace_kx,
                                      double trace_ky, double frob_f_sq);

// Persistence for running the offline and online phases in separate processes.
std::string operator_to_json(const CmeOperator& op);
CmeOperator operator_from_json(const std::string& text);
void save_operator(const CmeOperator& op, const std::filesystem::path& path);
CmeOperator load_operator(const std::filesystem::path& path);

}  // namespace cmelr
