#include "cmelr/cme.hpp"

#include "cmelr/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cmelr {
namespace {

using nlohmann::json;

void check_training_pair(const SampleMatrix& x, const SampleMatrix& y) {
  validate_samples(x);
  validate_samples(y);
  if (x.rows() != y.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "x and y training sets differ in size");
  }
}

void check_f_values(std::span<const double> f_values, Index n) {
  if (static_cast<Index>(f_values.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "function values must have one entry per training sample");
  }
}

double trace_of(const PsdMatrixSource& source) {
  double t = 0.0;
  for (Index i = 0; i < source.dim(); ++i) t += source.diag(i);
  return t;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  Eigen::MatrixXd m(rows, cols);
  const json& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows) throw Error(ErrorCode::IoError, "matrix row count mismatch");
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(data[i].size()) != cols) throw Error(ErrorCode::IoError, "matrix column count mismatch");
    for (Index k = 0; k < cols; ++k) m(i, k) = data[i][k].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size()));
}

json kernel_to_json(const KernelSpec& k) {
  return json{{"family", to_string(k.family)}, {"degree", k.degree}, {"offset", k.offset},
              {"lengthscale", k.lengthscale}};
}

KernelSpec kernel_from_json(const json& j) {
  KernelSpec k;
  k.family = kernel_family_from_string(j.at("family").get<std::string>());
  k.degree = j.at("degree").get<int>();
  k.offset = j.at("offset").get<double>();
  k.lengthscale = j.at("lengthscale").get<double>();
  k.validate();
  return k;
}

}  // namespace

FullCmeOperator fit_full_cme(const SampleMatrix& x_train, const SampleMatrix& y_train,
                             const KernelSpec& kernel_x, double lambda) {
  check_training_pair(x_train, y_train);
  kernel_x.validate();
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda must be positive");
  const Index n = x_train.rows();
  if (n > kFullCmeMaxSamples) throw Error(ErrorCode::InvalidInput, "full-rank operator is capped at 5000 samples");

  Eigen::MatrixXd system = kernel_matrix(kernel_x, x_train);
  system.diagonal().array() += static_cast<double>(n) * lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw Error(ErrorCode::SingularSystem, "K_X + n lambda I is not positive definite");

  FullCmeOperator op;
  op.F = llt.solve(Eigen::MatrixXd::Identity(n, n));
  op.F = 0.5 * (op.F + op.F.transpose()).eval();
  op.x_train = x_train;
  op.y_train = y_train;
  op.kernel_x = kernel_x;
  op.lambda = lambda;
  return op;
}

Eigen::VectorXd apply_full_cme(const FullCmeOperator& op, std::span<const double> f_values,
                               const SampleMatrix& queries) {
  const Index n = op.F.rows();
  check_f_values(f_values, n);
  if (queries.cols() != op.x_train.cols()) throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
  const Eigen::VectorXd weights = op.F * Eigen::Map<const Eigen::VectorXd>(f_values.data(), n);
  return kernel_matrix(op.kernel_x, queries, op.x_train) * weights;
}

std::string to_string(TolerancePolicy policy) {
  return policy == TolerancePolicy::Absolute ? "absolute" : "relative";
}

TolerancePolicy tolerance_policy_from_string(const std::string& name) {
  if (name == "absolute") return TolerancePolicy::Absolute;
  if (name == "relative") return TolerancePolicy::RelativeToTrace;
  throw Error(ErrorCode::InvalidInput, "unknown tolerance policy '" + name + "'");
}

Eigen::MatrixXd lowrank_coefficients(const LowRankFactors& fx, const SpectralBasis& bx,
                                     const LowRankFactors& fy, const SpectralBasis& by, double lambda) {
  if (fx.n() != fy.n()) throw Error(ErrorCode::DimensionMismatch, "factorizations differ in n");
  const double n_lambda = static_cast<double>(fx.n()) * lambda;
  const Eigen::MatrixXd cross = fy.L.transpose() * fx.L;
  Eigen::MatrixXd coeffs = by.V.transpose() * cross * bx.V;
  const Eigen::VectorXd inv = (bx.eigenvalues.array() + n_lambda).inverse();
  return coeffs * inv.asDiagonal();
}

CmeFit fit_lowrank_cme_detailed(const SampleMatrix& x_train, const SampleMatrix& y_train,
                                const KernelSpec& kernel_x, const KernelSpec& kernel_y,
                                const CmeOptions& options) {
  check_training_pair(x_train, y_train);
  if (!(options.lambda > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda must be positive");
  if (!(options.epsilon >= 0.0) || !std::isfinite(options.epsilon)) {
    throw Error(ErrorCode::InvalidTolerance, "epsilon must be finite and >= 0");
  }

  const KernelMatrixSource source_x(kernel_x, x_train);
  const KernelMatrixSource source_y(kernel_y, y_train);
  const double trace_x = trace_of(source_x);
  const double trace_y = trace_of(source_y);
  const bool relative = options.policy == TolerancePolicy::RelativeToTrace;
  const double tol_x = relative ? options.epsilon * trace_x : options.epsilon;
  const double tol_y = relative ? options.epsilon * trace_y : options.epsilon;

  CmeFit fit;
  fit.factors_x = pivoted_cholesky(source_x, {tol_x, options.max_rank});
  fit.factors_y = pivoted_cholesky(source_y, {tol_y, options.max_rank});
  if (fit.factors_x.rank() == 0 || fit.factors_y.rank() == 0) {
    throw Error(ErrorCode::DegenerateSample, "tolerance exceeds the kernel trace; rank would be zero");
  }
  fit.basis_x = spectral_rotation(fit.factors_x);
  fit.basis_y = spectral_rotation(fit.factors_y);

  CmeOperator& op = fit.op;
  op.q_x = fit.basis_x.Q_pivot_rows;
  op.q_y = fit.basis_y.Q_pivot_rows;
  op.f_tilde = lowrank_coefficients(fit.factors_x, fit.basis_x, fit.factors_y, fit.basis_y, options.lambda);
  op.lambda_x = fit.basis_x.eigenvalues;
  op.lambda_y = fit.basis_y.eigenvalues;
  op.pivot_indices_x = fit.factors_x.pivots;
  op.pivot_indices_y = fit.factors_y.pivots;
  op.pivot_states_x.resize(fit.factors_x.rank(), x_train.cols());
  for (Index j = 0; j < fit.factors_x.rank(); ++j) op.pivot_states_x.row(j) = x_train.row(op.pivot_indices_x[j]);
  op.kernel_x = kernel_x;
  op.kernel_y = kernel_y;
  op.lambda = options.lambda;
  op.epsilon = options.epsilon;
  op.policy = options.policy;
  op.n = x_train.rows();
  op.trace_kx = trace_x;
  op.trace_ky = trace_y;
  op.tolerance_x = tol_x;
  op.tolerance_y = tol_y;
  op.residual_trace_x = fit.factors_x.residual_trace;
  op.residual_trace_y = fit.factors_y.residual_trace;
  op.max_diag_kx = 0.0;
  for (Index i = 0; i < source_x.dim(); ++i) op.max_diag_kx = std::max(op.max_diag_kx, source_x.diag(i));
  op.fold = op.q_x * op.f_tilde.transpose() * op.q_y.transpose();
  return fit;
}

CmeOperator fit_lowrank_cme(const SampleMatrix& x_train, const SampleMatrix& y_train,
                            const KernelSpec& kernel_x, const KernelSpec& kernel_y, double lambda,
                            double epsilon, TolerancePolicy policy) {
  return fit_lowrank_cme_detailed(x_train, y_train, kernel_x, kernel_y, {lambda, epsilon, policy, std::nullopt}).op;
}

Eigen::VectorXd fold_values(const CmeOperator& op, std::span<const double> f_values) {
  check_f_values(f_values, op.n);
  Eigen::VectorXd at_pivots(op.rank_y());
  for (Index j = 0; j < op.rank_y(); ++j) at_pivots[j] = f_values[static_cast<std::size_t>(op.pivot_indices_y[j])];
  return op.fold * at_pivots;
}

void evaluate_weights(const CmeOperator& op, const Eigen::VectorXd& weights, const SampleMatrix& queries,
                      std::span<double> out) {
  if (queries.cols() != op.state_dim()) throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
  if (static_cast<Index>(out.size()) != queries.rows()) throw Error(ErrorCode::DimensionMismatch, "output size mismatch");
  const Index q = queries.rows();
  const Index m = op.rank_x();
  const Index d = queries.cols();
  for (Index start = 0; start < q; start += kQueryBlockSize) {
    const Index stop = std::min(q, start + kQueryBlockSize);
#pragma omp parallel for schedule(static)
    for (Index i = start; i < stop; ++i) {
      const auto query = std::span<const double>(queries.row(i).data(), static_cast<std::size_t>(d));
      double acc = 0.0;
      for (Index k = 0; k < m; ++k) {
        acc += weights[k] *
               kernel_eval(op.kernel_x, std::span<const double>(op.pivot_states_x.row(k).data(), static_cast<std::size_t>(d)),
                           query);
      }
      out[static_cast<std::size_t>(i)] = acc;
    }
  }
}

Eigen::VectorXd apply_cme(const CmeOperator& op, std::span<const double> f_values, const SampleMatrix& queries) {
  const Eigen::VectorXd weights = fold_values(op, f_values);
  Eigen::VectorXd out(queries.rows());
  evaluate_weights(op, weights, queries, std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

namespace serial {

Eigen::VectorXd apply_cme(const CmeOperator& op, std::span<const double> f_values, const SampleMatrix& queries) {
  check_f_values(f_values, op.n);
  if (queries.cols() != op.state_dim()) throw Error(ErrorCode::DimensionMismatch, "query dimension mismatch");
  Eigen::VectorXd f_pivots(op.rank_y());
  for (Index j = 0; j < op.rank_y(); ++j) f_pivots[j] = f_values[static_cast<std::size_t>(op.pivot_indices_y[j])];
  // f^T Q_Y F~ Q_X^T Phi_X(x), evaluated left to right.
  const Eigen::RowVectorXd left = f_pivots.transpose() * op.q_y * op.f_tilde * op.q_x.transpose();
  const Eigen::MatrixXd features = kernel_matrix(op.kernel_x, op.pivot_states_x, queries);
  return (left * features).transpose();
}

}  // namespace serial

Eigen::MatrixXd project_full_to_lowrank(const FullCmeOperator& full, const LowRankFactors& fx,
                                        const SpectralBasis& bx, const LowRankFactors& fy,
                                        const SpectralBasis& by) {
  const Index n = full.F.rows();
  if (fx.n() != n || fy.n() != n || bx.rank() != fx.rank() || by.rank() != fy.rank()) {
    throw Error(ErrorCode::DimensionMismatch, "factorizations do not match the full operator");
  }
  return (fy.L * by.V).transpose() * full.F * (fx.L * bx.V);
}

Eigen::MatrixXd expand_coefficients(const Eigen::MatrixXd& coeffs, const LowRankFactors& fx,
                                    const SpectralBasis& bx, const LowRankFactors& fy,
                                    const SpectralBasis& by) {
  if (coeffs.rows() != by.rank() || coeffs.cols() != bx.rank()) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient block does not match the bases");
  }
  return dense_Q(fy, by) * coeffs * dense_Q(fx, bx).transpose();
}

double hnorm_sq_difference(const Eigen::MatrixXd& a_coeffs, const Eigen::MatrixXd& b_coeffs,
                           const Eigen::MatrixXd& kx, const Eigen::MatrixXd& ky) {
  if (a_coeffs.rows() != b_coeffs.rows() || a_coeffs.cols() != b_coeffs.cols() ||
      ky.rows() != a_coeffs.rows() || ky.cols() != a_coeffs.rows() || kx.rows() != a_coeffs.cols() ||
      kx.cols() != a_coeffs.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "coefficient and kernel matrices are inconsistent");
  }
  const Eigen::MatrixXd diff = a_coeffs - b_coeffs;
  // trace(D^T K_Y D K_X) = sum_ij (K_Y D)_ij (D K_X)_ij for symmetric K_X.
  const Eigen::MatrixXd left = ky * diff;
  const Eigen::MatrixXd right = diff * kx;
  return std::max(0.0, left.cwiseProduct(right).sum());
}

LowRankErrorBound lowrank_error_bound(double epsilon, double lambda, double n, double trace_kx,
                                      double trace_ky, double frob_f_sq) {
  if (!(epsilon >= 0.0) || !(trace_kx >= 0.0) || !(trace_ky >= 0.0) || !(frob_f_sq >= 0.0)) {
    throw Error(ErrorCode::InvalidInput, "error bound inputs must be nonnegative");
  }
  if (!(lambda > 0.0) || !(n > 0.0)) throw Error(ErrorCode::InvalidInput, "lambda and n must be positive");
  LowRankErrorBound b;
  b.epsilon = epsilon;
  b.lambda = lambda;
  b.n = n;
  b.trace_kx = trace_kx;
  b.trace_ky = trace_ky;
  b.frob_f_sq = frob_f_sq;
  const double n_lambda = n * lambda;
  b.delta_lr = epsilon * frob_f_sq * (trace_kx + trace_ky) +
               epsilon * epsilon / std::pow(n_lambda, 4) * trace_kx * trace_ky;
  return b;
}

std::string operator_to_json(const CmeOperator& op) {
  json j;
  j["format"] = "cmelr-operator";
  j["version"] = 1;
  j["q_x"] = matrix_to_json(op.q_x);
  j["q_y"] = matrix_to_json(op.q_y);
  j["f_tilde"] = matrix_to_json(op.f_tilde);
  j["lambda_x"] = vector_to_json(op.lambda_x);
  j["lambda_y"] = vector_to_json(op.lambda_y);
  j["pivot_states_x"] = matrix_to_json(op.pivot_states_x);
  j["pivot_indices_x"] = op.pivot_indices_x;
  j["pivot_indices_y"] = op.pivot_indices_y;
  j["kernel_x"] = kernel_to_json(op.kernel_x);
  j["kernel_y"] = kernel_to_json(op.kernel_y);
  j["lambda"] = op.lambda;
  j["epsilon"] = op.epsilon;
  j["policy"] = to_string(op.policy);
  j["n"] = op.n;
  j["trace_kx"] = op.trace_kx;
  j["trace_ky"] = op.trace_ky;
  j["tolerance_x"] = op.tolerance_x;
  j["tolerance_y"] = op.tolerance_y;
  j["residual_trace_x"] = op.residual_trace_x;
  j["residual_trace_y"] = op.residual_trace_y;
  j["max_diag_kx"] = op.max_diag_kx;
  return j.dump();
}

CmeOperator operator_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed operator record: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "cmelr-operator" || j.at("version").get<int>() != 1) {
      throw Error(ErrorCode::IoError, "unsupported operator record");
    }
    CmeOperator op;
    op.q_x = matrix_from_json(j.at("q_x"));
    op.q_y = matrix_from_json(j.at("q_y"));
    op.f_tilde = matrix_from_json(j.at("f_tilde"));
    op.lambda_x = vector_from_json(j.at("lambda_x"));
    op.lambda_y = vector_from_json(j.at("lambda_y"));
    op.pivot_states_x = matrix_from_json(j.at("pivot_states_x"));
    op.pivot_indices_x = j.at("pivot_indices_x").get<std::vector<Index>>();
    op.pivot_indices_y = j.at("pivot_indices_y").get<std::vector<Index>>();
    op.kernel_x = kernel_from_json(j.at("kernel_x"));
    op.kernel_y = kernel_from_json(j.at("kernel_y"));
    op.lambda = j.at("lambda").get<double>();
    op.epsilon = j.at("epsilon").get<double>();
    op.policy = tolerance_policy_from_string(j.at("policy").get<std::string>());
    op.n = j.at("n").get<Index>();
    op.trace_kx = j.at("trace_kx").get<double>();
    op.trace_ky = j.at("trace_ky").get<double>();
    op.tolerance_x = j.at("tolerance_x").get<double>();
    op.tolerance_y = j.at("tolerance_y").get<double>();
    op.residual_trace_x = j.at("residual_trace_x").get<double>();
    op.residual_trace_y = j.at("residual_trace_y").get<double>();
    op.max_diag_kx = j.at("max_diag_kx").get<double>();

    const Index mx = op.f_tilde.cols();
    const Index my = op.f_tilde.rows();
    if (op.q_x.rows() != mx || op.q_x.cols() != mx || op.q_y.rows() != my || op.q_y.cols() != my ||
        op.pivot_states_x.rows() != mx || static_cast<Index>(op.pivot_indices_x.size()) != mx ||
        static_cast<Index>(op.pivot_indices_y.size()) != my) {
      throw Error(ErrorCode::IoError, "operator record has inconsistent shapes");
    }
    for (Index p : op.pivot_indices_y)
      if (p < 0 || p >= op.n) throw Error(ErrorCode::IoError, "pivot index out of range");
    op.fold = op.q_x * op.f_tilde.transpose() * op.q_y.transpose();
    return op;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("incomplete operator record: ") + e.what());
  }
}

void save_operator(const CmeOperator& op, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << operator_to_json(op);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

CmeOperator load_operator(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return operator_from_json(buffer.str());
}

}  // namespace cmelr
