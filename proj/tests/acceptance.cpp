#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"
#include "support.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace cmelr;
using testing::Spectrum;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// Randomized PSD matrices plus kernel Gram matrices; shared by criteria 1 and 2.
struct Corpus {
  std::vector<Eigen::MatrixXd> matrices;
  std::vector<double> tolerances;
};

Corpus build_corpus() {
  Corpus c;
  std::mt19937_64 rng(20240611);
  const Spectrum kinds[] = {Spectrum::Flat, Spectrum::Geometric, Spectrum::LowRank, Spectrum::Clustered,
                            Spectrum::Algebraic};
  const double tols[] = {1e-2, 1e-6, 1e-10};
  std::uniform_int_distribution<Index> size(2, 200);
  for (int i = 0; i < 200; ++i) {
    c.matrices.push_back(testing::random_psd(size(rng), kinds[i % 5], rng));
    c.tolerances.push_back(tols[i % 3]);
  }
  const KernelSpec kernels[] = {KernelSpec::polynomial(4), KernelSpec::matern32(0.5), KernelSpec::gaussian(0.7),
                                KernelSpec::polynomial(2, 0.5)};
  int j = 0;
  for (const auto& k : kernels) {
    for (Index d : {1, 2}) {
      for (Index n : {50, 200}) {
        c.matrices.push_back(kernel_matrix(k, testing::random_samples(n, d, rng)));
        c.tolerances.push_back(tols[j++ % 3]);
      }
    }
  }
  return c;
}

Outcome criterion_factorization(const Corpus& corpus) {
  const auto start = Clock::now();
  int violations = 0;
  double worst_bt = 0.0, worst_kb = 0.0, worst_psd = 0.0;
  for (std::size_t i = 0; i < corpus.matrices.size(); ++i) {
    const Eigen::MatrixXd& k = corpus.matrices[i];
    const double eps = corpus.tolerances[i];
    const LowRankFactors f = pivoted_cholesky(DenseMatrixSource(k), eps);
    const Eigen::MatrixXd b = f.dense_B();
    const Eigen::MatrixXd residual = k - f.L * f.L.transpose();
    const double bt = (b.transpose() * f.L - Eigen::MatrixXd::Identity(f.rank(), f.rank())).cwiseAbs().maxCoeff();
    const double kb = f.rank() ? (k * b - f.L).norm() / f.L.norm() : 0.0;
    const double psd = -testing::min_eigenvalue(residual) / k.trace();
    worst_bt = std::max(worst_bt, bt);
    worst_kb = std::max(worst_kb, kb);
    worst_psd = std::max(worst_psd, psd);
    if (residual.trace() > eps || bt > 1e-10 || kb > 1e-8 || psd > 1e-10) ++violations;
  }
  const double elapsed = seconds_since(start);
  return {violations == 0 && elapsed < 30.0,
          std::to_string(corpus.matrices.size()) + " matrices, " + std::to_string(violations) +
              " violations, max|B^TL-I| " + fmt(worst_bt) + ", rel|KB-L| " + fmt(worst_kb) + ", residual min eig/tr " +
              fmt(-worst_psd) + ", " + fmt(elapsed) + " s"};
}

Outcome criterion_double_orthogonality(const Corpus& corpus) {
  int violations = 0;
  double worst_id = 0.0, worst_diag = 0.0;
  for (std::size_t i = 0; i < corpus.matrices.size(); ++i) {
    const Eigen::MatrixXd& k = corpus.matrices[i];
    const LowRankFactors f = pivoted_cholesky(DenseMatrixSource(k), corpus.tolerances[i]);
    const SpectralBasis basis = spectral_rotation(f);
    const Eigen::MatrixXd q = dense_Q(f, basis);
    const Index m = f.rank();
    if (m == 0) continue;
    const Eigen::MatrixXd kq = k * q;
    const double id = (q.transpose() * kq - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff();
    Eigen::MatrixXd second = kq.transpose() * kq;
    second.diagonal().setZero();
    const double off = second.cwiseAbs().maxCoeff() / basis.eigenvalues.maxCoeff();
    worst_id = std::max(worst_id, id);
    worst_diag = std::max(worst_diag, off);
    if (id > 1e-6 || off > 1e-6) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " violations, max|Q^TKQ-I| " + fmt(worst_id) +
                               ", max offdiag(Q^TK^2Q)/Lambda_max " + fmt(worst_diag)};
}

struct Dataset {
  SampleMatrix x, y;
};

Dataset linear_gaussian(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Dataset d{SampleMatrix(n, 1), SampleMatrix(n, 1)};
  for (Index i = 0; i < n; ++i) {
    d.x(i, 0) = normal(rng);
    d.y(i, 0) = 0.7 * d.x(i, 0) + 0.4 * normal(rng);
  }
  return d;
}

Outcome criterion_woodbury() {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> log_lambda(-6.0, 0.0);
  std::uniform_int_distribution<Index> size(10, 200);
  double worst = 0.0;
  int violations = 0;
  for (int i = 0; i < 100; ++i) {
    const double lambda = std::pow(10.0, log_lambda(rng));
    const Dataset d = linear_gaussian(size(rng), rng);
    const CmeFit fit = fit_lowrank_cme_detailed(d.x, d.y, KernelSpec::matern32(1.0), KernelSpec::matern32(0.5),
                                                {lambda, 1e-6, TolerancePolicy::Absolute, std::nullopt});
    const Index n = fit.factors_x.n();
    Eigen::MatrixXd m = fit.factors_x.L * fit.factors_x.L.transpose();
    m.diagonal().array() += static_cast<double>(n) * lambda;
    const Eigen::MatrixXd direct =
        (fit.factors_y.L * fit.basis_y.V).transpose() * m.ldlt().solve(fit.factors_x.L * fit.basis_x.V);
    const double gap = (fit.op.f_tilde - direct).norm();
    worst = std::max(worst, gap);
    if (gap > 1e-8) ++violations;
  }
  return {violations == 0, std::to_string(violations) + " of 100 above 1e-8, max Frobenius gap " + fmt(worst)};
}

Outcome criterion_error_bounds() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<Index> size(10, 200);
  std::uniform_real_distribution<double> log_lambda(-3.0, -1.0);
  const double epsilons[] = {1e-2, 1e-4, 1e-6};
  int thm = 0, prop = 0;
  double max_ratio_thm = 0.0, max_ratio_prop = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Index n = size(rng);
    const double eps = epsilons[i % 3];
    const double lambda = std::pow(10.0, log_lambda(rng));
    const Dataset d = linear_gaussian(n, rng);
    const KernelSpec kx = KernelSpec::matern32(1.0), ky = KernelSpec::gaussian(0.6);
    const auto full = fit_full_cme(d.x, d.y, kx, lambda);
    const auto fit = fit_lowrank_cme_detailed(d.x, d.y, kx, ky, {lambda, eps, TolerancePolicy::Absolute, std::nullopt});
    const Eigen::MatrixXd kxm = kernel_matrix(kx, d.x), kym = kernel_matrix(ky, d.y);

    const Eigen::MatrixXd lowrank =
        expand_coefficients(fit.op.f_tilde, fit.factors_x, fit.basis_x, fit.factors_y, fit.basis_y);
    const double measured = hnorm_sq_difference(full.F, lowrank, kxm, kym);
    const auto bound = lowrank_error_bound(eps, lambda, static_cast<double>(n), kxm.trace(), kym.trace(),
                                           full.F.squaredNorm());
    if (!(measured <= bound.delta_lr)) ++thm;
    max_ratio_thm = std::max(max_ratio_thm, measured / bound.delta_lr);

    const Eigen::MatrixXd proj = project_full_to_lowrank(full, fit.factors_x, fit.basis_x, fit.factors_y, fit.basis_y);
    const double coeff_gap = (proj - fit.op.f_tilde).squaredNorm();
    const double coeff_bound = eps * eps / std::pow(static_cast<double>(n) * lambda, 4) * kxm.trace() * kym.trace();
    if (!(coeff_gap <= coeff_bound)) ++prop;
    max_ratio_prop = std::max(max_ratio_prop, coeff_gap / coeff_bound);
  }
  return {thm == 0 && prop == 0, "operator bound violations " + std::to_string(thm) + " (max ratio " +
                                     fmt(max_ratio_thm) + "), coefficient bound violations " + std::to_string(prop) +
                                     " (max ratio " + fmt(max_ratio_prop) + ")"};
}

Outcome criterion_full_lowrank() {
  const HestonParams h;
  const PathSet paths = simulate_heston(h, 500, 1.0, 505);
  const Index last = paths.n_steps();
  SampleMatrix x(500, 2), y(500, 1), q(500, 2);
  x.col(0) = paths.log_prices.col(last - 1);
  x.col(1) = paths.variances.col(last - 1);
  y.col(0) = paths.log_prices.col(last);
  q.col(0) = paths.log_prices.col(last / 2);
  q.col(1) = paths.variances.col(last / 2);
  const CmeModel model = default_cme_model(paths);
  const auto full = fit_full_cme(x, y, model.kernel_x, model.lambda);
  const CmeOperator op =
      fit_lowrank_cme(x, y, model.kernel_x, model.kernel_y, model.lambda, 1e-12, TolerancePolicy::Absolute);
  const Eigen::VectorXd f = discounted_payoffs(paths, {h.s0, 1.0}, last);
  const std::span<const double> fs(f.data(), static_cast<std::size_t>(f.size()));
  const double gap = (apply_cme(op, fs, q) - apply_full_cme(full, fs, q)).cwiseAbs().maxCoeff();
  return {gap <= 1e-6, "sup gap " + fmt(gap) + " (rank_x " + std::to_string(op.rank_x()) + ", rank_y " +
                           std::to_string(op.rank_y()) + ")"};
}

struct TableRun {
  std::vector<double> cme, ls, cme_micros, ls_micros;
  double reference = 0.0, reference_se = 0.0;
  double seconds = 0.0;
};

// n = 1e4, T = 1, K = s0 on the grid seeds of that cell.
TableRun run_heston_cell() {
  const auto start = Clock::now();
  const HestonParams h;
  const ExperimentConfig grid;
  TableRun run;
  const Index n = 10000;
  const ContractSpec contract{h.s0, 1.0};
  for (int rep = 0; rep < 20; ++rep) {
    const PathSet paths = simulate_heston(h, n, 1.0, experiment_seed(static_cast<std::uint64_t>(rep), 2, 2));
    const CmeModel model = default_cme_model(paths, grid.epsilon);
    const CmePricing cme = price_american_cme_detailed(paths, contract, model);
    const PricingResult ls = price_american_ls(paths, contract);
    run.cme.push_back(cme.result.price);
    run.ls.push_back(ls.price);
    run.cme_micros.push_back(cme.result.elapsed_micros);
    run.ls_micros.push_back(ls.elapsed_micros);
  }
  const Eigen::ArrayXd terminal =
      simulate_heston_terminal(h, 1'000'000, 1.0, monitoring_steps(1.0), kReferenceSeedBase + 2).array().exp();
  const Eigen::ArrayXd payoff = (h.s0 - terminal).max(0.0);
  const double m = static_cast<double>(payoff.size());
  run.reference = payoff.mean();
  run.reference_se = std::sqrt((payoff - run.reference).square().sum() / (m - 1.0) / m);
  run.seconds = seconds_since(start);
  return run;
}

// Mean over replications against the reference; the standard error combines
// the spread of replication prices with the reference's own error.
std::pair<bool, std::string> within_3se(const std::vector<double>& prices, const TableRun& run) {
  const double r = static_cast<double>(prices.size());
  const double mean = std::accumulate(prices.begin(), prices.end(), 0.0) / r;
  double ss = 0.0;
  for (double p : prices) ss += (p - mean) * (p - mean);
  const double se = std::sqrt(ss / (r - 1.0) / r + run.reference_se * run.reference_se);
  const double z = std::abs(mean - run.reference) / se;
  return {z <= 3.0, "mean " + fmt(mean) + " (" + fmt(z) + " SE)"};
}

Outcome criterion_r0_equivalence(const TableRun& run) {
  const auto [cme_ok, cme_text] = within_3se(run.cme, run);
  const auto [ls_ok, ls_text] = within_3se(run.ls, run);
  return {cme_ok && ls_ok && run.seconds < 600.0, "reference " + fmt(run.reference) + " +- " + fmt(run.reference_se) +
                                                      "; CME-LR " + cme_text + "; LS " + ls_text + "; " +
                                                      fmt(run.seconds) + " s"};
}

Outcome criterion_constant_vol() {
  HestonParams h;
  h.xi = 0.0;
  h.v0 = 0.04;
  h.theta = 0.04;
  h.r = 0.05;
  const PathSet paths = simulate_heston(h, 100000, 1.0, 707);
  const ContractSpec contract{100.0, 1.0};
  const double cme = price_american_cme_detailed(paths, contract, default_cme_model(paths)).result.price;
  const double tree = binomial_american_put(h.s0, 100.0, 0.05, 0.2, 1.0, 2000);
  const double rel = std::abs(cme - tree) / tree;
  return {rel <= 0.015, "CME-LR " + fmt(cme) + ", binomial " + fmt(tree) + ", relative gap " + fmt(rel)};
}

Outcome criterion_ranks() {
  ExperimentConfig config;
  config.n_grid = {1000, 10000};
  config.maturities = {1.0};
  config.replications = 20;
  const auto obs = rank_study(config, {1e-5});
  bool rank_x_ok = true;
  std::set<Index> seen_x;
  for (const auto& o : obs) {
    seen_x.insert(o.rank_x);
    if (o.rank_x != 2 && o.rank_x != 3) rank_x_ok = false;
  }
  const auto summary = rank_summary(obs);
  const double targets[] = {137.45, 199.47};
  bool ranks_ok = true;
  std::string text;
  for (const auto& s : summary) {
    const double target = s.n == 1000 ? targets[0] : targets[1];
    const double rel = std::abs(s.mean_rank_y - target) / target;
    if (rel > 0.15) ranks_ok = false;
    text += "n=" + std::to_string(s.n) + " mean rank_y " + fmt(s.mean_rank_y) + " vs " + fmt(target) + "; ";
  }
  text += "rank_x values {";
  for (Index v : seen_x) text += " " + std::to_string(v);
  text += " }";
  return {ranks_ok && rank_x_ok && summary.size() == 2, text};
}

Outcome criterion_timing(const TableRun& run) {
  int faster = 0;
  for (std::size_t i = 0; i < run.cme_micros.size(); ++i)
    if (run.cme_micros[i] < run.ls_micros[i]) ++faster;
  const auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  return {faster >= 18, "CME-LR faster in " + std::to_string(faster) + " of 20 reps; median CME-LR " +
                            fmt(median(run.cme_micros)) + " us, LS " + fmt(median(run.ls_micros)) + " us"};
}

Outcome criterion_convergence() {
  ConvergenceConfig config;
  config.n_grid = {250, 1000, 4000};
  config.replications = 10;
  const auto points = convergence_study(config);
  bool decreasing = points.size() == 3;
  std::string text = "median L2 error:";
  for (std::size_t i = 0; i < points.size(); ++i) {
    text += " n=" + std::to_string(points[i].n) + " " + fmt(points[i].median);
    if (i > 0 && !(points[i].median < points[i - 1].median)) decreasing = false;
  }
  return {decreasing, text};
}

Outcome criterion_desk_bench(const std::string& cli) {
  const auto out = std::filesystem::temp_directory_path() / "cmelr_acceptance_bench";
  std::filesystem::remove_all(out);
  const std::string cmd = "\"" + cli + "\" bench --n 100,1000 --reps 5 --strikes 10 --out \"" + out.string() +
                          "\" > \"" + (out.string() + ".log") + "\" 2>&1";
  const auto start = Clock::now();
  const int status = std::system(cmd.c_str());
  const double elapsed = seconds_since(start);

  std::vector<std::string> expected{"results.csv", "bounds.csv", "reference.csv"};
  for (int t = 1; t <= 4; ++t) {
    const std::string ts = std::to_string(t);
    expected.push_back("winner_time_T" + ts + ".csv");
    expected.push_back("winner_err_T" + ts + ".csv");
    expected.push_back("rank_T" + ts + ".csv");
    for (int n = 1; n <= 2; ++n) expected.push_back("error_mk_winner_T" + ts + "_N" + std::to_string(n) + ".csv");
  }
  int missing = 0;
  for (const auto& name : expected)
    if (!std::filesystem::exists(out / name) || std::filesystem::file_size(out / name) == 0) ++missing;
  return {status == 0 && missing == 0 && elapsed < 300.0,
          "exit status " + std::to_string(status) + ", " + std::to_string(expected.size() - missing) + " of " +
              std::to_string(expected.size()) + " CSV files, " + fmt(elapsed) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  std::string cli = CMELR_CLI_PATH;
  app.add_option("criteria", only, "Run only these criteria (1-11)");
  app.add_option("--cli", cli, "Path to the cmelr executable");
  CLI11_PARSE(app, argc, argv);
  const auto wanted = [&](int c) { return only.empty() || std::find(only.begin(), only.end(), c) != only.end(); };

  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    if (!wanted(id)) return;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " " << name << ": " << o.detail << std::endl;
  };

  std::optional<Corpus> corpus;
  if (wanted(1) || wanted(2)) corpus = build_corpus();
  report(1, "factorization invariants", [&] { return criterion_factorization(*corpus); });
  report(2, "double orthogonality", [&] { return criterion_double_orthogonality(*corpus); });
  report(3, "Woodbury form", criterion_woodbury);
  report(4, "error bounds", criterion_error_bounds);
  report(5, "full/low-rank agreement", criterion_full_lowrank);

  std::optional<TableRun> table;
  if (wanted(6) || wanted(9)) {
    try {
      table = run_heston_cell();
    } catch (const std::exception& e) {
      std::cerr << "pricing run failed: " << e.what() << '\n';
    }
  }
  const auto need_table = [&]() -> const TableRun& {
    if (!table) throw std::runtime_error("pricing run unavailable");
    return *table;
  };
  report(6, "r=0 pricing equivalence", [&] { return criterion_r0_equivalence(need_table()); });
  report(7, "constant-vol oracle", criterion_constant_vol);
  report(8, "rank reproduction", criterion_ranks);
  report(9, "timing order", [&] { return criterion_timing(need_table()); });
  report(10, "synthetic convergence", criterion_convergence);
  report(11, "desk bench", [&] { return criterion_desk_bench(cli); });

  return failures == 0 ? 0 : 1;
}
