#include "cmelr/errors.hpp"
#include "cmelr/kernels.hpp"
#include "cmelr/lowrank.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cmelr;
using namespace testing;

namespace {

void check_invariants(const Eigen::MatrixXd& k, const LowRankFactors& f) {
  const Index m = f.rank();
  const Eigen::MatrixXd b = f.dense_B();
  const double trace = k.trace();
  CHECK(f.residual_trace <= f.tolerance);
  CHECK((b.transpose() * f.L - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((k * b - f.L).norm() <= 1e-8 * std::max(1.0, f.L.norm()));
  CHECK(min_eigenvalue(k - f.L * f.L.transpose()) >= -1e-10 * trace);
  CHECK(std::abs(trace - f.L.squaredNorm() - f.residual_trace) <= 1e-8 * trace);
  for (Index i = 0; i < f.n(); ++i) {
    if (std::find(f.pivots.begin(), f.pivots.end(), i) == f.pivots.end()) CHECK(b.row(i).norm() == 0.0);
  }
}

}  // namespace

TEST_CASE("identity matrix with zero tolerance") {
  const DenseMatrixSource src(Eigen::MatrixXd::Identity(3, 3));
  const auto f = pivoted_cholesky(src, 0.0);
  CHECK(f.rank() == 3);
  CHECK(f.pivots == std::vector<Index>{0, 1, 2});
  CHECK((f.L.transpose() * f.L - Eigen::MatrixXd::Identity(3, 3)).norm() < 1e-15);
  CHECK(f.residual_trace == 0.0);
}

TEST_CASE("rank-one 2x2 hand example") {
  Eigen::MatrixXd k(2, 2);
  k << 1, 2, 2, 4;
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 1e-12);
  REQUIRE(f.rank() == 1);
  CHECK(f.pivots[0] == 1);
  CHECK(f.L(0, 0) == doctest::Approx(1.0));
  CHECK(f.L(1, 0) == doctest::Approx(2.0));
  const Eigen::MatrixXd b = f.dense_B();
  CHECK(b(0, 0) == 0.0);
  CHECK(b(1, 0) == doctest::Approx(0.5));
  CHECK((b.transpose() * f.L)(0, 0) == doctest::Approx(1.0));
  CHECK(f.residual_trace == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("random 8x8 PSD against dense eigendecomposition") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd k = random_psd(8, Spectrum::Flat, rng);
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 1e-10);
  const Eigen::MatrixXd r = k - f.L * f.L.transpose();
  CHECK(min_eigenvalue(r) >= -1e-10 * k.trace());
  CHECK(r.trace() <= 1e-10);
  check_invariants(k, f);
}

TEST_CASE("invariants across spectra") {
  std::mt19937_64 rng(42);
  for (Spectrum s : {Spectrum::Flat, Spectrum::Geometric, Spectrum::LowRank, Spectrum::Clustered, Spectrum::Algebraic}) {
    for (double tol : {1e-2, 1e-6, 1e-10}) {
      const Eigen::MatrixXd k = random_psd(40, s, rng);
      check_invariants(k, pivoted_cholesky(DenseMatrixSource(k), tol));
    }
  }
}

TEST_CASE("pivots are argmax of the Schur diagonal with smallest-index ties") {
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(4, 4);
  k(2, 2) = 3.0;
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 0.0);
  CHECK(f.pivots == std::vector<Index>{2, 0, 1, 3});
}

TEST_CASE("residual trace decreases with rank") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd k = random_psd(30, Spectrum::Geometric, rng);
  double last = k.trace();
  for (Index m = 1; m <= 30; ++m) {
    const auto f = pivoted_cholesky(DenseMatrixSource(k), 0.0, m);
    CHECK(f.residual_trace <= last + 1e-15);
    last = f.residual_trace;
  }
}

TEST_CASE("exact rank recovery") {
  std::mt19937_64 rng(11);
  for (Index r : {1, 3, 7}) {
    const Eigen::MatrixXd g = random_samples(25, r, rng);
    const Eigen::MatrixXd k = g * g.transpose();
    CHECK(pivoted_cholesky(DenseMatrixSource(k), 0.0).rank() == r);
  }
}

TEST_CASE("one column request per pivot") {
  std::mt19937_64 rng(3);
  const SampleMatrix x = random_samples(200, 1, rng);
  const KernelMatrixSource kernel(KernelSpec::matern32(0.5), x);
  const CountingSource counting(kernel);
  const auto f = pivoted_cholesky(counting, 1e-6);
  CHECK(counting.columns == f.rank());
}

TEST_CASE("max_rank caps the factorization") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd k = random_psd(20, Spectrum::Flat, rng);
  CHECK(pivoted_cholesky(DenseMatrixSource(k), 0.0, 5).rank() == 5);
  CHECK_THROWS_AS(pivoted_cholesky(DenseMatrixSource(k), 0.0, 21), Error);
}

TEST_CASE("input validation") {
  const DenseMatrixSource id(Eigen::MatrixXd::Identity(2, 2));
  try {
    pivoted_cholesky(id, -1.0);
    FAIL("expected InvalidTolerance");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidTolerance);
  }
  Eigen::MatrixXd bad(2, 2);
  bad << 1, 0, 0, -1;
  try {
    pivoted_cholesky(DenseMatrixSource(bad), 0.0);
    FAIL("expected NonPsdInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonPsdInput);
  }
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(pivoted_cholesky(DenseMatrixSource(indefinite), 0.0), Error);
}

TEST_CASE("spectral rotation scalar case") {
  Eigen::MatrixXd k(2, 2);
  k << 1, 2, 2, 4;
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 1e-12);
  const auto s = spectral_rotation(f);
  CHECK(s.V(0, 0) == doctest::Approx(1.0));
  CHECK(s.eigenvalues[0] == doctest::Approx(5.0));
  CHECK((dense_Q(f, s) - f.dense_B()).norm() < 1e-15);
}

TEST_CASE("spectral rotation of the identity") {
  const Eigen::MatrixXd k = Eigen::MatrixXd::Identity(5, 5);
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 0.0);
  const auto s = spectral_rotation(f);
  CHECK((s.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-14);
  const Eigen::MatrixXd q = dense_Q(f, s);
  CHECK((q.transpose() * k * q - Eigen::MatrixXd::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("double orthogonality on a random 20x20 matrix") {
  std::mt19937_64 rng(20);
  const Eigen::MatrixXd k = random_psd(20, Spectrum::Geometric, rng);
  const auto f = pivoted_cholesky(DenseMatrixSource(k), 1e-8);
  const auto s = spectral_rotation(f);
  const Eigen::MatrixXd q = dense_Q(f, s);
  const Index m = f.rank();
  CHECK((s.V * s.eigenvalues.asDiagonal() * s.V.transpose() - f.L.transpose() * f.L).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((s.V.transpose() * s.V - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((q.transpose() * k * q - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() < 1e-6);
  const Eigen::MatrixXd q2 = q.transpose() * k * k * q;
  const Eigen::MatrixXd lam = s.eigenvalues.asDiagonal();
  CHECK((q2 - lam).cwiseAbs().maxCoeff() < 1e-6 * s.eigenvalues[0]);
  for (Index j = 1; j < m; ++j) CHECK(s.eigenvalues[j] <= s.eigenvalues[j - 1]);
}

TEST_CASE("eigenvector sign convention") {
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd k = random_psd(12, Spectrum::Flat, rng);
  const auto s = spectral_rotation(pivoted_cholesky(DenseMatrixSource(k), 0.0));
  for (Index j = 0; j < s.rank(); ++j) {
    Index arg = 0;
    s.V.col(j).cwiseAbs().maxCoeff(&arg);
    CHECK(s.V(arg, j) > 0.0);
  }
}
