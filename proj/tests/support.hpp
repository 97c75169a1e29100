#pragma once

#include "cmelr/kernels.hpp"
#include "cmelr/lowrank.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <span>

namespace testing {

using cmelr::Index;

enum class Spectrum { Flat, Geometric, LowRank, Clustered, Algebraic };

inline Eigen::MatrixXd random_orthogonal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::VectorXd spectrum(Index n, Spectrum kind, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd s(n);
  const Index r = std::max<Index>(1, n / 4);
  for (Index i = 0; i < n; ++i) {
    switch (kind) {
      case Spectrum::Flat: s[i] = 0.5 + u(rng); break;
      case Spectrum::Geometric: s[i] = std::pow(0.7, static_cast<double>(i)); break;
      case Spectrum::LowRank: s[i] = i < r ? 1.0 + u(rng) : 0.0; break;
      case Spectrum::Clustered: s[i] = i % 3 == 0 ? 10.0 : 1e-3; break;
      case Spectrum::Algebraic: s[i] = 1.0 / std::pow(1.0 + i, 2.0); break;
    }
  }
  return s;
}

inline Eigen::MatrixXd random_psd(Index n, Spectrum kind, std::mt19937_64& rng) {
  const Eigen::MatrixXd q = random_orthogonal(n, rng);
  Eigen::MatrixXd k = q * spectrum(n, kind, rng).asDiagonal() * q.transpose();
  return 0.5 * (k + k.transpose());
}

inline cmelr::SampleMatrix random_samples(Index n, Index d, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal;
  cmelr::SampleMatrix s(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) s(i, j) = scale * normal(rng);
  return s;
}

// Counts column requests made by a factorization.
class CountingSource final : public cmelr::PsdMatrixSource {
 public:
  explicit CountingSource(const cmelr::PsdMatrixSource& inner) : inner_(inner) {}
  Index dim() const override { return inner_.dim(); }
  double diag(Index i) const override { return inner_.diag(i); }
  void column(Index i, std::span<double> out) const override {
    ++columns;
    inner_.column(i, out);
  }
  mutable int columns = 0;

 private:
  const cmelr::PsdMatrixSource& inner_;
};

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

}  // namespace testing
