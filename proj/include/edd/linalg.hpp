#pragma once

#include <Eigen/Core>
#include <atomic>
#include <memory>

#include "edd/fem.hpp"

namespace edd {

// Process-wide count of numeric factorizations, for reuse checks.
long long factorization_count();

struct FactorizationStats {
  double factor_ms = 0.0;
  std::atomic<long long> solves{0};
  std::atomic<long long> solve_us{0};
  double flops = 0.0;  // UMFPACK estimate, 0 for the Cholesky path
};

// Sparse direct factorization: UMFPACK LU in general, simplicial Cholesky
// when the system is flagged SPD.
class Factorization {
 public:
  static Factorization factorize(const SparseSystem& a);

  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;
  ~Factorization();

  int size() const;
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // one column at a time; safe to call concurrently
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& b) const;
  void solve_in_place(Eigen::Ref<Eigen::MatrixXd> b) const;
  const FactorizationStats& stats() const;

 private:
  struct Impl;
  explicit Factorization(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;
};

}  // namespace edd
