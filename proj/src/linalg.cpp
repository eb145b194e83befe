#include "edd/linalg.hpp"

#include <umfpack.h>

#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <sstream>

#include "edd/errors.hpp"

namespace edd {

namespace {

std::atomic<long long> g_factorizations{0};

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

long long factorization_count() { return g_factorizations.load(); }

struct Factorization::Impl {
  int n = 0;
  bool cholesky = false;
  Eigen::SparseMatrix<double, Eigen::ColMajor, int> a;  // kept for UMFPACK solves
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  FactorizationStats stats;

  ~Impl() {
    if (numeric) umfpack_di_free_numeric(&numeric);
  }

  void solve_column(double* x, const double* b) const {
    if (cholesky) {
      Eigen::Map<Eigen::VectorXd> xv(x, n);
      xv = llt.solve(Eigen::Map<const Eigen::VectorXd>(b, n));
      return;
    }
    double info[UMFPACK_INFO];
    const int status = umfpack_di_solve(UMFPACK_A, a.outerIndexPtr(), a.innerIndexPtr(), a.valuePtr(), x, b,
                                        numeric, control, info);
    if (status != UMFPACK_OK && status != UMFPACK_WARNING_singular_matrix)
      throw SolverError("umfpack solve failed with status " + std::to_string(status));
  }
};

Factorization::Factorization(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;
Factorization::~Factorization() = default;

Factorization Factorization::factorize(const SparseSystem& sys) {
  require(sys.matrix.rows() == sys.matrix.cols(), "factorize: matrix must be square");
  require(sys.matrix.rows() > 0, "factorize: empty matrix");
  auto impl = std::make_unique<Impl>();
  impl->n = static_cast<int>(sys.matrix.rows());
  const auto t0 = std::chrono::steady_clock::now();

  if (sys.spd) {
    impl->cholesky = true;
    impl->llt.compute(sys.matrix);
    if (impl->llt.info() != Eigen::Success) throw SolverError("factorize: Cholesky failed, matrix not SPD or singular");
    const auto d = impl->llt.vectorD();
    if (d.minCoeff() <= 0.0) {
      Eigen::Index i;
      d.minCoeff(&i);
      std::ostringstream os;
      os << "factorize: nonpositive pivot " << d(i) << " at position " << i << " of the SPD path";
      throw SolverError(os.str());
    }
  } else {
    impl->a = sys.matrix;
    impl->a.makeCompressed();
    double* control = impl->control;
    double info[UMFPACK_INFO];
    umfpack_di_defaults(control);
    if (sys.symmetric) control[UMFPACK_STRATEGY] = UMFPACK_STRATEGY_SYMMETRIC;
    // no iterative refinement: the same factors serve thousands of columns and
    // the refinement sweeps tripled the solve cost
    control[UMFPACK_IRSTEP] = 0;
    void* symbolic = nullptr;
    const int* ap = impl->a.outerIndexPtr();
    const int* ai = impl->a.innerIndexPtr();
    const double* ax = impl->a.valuePtr();
    int status = umfpack_di_symbolic(impl->n, impl->n, ap, ai, ax, &symbolic, control, info);
    if (status != UMFPACK_OK) throw SolverError("factorize: umfpack symbolic failed with status " + std::to_string(status));
    status = umfpack_di_numeric(ap, ai, ax, symbolic, &impl->numeric, control, info);
    umfpack_di_free_symbolic(&symbolic);
    if (status == UMFPACK_WARNING_singular_matrix || status != UMFPACK_OK) {
      std::ostringstream os;
      os << "factorize: matrix is singular (umfpack status " << status << ", rcond estimate " << info[UMFPACK_RCOND]
         << ", zero pivots among " << impl->n << " unknowns)";
      throw SolverError(os.str());
    }
    impl->stats.flops = info[UMFPACK_FLOPS];
  }
  impl->stats.factor_ms = ms_since(t0);
  ++g_factorizations;
  return Factorization(std::move(impl));
}

int Factorization::size() const { return impl_->n; }

const FactorizationStats& Factorization::stats() const { return impl_->stats; }

Eigen::VectorXd Factorization::solve(const Eigen::VectorXd& b) const {
  require(b.size() == impl_->n, "solve: right-hand side has wrong length");
  Eigen::VectorXd x(impl_->n);
  const auto t0 = std::chrono::steady_clock::now();
  impl_->solve_column(x.data(), b.data());
  impl_->stats.solves += 1;
  impl_->stats.solve_us += static_cast<long long>(ms_since(t0) * 1000.0);
  return x;
}

void Factorization::solve_in_place(Eigen::Ref<Eigen::MatrixXd> b) const {
  require(b.rows() == impl_->n, "solve_many: block has wrong row count");
  const auto t0 = std::chrono::steady_clock::now();
  Eigen::VectorXd x(impl_->n);
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    impl_->solve_column(x.data(), b.col(j).data());
    b.col(j) = x;
  }
  impl_->stats.solves += b.cols();
  impl_->stats.solve_us += static_cast<long long>(ms_since(t0) * 1000.0);
}

Eigen::MatrixXd Factorization::solve_many(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd x = b;
  solve_in_place(x);
  return x;
}

}  // namespace edd
