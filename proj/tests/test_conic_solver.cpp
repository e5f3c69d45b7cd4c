#include <doctest.h>

#include <sstream>

#include "dbd/conic_solver.hpp"
#include "toy_problems.hpp"

using namespace dbd;

namespace {

// Reference projection: clip the spectrum of a Hermitian matrix.
ComplexMatrix clip_spectrum(const ComplexMatrix& H) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(H);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().adjoint();
}

void check_invariants(const ConicProblem& p, const ConicSolution& s, double tol) {
  CHECK((p.A * s.x - p.b).norm() <= tol * (1.0 + p.b.norm()));
  for (int k = 0; k < static_cast<int>(p.blocks.size()); ++k) CHECK(min_eigenvalue(p.block_matrix(s.x, k)) >= -tol);
}

}  // namespace

TEST_CASE("svec layout preserves the Frobenius inner product") {
  Rng rng(1);
  for (int n : {1, 2, 5, 9}) {
    const ComplexMatrix A = toy::random_hermitian(n, rng), B = toy::random_hermitian(n, rng);
    RealVector a(SvecLayout<cdouble>::size(n)), b(SvecLayout<cdouble>::size(n));
    pack_hermitian(A, a);
    pack_hermitian(B, b);
    CHECK(a.dot(b) == doctest::Approx((A.adjoint() * B).trace().real()).epsilon(1e-12));
    CHECK((unpack_hermitian<ComplexMatrix>(a, n) - A).norm() < 1e-13);
  }
}

TEST_CASE("svec slots are a permutation of 0..n^2-1") {
  using L = SvecLayout<cdouble>;
  const int n = 6;
  std::vector<int> hits(n * n, 0);
  for (int j = 0; j < n; ++j) {
    ++hits[L::diag(j)];
    for (int i = 0; i < j; ++i) ++hits[L::re(i, j)], ++hits[L::im(i, j)];
  }
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  using R = SvecLayout<double>;
  CHECK(R::size(4) == 10);
  CHECK(R::diag(3) == 9);
}

TEST_CASE("PSD projection is the nearest PSD matrix") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const int n = 2 + t % 7;
    const ComplexMatrix H = toy::random_hermitian(n, rng);
    double lmin = 0.0;
    const ComplexMatrix P = psd_project(H, &lmin);
    CHECK((P - clip_spectrum(H)).norm() < 1e-12 * (1.0 + H.norm()));
    CHECK(min_eigenvalue(P) >= -1e-12);
    // H - P is negative semidefinite and orthogonal to P
    CHECK(min_eigenvalue(ComplexMatrix(P - H)) >= -1e-12);
    CHECK(std::abs((P.adjoint() * (H - P)).trace()) < 1e-10);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(H);
    CHECK(lmin == doctest::Approx(es.eigenvalues()(0)));
  }
  ComplexMatrix pd = ComplexMatrix::Identity(3, 3);
  CHECK((psd_project(pd) - pd).norm() == 0.0);
  CHECK(psd_project(ComplexMatrix(-pd)).norm() == 0.0);
}

TEST_CASE("real symmetric blocks project the same way") {
  Eigen::Matrix3d S;
  S << 2, -3, 0, -3, 1, 0, 0, 0, -1;
  const Eigen::Matrix3d P = psd_project(S);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(S);
  const Eigen::Matrix3d ref = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose();
  CHECK((P - ref).norm() < 1e-13);
}

TEST_CASE("minimum eigenvalue programs reach lambda_min") {
  Rng rng(3);
  for (int t = 0; t < 6; ++t) {
    const ComplexMatrix C = toy::random_hermitian(3 + t, rng);
    const ConicProblem p = toy::min_eigenvalue_problem(C);
    const ConicSolution s = solve(p, {.tol = 1e-8});
    REQUIRE(s.report.status == SolveStatus::Optimal);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(C);
    CHECK(s.report.objective_value == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-6));
    check_invariants(p, s, 1e-7);
    // dual: max y s.t. C - y I >= 0
    CHECK(s.y(0) == doctest::Approx(es.eigenvalues()(0)).epsilon(1e-5));
  }
}

TEST_CASE("one-spike atomic norm dual has value |alpha| and peaks at the spike") {
  Rng rng(4);
  for (int t = 0; t < 4; ++t) {
    const int n = 8 + 2 * t;
    const double tau0 = rng.uniform();
    const cdouble alpha = 1.5 * std::polar(1.0, kTwoPi * rng.uniform());
    const ConicProblem p = toy::atomic_norm_dual_1d(toy::spike_samples(n, tau0, alpha));
    const ConicSolution s = solve(p, {.tol = 1e-8});
    REQUIRE(s.report.status == SolveStatus::Optimal);
    CHECK(-s.report.objective_value == doctest::Approx(1.5).epsilon(1e-6));
    const ComplexVector q = toy::free_as_complex(s.x, n);
    CHECK(toy::dual_modulus_1d(q, tau0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(wrapped_difference(toy::dual_argmax_1d(q, 1e-5), tau0)) < 1e-3);
    check_invariants(p, s, 1e-7);
  }
}

TEST_CASE("free-variable least-norm point") {
  // min x0 + x1  s.t.  x0 - x1 = 1,  block [[x_b]] with x_b = 2
  ConicProblem p;
  p.free_dim = 2;
  p.blocks = {1};
  p.c = RealVector::Zero(3);
  p.A.resize(2, 3);
  p.A.insert(0, 0) = 1.0;
  p.A.insert(0, 1) = -1.0;
  p.A.insert(1, 2) = 1.0;
  p.b = RealVector(2);
  p.b << 1.0, 2.0;
  const ConicSolution s = solve(p);
  REQUIRE(s.report.status == SolveStatus::Optimal);
  CHECK(s.x(0) - s.x(1) == doctest::Approx(1.0));
  CHECK(s.x(2) == doctest::Approx(2.0));
}

TEST_CASE("conflicting duplicate rows are reported infeasible") {
  ConicProblem p;
  p.free_dim = 1;
  p.c = RealVector::Ones(1);
  p.A.resize(2, 1);
  p.A.insert(0, 0) = 1.0;
  p.A.insert(1, 0) = 2.0;
  p.b = RealVector(2);
  p.b << 1.0, 3.0;
  CHECK(solve(p).report.status == SolveStatus::Infeasible);
}

TEST_CASE("redundant rows are removed by presolve") {
  ConicProblem p = toy::min_eigenvalue_problem(ComplexMatrix::Identity(3, 3));
  Eigen::SparseMatrix<double> A(3, p.dim());
  for (int j = 0; j < 3; ++j) {
    A.insert(0, SvecLayout<cdouble>::diag(j)) = 1.0;
    A.insert(1, SvecLayout<cdouble>::diag(j)) = -2.0;
  }
  p.A = A;
  p.b = RealVector(3);
  p.b << 1.0, -2.0, 0.0;
  const ConicSolution s = solve(p);
  CHECK(s.report.status == SolveStatus::Optimal);
  CHECK(s.report.removed_rows == 2);
  CHECK(s.report.objective_value == doctest::Approx(1.0));
}

TEST_CASE("primal infeasible cone program diverges to Infeasible or stalls") {
  // Tr X = -1 with X >= 0 has no solution
  ConicProblem p = toy::min_eigenvalue_problem(ComplexMatrix::Identity(2, 2));
  p.b(0) = -1.0;
  const ConicSolution s = solve(p, {.max_iter = 20000});
  CHECK(s.report.status != SolveStatus::Optimal);
}

TEST_CASE("problem validation catches shape errors") {
  ConicProblem p = toy::min_eigenvalue_problem(ComplexMatrix::Identity(2, 2));
  p.c = RealVector::Zero(3);
  CHECK_THROWS_AS(p.validate(), ShapeMismatch);
}

TEST_CASE("iteration history and determinism") {
  Rng rng(5);
  const ConicProblem p = toy::min_eigenvalue_problem(toy::random_hermitian(5, rng));
  SolveOptions o;
  o.history_every = 10;
  const ConicSolution a = solve(p, o), b = solve(p, o);
  CHECK(a.x == b.x);
  CHECK(a.report.iterations == b.report.iterations);
  CHECK(a.report.history.size() == static_cast<std::size_t>(a.report.iterations / 10));
}

TEST_CASE("problem dump round-trips") {
  Rng rng(6);
  const ConicProblem p = toy::atomic_norm_dual_1d(toy::spike_samples(5, 0.3, {0.0, 1.0}));
  std::stringstream ss;
  write_problem_dump(p, ss);
  const ConicProblem r = read_problem_dump(ss);
  CHECK(r.free_dim == p.free_dim);
  CHECK(r.blocks == p.blocks);
  CHECK((r.c - p.c).norm() < 1e-15);
  CHECK((r.b - p.b).norm() < 1e-15);
  CHECK((RealMatrix(r.A) - RealMatrix(p.A)).norm() < 1e-14);
}
