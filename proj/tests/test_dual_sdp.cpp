#include <doctest.h>

#include <set>

#include "dbd/dual_sdp.hpp"

using namespace dbd;

namespace {

RealMatrix shift_matrix(int n, int k) {
  RealMatrix T = RealMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    if (i + k >= 0 && i + k < n) T(i, i + k) = 1.0;
  return T;
}

RealMatrix kron(const RealMatrix& A, const RealMatrix& B) {
  RealMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j) K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
  return K;
}

LiftedProblem scene(int M, int P, int J, int L, std::uint64_t seed) {
  const auto cfg = SceneConfig::with_samples(M, P, J, L, L, seed);
  const auto bases = generate_bases(cfg);
  const auto [r, c] = generate_channels(cfg);
  return synthesize(cfg, r, c, bases);
}

ComplexMatrix random_hermitian(int n, Rng& rng) {
  ComplexMatrix A(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) A(i, j) = rng.complex_normal();
  return (A + A.adjoint()) / 2.0;
}

}  // namespace

TEST_CASE("Toeplitz selector equals the Kronecker product of shift matrices") {
  const int P = 3, M = 5;
  for (int n1 = -(P - 1); n1 <= P - 1; ++n1)
    for (int n2 = -(M - 1); n2 <= M - 1; ++n2) {
      const RealMatrix T = RealMatrix(toeplitz_selector(n1, n2, P, M));
      CHECK((T - kron(shift_matrix(P, n1), shift_matrix(M, n2))).norm() == 0.0);
    }
  CHECK_THROWS_AS(toeplitz_selector(P, 0, P, M), DomainError);
  CHECK_THROWS_AS(toeplitz_selector(0, -M, P, M), DomainError);
}

TEST_CASE("half-plane index set") {
  const auto idx = toeplitz_index_set(9, 13);
  CHECK(idx.size() == 213u);
  CHECK(idx.front() == ToeplitzIndex{0, 0});
  std::set<std::pair<int, int>> seen;
  for (const auto& n : idx) {
    CHECK((n.n1 > 0 || (n.n1 == 0 && n.n2 >= 0)));
    seen.insert({n.n1, n.n2});
    // the mirrored offset is never listed twice
    if (n.n1 != 0 || n.n2 != 0) CHECK(seen.count({-n.n1, -n.n2}) == 0);
  }
  CHECK(seen.size() == idx.size());
  // together with the mirrored offsets the set covers every offset
  CHECK(2 * idx.size() - 1 == static_cast<std::size_t>((2 * 9 - 1) * (2 * 13 - 1)));
}

TEST_CASE("Toeplitz trace matches the dense trace") {
  Rng rng(1);
  const int P = 3, M = 5;
  const ComplexMatrix Q = random_hermitian(P * M, rng);
  for (const auto& n : toeplitz_index_set(P, M)) {
    const RealMatrix T = RealMatrix(toeplitz_selector(n.n1, n.n2, P, M));
    const cdouble dense = (T.cast<cdouble>() * Q).trace();
    CHECK(std::abs(toeplitz_trace(Q, n, P, M) - dense) < 1e-12);
  }
}

TEST_CASE("Fejer-type matrix satisfies the trace constraints and bounds the polynomial") {
  // Q = I / MP gives a(r)^H Q a(r) = 1 for every r
  const int P = 4, M = 7;
  const ComplexMatrix Q = ComplexMatrix::Identity(P * M, P * M) / double(P * M);
  for (const auto& n : toeplitz_index_set(P, M)) {
    const cdouble target = (n.n1 == 0 && n.n2 == 0) ? 1.0 : 0.0;
    CHECK(std::abs(toeplitz_trace(Q, n, P, M) - target) < 1e-15);
  }
}

TEST_CASE("encoding accepts a hand-built feasible point in both couplings") {
  const LiftedProblem prob = scene(7, 3, 2, 1, 3);
  const int MP = prob.config.MP();
  Rng rng(2);
  ComplexVector q(MP);
  for (int v = 0; v < MP; ++v) q(v) = 0.01 * rng.complex_normal();
  const ComplexMatrix Q = ComplexMatrix::Identity(MP, MP) / double(MP);
  for (GramCoupling g : {GramCoupling::Shared, GramCoupling::Separate}) {
    const DualSdpEncoding enc = build_dual_sdp(prob, g);
    const RealVector x = enc.stack(q, Q);
    CHECK((enc.conic.A * x - enc.conic.b).norm() < 1e-13);
    CHECK(enc.conic.c.dot(x) == doctest::Approx(-q.dot(prob.y).real()).epsilon(1e-12));
    CHECK((enc.extract_q(x) - q).norm() == 0.0);
    CHECK((enc.extract_Q(x) - Q).norm() < 1e-15);
    CHECK((enc.extract_Q_comm(x) - Q).norm() < 1e-15);
    const ConstraintCheck ck = check_dual_constraints(enc.spec, q, Q);
    CHECK(ck.toeplitz_residual < 1e-15);
    CHECK(ck.feasible(1e-12) == (ck.min_eig_radar >= -1e-12 && ck.min_eig_comm >= -1e-12));
    // a non-Toeplitz Gram matrix violates the encoding
    ComplexMatrix bad = Q;
    bad(0, 1) = bad(1, 0) = 0.1;
    CHECK((enc.conic.A * enc.stack(q, bad) - enc.conic.b).norm() > 1e-3);
  }
}

TEST_CASE("encoding sizes") {
  const LiftedProblem prob = scene(13, 9, 3, 3, 1);
  const DualSdpEncoding shared = build_dual_sdp(prob);
  CHECK(shared.conic.free_dim == 234);
  CHECK(shared.conic.blocks == std::vector<int>{117, 120, 144});
  CHECK(shared.toeplitz_rows == 425);
  const DualSdpEncoding sep = build_dual_sdp(prob, GramCoupling::Separate);
  CHECK(sep.conic.blocks == std::vector<int>{120, 144});
  CHECK(sep.toeplitz_rows == 850);
  CHECK(sep.radar_block() == 0);
  CHECK(shared.radar_block() == 1);
}

TEST_CASE("radar and comm coefficient rows") {
  const LiftedProblem prob = scene(5, 3, 2, 1, 2);
  const DualSdpSpec spec = make_dual_spec(prob);
  const int v = 7;
  const ComplexVector e = ComplexVector::Unit(spec.MP(), v);
  const ComplexMatrix Xr = spec.radar_coefficients(e);
  CHECK((Xr.row(v) - prob.bases.B.row(v % spec.M)).norm() == 0.0);
  CHECK(Xr.norm() == doctest::Approx(std::sqrt(spec.J)));
  CHECK((spec.comm_coefficients(e).row(v) - prob.bases.D.row(v)).norm() == 0.0);
  CHECK_THROWS_AS(spec.radar_coefficients(ComplexVector::Zero(3)), ShapeMismatch);
}

// Reference optima from an interior-point solver (Clarabel through cvxpy) on
// the identical data, exported from this library for M=5, P=3, J=2, L=Q=2,
// seed 4.
TEST_CASE("small instance matches the interior-point reference value") {
  const LiftedProblem prob = scene(5, 3, 2, 2, 4);
  SolveOptions o;
  o.tol = 1e-8;
  const DualSolution shared = solve_dual(prob, o, GramCoupling::Shared);
  REQUIRE(shared.report.status == SolveStatus::Optimal);
  CHECK(shared.objective == doctest::Approx(2.560566286835443).epsilon(2e-6));
  const DualSolution sep = solve_dual(prob, o, GramCoupling::Separate);
  REQUIRE(sep.report.status == SolveStatus::Optimal);
  CHECK(sep.objective == doctest::Approx(2.7922420617339205).epsilon(2e-6));
  // the shared Gram matrix is a restriction of the separate one
  CHECK(shared.objective <= sep.objective + 1e-6);
  for (const DualSolution* s : {&shared, &sep}) {
    const ConstraintCheck ck = check_dual_constraints(make_dual_spec(prob), s->q, s->Q, s->Q_comm);
    CHECK(ck.feasible(1e-6));
    CHECK(ck.objective == doctest::Approx(s->objective).epsilon(1e-12));
  }
  // weak duality: never above the l1 norm of the true amplitudes
  CHECK(sep.objective <= 4.0 + 1e-6);
}
