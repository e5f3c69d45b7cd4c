#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "dbd/localization.hpp"

using namespace dbd;

namespace {

LiftedProblem scene(int M, int P, int J, int L, int Q, std::uint64_t seed) {
  const auto cfg = SceneConfig::with_samples(M, P, J, L, Q, seed);
  const auto bases = generate_bases(cfg);
  const auto [r, c] = generate_channels(cfg);
  return synthesize(cfg, r, c, bases);
}

// Radar-type polynomial whose norm is the normalized Dirichlet kernel of the
// given atoms, so every isolated atom is a unit-height peak.
DualPolynomial kernel_polynomial(const SceneConfig& cfg, const std::vector<DelayDoppler>& atoms) {
  DualPolynomial poly;
  poly.side = Side::Radar;
  poly.M = cfg.M;
  poly.P = cfg.P;
  ComplexVector u = ComplexVector::Zero(cfg.J);
  u(0) = 1.0;
  ComplexVector s = ComplexVector::Zero(cfg.MP());
  for (const auto& a : atoms) s += steering_vector(a.tau, a.nu, cfg);
  poly.coefficients = s * u.adjoint() / double(cfg.MP());
  return poly;
}

ComplexVector random_q(int n, Rng& rng) {
  ComplexVector q(n);
  for (int i = 0; i < n; ++i) q(i) = rng.complex_normal();
  return q;
}

}  // namespace

TEST_CASE("grid size and step validation") {
  CHECK(grid_size(1e-3) == 1000);
  CHECK(grid_size(0.1) == 10);
  CHECK(grid_size(0.03) == 34);
  CHECK_THROWS_AS(grid_size(0.0), DomainError);
  CHECK_THROWS_AS(grid_size(0.2), DomainError);
}

TEST_CASE("zero multiplier gives a zero polynomial and no peaks") {
  const LiftedProblem prob = scene(5, 3, 2, 1, 1, 1);
  for (Side side : {Side::Radar, Side::Comm}) {
    const DualPolynomial poly = make_dual_polynomial(prob, ComplexVector::Zero(prob.config.MP()), side);
    CHECK(eval_norm(poly, 0.3, 0.7) == 0.0);
    CHECK(find_peaks(poly, {.grid_step = 1e-2}).empty());
  }
}

TEST_CASE("unit multiplier gives norm sqrt(J) everywhere") {
  const LiftedProblem prob = scene(7, 3, 3, 1, 1, 2);
  const ComplexVector e = ComplexVector::Unit(prob.config.MP(), 9);
  for (Side side : {Side::Radar, Side::Comm}) {
    const DualPolynomial poly = make_dual_polynomial(prob, e, side);
    for (double t : {0.0, 0.37, 0.91}) CHECK(eval_norm(poly, t, 1.0 - t) == doctest::Approx(std::sqrt(3.0)));
  }
}

TEST_CASE("radar polynomial matches the direct sum") {
  // f(tau, nu) = sum_v q_v conj(b_v) a_v(tau, nu)
  const LiftedProblem prob = scene(7, 3, 2, 1, 1, 3);
  Rng rng(4);
  const ComplexVector q = random_q(prob.config.MP(), rng);
  const DualPolynomial poly = make_dual_polynomial(prob, q, Side::Radar);
  const double tau = 0.31, nu = 0.64;
  const ComplexVector a = steering_vector(tau, nu, prob.config);
  ComplexVector direct = ComplexVector::Zero(prob.config.J);
  for (int v = 0; v < prob.config.MP(); ++v)
    direct += q(v) * prob.bases.B.row(v % prob.config.M).adjoint() * a(v);
  CHECK((eval_polynomial(poly, tau, nu) - direct).norm() < 1e-12 * direct.norm());
}

TEST_CASE("batch grid equals pointwise evaluation") {
  const LiftedProblem prob = scene(9, 5, 2, 2, 2, 5);
  Rng rng(6);
  const ComplexVector q = random_q(prob.config.MP(), rng);
  for (Side side : {Side::Radar, Side::Comm}) {
    const DualPolynomial poly = make_dual_polynomial(prob, q, side);
    const NormGrid g1 = evaluate_norm_grid(poly, 1e-2, 1);
    const NormGrid g3 = evaluate_norm_grid(poly, 1e-2, 3);
    CHECK(g1.size() == 100);
    CHECK(g1.values == g3.values);
    for (int t = 0; t < 20; ++t) {
      const int i = static_cast<int>(rng.uniform() * 100), k = static_cast<int>(rng.uniform() * 100);
      CHECK(g1.values(i, k) == doctest::Approx(eval_norm(poly, g1.tau(i), g1.nu(k))).epsilon(1e-10));
    }
  }
}

TEST_CASE("norm is invariant to a global phase of the multiplier") {
  const LiftedProblem prob = scene(7, 3, 2, 1, 1, 7);
  Rng rng(8);
  const ComplexVector q = random_q(prob.config.MP(), rng);
  const ComplexVector qr = q * std::polar(1.0, 1.234);
  for (Side side : {Side::Radar, Side::Comm}) {
    const auto p1 = make_dual_polynomial(prob, q, side), p2 = make_dual_polynomial(prob, qr, side);
    CHECK(eval_norm(p1, 0.2, 0.9) == doctest::Approx(eval_norm(p2, 0.2, 0.9)).epsilon(1e-13));
  }
}

TEST_CASE("communication norm does not depend on Doppler") {
  const LiftedProblem prob = scene(7, 5, 2, 1, 1, 9);
  Rng rng(10);
  const ComplexVector q = random_q(prob.config.MP(), rng);
  const DualPolynomial poly = make_dual_polynomial(prob, q, Side::Comm);
  for (int t = 0; t < 10; ++t) {
    const double tau = rng.uniform();
    CHECK(eval_norm(poly, tau, rng.uniform()) == doctest::Approx(eval_norm(poly, tau, rng.uniform())).epsilon(1e-12));
  }
}

TEST_CASE("Doppler-flat peaks are flagged as ridges") {
  const LiftedProblem prob = scene(7, 5, 2, 1, 1, 11);
  Rng rng(12);
  ComplexVector q = random_q(prob.config.MP(), rng);
  const double peak = evaluate_norm_grid(make_dual_polynomial(prob, q, Side::Comm), 1e-2).values.maxCoeff();
  q /= peak;
  const auto peaks = find_peaks(make_dual_polynomial(prob, q, Side::Comm), {.grid_step = 1e-2});
  REQUIRE(!peaks.empty());
  for (const Peak& p : peaks) {
    CHECK(p.ridge);
    CHECK_FALSE(p.merged);
    CHECK(p.cells % 100 == 0);
  }
}

TEST_CASE("isolated peak is found and refined off the grid") {
  const auto cfg = SceneConfig::with_samples(13, 9, 3, 1, 1, 0);
  const DelayDoppler truth{0.23456789, 0.71234567};
  const DualPolynomial poly = kernel_polynomial(cfg, {truth});
  CHECK(eval_norm(poly, truth.tau, truth.nu) == doctest::Approx(1.0).epsilon(1e-14));
  const auto peaks = find_peaks(poly, {.grid_step = 1e-3});
  REQUIRE(peaks.size() == 1u);
  const Peak& p = peaks[0];
  CHECK(p.refined);
  CHECK_FALSE(p.merged);
  CHECK_FALSE(p.ridge);
  CHECK(p.local_maxima == 1);
  CHECK(std::abs(wrapped_difference(p.tau, truth.tau)) < 1e-9);
  CHECK(std::abs(wrapped_difference(p.nu, truth.nu)) < 1e-9);
  CHECK(p.norm == doctest::Approx(1.0).epsilon(1e-12));
  // refinement started at the optimum stays there
  const RefineResult r = refine_peak(poly, truth.tau, truth.nu);
  CHECK(r.converged);
  CHECK(std::abs(r.tau - truth.tau) < 1e-12);
  CHECK(std::abs(r.nu - truth.nu) < 1e-12);
}

TEST_CASE("peaks across the wrap-around seam form one component") {
  const auto cfg = SceneConfig::with_samples(13, 9, 1, 1, 1, 0);
  const DualPolynomial poly = kernel_polynomial(cfg, {{0.0002, 0.9999}});
  const auto peaks = find_peaks(poly, {.grid_step = 1e-3});
  REQUIRE(peaks.size() == 1u);
  CHECK(torus_distance_l2({peaks[0].tau, peaks[0].nu}, {0.0002, 0.9999}) < 1e-9);
}

TEST_CASE("two separated peaks are both reported, sorted by delay") {
  const auto cfg = SceneConfig::with_samples(13, 9, 1, 2, 1, 0);
  const DualPolynomial poly = kernel_polynomial(cfg, {{0.7, 0.2}, {0.2, 0.6}});
  const auto peaks = find_peaks(poly, {.grid_step = 1e-3});
  REQUIRE(peaks.size() == 2u);
  CHECK(peaks[0].tau < peaks[1].tau);
  CHECK(std::abs(peaks[0].tau - 0.2) < 1e-3);
  CHECK(std::abs(peaks[1].nu - 0.2) < 1e-3);
}

TEST_CASE("colliding atoms are flagged as merged") {
  const auto cfg = SceneConfig::with_samples(13, 9, 1, 2, 1, 0);
  const DualPolynomial poly = kernel_polynomial(cfg, {{0.5, 0.5}, {0.5004, 0.5}});
  const auto peaks = find_peaks(poly, {.grid_step = 1e-3});
  REQUIRE(peaks.size() == 1u);
  CHECK(peaks[0].merged);
  CHECK(peaks[0].norm > 1.5);
}

TEST_CASE("peak tolerance validation") {
  const auto cfg = SceneConfig::with_samples(5, 3, 1, 1, 1, 0);
  const DualPolynomial poly = kernel_polynomial(cfg, {{0.5, 0.5}});
  CHECK_THROWS_AS(find_peaks(poly, {.grid_step = 1e-2, .tol_peak = 0.0}), DomainError);
  CHECK_THROWS_AS(find_peaks(poly, {.grid_step = 1e-2, .tol_peak = 0.5}), DomainError);
}

TEST_CASE("Hungarian assignment agrees with brute force") {
  Rng rng(13);
  for (int t = 0; t < 30; ++t) {
    const int rows = 1 + t % 5, cols = 1 + (t / 5) % 5;
    RealMatrix C(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) C(i, j) = rng.uniform();
    const std::vector<int> a = min_cost_assignment(C);
    REQUIRE(a.size() == static_cast<std::size_t>(rows));
    double cost = 0.0;
    int assigned = 0;
    std::vector<int> used(cols, 0);
    for (int i = 0; i < rows; ++i)
      if (a[i] >= 0) cost += C(i, a[i]), ++assigned, ++used[a[i]];
    CHECK(assigned == std::min(rows, cols));
    CHECK(*std::max_element(used.begin(), used.end()) <= 1);
    // brute force over permutations of the longer side
    const bool wide = rows <= cols;
    std::vector<int> perm(wide ? cols : rows);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double c = 0.0;
      for (int k = 0; k < std::min(rows, cols); ++k) c += wide ? C(k, perm[k]) : C(perm[k], k);
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(cost == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("matching uses wrap-around distance and requires equal counts") {
  const std::vector<DelayDoppler> truth{{0.9998, 0.5}, {0.3, 0.0001}};
  const MatchResult m = match_estimates(truth, {{0.3, 0.9999}, {0.0002, 0.5}}, 1e-3);
  CHECK(m.success);
  CHECK(m.estimate_of_truth == std::vector<int>{1, 0});
  CHECK(m.errors[0] == doctest::Approx(4e-4).epsilon(1e-6));
  const MatchResult fewer = match_estimates(truth, {{0.3, 0.0}}, 1e-3);
  CHECK_FALSE(fewer.success);
  CHECK(fewer.estimate_of_truth[0] == -1);
  CHECK(std::isinf(fewer.errors[0]));
  const MatchResult far = match_estimates(truth, {{0.3, 0.0}, {0.1, 0.5}}, 1e-3);
  CHECK_FALSE(far.success);
}

TEST_CASE("gauge normalization") {
  ComplexVector x(3);
  x << 0.0, cdouble(0.0, 2.0), 1.0;
  const cdouble g = normalize_gauge(x);
  CHECK(x.norm() == doctest::Approx(1.0));
  CHECK(x(1).imag() == doctest::Approx(0.0));
  CHECK(x(1).real() > 0.0);
  CHECK(std::abs(g - cdouble(0.0, std::sqrt(5.0))) < 1e-14);
}

TEST_CASE("amplitude recovery on the true support reproduces the products") {
  const LiftedProblem prob = scene(9, 5, 2, 2, 1, 14);
  const auto& [r, c] = *prob.ground_truth;
  const AmplitudeEstimate est = recover_amplitudes(prob, r.points(), c.points());
  CHECK(est.relative_residual < 1e-10);
  for (std::size_t l = 0; l < r.size(); ++l) {
    const ComplexVector truth = r.amplitudes[l] * prob.bases.u;
    CHECK((est.radar[l] * est.u - truth).norm() < 1e-8);
  }
  for (std::size_t k = 0; k < c.size(); ++k) {
    const ComplexVector truth = c.amplitudes[k] * prob.bases.v;
    CHECK((est.comm[k] * est.v - truth).norm() < 1e-8);
  }
  CHECK(est.u.norm() == doctest::Approx(1.0));
  CHECK(est.v.norm() == doctest::Approx(1.0));
}

TEST_CASE("amplitude recovery with a single pulse coefficient") {
  const LiftedProblem prob = scene(9, 3, 1, 1, 1, 15);
  const auto& [r, c] = *prob.ground_truth;
  const AmplitudeEstimate est = recover_amplitudes(prob, r.points(), c.points());
  CHECK(est.relative_residual < 1e-10);
  CHECK(std::abs(est.radar[0] * est.u(0) - r.amplitudes[0] * prob.bases.u(0)) < 1e-8);
}

TEST_CASE("perturbed supports leave a visible residual") {
  const LiftedProblem prob = scene(9, 5, 2, 2, 1, 16);
  const auto& [r, c] = *prob.ground_truth;
  auto pr = r.points();
  pr[0].tau = std::fmod(pr[0].tau + 0.05, 1.0);
  CHECK(recover_amplitudes(prob, pr, c.points()).relative_residual > 1e-2);
}

TEST_CASE("too many unknowns raise AmbiguousScaling") {
  const LiftedProblem prob = scene(5, 3, 3, 1, 2, 17);
  const auto& [r, c] = *prob.ground_truth;
  try {
    recover_amplitudes(prob, r.points(), c.points());
    FAIL("expected AmbiguousScaling");
  } catch (const AmbiguousScaling& e) {
    CHECK(e.unknowns == 3 + 2 * 9);
  }
  // coincident radar supports make the system rank deficient
  const LiftedProblem p2 = scene(9, 5, 2, 2, 1, 18);
  auto dup = p2.ground_truth->first.points();
  dup[1] = dup[0];
  CHECK_THROWS_AS(recover_amplitudes(p2, dup, p2.ground_truth->second.points()), AmbiguousScaling);
}

TEST_CASE("zero multiplier fails the support check and passes the off-support check") {
  const LiftedProblem prob = scene(7, 3, 2, 1, 1, 19);
  const CertificateReport rep = verify_certificate(ComplexVector::Zero(prob.config.MP()), prob, 1e-3, 1e-2);
  for (const SideCertificate* s : {&rep.radar, &rep.comm}) {
    CHECK_FALSE(s->support_ok);
    CHECK(s->bounded_ok);
    CHECK(s->off_support_ok);
    CHECK_FALSE(s->passed());
  }
  CHECK(rep.exclusion_radius == doctest::Approx(2e-2));
}

TEST_CASE("kernel polynomial certifies its own support on the radar side") {
  const auto cfg = SceneConfig::with_samples(13, 9, 1, 1, 1, 0);
  const DelayDoppler truth{0.4, 0.3};
  const DualPolynomial poly = kernel_polynomial(cfg, {truth});
  const NormGrid grid = evaluate_norm_grid(poly, 1e-2);
  const SideCertificate s = verify_side(poly, grid, {truth}, 1e-3, 2e-1);
  CHECK(s.support_ok);
  CHECK(s.bounded_ok);
  CHECK(s.off_support_ok);
  CHECK(s.support_norms[0] == doctest::Approx(1.0));
}
