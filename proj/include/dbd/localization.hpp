#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbd/dual_sdp.hpp"
#include "dbd/signal_model.hpp"

namespace dbd {

enum class Side { Radar, Comm };

std::string to_string(Side side);

/// f(tau, nu) = X^H a(tau, nu); X is MP x J (radar) or MP x PJ (comm),
/// row v = conj(q_v) times the basis row of sample v.
struct DualPolynomial {
  Side side = Side::Radar;
  int M = 0;
  int P = 0;
  ComplexMatrix coefficients;

  int N() const { return (M - 1) / 2; }
  int dim() const { return static_cast<int>(coefficients.cols()); }
};

DualPolynomial make_dual_polynomial(const DualSdpSpec& spec, const ComplexVector& q, Side side);
DualPolynomial make_dual_polynomial(const LiftedProblem& problem, const ComplexVector& q, Side side);

ComplexVector eval_polynomial(const DualPolynomial& poly, double tau, double nu);
double eval_norm(const DualPolynomial& poly, double tau, double nu);

/// Number of grid nodes per axis for a given step: ceil(1 / step).
int grid_size(double grid_step);

/// ||f|| sampled at (i * step, k * step), stored as values(i, k) with i along tau.
struct NormGrid {
  double step = 0.0;
  RealMatrix values;

  int size() const { return static_cast<int>(values.rows()); }
  double tau(int i) const { return i * step; }
  double nu(int k) const { return k * step; }
};

/// Batch evaluation on the uniform grid. Per delay row the Doppler dependence
/// collapses to a P-term cosine series, so each node costs O(P).
NormGrid evaluate_norm_grid(const DualPolynomial& poly, double grid_step, int threads = 0);

struct RefineResult {
  double tau = 0.0;
  double nu = 0.0;
  double norm = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Damped Newton ascent of ||f||^2 on the torus. Directions of vanishing
/// curvature are left untouched; the total move is clamped to `max_move`
/// per coordinate.
RefineResult refine_peak(const DualPolynomial& poly, double tau0, double nu0, double max_move = 1e-3,
                         int max_iter = 50);

struct Peak {
  double tau = 0.0;
  double nu = 0.0;
  double norm = 0.0;
  int cells = 0;          // size of the connected component
  int local_maxima = 0;   // grid local maxima inside the component
  bool merged = false;    // several maxima, or norm above 1 + tol_peak
  bool ridge = false;     // component wraps around the whole Doppler axis
  bool refined = false;   // refine_peak converged
};

struct PeakSearchOptions {
  double grid_step = 1e-3;
  double tol_peak = 1e-2;
  bool refine = true;
  int threads = 0;
};

std::vector<Peak> find_peaks(const DualPolynomial& poly, const PeakSearchOptions& options = {});
/// Same search on a precomputed grid.
std::vector<Peak> find_peaks(const DualPolynomial& poly, const NormGrid& grid, const PeakSearchOptions& options = {});

class AmbiguousScaling : public std::runtime_error {
 public:
  AmbiguousScaling(const std::string& what, int rank, int unknowns)
      : std::runtime_error(what), rank(rank), unknowns(unknowns) {}
  int rank;
  int unknowns;
};

struct AmplitudeEstimate {
  std::vector<cdouble> radar;
  std::vector<cdouble> comm;
  ComplexVector u;
  ComplexVector v;
  double relative_residual = 0.0;
};

/// Least squares for the grouped unknowns alpha_l u and alpha_q v with the
/// delay-Doppler supports fixed, followed by a rank-one split. The scale is
/// fixed by ||u|| = ||v|| = 1 with the first nonzero entry real positive.
AmplitudeEstimate recover_amplitudes(const LiftedProblem& problem, const std::vector<DelayDoppler>& est_r,
                                     const std::vector<DelayDoppler>& est_c);

/// Fixes the gauge of a coefficient vector in place; returns the removed factor.
cdouble normalize_gauge(ComplexVector& x);

/// Minimum-cost assignment; returns, for each row, the matched column or -1.
std::vector<int> min_cost_assignment(const RealMatrix& cost);

struct MatchResult {
  std::vector<int> estimate_of_truth;  // -1 when unmatched
  std::vector<double> errors;          // wrap-around l2, per true tuple
  bool success = false;                // counts agree and every error < threshold
};

MatchResult match_estimates(const std::vector<DelayDoppler>& truth, const std::vector<DelayDoppler>& estimates,
                            double threshold);

struct SideCertificate {
  std::vector<double> support_norms;
  std::vector<double> alignment;  // |<u, f>| / ||f||, when the coefficient vector is known
  double grid_max = 0.0;
  double off_support_max = 0.0;
  bool support_ok = false;
  bool bounded_ok = false;      // grid max <= 1 + tol
  bool off_support_ok = false;  // max outside the exclusion balls < 1 - tol
  bool passed() const { return support_ok && bounded_ok && off_support_ok; }
};

struct CertificateReport {
  SideCertificate radar;
  SideCertificate comm;
  double tol = 0.0;
  double exclusion_radius = 0.0;
  bool passed() const { return radar.passed() && comm.passed(); }
};

SideCertificate verify_side(const DualPolynomial& poly, const NormGrid& grid, const std::vector<DelayDoppler>& truth,
                            double tol, double exclusion_radius, const ComplexVector* coefficients = nullptr);

/// Checks unit norm on the true support, the global bound and the strict
/// off-support bound (outside balls of radius 2 * grid_step).
CertificateReport verify_certificate(const ComplexVector& q, const LiftedProblem& problem, double tol,
                                     double grid_step = 1e-3, int threads = 0);

struct SideResult {
  DelayDopplerChannel estimates;
  std::vector<double> peak_norms;
  std::vector<Peak> peaks;
  std::optional<MatchResult> match;
  bool success = false;
};

struct LocalizationOptions {
  PeakSearchOptions peaks;
  double success_threshold = 1e-3;
};

struct LocalizationResult {
  SideResult radar;
  SideResult comm;
  double grid_step = 0.0;
  double amplitude_residual = -1.0;  // -1 when amplitude recovery was skipped
  std::string amplitude_note;
  NormGrid radar_grid;
  NormGrid comm_grid;
};

LocalizationResult localize(const LiftedProblem& problem, const ComplexVector& q, const LocalizationOptions& options = {});

}  // namespace dbd
