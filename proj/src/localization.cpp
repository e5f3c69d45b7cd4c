#include "dbd/localization.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <thread>

#include <Eigen/QR>
#include <Eigen/SVD>

namespace dbd {

std::string to_string(Side side) { return side == Side::Radar ? "radar" : "comm"; }

DualPolynomial make_dual_polynomial(const DualSdpSpec& spec, const ComplexVector& q, Side side) {
  DualPolynomial poly;
  poly.side = side;
  poly.M = spec.M;
  poly.P = spec.P;
  poly.coefficients = side == Side::Radar ? spec.radar_coefficients(q) : spec.comm_coefficients(q);
  return poly;
}

DualPolynomial make_dual_polynomial(const LiftedProblem& problem, const ComplexVector& q, Side side) {
  return make_dual_polynomial(make_dual_spec(problem), q, side);
}

namespace {

// Per-sample exponents (n, p) in index-map order.
struct SampleGrid {
  RealVector n;
  RealVector p;
};

SampleGrid sample_exponents(int M, int P) {
  const int N = (M - 1) / 2;
  SampleGrid s{RealVector(M * P), RealVector(M * P)};
  for (int p = 0; p < P; ++p)
    for (int m = 0; m < M; ++m) {
      s.n(p * M + m) = m - N;
      s.p(p * M + m) = p;
    }
  return s;
}

ComplexVector phases(const SampleGrid& s, double tau, double nu) {
  ComplexVector a(s.n.size());
  for (Eigen::Index v = 0; v < a.size(); ++v) a(v) = std::polar(1.0, kTwoPi * (tau * s.n(v) + nu * s.p(v)));
  return a;
}

// phi = ||f||^2 with gradient and Hessian in (tau, nu).
struct LocalModel {
  double phi = 0.0;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
};

LocalModel local_model(const DualPolynomial& poly, const SampleGrid& s, double tau, double nu) {
  const ComplexVector a = phases(s, tau, nu);
  const auto Y = poly.coefficients.conjugate();
  const cdouble j2pi(0.0, kTwoPi);
  const ComplexVector an = a.cwiseProduct(s.n.cast<cdouble>()) * j2pi;
  const ComplexVector ap = a.cwiseProduct(s.p.cast<cdouble>()) * j2pi;
  const ComplexVector f = Y.transpose() * a;
  const ComplexVector ft = Y.transpose() * an;
  const ComplexVector fn = Y.transpose() * ap;
  const ComplexVector ftt = Y.transpose() * an.cwiseProduct(s.n.cast<cdouble>()) * j2pi;
  const ComplexVector fnn = Y.transpose() * ap.cwiseProduct(s.p.cast<cdouble>()) * j2pi;
  const ComplexVector ftn = Y.transpose() * an.cwiseProduct(s.p.cast<cdouble>()) * j2pi;
  LocalModel m;
  m.phi = f.squaredNorm();
  m.grad << 2.0 * f.dot(ft).real(), 2.0 * f.dot(fn).real();
  m.hess(0, 0) = 2.0 * (ft.squaredNorm() + f.dot(ftt).real());
  m.hess(1, 1) = 2.0 * (fn.squaredNorm() + f.dot(fnn).real());
  m.hess(0, 1) = m.hess(1, 0) = 2.0 * (fn.dot(ft).real() + f.dot(ftn).real());
  return m;
}

}  // namespace

ComplexVector eval_polynomial(const DualPolynomial& poly, double tau, double nu) {
  const SampleGrid s = sample_exponents(poly.M, poly.P);
  return poly.coefficients.adjoint() * phases(s, tau, nu);
}

double eval_norm(const DualPolynomial& poly, double tau, double nu) { return eval_polynomial(poly, tau, nu).norm(); }

int grid_size(double grid_step) {
  if (!(grid_step > 0.0) || grid_step > 0.1) throw DomainError("grid_step must lie in (0, 0.1]");
  return static_cast<int>(std::ceil(1.0 / grid_step - 1e-9));
}

NormGrid evaluate_norm_grid(const DualPolynomial& poly, double grid_step, int threads) {
  const int K = grid_size(grid_step);
  const int M = poly.M, P = poly.P, N = poly.N(), dim = poly.dim();
  NormGrid grid{grid_step, RealMatrix(K, K)};
  const ComplexMatrix Y = poly.coefficients.conjugate();

  // e^{j 2 pi nu_k d}, d = 1..P-1
  ComplexMatrix doppler(K, std::max(P - 1, 1));
  for (int k = 0; k < K; ++k)
    for (int d = 1; d < P; ++d) doppler(k, d - 1) = std::polar(1.0, kTwoPi * grid.nu(k) * d);

  auto rows = [&](int begin, int end) {
    ComplexVector e(M);
    ComplexMatrix C(P, dim);
    ComplexVector g(P);
    for (int i = begin; i < end; ++i) {
      for (int m = 0; m < M; ++m) e(m) = std::polar(1.0, kTwoPi * grid.tau(i) * (m - N));
      for (int p = 0; p < P; ++p) C.row(p) = e.transpose() * Y.middleRows(p * M, M);
      const ComplexMatrix G = C * C.adjoint();
      for (int d = 0; d < P; ++d) g(d) = G.diagonal(-d).sum();
      for (int k = 0; k < K; ++k) {
        double s = g(0).real();
        for (int d = 1; d < P; ++d) s += 2.0 * (doppler(k, d - 1) * g(d)).real();
        grid.values(i, k) = std::sqrt(std::max(s, 0.0));
      }
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, K);
  if (workers == 1) {
    rows(0, K);
    return grid;
  }
  std::vector<std::thread> pool;
  const int chunk = (K + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int b = w * chunk, e = std::min(K, b + chunk);
    if (b < e) pool.emplace_back(rows, b, e);
  }
  for (auto& t : pool) t.join();
  return grid;
}

RefineResult refine_peak(const DualPolynomial& poly, double tau0, double nu0, double max_move, int max_iter) {
  const SampleGrid s = sample_exponents(poly.M, poly.P);
  const double scale = kTwoPi * std::max(poly.N(), poly.P - 1);
  RefineResult out;
  out.tau = tau0;
  out.nu = nu0;
  Eigen::Vector2d x(tau0, nu0);
  const Eigen::Vector2d x0 = x;
  LocalModel m = local_model(poly, s, x(0), x(1));
  const double gtol = 1e-12 * scale * std::max(m.phi, 1.0);

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it;
    if (m.grad.norm() <= gtol) {
      out.converged = true;
      break;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m.hess);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    for (int i = 0; i < 2; ++i) {
      const double lam = es.eigenvalues()(i);
      if (std::abs(lam) <= 1e-9 * lmax) continue;
      step += es.eigenvectors().col(i) * (es.eigenvectors().col(i).dot(m.grad) / std::abs(lam));
    }
    if (step.squaredNorm() == 0.0) {
      out.converged = true;
      break;
    }
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      Eigen::Vector2d trial = x + t * step;
      trial = x0 + (trial - x0).cwiseMax(-max_move).cwiseMin(max_move);
      const LocalModel mt = local_model(poly, s, trial(0), trial(1));
      if (mt.phi >= m.phi) {
        moved = (trial - x).norm() > 0.0;
        x = trial;
        m = mt;
        break;
      }
    }
    if (!moved) {
      out.converged = m.grad.norm() <= 1e3 * gtol;
      break;
    }
    out.iterations = it + 1;
  }
  if (!out.converged && m.grad.norm() <= gtol) out.converged = true;
  out.gradient_norm = m.grad.norm();
  if (!out.converged) {
    out.norm = std::sqrt(local_model(poly, s, tau0, nu0).phi);
    return out;
  }
  out.tau = wrap_unit(x(0));
  out.nu = wrap_unit(x(1));
  out.norm = std::sqrt(m.phi);
  return out;
}

std::vector<Peak> find_peaks(const DualPolynomial& poly, const PeakSearchOptions& options) {
  return find_peaks(poly, evaluate_norm_grid(poly, options.grid_step, options.threads), options);
}

std::vector<Peak> find_peaks(const DualPolynomial& poly, const NormGrid& grid, const PeakSearchOptions& options) {
  if (!(options.tol_peak > 0.0 && options.tol_peak < 0.1)) throw DomainError("tol_peak must lie in (0, 0.1)");
  const int K = grid.size();
  const double level = 1.0 - options.tol_peak;
  const RealMatrix& val = grid.values;
  auto wrap = [K](int i) { return (i % K + K) % K; };
  // strict order with index tie-break so plateaus yield one maximum
  auto greater = [&](int i, int k, int i2, int k2) {
    if (val(i, k) != val(i2, k2)) return val(i, k) > val(i2, k2);
    return i * K + k > i2 * K + k2;
  };

  std::vector<int> label(static_cast<std::size_t>(K) * K, -1);
  std::vector<Peak> peaks;
  std::deque<std::pair<int, int>> queue;
  for (int i0 = 0; i0 < K; ++i0) {
    for (int k0 = 0; k0 < K; ++k0) {
      if (val(i0, k0) < level || label[i0 * K + k0] >= 0) continue;
      const int id = static_cast<int>(peaks.size());
      Peak pk;
      int best_i = i0, best_k = k0;
      std::vector<char> tau_hit(K, 0), nu_hit(K, 0);
      label[i0 * K + k0] = id;
      queue.emplace_back(i0, k0);
      while (!queue.empty()) {
        const auto [i, k] = queue.front();
        queue.pop_front();
        ++pk.cells;
        tau_hit[i] = nu_hit[k] = 1;
        if (greater(i, k, best_i, best_k)) best_i = i, best_k = k;
        bool is_max = true;
        for (int di = -1; di <= 1; ++di)
          for (int dk = -1; dk <= 1; ++dk) {
            if (di == 0 && dk == 0) continue;
            const int ni = wrap(i + di), nk = wrap(k + dk);
            if (greater(ni, nk, i, k)) is_max = false;
            if (val(ni, nk) >= level && label[ni * K + nk] < 0) {
              label[ni * K + nk] = id;
              queue.emplace_back(ni, nk);
            }
          }
        if (is_max) ++pk.local_maxima;
      }
      pk.ridge = std::count(nu_hit.begin(), nu_hit.end(), 1) == K || std::count(tau_hit.begin(), tau_hit.end(), 1) == K;
      pk.tau = grid.tau(best_i);
      pk.nu = grid.nu(best_k);
      pk.norm = val(best_i, best_k);
      peaks.push_back(pk);
    }
  }

  for (Peak& pk : peaks) {
    if (options.refine) {
      const RefineResult r = refine_peak(poly, pk.tau, pk.nu, grid.step);
      pk.refined = r.converged;
      if (r.converged) {
        pk.tau = r.tau;
        pk.nu = r.nu;
        pk.norm = r.norm;
      }
    }
    pk.merged = !pk.ridge && (pk.local_maxima > 1 || pk.norm > 1.0 + options.tol_peak);
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.tau != b.tau ? a.tau < b.tau : a.nu < b.nu;
  });
  return peaks;
}

cdouble normalize_gauge(ComplexVector& x) {
  const double nrm = x.norm();
  if (nrm == 0.0) return 1.0;
  Eigen::Index lead = 0;
  while (lead < x.size() && std::abs(x(lead)) <= 1e-12 * nrm) ++lead;
  const cdouble factor = nrm * std::polar(1.0, std::arg(x(lead)));
  x /= factor;
  x(lead) = std::abs(x(lead));
  return factor;
}

namespace {

// Splits stacked grouped unknowns W = [w_1 .. w_k] into alpha and a unit vector.
void split_rank_one(const ComplexMatrix& W, ComplexVector& coeff, std::vector<cdouble>& alpha) {
  alpha.clear();
  if (W.cols() == 0) {
    coeff = ComplexVector::Zero(W.rows());
    return;
  }
  Eigen::JacobiSVD<ComplexMatrix> svd(W, Eigen::ComputeThinU);
  coeff = svd.matrixU().col(0);
  normalize_gauge(coeff);
  for (Eigen::Index l = 0; l < W.cols(); ++l) alpha.push_back(coeff.dot(W.col(l)));
}

}  // namespace

AmplitudeEstimate recover_amplitudes(const LiftedProblem& problem, const std::vector<DelayDoppler>& est_r,
                                     const std::vector<DelayDoppler>& est_c) {
  const SceneConfig& cfg = problem.config;
  const int MP = cfg.MP(), J = cfg.J, PJ = cfg.PJ();
  const int nr = static_cast<int>(est_r.size()) * J;
  const int unknowns = nr + static_cast<int>(est_c.size()) * PJ;
  if (unknowns == 0) throw AmbiguousScaling("no supports to fit", 0, 0);
  if (unknowns > MP) throw AmbiguousScaling("more unknowns than samples", MP, unknowns);

  const SampleGrid s = sample_exponents(cfg.M, cfg.P);
  ComplexMatrix Phi = ComplexMatrix::Zero(MP, unknowns);
  for (std::size_t l = 0; l < est_r.size(); ++l) {
    const ComplexVector a = phases(s, est_r[l].tau, est_r[l].nu).conjugate();
    for (int v = 0; v < MP; ++v)
      Phi.block(v, l * J, 1, J) = a(v) * problem.bases.B.row(v % cfg.M);
  }
  for (std::size_t c = 0; c < est_c.size(); ++c) {
    const ComplexVector a = phases(s, est_c[c].tau, est_c[c].nu).conjugate();
    for (int v = 0; v < MP; ++v)
      Phi.block(v, nr + c * PJ, 1, PJ) = a(v) * problem.bases.D.row(v);
  }
  Eigen::ColPivHouseholderQR<ComplexMatrix> qr(Phi);
  qr.setThreshold(1e-10);
  if (qr.rank() < unknowns) throw AmbiguousScaling("rank-deficient amplitude system", static_cast<int>(qr.rank()), unknowns);
  const ComplexVector w = qr.solve(problem.y);

  AmplitudeEstimate out;
  out.relative_residual = (problem.y - Phi * w).norm() / std::max(problem.y.norm(), 1e-300);
  const ComplexMatrix Wr = Eigen::Map<const ComplexMatrix>(w.data(), J, static_cast<Eigen::Index>(est_r.size()));
  const ComplexMatrix Wc = Eigen::Map<const ComplexMatrix>(w.data() + nr, PJ, static_cast<Eigen::Index>(est_c.size()));
  split_rank_one(Wr, out.u, out.radar);
  split_rank_one(Wc, out.v, out.comm);
  return out;
}

std::vector<int> min_cost_assignment(const RealMatrix& cost) {
  const int rows = static_cast<int>(cost.rows()), cols = static_cast<int>(cost.cols());
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows > cols) {
    const std::vector<int> t = min_cost_assignment(cost.transpose());
    std::vector<int> out(rows, -1);
    for (int c = 0; c < cols; ++c)
      if (t[c] >= 0) out[t[c]] = c;
    return out;
  }
  // Hungarian method with potentials, rows <= cols, 1-based work arrays.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> owner(cols + 1, 0), way(cols + 1, 0);
  for (int r = 1; r <= rows; ++r) {
    owner[0] = r;
    int c0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[c0] = 1;
      const int r0 = owner[c0];
      double delta = inf;
      int c1 = 0;
      for (int c = 1; c <= cols; ++c) {
        if (used[c]) continue;
        const double cur = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (cur < minv[c]) minv[c] = cur, way[c] = c0;
        if (minv[c] < delta) delta = minv[c], c1 = c;
      }
      for (int c = 0; c <= cols; ++c) {
        if (used[c]) {
          u[owner[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      c0 = c1;
    } while (owner[c0] != 0);
    do {
      const int c1 = way[c0];
      owner[c0] = owner[c1];
      c0 = c1;
    } while (c0 != 0);
  }
  std::vector<int> out(rows, -1);
  for (int c = 1; c <= cols; ++c)
    if (owner[c] > 0) out[owner[c] - 1] = c - 1;
  return out;
}

MatchResult match_estimates(const std::vector<DelayDoppler>& truth, const std::vector<DelayDoppler>& estimates,
                            double threshold) {
  RealMatrix cost(truth.size(), estimates.size());
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t k = 0; k < estimates.size(); ++k) cost(i, k) = torus_distance_l2(truth[i], estimates[k]);
  MatchResult out;
  out.estimate_of_truth = min_cost_assignment(cost);
  out.success = truth.size() == estimates.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int k = out.estimate_of_truth[i];
    const double err = k >= 0 ? cost(i, k) : std::numeric_limits<double>::infinity();
    out.errors.push_back(err);
    if (!(err < threshold)) out.success = false;
  }
  return out;
}

SideCertificate verify_side(const DualPolynomial& poly, const NormGrid& grid, const std::vector<DelayDoppler>& truth,
                            double tol, double exclusion_radius, const ComplexVector* coefficients) {
  SideCertificate out;
  out.support_ok = true;
  for (const DelayDoppler& r : truth) {
    const ComplexVector f = eval_polynomial(poly, r.tau, r.nu);
    out.support_norms.push_back(f.norm());
    if (std::abs(f.norm() - 1.0) > tol) out.support_ok = false;
    if (coefficients != nullptr && f.norm() > 0.0)
      out.alignment.push_back(std::abs(coefficients->dot(f)) / (coefficients->norm() * f.norm()));
  }
  const int K = grid.size();
  for (int i = 0; i < K; ++i)
    for (int k = 0; k < K; ++k) {
      const double val = grid.values(i, k);
      out.grid_max = std::max(out.grid_max, val);
      const DelayDoppler x{grid.tau(i), grid.nu(k)};
      const bool near = std::any_of(truth.begin(), truth.end(),
                                    [&](const DelayDoppler& r) { return torus_distance_l2(x, r) <= exclusion_radius; });
      if (!near) out.off_support_max = std::max(out.off_support_max, val);
    }
  out.bounded_ok = out.grid_max <= 1.0 + tol;
  out.off_support_ok = out.off_support_max < 1.0 - tol;
  return out;
}

CertificateReport verify_certificate(const ComplexVector& q, const LiftedProblem& problem, double tol, double grid_step,
                                     int threads) {
  if (!problem.ground_truth) throw DomainError("verify_certificate needs the ground truth");
  const DualSdpSpec spec = make_dual_spec(problem);
  CertificateReport rep;
  rep.tol = tol;
  rep.exclusion_radius = 2.0 * grid_step;
  const auto& [radar, comm] = *problem.ground_truth;
  for (Side side : {Side::Radar, Side::Comm}) {
    const DualPolynomial poly = make_dual_polynomial(spec, q, side);
    const NormGrid grid = evaluate_norm_grid(poly, grid_step, threads);
    const bool is_radar = side == Side::Radar;
    const ComplexVector& coeff = is_radar ? problem.bases.u : problem.bases.v;
    (is_radar ? rep.radar : rep.comm) =
        verify_side(poly, grid, (is_radar ? radar : comm).points(), tol, rep.exclusion_radius, &coeff);
  }
  return rep;
}

LocalizationResult localize(const LiftedProblem& problem, const ComplexVector& q, const LocalizationOptions& options) {
  const DualSdpSpec spec = make_dual_spec(problem);
  LocalizationResult out;
  out.grid_step = options.peaks.grid_step;
  std::vector<DelayDoppler> points[2];
  for (Side side : {Side::Radar, Side::Comm}) {
    const bool is_radar = side == Side::Radar;
    const DualPolynomial poly = make_dual_polynomial(spec, q, side);
    NormGrid& grid = is_radar ? out.radar_grid : out.comm_grid;
    grid = evaluate_norm_grid(poly, options.peaks.grid_step, options.peaks.threads);
    SideResult& res = is_radar ? out.radar : out.comm;
    res.peaks = find_peaks(poly, grid, options.peaks);
    for (const Peak& pk : res.peaks) {
      res.estimates.delays.push_back(pk.tau);
      res.estimates.dopplers.push_back(pk.nu);
      res.peak_norms.push_back(pk.norm);
      points[is_radar ? 0 : 1].push_back({pk.tau, pk.nu});
    }
    res.estimates.amplitudes.assign(res.peaks.size(), cdouble(0.0));
  }

  try {
    const AmplitudeEstimate amp = recover_amplitudes(problem, points[0], points[1]);
    out.radar.estimates.amplitudes = amp.radar;
    out.comm.estimates.amplitudes = amp.comm;
    out.amplitude_residual = amp.relative_residual;
  } catch (const AmbiguousScaling& e) {
    out.amplitude_note = std::string(e.what()) + " (rank " + std::to_string(e.rank) + " of " +
                         std::to_string(e.unknowns) + ")";
  }

  if (problem.ground_truth) {
    const auto& [radar, comm] = *problem.ground_truth;
    out.radar.match = match_estimates(radar.points(), points[0], options.success_threshold);
    out.comm.match = match_estimates(comm.points(), points[1], options.success_threshold);
    out.radar.success = out.radar.match->success;
    out.comm.success = out.comm.match->success;
  }
  return out;
}

}  // namespace dbd
