#include "dbd/dual_sdp.hpp"

#include <string>

namespace dbd {

using Layout = SvecLayout<cdouble>;

namespace {

void check_offsets(int n1, int n2, int P, int M) {
  if (std::abs(n1) > P - 1 || std::abs(n2) > M - 1)
    throw DomainError("toeplitz offset (" + std::to_string(n1) + ", " + std::to_string(n2) + ") out of range");
}

}  // namespace

Eigen::SparseMatrix<double> toeplitz_selector(int n1, int n2, int P, int M) {
  check_offsets(n1, n2, P, M);
  std::vector<Eigen::Triplet<double>> trips;
  for (int p = 0; p < P; ++p) {
    const int pc = p + n1;
    if (pc < 0 || pc >= P) continue;
    for (int m = 0; m < M; ++m) {
      const int mc = m + n2;
      if (mc < 0 || mc >= M) continue;
      trips.emplace_back(p * M + m, pc * M + mc, 1.0);
    }
  }
  Eigen::SparseMatrix<double> T(M * P, M * P);
  T.setFromTriplets(trips.begin(), trips.end());
  return T;
}

std::vector<ToeplitzIndex> toeplitz_index_set(int P, int M) {
  std::vector<ToeplitzIndex> out;
  out.reserve(static_cast<std::size_t>(P * (2 * M - 1) - (M - 1)));
  for (int n2 = 0; n2 <= M - 1; ++n2) out.push_back({0, n2});
  for (int n1 = 1; n1 <= P - 1; ++n1)
    for (int n2 = -(M - 1); n2 <= M - 1; ++n2) out.push_back({n1, n2});
  return out;
}

namespace {

// Calls fn(row, col) for every entry Q[col_f, row_f] picked up by Tr(Theta_n Q).
template <typename Fn>
void for_each_selected(const ToeplitzIndex& n, int P, int M, Fn&& fn) {
  for (int p = 0; p < P; ++p) {
    const int pc = p + n.n1;
    if (pc < 0 || pc >= P) continue;
    for (int m = 0; m < M; ++m) {
      const int mc = m + n.n2;
      if (mc < 0 || mc >= M) continue;
      fn(p * M + m, pc * M + mc);
    }
  }
}

}  // namespace

cdouble toeplitz_trace(const ComplexMatrix& Q, const ToeplitzIndex& n, int P, int M) {
  check_offsets(n.n1, n.n2, P, M);
  if (Q.rows() != M * P || Q.cols() != M * P) throw ShapeMismatch("Q must be MP x MP");
  cdouble acc = 0.0;
  for_each_selected(n, P, M, [&](int r, int c) { acc += Q(c, r); });
  return acc;
}

ComplexMatrix DualSdpSpec::radar_coefficients(const ComplexVector& q) const {
  if (q.size() != MP()) throw ShapeMismatch("q must have length MP");
  return q.conjugate().asDiagonal() * radar_rows;
}

ComplexMatrix DualSdpSpec::comm_coefficients(const ComplexVector& q) const {
  if (q.size() != MP()) throw ShapeMismatch("q must have length MP");
  return q.conjugate().asDiagonal() * comm_rows;
}

DualSdpSpec make_dual_spec(const LiftedProblem& problem) {
  const auto& cfg = problem.config;
  cfg.validate();
  if (problem.y.size() != cfg.MP()) throw ShapeMismatch("y must have length MP");
  DualSdpSpec spec;
  spec.M = cfg.M;
  spec.P = cfg.P;
  spec.J = cfg.J;
  spec.y = problem.y;
  spec.radar_rows.resize(cfg.MP(), cfg.J);
  for (int v = 0; v < cfg.MP(); ++v) spec.radar_rows.row(v) = problem.bases.B.row(v % cfg.M);
  spec.comm_rows = problem.bases.D;
  if (spec.comm_rows.rows() != cfg.MP() || spec.comm_rows.cols() != cfg.PJ()) throw ShapeMismatch("D must be MP x PJ");
  spec.index_set = toeplitz_index_set(cfg.P, cfg.M);
  return spec;
}

DualSdpEncoding build_dual_sdp(const LiftedProblem& problem, GramCoupling coupling) {
  DualSdpEncoding enc;
  enc.spec = make_dual_spec(problem);
  enc.coupling = coupling;
  const DualSdpSpec& s = enc.spec;
  const int MP = s.MP();
  const bool shared = coupling == GramCoupling::Shared;
  ConicProblem& cp = enc.conic;
  cp.free_dim = 2 * MP;
  if (shared) {
    cp.blocks = {MP, MP + s.J, MP + s.PJ()};
  } else {
    cp.blocks = {MP + s.J, MP + s.PJ()};
  }
  const int n = cp.dim();

  cp.c = RealVector::Zero(n);
  for (int v = 0; v < MP; ++v) {
    cp.c(2 * v) = -s.y(v).real();
    cp.c(2 * v + 1) = -s.y(v).imag();
  }

  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> rhs;
  auto new_row = [&](double value) {
    rhs.push_back(value);
    return static_cast<int>(rhs.size()) - 1;
  };

  // trace constraints on the leading MP x MP corner of the block at `off`
  auto trace_rows = [&](int off) {
    for (const ToeplitzIndex& idx : s.index_set) {
      if (idx.n1 == 0 && idx.n2 == 0) {
        const int r = new_row(1.0);
        for (int j = 0; j < MP; ++j) trips.emplace_back(r, off + Layout::diag(j), 1.0);
        continue;
      }
      // every selected entry Q[c, r] has c > r: it is conj of upper entry (r, c)
      const int r_re = new_row(0.0);
      const int r_im = new_row(0.0);
      for_each_selected(idx, s.P, s.M, [&](int r, int c) {
        trips.emplace_back(r_re, off + Layout::re(r, c), 1.0 / kSqrt2);
        trips.emplace_back(r_im, off + Layout::im(r, c), -1.0 / kSqrt2);
      });
    }
  };

  auto lmi_rows = [&](int block, const ComplexMatrix& rows) {
    const int off = cp.block_offset(block);
    const int dim = static_cast<int>(rows.cols());
    const int order = MP + dim;
    if (shared) {
      // top-left copy of Q
      const int off0 = cp.block_offset(0);
      for (int j = 0; j < MP; ++j) {
        for (int i = 0; i <= j; ++i) {
          if (i == j) {
            const int r = new_row(0.0);
            trips.emplace_back(r, off + Layout::diag(j), 1.0);
            trips.emplace_back(r, off0 + Layout::diag(j), -1.0);
          } else {
            for (int slot : {Layout::re(i, j), Layout::im(i, j)}) {
              const int r = new_row(0.0);
              trips.emplace_back(r, off + slot, 1.0);
              trips.emplace_back(r, off0 + slot, -1.0);
            }
          }
        }
      }
    } else {
      trace_rows(off);
    }
    // off-diagonal: entry (i, MP + k) = conj(q_i) rows(i, k)
    for (int k = 0; k < dim; ++k) {
      const int j = MP + k;
      for (int i = 0; i < MP; ++i) {
        const double a = rows(i, k).real(), b = rows(i, k).imag();
        const int r_re = new_row(0.0);
        trips.emplace_back(r_re, off + Layout::re(i, j), 1.0);
        if (a != 0.0) trips.emplace_back(r_re, 2 * i, -kSqrt2 * a);
        if (b != 0.0) trips.emplace_back(r_re, 2 * i + 1, -kSqrt2 * b);
        const int r_im = new_row(0.0);
        trips.emplace_back(r_im, off + Layout::im(i, j), 1.0);
        if (b != 0.0) trips.emplace_back(r_im, 2 * i, -kSqrt2 * b);
        if (a != 0.0) trips.emplace_back(r_im, 2 * i + 1, kSqrt2 * a);
      }
    }
    // bottom-right identity
    for (int j = MP; j < order; ++j) {
      for (int i = MP; i <= j; ++i) {
        if (i == j) {
          trips.emplace_back(new_row(1.0), off + Layout::diag(j), 1.0);
        } else {
          trips.emplace_back(new_row(0.0), off + Layout::re(i, j), 1.0);
          trips.emplace_back(new_row(0.0), off + Layout::im(i, j), 1.0);
        }
      }
    }
  };

  if (shared) {
    trace_rows(cp.block_offset(0));
    enc.toeplitz_rows = static_cast<int>(rhs.size());
  }
  lmi_rows(enc.radar_block(), s.radar_rows);
  lmi_rows(enc.comm_block(), s.comm_rows);
  if (!shared) enc.toeplitz_rows = 2 * (2 * static_cast<int>(s.index_set.size()) - 1);

  cp.A.resize(static_cast<Eigen::Index>(rhs.size()), n);
  cp.A.setFromTriplets(trips.begin(), trips.end());
  cp.A.makeCompressed();
  cp.b = Eigen::Map<RealVector>(rhs.data(), static_cast<Eigen::Index>(rhs.size()));
  return enc;
}

ComplexVector DualSdpEncoding::extract_q(const RealVector& x) const {
  ComplexVector q(spec.MP());
  for (int v = 0; v < spec.MP(); ++v) q(v) = cdouble(x(2 * v), x(2 * v + 1));
  return q;
}

ComplexMatrix DualSdpEncoding::extract_Q(const RealVector& x) const {
  if (coupling == GramCoupling::Shared) return conic.block_matrix(x, 0);
  return conic.block_matrix(x, radar_block()).topLeftCorner(spec.MP(), spec.MP());
}

ComplexMatrix DualSdpEncoding::extract_Q_comm(const RealVector& x) const {
  if (coupling == GramCoupling::Shared) return conic.block_matrix(x, 0);
  return conic.block_matrix(x, comm_block()).topLeftCorner(spec.MP(), spec.MP());
}

namespace {

ComplexMatrix lmi_block(const ComplexMatrix& Q, const ComplexMatrix& X) {
  const Eigen::Index MP = Q.rows(), d = X.cols();
  ComplexMatrix S(MP + d, MP + d);
  S.topLeftCorner(MP, MP) = Q;
  S.topRightCorner(MP, d) = X;
  S.bottomLeftCorner(d, MP) = X.adjoint();
  S.bottomRightCorner(d, d).setIdentity();
  return S;
}

}  // namespace

RealVector DualSdpEncoding::stack(const ComplexVector& q, const ComplexMatrix& Q, const ComplexMatrix& Q_comm) const {
  RealVector x = RealVector::Zero(conic.dim());
  for (int v = 0; v < spec.MP(); ++v) {
    x(2 * v) = q(v).real();
    x(2 * v + 1) = q(v).imag();
  }
  if (coupling == GramCoupling::Shared) pack_hermitian(Q, x.segment(conic.block_offset(0), conic.block_dim(0)));
  const int br = radar_block(), bc = comm_block();
  pack_hermitian(lmi_block(Q, spec.radar_coefficients(q)), x.segment(conic.block_offset(br), conic.block_dim(br)));
  pack_hermitian(lmi_block(Q_comm, spec.comm_coefficients(q)),
                 x.segment(conic.block_offset(bc), conic.block_dim(bc)));
  return x;
}

ConstraintCheck check_dual_constraints(const DualSdpSpec& spec, const ComplexVector& q, const ComplexMatrix& Q) {
  return check_dual_constraints(spec, q, Q, Q);
}

ConstraintCheck check_dual_constraints(const DualSdpSpec& spec, const ComplexVector& q, const ComplexMatrix& Q,
                                       const ComplexMatrix& Q_comm) {
  ConstraintCheck out;
  for (const ToeplitzIndex& idx : spec.index_set) {
    const cdouble target = (idx.n1 == 0 && idx.n2 == 0) ? 1.0 : 0.0;
    for (const ComplexMatrix* G : {&Q, &Q_comm})
      out.toeplitz_residual =
          std::max(out.toeplitz_residual, std::abs(toeplitz_trace(*G, idx, spec.P, spec.M) - target));
  }
  out.min_eig_Q = std::min(min_eigenvalue(Q), min_eigenvalue(Q_comm));
  out.min_eig_radar = min_eigenvalue(lmi_block(Q, spec.radar_coefficients(q)));
  out.min_eig_comm = min_eigenvalue(lmi_block(Q_comm, spec.comm_coefficients(q)));
  out.objective = q.dot(spec.y).real();
  return out;
}

DualSolution solve_dual(const DualSdpEncoding& encoding, const SolveOptions& options) {
  const ConicSolution sol = solve(encoding.conic, options);
  DualSolution out;
  out.q = encoding.extract_q(sol.x);
  out.Q = encoding.extract_Q(sol.x);
  out.Q_comm = encoding.extract_Q_comm(sol.x);
  out.report = sol.report;
  out.objective = out.q.dot(encoding.spec.y).real();
  return out;
}

DualSolution solve_dual(const LiftedProblem& problem, const SolveOptions& options, GramCoupling coupling) {
  return solve_dual(build_dual_sdp(problem, coupling), options);
}

}  // namespace dbd
