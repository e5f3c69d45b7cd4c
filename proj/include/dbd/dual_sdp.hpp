#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "dbd/conic_solver.hpp"
#include "dbd/signal_model.hpp"

namespace dbd {

/// 2-D index (n1, n2): n1 is the block (pulse) offset, n2 the frequency offset.
struct ToeplitzIndex {
  int n1 = 0;
  int n2 = 0;
  friend bool operator==(const ToeplitzIndex&, const ToeplitzIndex&) = default;
};

/// Theta_{n1} (P x P) kron Theta_{n2} (M x M); Theta_k has ones where col - row = k.
Eigen::SparseMatrix<double> toeplitz_selector(int n1, int n2, int P, int M);

/// Half-plane of offsets: n1 in [1, P-1] with n2 in [-(M-1), M-1], plus n1 = 0
/// with n2 in [0, M-1]. (0, 0) comes first.
std::vector<ToeplitzIndex> toeplitz_index_set(int P, int M);

/// Tr(Theta_n Q) for a dense MP x MP matrix, computed without forming Theta_n.
cdouble toeplitz_trace(const ComplexMatrix& Q, const ToeplitzIndex& n, int P, int M);

/// Data of the dual program
///   maximize Re<q, y>
///   s.t. Q >= 0, [[Q, Qr],[Qr^H, I_J]] >= 0, [[Q, Qc],[Qc^H, I_PJ]] >= 0,
///        Tr(Theta_n Q) = delta_n on the index set,
/// where Qr = sum_v conj(q_v) G_v (row v = conj(q_v) b_n^H) and Qc likewise
/// with A_v, so that f_r(r) = Qr^H a(r) and f_c(c) = Qc^H a(c).
struct DualSdpSpec {
  int M = 0;
  int P = 0;
  int J = 0;
  ComplexVector y;
  ComplexMatrix radar_rows;  // MP x J, row v = b_n^H
  ComplexMatrix comm_rows;   // MP x PJ, row v = d_v^H
  std::vector<ToeplitzIndex> index_set;

  int MP() const { return M * P; }
  int PJ() const { return P * J; }

  ComplexMatrix radar_coefficients(const ComplexVector& q) const;
  ComplexMatrix comm_coefficients(const ComplexVector& q) const;
};

/// How the two LMI blocks obtain their Gram matrices.
enum class GramCoupling {
  /// One Q shared by both LMIs (plus the explicit Q >= 0 block).
  Shared,
  /// Independent Gram matrices Q_r, Q_c, each with its own trace constraints.
  Separate,
};

/// Variable layout of the conic encoding: free variables are (Re q_v, Im q_v)
/// interleaved. Shared: blocks are Q (MP), the radar LMI (MP + J) and the comm
/// LMI (MP + PJ); both LMIs carry a copy of Q tied to block 0 by equality rows.
/// Separate: blocks are the radar and comm LMIs only, with trace constraints
/// on their top-left corners. Off-diagonal parts are always tied to q.
struct DualSdpEncoding {
  DualSdpSpec spec;
  GramCoupling coupling = GramCoupling::Shared;
  ConicProblem conic;
  int toeplitz_rows = 0;

  ComplexVector extract_q(const RealVector& x) const;
  /// Gram matrix of the radar LMI (the shared Q in Shared mode).
  ComplexMatrix extract_Q(const RealVector& x) const;
  /// Gram matrix of the comm LMI (the shared Q in Shared mode).
  ComplexMatrix extract_Q_comm(const RealVector& x) const;
  int radar_block() const { return coupling == GramCoupling::Shared ? 1 : 0; }
  int comm_block() const { return radar_block() + 1; }
  /// Stacked vector for a given (q, Q_r, Q_c) with the LMI blocks filled in.
  RealVector stack(const ComplexVector& q, const ComplexMatrix& Q, const ComplexMatrix& Q_comm) const;
  RealVector stack(const ComplexVector& q, const ComplexMatrix& Q) const { return stack(q, Q, Q); }
};

DualSdpSpec make_dual_spec(const LiftedProblem& problem);
DualSdpEncoding build_dual_sdp(const LiftedProblem& problem, GramCoupling coupling = GramCoupling::Shared);

struct ConstraintCheck {
  double toeplitz_residual = 0.0;  // max |Tr(Theta_n Q) - delta_n|
  double min_eig_Q = 0.0;
  double min_eig_radar = 0.0;
  double min_eig_comm = 0.0;
  double objective = 0.0;

  bool feasible(double tol) const {
    return toeplitz_residual <= tol && min_eig_Q >= -tol && min_eig_radar >= -tol && min_eig_comm >= -tol;
  }
};

/// Evaluates every constraint of the dual program at (q, Q).
ConstraintCheck check_dual_constraints(const DualSdpSpec& spec, const ComplexVector& q, const ComplexMatrix& Q);
ConstraintCheck check_dual_constraints(const DualSdpSpec& spec, const ComplexVector& q, const ComplexMatrix& Q,
                                       const ComplexMatrix& Q_comm);

struct DualSolution {
  ComplexVector q;
  ComplexMatrix Q;
  ComplexMatrix Q_comm;  // equals Q under GramCoupling::Shared
  SolveReport report;
  double objective = 0.0;  // Re<q, y>
};

DualSolution solve_dual(const LiftedProblem& problem, const SolveOptions& options = {},
                        GramCoupling coupling = GramCoupling::Shared);
DualSolution solve_dual(const DualSdpEncoding& encoding, const SolveOptions& options = {});

}  // namespace dbd
