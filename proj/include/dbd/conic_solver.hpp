#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "dbd/hermitian.hpp"
#include "dbd/types.hpp"

namespace dbd {

/// minimize c^T x  subject to  A x = b,  x in R^free x H_1+ x ... x H_k+
///
/// x stacks the free variables first, then one complex Hermitian block per
/// entry of `blocks`, each in the SvecLayout<cdouble> parameterization
/// (n^2 reals for an n x n block).
struct ConicProblem {
  int free_dim = 0;
  std::vector<int> blocks;
  RealVector c;
  Eigen::SparseMatrix<double> A;
  RealVector b;

  int dim() const;
  int block_offset(int k) const;
  int block_dim(int k) const { return SvecLayout<cdouble>::size(blocks[k]); }
  void validate() const;

  /// Extracts block k of a stacked vector as a Hermitian matrix.
  ComplexMatrix block_matrix(const RealVector& x, int k) const;
};

enum class SolveStatus { Optimal, MaxIter, Infeasible, NumericalTrouble };

std::string to_string(SolveStatus status);

struct SolveOptions {
  double tol = 1e-7;
  int max_iter = 100000;
  double rho = 1.0;
  /// Over-relaxation parameter in (0, 2).
  double relaxation = 1.6;
  /// Residual balancing: every `adapt_every` iterations rho is multiplied or
  /// divided by `adapt_factor` when one residual exceeds the other by
  /// `adapt_ratio`. Zero disables it.
  int adapt_every = 50;
  double adapt_factor = 2.0;
  double adapt_ratio = 10.0;
  /// Wall-clock budget; exceeding it ends the solve with MaxIter.
  double time_limit_seconds = 600.0;
  /// Store max(primal, dual) residual every `history_every` iterations.
  int history_every = 0;
  bool verbose = false;
};

struct SolveReport {
  SolveStatus status = SolveStatus::MaxIter;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  double objective_value = 0.0;
  double rho = 0.0;
  double seconds = 0.0;
  int removed_rows = 0;
  std::vector<double> history;
};

struct ConicSolution {
  /// Primal point; satisfies A x = b to factorization accuracy.
  RealVector x;
  /// Equality multipliers of the dual problem  max b^T y  s.t.  c - A^T y in K.
  RealVector y;
  SolveReport report;
};

/// Operator-splitting solve: alternates an exact projection onto {A x = b}
/// (cached sparse LDL^T of A A^T) with blockwise projections onto the PSD
/// cone, followed by a scaled dual update.
ConicSolution solve(const ConicProblem& problem, const SolveOptions& options = {});

/// Text dump of the problem for differential testing. After '#' comment lines:
///   dims <free_dim> <n_1> ... <n_k>
///   rows <m>
///   b <constraint-index> <value>                    (nonzeros only)
///   c <block> <row> <col> <re> <im>                  (objective terms)
///   <block> <row> <col> <re> <im> <constraint-index> (constraint terms)
/// Block 0 holds the free variables (row = variable index, col = 0, im = 0);
/// block k >= 1 refers to entry (row, col), row <= col, of Hermitian block k-1,
/// contributing re * Re(H[row,col]) + im * Im(H[row,col]).
void write_problem_dump(const ConicProblem& problem, std::ostream& out);

/// Parses the dump back into a problem; used to check the format round-trips.
ConicProblem read_problem_dump(std::istream& in);

}  // namespace dbd
