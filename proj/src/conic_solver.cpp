#include "dbd/conic_solver.hpp"

#include <chrono>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>
#include <utility>

#include <Eigen/SparseCholesky>

namespace dbd {

using Layout = SvecLayout<cdouble>;

int ConicProblem::dim() const {
  int d = free_dim;
  for (int n : blocks) d += Layout::size(n);
  return d;
}

int ConicProblem::block_offset(int k) const {
  int off = free_dim;
  for (int i = 0; i < k; ++i) off += Layout::size(blocks[i]);
  return off;
}

void ConicProblem::validate() const {
  if (free_dim < 0) throw ShapeMismatch("negative free dimension");
  for (int n : blocks)
    if (n < 1) throw ShapeMismatch("PSD blocks must have positive order");
  const int n = dim();
  if (c.size() != n) throw ShapeMismatch("objective length does not match the variable dimension");
  if (A.cols() != n) throw ShapeMismatch("constraint matrix column count does not match the variable dimension");
  if (A.rows() != b.size()) throw ShapeMismatch("constraint matrix rows do not match b");
}

ComplexMatrix ConicProblem::block_matrix(const RealVector& x, int k) const {
  return unpack_hermitian<ComplexMatrix>(x.segment(block_offset(k), block_dim(k)), blocks[k]);
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal:
      return "Optimal";
    case SolveStatus::MaxIter:
      return "MaxIter";
    case SolveStatus::Infeasible:
      return "Infeasible";
    case SolveStatus::NumericalTrouble:
      return "NumericalTrouble";
  }
  return "Unknown";
}

namespace {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Presolved {
  Eigen::SparseMatrix<double> A;
  RealVector b;
  // original row -> (kept row, multiplier applied to that row); -1 when dropped
  std::vector<std::pair<int, double>> row_map;
  double b_scale = 1.0;
  int removed = 0;
  bool inconsistent = false;
};

Presolved presolve(const ConicProblem& problem) {
  SparseRowMatrix rows = problem.A;
  rows.makeCompressed();
  Presolved out;
  out.row_map.assign(rows.rows(), {-1, 0.0});
  std::map<std::vector<std::pair<int, double>>, int> seen;
  std::vector<Eigen::Triplet<double>> trips;
  std::vector<double> bk;
  for (int i = 0; i < rows.rows(); ++i) {
    std::vector<std::pair<int, double>> entries;
    double norm2 = 0.0;
    for (SparseRowMatrix::InnerIterator it(rows, i); it; ++it) {
      if (it.value() != 0.0) {
        entries.emplace_back(static_cast<int>(it.col()), it.value());
        norm2 += it.value() * it.value();
      }
    }
    if (entries.empty()) {
      if (std::abs(problem.b(i)) > 1e-12) out.inconsistent = true;
      ++out.removed;
      continue;
    }
    double scale = 1.0 / std::sqrt(norm2);
    if (entries.front().second < 0.0) scale = -scale;
    for (auto& e : entries) e.second *= scale;
    const double bi = problem.b(i) * scale;
    auto [it, inserted] = seen.emplace(entries, static_cast<int>(bk.size()));
    if (!inserted) {
      if (std::abs(bk[it->second] - bi) > 1e-9 * (1.0 + std::abs(bi))) out.inconsistent = true;
      out.row_map[i] = {it->second, 0.0};
      ++out.removed;
      continue;
    }
    const int k = static_cast<int>(bk.size());
    for (const auto& e : entries) trips.emplace_back(k, e.first, e.second);
    bk.push_back(bi);
    out.row_map[i] = {k, scale};
  }
  out.A.resize(static_cast<Eigen::Index>(bk.size()), rows.cols());
  out.A.setFromTriplets(trips.begin(), trips.end());
  out.A.makeCompressed();
  out.b = Eigen::Map<RealVector>(bk.data(), static_cast<Eigen::Index>(bk.size()));
  const double bn = out.b.norm();
  if (bn > 0.0) {
    out.b_scale = bn;
    out.b /= bn;
  }
  return out;
}

class ConeProjector {
 public:
  explicit ConeProjector(const ConicProblem& p) : problem_(p) {}

  void project(RealVector& x) const {
    for (std::size_t k = 0; k < problem_.blocks.size(); ++k) {
      const int n = problem_.blocks[k];
      auto seg = x.segment(problem_.block_offset(static_cast<int>(k)), Layout::size(n));
      const ComplexMatrix H = unpack_hermitian<ComplexMatrix>(seg, n);
      pack_hermitian(psd_project(H), seg);
    }
  }

 private:
  const ConicProblem& problem_;
};

}  // namespace

ConicSolution solve(const ConicProblem& problem, const SolveOptions& options) {
  problem.validate();
  if (!(options.tol > 0.0)) throw DomainError("solver tolerance must be positive");
  if (!(options.rho > 0.0)) throw DomainError("rho must be positive");
  if (!(options.relaxation > 0.0 && options.relaxation < 2.0)) throw DomainError("relaxation must lie in (0, 2)");

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  const int n = problem.dim();
  ConicSolution sol;
  sol.x = RealVector::Zero(n);
  sol.y = RealVector::Zero(problem.A.rows());
  SolveReport& rep = sol.report;

  Presolved pre = presolve(problem);
  rep.removed_rows = pre.removed;
  if (pre.inconsistent) {
    rep.status = SolveStatus::Infeasible;
    rep.seconds = elapsed();
    return sol;
  }

  const Eigen::SparseMatrix<double>& A = pre.A;
  const Eigen::SparseMatrix<double> At = A.transpose();
  const RealVector& b = pre.b;
  const RealVector& c = problem.c;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  if (A.rows() > 0) {
    const Eigen::SparseMatrix<double> AAt = A * At;
    ldlt.compute(AAt);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().cwiseAbs().minCoeff() < 1e-12) {
      rep.status = SolveStatus::NumericalTrouble;
      rep.seconds = elapsed();
      return sol;
    }
  }

  // x = w - A^T mu,  mu = (A A^T)^{-1} (A w - b)
  RealVector mu = RealVector::Zero(A.rows());
  auto project_affine = [&](const RealVector& w, RealVector& out) {
    if (A.rows() == 0) {
      out = w;
      return;
    }
    mu = ldlt.solve(A * w - b);
    out = w - At * mu;
  };

  const ConeProjector cone(problem);
  const double c_norm = c.norm();
  double rho = options.rho;
  RealVector x(n), z = RealVector::Zero(n), u = RealVector::Zero(n), z_prev(n), w(n), xr(n);

  double r_prim = 0.0, r_dual = 0.0, gap = 0.0;
  rep.status = SolveStatus::MaxIter;
  int it = 0;
  try {
    for (it = 1; it <= options.max_iter; ++it) {
      w = z - u - c / rho;
      project_affine(w, x);
      xr = options.relaxation * x + (1.0 - options.relaxation) * z;
      z_prev = z;
      z = xr + u;
      cone.project(z);
      u += xr - z;

      const double xn = x.norm(), zn = z.norm();
      r_prim = (x - z).norm() / (1.0 + std::max(xn, zn));
      r_dual = rho * (z - z_prev).norm() / (1.0 + rho * u.norm());
      const double pobj = c.dot(x);
      const double dobj = -rho * b.dot(mu);
      gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));

      if (!std::isfinite(r_prim) || !std::isfinite(r_dual)) {
        rep.status = SolveStatus::NumericalTrouble;
        break;
      }
      if (options.history_every > 0 && it % options.history_every == 0)
        rep.history.push_back(std::max(r_prim, r_dual));
      if (options.verbose && it % 500 == 0)
        std::fprintf(stderr, "iter %6d  prim %.3e  dual %.3e  gap %.3e  rho %.3e  obj %.9f\n", it, r_prim, r_dual,
                     gap, rho, -pobj * pre.b_scale);
      if (r_prim <= options.tol && r_dual <= options.tol && gap <= options.tol) {
        rep.status = SolveStatus::Optimal;
        break;
      }
      // divergence: unbounded scaled dual or primal iterates
      if (rho * u.norm() > 1e10 * (1.0 + c_norm) || xn > 1e10) {
        rep.status = SolveStatus::Infeasible;
        break;
      }
      if (options.adapt_every > 0 && it % options.adapt_every == 0) {
        if (r_prim > options.adapt_ratio * r_dual) {
          rho *= options.adapt_factor;
          u /= options.adapt_factor;
        } else if (r_dual > options.adapt_ratio * r_prim) {
          rho /= options.adapt_factor;
          u *= options.adapt_factor;
        }
      }
      if (it % 10 == 0 && elapsed() > options.time_limit_seconds) break;
    }
  } catch (const NumericalTrouble&) {
    rep.status = SolveStatus::NumericalTrouble;
  }

  rep.iterations = std::min(it, options.max_iter);
  rep.primal_residual = r_prim;
  rep.dual_residual = r_dual;
  rep.duality_gap = gap;
  rep.rho = rho;
  sol.x = x * pre.b_scale;
  rep.objective_value = c.dot(sol.x);
  // undo row scaling of the multipliers; duplicates keep zero weight
  for (std::size_t i = 0; i < pre.row_map.size(); ++i) {
    const auto [k, s] = pre.row_map[i];
    if (k >= 0 && s != 0.0) sol.y(static_cast<Eigen::Index>(i)) = -rho * mu(k) * s;
  }
  rep.seconds = elapsed();
  return sol;
}

void write_problem_dump(const ConicProblem& problem, std::ostream& out) {
  problem.validate();
  // variable index -> (block, row, col, part) with part 0 = Re, 1 = Im
  struct Slot {
    int block, row, col, part;
    double weight;
  };
  std::vector<Slot> slots(problem.dim());
  for (int i = 0; i < problem.free_dim; ++i) slots[i] = {0, i, 0, 0, 1.0};
  for (std::size_t k = 0; k < problem.blocks.size(); ++k) {
    const int off = problem.block_offset(static_cast<int>(k));
    const int n = problem.blocks[k];
    const int blk = static_cast<int>(k) + 1;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < j; ++i) {
        slots[off + Layout::re(i, j)] = {blk, i, j, 0, kSqrt2};
        slots[off + Layout::im(i, j)] = {blk, i, j, 1, kSqrt2};
      }
      slots[off + Layout::diag(j)] = {blk, j, j, 0, 1.0};
    }
  }
  auto emit = [&](std::map<std::tuple<int, int, int>, std::pair<double, double>>& acc, int var, double coef) {
    const Slot& s = slots[var];
    auto& e = acc[{s.block, s.row, s.col}];
    (s.part == 0 ? e.first : e.second) += coef * s.weight;
  };

  char buf[160];
  out << "# dbd conic problem dump\n";
  out << "dims " << problem.free_dim;
  for (int nb : problem.blocks) out << ' ' << nb;
  out << "\nrows " << problem.A.rows() << '\n';
  for (Eigen::Index i = 0; i < problem.b.size(); ++i) {
    if (problem.b(i) != 0.0) {
      std::snprintf(buf, sizeof buf, "b %ld %.17g\n", static_cast<long>(i), problem.b(i));
      out << buf;
    }
  }
  {
    std::map<std::tuple<int, int, int>, std::pair<double, double>> acc;
    for (int v = 0; v < problem.dim(); ++v)
      if (problem.c(v) != 0.0) emit(acc, v, problem.c(v));
    for (const auto& [key, val] : acc) {
      std::snprintf(buf, sizeof buf, "c %d %d %d %.17g %.17g\n", std::get<0>(key), std::get<1>(key),
                    std::get<2>(key), val.first, val.second);
      out << buf;
    }
  }
  SparseRowMatrix rows = problem.A;
  for (int r = 0; r < rows.rows(); ++r) {
    std::map<std::tuple<int, int, int>, std::pair<double, double>> acc;
    for (SparseRowMatrix::InnerIterator it(rows, r); it; ++it) emit(acc, static_cast<int>(it.col()), it.value());
    for (const auto& [key, val] : acc) {
      std::snprintf(buf, sizeof buf, "%d %d %d %.17g %.17g %d\n", std::get<0>(key), std::get<1>(key),
                    std::get<2>(key), val.first, val.second, r);
      out << buf;
    }
  }
}

ConicProblem read_problem_dump(std::istream& in) {
  ConicProblem p;
  std::string line;
  int rows = -1;
  std::vector<Eigen::Triplet<double>> trips;
  auto var_index = [&](int block, int row, int col, int part) {
    if (block == 0) return row;
    const int off = p.block_offset(block - 1);
    if (row == col) return off + Layout::diag(col);
    return off + (part == 0 ? Layout::re(row, col) : Layout::im(row, col));
  };
  // a term re*Re(H) + im*Im(H) maps back to parameter coefficients divided by sqrt(2)
  auto add_terms = [&](int block, int r, int col, double re, double im, auto&& sink) {
    const double w = (block == 0 || r == col) ? 1.0 : 1.0 / kSqrt2;
    if (re != 0.0) sink(var_index(block, r, col, 0), re * w);
    if (im != 0.0 && block != 0 && r != col) sink(var_index(block, r, col, 1), im * w);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "dims") {
      ls >> p.free_dim;
      int nb;
      while (ls >> nb) p.blocks.push_back(nb);
      ls.clear();
      p.c = RealVector::Zero(p.dim());
    } else if (head == "rows") {
      ls >> rows;
      p.b = RealVector::Zero(rows);
    } else if (head == "b") {
      long i;
      double val;
      ls >> i >> val;
      p.b(i) = val;
    } else if (head == "c") {
      int blk, r, col;
      double re, im;
      ls >> blk >> r >> col >> re >> im;
      add_terms(blk, r, col, re, im, [&](int v, double a) { p.c(v) += a; });
    } else {
      const int blk = std::stoi(head);
      int r, col, ci;
      double re, im;
      ls >> r >> col >> re >> im >> ci;
      add_terms(blk, r, col, re, im, [&](int v, double a) { trips.emplace_back(ci, v, a); });
    }
    if (ls.fail()) throw std::runtime_error("malformed dump line: " + line);
  }
  if (rows < 0) throw std::runtime_error("dump is missing the rows header");
  p.A.resize(rows, p.dim());
  p.A.setFromTriplets(trips.begin(), trips.end());
  return p;
}

}  // namespace dbd
