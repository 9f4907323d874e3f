#include "vemspectra/eig.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <variant>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>
#include <lapacke.h>

#include "vemspectra/error.hpp"

namespace vemspectra {

namespace {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using ComplexSparse = Eigen::SparseMatrix<Complex>;

struct Candidate {
  Complex lambda;
  VectorXcd vector;
};

// Orders by distance to the shift; near-ties fall back to real then imaginary part.
void sort_by_shift(std::vector<Complex>& order_keys, std::vector<std::size_t>& perm, Complex shift) {
  perm.resize(order_keys.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(order_keys[a] - shift) < std::abs(order_keys[b] - shift);
  });
  auto before = [&](std::size_t a, std::size_t b) {
    const Complex la = order_keys[a], lb = order_keys[b];
    const double da = std::abs(la - shift), db = std::abs(lb - shift);
    // Ties are judged at a level above the eigenvalue accuracy so that both
    // solver paths order conjugate pairs alike.
    const double tie = 1e-9 * std::max({std::abs(la), std::abs(lb), 1e-300});
    if (std::abs(da - db) > tie) return da < db;
    if (std::abs(la.real() - lb.real()) > tie) return la.real() < lb.real();
    return la.imag() < lb.imag();
  };
  for (std::size_t i = 1; i < perm.size(); ++i) {
    for (std::size_t j = i; j > 0 && before(perm[j], perm[j - 1]); --j) std::swap(perm[j], perm[j - 1]);
  }
}

VectorXcd start_vector(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v[i] = Complex(2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0, 0.0);
  }
  return v / v.norm();
}

// Applies (B - sigma C)^{-1} C or its adjoint-pencil counterpart
// (B^T - conj(sigma) C)^{-1} C, from a single factorization.
class ShiftInvert {
 public:
  ShiftInvert(const SparseMatrix& b, const SparseMatrix& c, Complex shift) : c_(c) {
    if (shift.imag() == 0.0) {
      SparseMatrix shifted = b - shift.real() * c;
      shifted.makeCompressed();
      auto& lu = solver_.emplace<RealLU>();
      lu.analyzePattern(shifted);
      lu.factorize(shifted);
      if (lu.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed: " + lu.lastErrorMessage());
    } else {
      ComplexSparse shifted = b.cast<Complex>() - shift * c.cast<Complex>();
      shifted.makeCompressed();
      auto& lu = solver_.emplace<ComplexLU>();
      lu.analyzePattern(shifted);
      lu.factorize(shifted);
      if (lu.info() != Eigen::Success) throw ConvergenceError("shift-invert factorization failed: " + lu.lastErrorMessage());
    }
  }

  VectorXcd apply(const VectorXcd& x, bool adjoint_pencil) const {
    const VectorXcd rhs = c_ * x;
    if (auto* lu = std::get_if<RealLU>(&solver_)) {
      Eigen::MatrixXd parts(rhs.size(), 2);
      parts.col(0) = rhs.real();
      parts.col(1) = rhs.imag();
      const Eigen::MatrixXd sol = adjoint_pencil ? Eigen::MatrixXd(lu->transpose().solve(parts))
                                                 : Eigen::MatrixXd(lu->solve(parts));
      VectorXcd out(rhs.size());
      out.real() = sol.col(0);
      out.imag() = sol.col(1);
      return out;
    }
    auto& lu = std::get<ComplexLU>(solver_);
    return adjoint_pencil ? VectorXcd(lu.adjoint().solve(rhs)) : VectorXcd(lu.solve(rhs));
  }

 private:
  using RealLU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;
  using ComplexLU = Eigen::SparseLU<ComplexSparse, Eigen::COLAMDOrdering<int>>;
  const SparseMatrix& c_;
  mutable std::variant<std::monostate, RealLU, ComplexLU> solver_;
};

struct RitzPairs {
  std::vector<Complex> theta;
  std::vector<VectorXcd> vectors;
  int restarts = 0;
};

// Krylov-Schur iteration for the `wanted` largest-modulus eigenvalues of op.
// Restarts keep an orthonormal basis of the wanted Ritz vectors; the
// projected matrix is then general rather than Hessenberg.
template <class Operator>
RitzPairs krylov_schur(const Operator& op, Eigen::Index n, int wanted, int dim, double ritz_tol,
                       int max_restarts, std::uint64_t seed) {
  const int m = static_cast<int>(std::min<Eigen::Index>(dim, n));
  wanted = std::min(wanted, m);
  MatrixXcd v(n, m);
  MatrixXcd h = MatrixXcd::Zero(m, m);
  VectorXcd f;
  VectorXcd b;  // relation: op(V_j) = V_j H_j + f b^T
  int j = 0;
  std::uint64_t refresh = seed;

  auto orthogonalize = [&](VectorXcd& w, int cols) {
    VectorXcd coeffs = VectorXcd::Zero(cols);
    for (int pass = 0; pass < 2; ++pass) {
      const VectorXcd c = v.leftCols(cols).adjoint() * w;
      w -= v.leftCols(cols) * c;
      coeffs += c;
    }
    return coeffs;
  };

  auto expand = [&] {
    while (j < m) {
      if (j == 0) {
        v.col(0) = start_vector(n, seed);
      } else {
        const double beta = f.norm();
        double scale = 0.0;
        for (int i = 0; i < j; ++i) scale = std::max(scale, h.col(i).norm());
        if (beta > 1e-13 * std::max(scale, 1e-300)) {
          v.col(j) = f / beta;
          h.row(j).head(j) = beta * b.transpose();
        } else {
          // Invariant subspace found: continue with a fresh orthogonal direction.
          VectorXcd r = start_vector(n, ++refresh);
          orthogonalize(r, j);
          v.col(j) = r / r.norm();
          h.row(j).head(j).setZero();
        }
      }
      VectorXcd w = op(v.col(j));
      const VectorXcd coeffs = orthogonalize(w, j + 1);
      h.col(j).head(j + 1) = coeffs;
      f = w;
      b = VectorXcd::Zero(j + 1);
      b[j] = 1.0;
      ++j;
    }
  };

  RitzPairs out;
  for (int restart = 0;; ++restart) {
    expand();
    Eigen::ComplexEigenSolver<MatrixXcd> es(h.topLeftCorner(m, m));
    if (es.info() != Eigen::Success) throw ConvergenceError("projected eigenproblem failed");
    const VectorXcd theta = es.eigenvalues();
    MatrixXcd s = es.eigenvectors();
    for (int i = 0; i < m; ++i) s.col(i).normalize();
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int c) { return std::abs(theta[a]) > std::abs(theta[c]); });
    const double fnorm = f.norm();
    int converged = 0;
    for (int i = 0; i < wanted; ++i) {
      const int k = order[i];
      const double est = fnorm * std::abs(b.dot(s.col(k).conjugate()));
      if (est <= ritz_tol * std::abs(theta[k])) ++converged;
    }
    if (converged == wanted || m == n || restart >= max_restarts) {
      if (converged < wanted && m != n) {
        std::ostringstream msg;
        msg << "Krylov-Schur did not converge after " << restart << " restarts (" << converged << "/" << wanted
            << " Ritz pairs)";
        throw ConvergenceError(msg.str());
      }
      out.restarts = restart;
      // Return a few extra Ritz pairs for matching and tie ordering.
      const int returned = std::min(m, wanted + std::max(2, wanted / 2));
      for (int i = 0; i < returned; ++i) {
        const int k = order[i];
        out.theta.push_back(theta[k]);
        VectorXcd x = v * s.col(k);
        out.vectors.push_back(x / x.norm());
      }
      return out;
    }
    const int keep = std::min(m - 2, std::max(wanted + 5, m / 2));
    MatrixXcd kept(m, keep);
    for (int i = 0; i < keep; ++i) kept.col(i) = s.col(order[i]);
    const Eigen::HouseholderQR<MatrixXcd> qr(kept);
    const MatrixXcd q = qr.householderQ() * MatrixXcd::Identity(m, keep);
    const MatrixXcd v_new = v * q;
    const MatrixXcd h_new = q.adjoint() * h * q;
    const VectorXcd b_new = q.transpose() * b;
    v.leftCols(keep) = v_new;
    h.setZero();
    h.topLeftCorner(keep, keep) = h_new;
    b = b_new;
    j = keep;
  }
}

std::vector<EigenPair> finish_pairs(const SparseMatrix& bm, const SparseMatrix& cm,
                                    std::vector<Candidate> right, std::vector<Candidate> left,
                                    const SolveOptions& options) {
  std::vector<Complex> keys;
  for (const auto& r : right) keys.push_back(r.lambda);
  std::vector<std::size_t> perm;
  sort_by_shift(keys, perm, options.shift);
  const auto k = static_cast<std::size_t>(options.num_pairs);
  if (perm.size() < k) throw ConvergenceError("fewer eigenpairs computed than requested");

  std::vector<EigenPair> pairs;
  std::vector<char> taken(left.size(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const Candidate& r = right[perm[i]];
    EigenPair pair;
    pair.lambda = r.lambda;
    pair.right = r.vector;
    // Left eigenvalues are conjugates of right ones: match by proximity.
    std::size_t best = left.size();
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < left.size(); ++l) {
      if (taken[l]) continue;
      const double gap = std::abs(r.lambda - std::conj(left[l].lambda));
      if (gap < best_gap) {
        best_gap = gap;
        best = l;
      }
    }
    if (best == left.size()) throw ConvergenceError("no left eigenvector available for pairing");
    taken[best] = 1;
    pair.left = left[best].vector;
    pair.pairing_warning = best_gap > 1e-6 * std::abs(r.lambda);
    pairs.push_back(std::move(pair));
  }
  pairs = normalize_biorthogonal(std::move(pairs), cm);
  for (auto& p : pairs) {
    p.residual_right = relative_residual(bm, cm, p.lambda, p.right);
    p.residual_left = relative_residual_left(bm, cm, p.lambda, p.left);
  }
  return pairs;
}

void check_inputs(const SparseMatrix& b, const SparseMatrix& c, const SolveOptions& options) {
  if (options.num_pairs < 1) throw Error("number of eigenpairs must be >= 1");
  if (!(options.tol > 0.0)) throw Error("solver tolerance must be positive");
  if (b.rows() != b.cols() || c.rows() != c.cols() || b.rows() != c.rows()) {
    throw Error("pencil matrices must be square and of equal size");
  }
  if (b.rows() < options.num_pairs) {
    throw Error("requested " + std::to_string(options.num_pairs) + " eigenpairs from a system with " +
                std::to_string(b.rows()) + " unknowns");
  }
}

void enforce_tolerance(const std::vector<EigenPair>& pairs, double tol) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].residual_right > tol || pairs[i].residual_left > tol) {
      std::ostringstream msg;
      msg << "eigenpair " << i << " (lambda = " << pairs[i].lambda << ") missed tolerance " << tol
          << ": residuals " << pairs[i].residual_right << " (right), " << pairs[i].residual_left << " (left)";
      throw ConvergenceError(msg.str());
    }
  }
}

}  // namespace

double relative_residual(const SparseMatrix& b, const SparseMatrix& c, Complex lambda, const VectorXcd& x) {
  const VectorXcd cx = c * x;
  return (b * x - lambda * cx).norm() / cx.norm();
}

double relative_residual_left(const SparseMatrix& b, const SparseMatrix& c, Complex lambda, const VectorXcd& y) {
  const VectorXcd cy = c * y;
  return (b.transpose() * y - std::conj(lambda) * cy).norm() / cy.norm();
}

std::vector<EigenPair> normalize_biorthogonal(std::vector<EigenPair> pairs, const SparseMatrix& c) {
  for (auto& p : pairs) {
    const double norm = std::sqrt(std::abs(p.right.dot(c * p.right)));
    if (!(norm > 0.0)) throw ConvergenceError("zero right eigenvector");
    p.right /= norm;
    Eigen::Index imax = 0;
    p.right.cwiseAbs().maxCoeff(&imax);
    p.right *= std::conj(p.right[imax]) / std::abs(p.right[imax]);
    const double lnorm = std::sqrt(std::abs(p.left.dot(c * p.left)));
    if (!(lnorm > 0.0)) throw ConvergenceError("zero left eigenvector");
    p.left /= lnorm;
  }
  // Groups of (numerically) equal eigenvalues are biorthonormalized as a
  // block; distinct eigenvalues are already C-orthogonal.
  std::vector<char> done(pairs.size(), 0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (done[i]) continue;
    std::vector<std::size_t> group = {i};
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      if (!done[j] && std::abs(pairs[j].lambda - pairs[i].lambda) <= 1e-8 * std::abs(pairs[i].lambda)) {
        group.push_back(j);
      }
    }
    const auto g = static_cast<Eigen::Index>(group.size());
    MatrixXcd gram(g, g);
    for (Eigen::Index a = 0; a < g; ++a) {
      const VectorXcd cx = c * pairs[group[a]].right;
      for (Eigen::Index l = 0; l < g; ++l) gram(l, a) = pairs[group[l]].left.dot(cx);  // y_l^H C x_a
    }
    const Eigen::JacobiSVD<MatrixXcd> svd(gram);
    if (svd.singularValues().minCoeff() < 1e-12) {
      std::ostringstream msg;
      msg << "near-defective eigenvalue " << pairs[i].lambda << ": left/right pairing "
          << svd.singularValues().minCoeff();
      throw ConvergenceError(msg.str());
    }
    // Y <- Y G^{-H} gives Y^H C X = G^{-1} G = I.
    const MatrixXcd transform = gram.adjoint().inverse();
    std::vector<VectorXcd> lefts;
    for (Eigen::Index a = 0; a < g; ++a) {
      VectorXcd y = VectorXcd::Zero(pairs[group[a]].left.size());
      for (Eigen::Index l = 0; l < g; ++l) y += pairs[group[l]].left * transform(l, a);
      lefts.push_back(std::move(y));
    }
    for (Eigen::Index a = 0; a < g; ++a) {
      pairs[group[a]].left = std::move(lefts[a]);
      done[group[a]] = 1;
    }
  }
  return pairs;
}

std::vector<EigenPair> solve_pairs_dense(const SparseMatrix& b, const SparseMatrix& c, const SolveOptions& options) {
  check_inputs(b, c, options);
  const Eigen::Index n = b.rows();
  const Eigen::MatrixXd bd(b);
  const Eigen::MatrixXd cd(c);
  const Eigen::LLT<Eigen::MatrixXd> llt(cd);
  if (llt.info() != Eigen::Success) throw Error("mass matrix is not positive definite");
  const auto lower = llt.matrixL();
  const Eigen::MatrixXd half = lower.solve(bd);
  Eigen::MatrixXd reduced = lower.solve(half.transpose()).transpose();  // L^{-1} B L^{-T}

  Eigen::VectorXd wr(n), wi(n);
  Eigen::MatrixXd vl(n, n), vr(n, n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'V', 'V', static_cast<lapack_int>(n), reduced.data(),
                                        static_cast<lapack_int>(n), wr.data(), wi.data(), vl.data(),
                                        static_cast<lapack_int>(n), vr.data(), static_cast<lapack_int>(n));
  if (info != 0) throw ConvergenceError("dense eigensolver failed (dgeev info " + std::to_string(info) + ")");

  const auto upper = llt.matrixU();  // L^T
  std::vector<Candidate> right, left;
  for (Eigen::Index j = 0; j < n; ++j) {
    VectorXcd z(n), u(n);
    Complex lambda(wr[j], wi[j]);
    if (wi[j] == 0.0) {
      z = vr.col(j).cast<Complex>();
      u = vl.col(j).cast<Complex>();
    } else if (wi[j] > 0.0) {
      z.real() = vr.col(j);
      z.imag() = vr.col(j + 1);
      u.real() = vl.col(j);
      u.imag() = vl.col(j + 1);
    } else {
      z.real() = vr.col(j - 1);
      z.imag() = -vr.col(j);
      u.real() = vl.col(j - 1);
      u.imag() = -vl.col(j);
    }
    // x = L^{-T} z; LAPACK's left vector u (u^H M = lambda u^H) maps to
    // y = L^{-T} u with B^T y = conj(lambda) C y.
    VectorXcd x(n), y(n);
    x.real() = upper.solve(Eigen::VectorXd(z.real()));
    x.imag() = upper.solve(Eigen::VectorXd(z.imag()));
    y.real() = upper.solve(Eigen::VectorXd(u.real()));
    y.imag() = upper.solve(Eigen::VectorXd(u.imag()));
    right.push_back({lambda, std::move(x)});
    left.push_back({std::conj(lambda), std::move(y)});
  }
  auto pairs = finish_pairs(b, c, std::move(right), std::move(left), options);
  enforce_tolerance(pairs, options.tol);
  return pairs;
}

std::vector<EigenPair> solve_pairs_iterative(const SparseMatrix& b, const SparseMatrix& c,
                                             const SolveOptions& options) {
  check_inputs(b, c, options);
  const Eigen::Index n = b.rows();
  const ShiftInvert shift_invert(b, c, options.shift);
  const int wanted = std::min<int>(static_cast<int>(n), options.num_pairs + 1);
  const int dim = options.krylov_dim > 0 ? options.krylov_dim : std::max(2 * wanted + 20, 40);

  std::vector<EigenPair> pairs;
  double ritz_tol = std::min(1e-8, options.tol * 1e2);
  for (int attempt = 0; attempt < 4; ++attempt, ritz_tol *= 1e-2) {
    const auto forward = krylov_schur([&](const VectorXcd& x) { return shift_invert.apply(x, false); }, n, wanted,
                                      dim, ritz_tol, options.max_iterations, options.seed);
    const auto backward = krylov_schur([&](const VectorXcd& x) { return shift_invert.apply(x, true); }, n,
                                       wanted, dim, ritz_tol, options.max_iterations, options.seed);
    std::vector<Candidate> right, left;
    for (std::size_t i = 0; i < forward.theta.size(); ++i) {
      right.push_back({options.shift + 1.0 / forward.theta[i], forward.vectors[i]});
    }
    for (std::size_t i = 0; i < backward.theta.size(); ++i) {
      left.push_back({std::conj(options.shift) + 1.0 / backward.theta[i], backward.vectors[i]});
    }
    pairs = finish_pairs(b, c, std::move(right), std::move(left), options);
    bool ok = true;
    for (const auto& p : pairs) ok = ok && p.residual_right <= options.tol && p.residual_left <= options.tol;
    if (ok) return pairs;
  }
  enforce_tolerance(pairs, options.tol);
  return pairs;
}

std::vector<EigenPair> solve_pairs(const SparseMatrix& b, const SparseMatrix& c, const SolveOptions& options) {
  if (b.rows() <= options.dense_threshold) return solve_pairs_dense(b, c, options);
  return solve_pairs_iterative(b, c, options);
}

std::vector<EigenPair> solve_pairs(const GlobalSystem& system, const SolveOptions& options) {
  return solve_pairs(system.bh, system.ch, options);
}

}  // namespace vemspectra
