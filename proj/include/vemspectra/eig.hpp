#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "vemspectra/vem.hpp"

namespace vemspectra {

using Complex = std::complex<double>;

/// Eigenvalue of the pencil Bh x = lambda Ch x with its right (primal) vector
/// and left (dual) vector y, where Bh^T y = conj(lambda) Ch y.
struct EigenPair {
  Complex lambda;
  Eigen::VectorXcd right;
  Eigen::VectorXcd left;
  /// ||Bh x - lambda Ch x|| / ||Ch x||, and the same for the left vector.
  double residual_right = 0.0;
  double residual_left = 0.0;
  /// Set when no left eigenvalue was found within 1e-6 |lambda| of conj(lambda).
  bool pairing_warning = false;
};

struct SolveOptions {
  int num_pairs = 1;
  Complex shift{0.0, 0.0};
  double tol = 1e-10;
  /// Restart cycles of the Krylov iteration.
  int max_iterations = 200;
  /// Pencils with at most this many unknowns use the dense solver.
  int dense_threshold = 400;
  /// Krylov subspace dimension; 0 picks max(2k + 20, 40).
  int krylov_dim = 0;
  std::uint64_t seed = 0x5eedULL;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/// The `num_pairs` eigenpairs nearest the shift, sorted by |lambda - shift|,
/// then real part, then imaginary part, with biorthonormal vectors
/// (x^H C x = 1, y^H C x = 1) and the largest entry of x real positive.
/// Throws ConvergenceError when the residual tolerance cannot be met.
std::vector<EigenPair> solve_pairs(const SparseMatrix& b, const SparseMatrix& c,
                                   const SolveOptions& options);
std::vector<EigenPair> solve_pairs(const GlobalSystem& system, const SolveOptions& options);

/// Direct path: Cholesky reduction of Ch and a dense nonsymmetric eigensolve.
std::vector<EigenPair> solve_pairs_dense(const SparseMatrix& b, const SparseMatrix& c,
                                         const SolveOptions& options);
/// Iterative path: Krylov-Schur iteration on (B - sigma C)^{-1} C and on the
/// transposed pencil, reusing one sparse LU factorization.
std::vector<EigenPair> solve_pairs_iterative(const SparseMatrix& b, const SparseMatrix& c,
                                             const SolveOptions& options);

/// Rescales each pair so that right^H C right = 1 and left^H C right = 1 with
/// the phase convention above. Throws ConvergenceError when the normalized
/// pairing |left^H C right| falls below 1e-12.
std::vector<EigenPair> normalize_biorthogonal(std::vector<EigenPair> pairs,
                                              const SparseMatrix& c);

double relative_residual(const SparseMatrix& b, const SparseMatrix& c, Complex lambda,
                         const Eigen::VectorXcd& x);
double relative_residual_left(const SparseMatrix& b, const SparseMatrix& c, Complex lambda,
                              const Eigen::VectorXcd& y);

}  // namespace vemspectra
