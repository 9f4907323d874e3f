#pragma once

#include <array>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "vemspectra/eig.hpp"
#include "vemspectra/mesh.hpp"
#include "vemspectra/vem.hpp"

namespace vemspectra {

enum class Problem { Primal, Dual };

struct ElementIndicator {
  double theta_sq = 0.0;  // stabilization energy of u_h - Pi u_h
  double r_sq = 0.0;      // h_E^2 ||Upsilon_E||^2
  double jump_sq = 0.0;   // sum over edges of h_E ||J_l||^2
  double eta_sq = 0.0;
};

struct EstimatorReport {
  std::vector<ElementIndicator> elements;
  double theta_sq = 0.0;
  double r_sq = 0.0;
  double jump_sq = 0.0;
  double eta_sq = 0.0;

  double eta() const;
  std::vector<double> element_eta() const;
};

/// Volumetric residual per element (coefficients in {1, xi, eta}) and the
/// constant conormal jump per mesh edge (zero on boundary edges).
struct ResidualField {
  std::vector<std::array<Complex, 3>> volume;
  std::vector<Complex> jumps;
};

/// `values` is the free-dof vector as stored in the pair (for the dual
/// problem the left vector; it is conjugated internally).
ResidualField residual_field(const PolygonalMesh& mesh, const GlobalSystem& system,
                             const Eigen::VectorXcd& values, Complex lambda, Problem problem);

/// Indicators for an arbitrary coefficient vector. Homogeneous of degree two
/// in `values`; no normalization is imposed.
EstimatorReport compute_indicators(const PolygonalMesh& mesh, const GlobalSystem& system,
                                   const Eigen::VectorXcd& values, Complex lambda,
                                   Problem problem);

/// Primal indicators; the right vector must satisfy x^H Ch x = 1 (1e-8).
EstimatorReport primal_indicators(const PolygonalMesh& mesh, const GlobalSystem& system,
                                  const EigenPair& pair);
/// Dual indicators from the left vector rescaled to unit Ch-norm.
EstimatorReport dual_indicators(const PolygonalMesh& mesh, const GlobalSystem& system,
                                const EigenPair& pair);

/// |lambda_ref - lambda_h| / eta^2.
double effectivity(Complex lambda_ref, Complex lambda_h, double eta);

}  // namespace vemspectra
