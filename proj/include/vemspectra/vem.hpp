#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "vemspectra/geometry.hpp"
#include "vemspectra/mesh.hpp"

namespace vemspectra {

using Vec2 = std::array<double, 2>;

/// Piecewise-constant diffusion and (constant, hence divergence-free)
/// advection per element.
struct Coefficients {
  std::vector<double> kappa;
  std::vector<Vec2> advection;

  static Coefficients uniform(std::size_t num_elements, double kappa, Vec2 advection);
  /// Throws when sizes mismatch or some kappa is not positive.
  void validate(std::size_t num_elements) const;
};

/// Energy projection of the lowest-order local space onto P1(E).
/// `pi_star` (3 x n) maps vertex values to coefficients of Pi v in the scaled
/// basis {1, xi, eta}; `dofs` (n x 3) holds the vertex values of that basis.
struct LocalProjector {
  Eigen::MatrixXd pi_star;
  Eigen::MatrixXd dofs;

  /// Vertex values of Pi v for all vertex-value vectors (n x n).
  Eigen::MatrixXd projector_in_dofs() const { return dofs * pi_star; }
};

LocalProjector local_projector(const ElementGeometry& geom);

/// Local matrices with entry (i, j) = form(phi_j, phi_i).
struct LocalOperators {
  LocalProjector projector;
  Eigen::MatrixXd stab_a;   // S^E, kappa-scaled dofi-dofi on (I - Pi)
  Eigen::MatrixXd stab_c;   // S0^E, |E|-scaled dofi-dofi on (I - Pi)
  Eigen::MatrixXd a;        // consistency + S^E
  Eigen::MatrixXd b;        // advection b(Pi w, Pi v)
  Eigen::MatrixXd c;        // (Pi w, Pi v) + S0^E
};

LocalOperators local_matrices(const ElementGeometry& geom, double kappa, Vec2 advection,
                              const LocalProjector& projector);

/// Assembled pencil (Bh, Ch) over interior (free) vertices; boundary values
/// are eliminated for the homogeneous Dirichlet condition.
struct GlobalSystem {
  int num_free = 0;
  Eigen::SparseMatrix<double> bh;
  Eigen::SparseMatrix<double> ch;
  /// Free-dof index of each mesh vertex, -1 for boundary/unused vertices.
  std::vector<int> vertex_to_dof;
  std::vector<int> dof_to_vertex;
  /// Per element, the free-dof index of each local vertex (or -1).
  std::vector<std::vector<int>> gather;
  std::vector<ElementGeometry> geometry;
  std::vector<LocalOperators> local;
  Coefficients coefficients;

  /// Local vertex values of a free-dof vector on element e (zeros on boundary).
  Eigen::VectorXcd element_values(int e, const Eigen::VectorXcd& x) const;
  /// Expands a free-dof vector to all mesh vertices.
  Eigen::VectorXcd vertex_values(const Eigen::VectorXcd& x) const;
};

/// Throws MeshError when the mesh has no interior vertex.
GlobalSystem assemble(const PolygonalMesh& mesh, const Coefficients& coefficients);

}  // namespace vemspectra
