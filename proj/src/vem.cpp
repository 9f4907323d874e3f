#include "vemspectra/vem.hpp"

#include <cmath>

#include "vemspectra/error.hpp"
#include "vemspectra/parallel.hpp"

namespace vemspectra {

Coefficients Coefficients::uniform(std::size_t num_elements, double kappa, Vec2 advection) {
  Coefficients c;
  c.kappa.assign(num_elements, kappa);
  c.advection.assign(num_elements, advection);
  return c;
}

void Coefficients::validate(std::size_t num_elements) const {
  if (kappa.size() != num_elements || advection.size() != num_elements) {
    throw Error("coefficients defined on " + std::to_string(kappa.size()) + " elements, mesh has " +
                std::to_string(num_elements));
  }
  for (std::size_t e = 0; e < kappa.size(); ++e) {
    if (!(kappa[e] > 0.0) || !std::isfinite(kappa[e])) {
      throw Error("diffusion coefficient must be positive on element " + std::to_string(e));
    }
    if (!std::isfinite(advection[e][0]) || !std::isfinite(advection[e][1])) {
      throw Error("advection must be finite on element " + std::to_string(e));
    }
  }
}

LocalProjector local_projector(const ElementGeometry& geom) {
  const int n = static_cast<int>(geom.size());
  const double h = geom.diameter;
  LocalProjector proj;
  proj.dofs.resize(n, 3);
  Eigen::MatrixXd rhs(3, n);
  for (int i = 0; i < n; ++i) {
    const Point s = geom.to_scaled(geom.vertices[i]);
    proj.dofs(i, 0) = 1.0;
    proj.dofs(i, 1) = s.x;
    proj.dofs(i, 2) = s.y;
    // Vertex i's trace is the hat function on its two edges; the edge
    // trapezoid rule integrates it exactly.
    const EdgeGeometry& prev = geom.edges[(i + n - 1) % n];
    const EdgeGeometry& next = geom.edges[i];
    rhs(0, i) = 0.5 * (prev.length + next.length) / geom.perimeter;
    rhs(1, i) = 0.5 * (prev.length * prev.normal.x + next.length * next.normal.x) / h;
    rhs(2, i) = 0.5 * (prev.length * prev.normal.y + next.length * next.normal.y) / h;
  }
  const Eigen::Matrix3d g = rhs * proj.dofs;
  const Eigen::FullPivLU<Eigen::Matrix3d> lu(g);
  if (!lu.isInvertible()) throw MeshError(-1, "singular projector system");
  proj.pi_star = lu.solve(rhs);
  return proj;
}

LocalOperators local_matrices(const ElementGeometry& geom, double kappa, Vec2 advection,
                              const LocalProjector& projector) {
  const int n = static_cast<int>(geom.size());
  const double h = geom.diameter;
  const Eigen::MatrixXd& pi = projector.pi_star;
  LocalOperators op;
  op.projector = projector;

  const Eigen::MatrixXd defect = Eigen::MatrixXd::Identity(n, n) - projector.projector_in_dofs();
  const Eigen::MatrixXd dofi = defect.transpose() * defect;
  op.stab_a = kappa * dofi;
  op.stab_c = geom.area * dofi;

  // Gradient of Pi phi_j is (pi(1,j), pi(2,j)) / h, constant on E.
  const Eigen::MatrixXd grads = pi.bottomRows(2) / h;
  op.a = kappa * geom.area * grads.transpose() * grads + op.stab_a;

  const Eigen::RowVectorXd transport = advection[0] * grads.row(0) + advection[1] * grads.row(1);
  const Eigen::Vector3d mono_integrals(geom.moments[kOne], geom.moments[kXi], geom.moments[kEta]);
  const Eigen::VectorXd mean_test = pi.transpose() * mono_integrals;  // int_E Pi phi_i
  op.b = mean_test * transport;

  op.c = pi.transpose() * geom.mass_matrix() * pi + op.stab_c;
  return op;
}

Eigen::VectorXcd GlobalSystem::element_values(int e, const Eigen::VectorXcd& x) const {
  const auto& idx = gather[e];
  Eigen::VectorXcd local = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= 0) local[static_cast<Eigen::Index>(i)] = x[idx[i]];
  }
  return local;
}

Eigen::VectorXcd GlobalSystem::vertex_values(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd all = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(vertex_to_dof.size()));
  for (std::size_t v = 0; v < vertex_to_dof.size(); ++v) {
    if (vertex_to_dof[v] >= 0) all[static_cast<Eigen::Index>(v)] = x[vertex_to_dof[v]];
  }
  return all;
}

GlobalSystem assemble(const PolygonalMesh& mesh, const Coefficients& coefficients) {
  const std::size_t ne = mesh.num_elements();
  coefficients.validate(ne);
  GlobalSystem sys;
  sys.coefficients = coefficients;

  std::vector<char> used(mesh.num_vertices(), 0);
  for (const auto& cycle : mesh.elements()) {
    for (int v : cycle) used[v] = 1;
  }
  sys.vertex_to_dof.assign(mesh.num_vertices(), -1);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (used[v] && !mesh.boundary_vertex_flags()[v]) {
      sys.vertex_to_dof[v] = sys.num_free++;
      sys.dof_to_vertex.push_back(static_cast<int>(v));
    }
  }
  if (sys.num_free == 0) throw MeshError(-1, "mesh has no interior vertex");

  sys.gather.resize(ne);
  sys.geometry.resize(ne);
  sys.local.resize(ne);
  parallel_for(ne, [&](std::size_t e) {
    const int id = static_cast<int>(e);
    sys.geometry[e] = element_geometry(mesh, id);
    sys.local[e] = local_matrices(sys.geometry[e], coefficients.kappa[e], coefficients.advection[e],
                                  local_projector(sys.geometry[e]));
    const auto& cycle = mesh.elements()[e];
    sys.gather[e].resize(cycle.size());
    for (std::size_t i = 0; i < cycle.size(); ++i) sys.gather[e][i] = sys.vertex_to_dof[cycle[i]];
  });

  std::vector<Eigen::Triplet<double>> tb, tc;
  std::size_t nnz = 0;
  for (const auto& g : sys.gather) nnz += g.size() * g.size();
  tb.reserve(nnz);
  tc.reserve(nnz);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto& idx = sys.gather[e];
    const auto& op = sys.local[e];
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        if (idx[j] < 0) continue;
        const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
        tb.emplace_back(idx[i], idx[j], op.a(ii, jj) + op.b(ii, jj));
        tc.emplace_back(idx[i], idx[j], op.c(ii, jj));
      }
    }
  }
  sys.bh.resize(sys.num_free, sys.num_free);
  sys.ch.resize(sys.num_free, sys.num_free);
  sys.bh.setFromTriplets(tb.begin(), tb.end());
  sys.ch.setFromTriplets(tc.begin(), tc.end());
  sys.bh.makeCompressed();
  sys.ch.makeCompressed();
  return sys;
}

}  // namespace vemspectra
