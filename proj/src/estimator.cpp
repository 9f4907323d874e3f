#include "vemspectra/estimator.hpp"

#include <cmath>

#include "vemspectra/error.hpp"
#include "vemspectra/parallel.hpp"

namespace vemspectra {

namespace {

struct ElementField {
  Eigen::Vector3cd poly;  // Pi u_h in {1, xi, eta}
  Complex grad_x, grad_y;
};

std::vector<ElementField> projected_fields(const GlobalSystem& system, const Eigen::VectorXcd& values,
                                           Problem problem) {
  const std::size_t ne = system.gather.size();
  const Eigen::VectorXcd data = problem == Problem::Dual ? Eigen::VectorXcd(values.conjugate()) : values;
  std::vector<ElementField> fields(ne);
  parallel_for(ne, [&](std::size_t e) {
    const Eigen::VectorXcd local = system.element_values(static_cast<int>(e), data);
    ElementField& f = fields[e];
    f.poly = system.local[e].projector.pi_star.cast<Complex>() * local;
    const double h = system.geometry[e].diameter;
    f.grad_x = f.poly[1] / h;
    f.grad_y = f.poly[2] / h;
  });
  return fields;
}

}  // namespace

double EstimatorReport::eta() const { return std::sqrt(eta_sq); }

std::vector<double> EstimatorReport::element_eta() const {
  std::vector<double> out;
  out.reserve(elements.size());
  for (const auto& e : elements) out.push_back(std::sqrt(e.eta_sq));
  return out;
}

ResidualField residual_field(const PolygonalMesh& mesh, const GlobalSystem& system, const Eigen::VectorXcd& values,
                             Complex lambda, Problem problem) {
  if (values.size() != system.num_free) throw Error("coefficient vector does not match the system size");
  const auto fields = projected_fields(system, values, problem);
  const double sign = problem == Problem::Dual ? 1.0 : -1.0;
  ResidualField out;
  out.volume.resize(fields.size());
  for (std::size_t e = 0; e < fields.size(); ++e) {
    const auto& f = fields[e];
    const Vec2 adv = system.coefficients.advection[e];
    const Complex transport = adv[0] * f.grad_x + adv[1] * f.grad_y;
    out.volume[e] = {sign * transport + lambda * f.poly[0], lambda * f.poly[1], lambda * f.poly[2]};
  }
  const auto& edges = mesh.edges();
  out.jumps.assign(edges.size(), Complex(0.0, 0.0));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const MeshEdge& edge = edges[i];
    if (edge.on_boundary()) continue;
    const Point a = mesh.vertices()[edge.vertices[0]];
    const Point b = mesh.vertices()[edge.vertices[1]];
    const double len = distance(a, b);
    const Point n{(b.y - a.y) / len, -(b.x - a.x) / len};  // outward for the left element
    const auto& fl = fields[edge.left];
    const auto& fr = fields[edge.right];
    const double kl = system.coefficients.kappa[edge.left];
    const double kr = system.coefficients.kappa[edge.right];
    const Complex flux_l = kl * (fl.grad_x * n.x + fl.grad_y * n.y);
    const Complex flux_r = kr * (fr.grad_x * n.x + fr.grad_y * n.y);
    out.jumps[i] = 0.5 * (flux_l - flux_r);
  }
  return out;
}

EstimatorReport compute_indicators(const PolygonalMesh& mesh, const GlobalSystem& system,
                                   const Eigen::VectorXcd& values, Complex lambda, Problem problem) {
  const ResidualField field = residual_field(mesh, system, values, lambda, problem);
  const Eigen::VectorXcd data = problem == Problem::Dual ? Eigen::VectorXcd(values.conjugate()) : values;
  const std::size_t ne = mesh.num_elements();
  EstimatorReport report;
  report.elements.resize(ne);
  parallel_for(ne, [&](std::size_t e) {
    const int id = static_cast<int>(e);
    const ElementGeometry& geom = system.geometry[e];
    ElementIndicator& ind = report.elements[e];
    const Eigen::VectorXcd local = system.element_values(id, data);
    ind.theta_sq = std::max(0.0, std::real(local.dot(system.local[e].stab_a.cast<Complex>() * local)));
    const Eigen::Vector3cd c(field.volume[e][0], field.volume[e][1], field.volume[e][2]);
    const double h = geom.diameter;
    ind.r_sq = std::max(0.0, h * h * std::real(c.dot(geom.mass_matrix().cast<Complex>() * c)));
    const auto& local_edges = mesh.element_edges(id);
    for (std::size_t i = 0; i < local_edges.size(); ++i) {
      const Complex j = field.jumps[local_edges[i]];
      ind.jump_sq += h * std::norm(j) * geom.edges[i].length;
    }
    ind.eta_sq = ind.theta_sq + ind.r_sq + ind.jump_sq;
  });
  for (const auto& ind : report.elements) {
    report.theta_sq += ind.theta_sq;
    report.r_sq += ind.r_sq;
    report.jump_sq += ind.jump_sq;
  }
  report.eta_sq = report.theta_sq + report.r_sq + report.jump_sq;
  return report;
}

EstimatorReport primal_indicators(const PolygonalMesh& mesh, const GlobalSystem& system, const EigenPair& pair) {
  const Complex norm = pair.right.dot(system.ch * pair.right);
  if (std::abs(norm - 1.0) > 1e-8) {
    throw Error("primal eigenvector is not normalized (x^H C x = " + std::to_string(norm.real()) + ")");
  }
  return compute_indicators(mesh, system, pair.right, pair.lambda, Problem::Primal);
}

EstimatorReport dual_indicators(const PolygonalMesh& mesh, const GlobalSystem& system, const EigenPair& pair) {
  const double norm = std::sqrt(std::abs(pair.left.dot(system.ch * pair.left)));
  if (!(norm > 0.0)) throw Error("dual eigenvector is zero");
  return compute_indicators(mesh, system, pair.left / norm, pair.lambda, Problem::Dual);
}

double effectivity(Complex lambda_ref, Complex lambda_h, double eta) {
  if (!(eta > 0.0)) throw Error("effectivity needs a positive estimator");
  return std::abs(lambda_ref - lambda_h) / (eta * eta);
}

}  // namespace vemspectra
