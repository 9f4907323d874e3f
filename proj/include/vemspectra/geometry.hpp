#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vemspectra/mesh.hpp"

namespace vemspectra {

struct EdgeGeometry {
  double length = 0.0;
  Point normal;    // unit, outward
  Point midpoint;
};

/// Scaled monomials m_a(x) = ((x - x_c)/h_E)^i ((y - y_c)/h_E)^j, ordered
/// {1, xi, eta, xi^2, xi*eta, eta^2}.
enum Monomial : int { kOne = 0, kXi, kEta, kXiXi, kXiEta, kEtaEta };

struct ElementGeometry {
  std::vector<Point> vertices;
  double area = 0.0;
  Point centroid;
  double diameter = 0.0;
  double perimeter = 0.0;
  /// edges[i] runs from vertices[i] to vertices[i+1].
  std::vector<EdgeGeometry> edges;
  /// Exact integrals over E of the six scaled monomials.
  std::array<double, 6> moments{};

  Point to_scaled(Point p) const {
    return {(p.x - centroid.x) / diameter, (p.y - centroid.y) / diameter};
  }
  /// L2 Gram matrix of {1, xi, eta} over E.
  Eigen::Matrix3d mass_matrix() const;
  std::size_t size() const { return vertices.size(); }
};

/// Area, centroid, diameter, edge data and exact degree-2 moments from
/// edge-wise divergence-theorem integrals. Throws MeshError (tagged with
/// `element_id`) for degenerate or self-intersecting cycles.
ElementGeometry element_geometry(std::span<const Point> polygon, int element_id = -1);
ElementGeometry element_geometry(const PolygonalMesh& mesh, int element);

bool is_simple_polygon(std::span<const Point> polygon);

struct QuadraturePoint {
  Point point;
  double weight = 0.0;
};

struct SubTriangulation {
  Point star;
  std::vector<std::array<Point, 3>> triangles;
  std::vector<QuadraturePoint> quadrature;
};

/// True when every fan triangle (star, v_i, v_{i+1}) has positive area.
bool is_star_point(std::span<const Point> polygon, Point star);

/// Area centroid if the polygon is star-shaped with respect to it, otherwise
/// the candidate (vertex averages, centroid blends) with the largest
/// clearance from the edge lines among those that are star points.
std::optional<Point> find_star_point(std::span<const Point> polygon);

/// Fan triangulation from `star` (default: find_star_point) with the
/// symmetric 3-point degree-2 rule on each triangle.
SubTriangulation subtriangulate(std::span<const Point> polygon,
                                std::optional<Point> star = std::nullopt);

using PointFunction = std::function<std::complex<double>(Point)>;

std::complex<double> integrate(const SubTriangulation& sub, const PointFunction& f);

}  // namespace vemspectra
