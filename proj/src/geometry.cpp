#include "vemspectra/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vemspectra/error.hpp"

namespace vemspectra {

namespace {

constexpr std::array<int, 6> kPowX = {0, 1, 0, 2, 1, 0};
constexpr std::array<int, 6> kPowY = {0, 0, 1, 0, 1, 2};

double ipow(double v, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= v;
  return r;
}

double orientation(Point a, Point b, Point c) { return cross(b - a, c - a); }

bool on_segment(Point a, Point b, Point p, double eps) {
  return std::abs(orientation(a, b, p)) <= eps && std::min(a.x, b.x) - 1e-14 <= p.x &&
         p.x <= std::max(a.x, b.x) + 1e-14 && std::min(a.y, b.y) - 1e-14 <= p.y &&
         p.y <= std::max(a.y, b.y) + 1e-14;
}

bool segments_touch(Point a, Point b, Point c, Point d, double eps) {
  const double o1 = orientation(a, b, c);
  const double o2 = orientation(a, b, d);
  const double o3 = orientation(c, d, a);
  const double o4 = orientation(c, d, b);
  if (((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) &&
      ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps))) {
    return true;
  }
  return on_segment(a, b, c, eps) || on_segment(a, b, d, eps) || on_segment(c, d, a, eps) ||
         on_segment(c, d, b, eps);
}

double bounding_size(std::span<const Point> polygon) {
  double xmin = polygon[0].x, xmax = xmin, ymin = polygon[0].y, ymax = ymin;
  for (const Point& p : polygon) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  return std::max(xmax - xmin, ymax - ymin);
}

// Smallest signed distance from p to the edge lines (positive inside for CCW).
double clearance(std::span<const Point> polygon, Point p) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    const double len = distance(a, b);
    if (len == 0.0) continue;
    best = std::min(best, orientation(a, b, p) / len);
  }
  return best;
}

// Kernel of a CCW polygon: bounding box clipped by every edge half-plane.
std::vector<Point> polygon_kernel(std::span<const Point> polygon) {
  double xmin = polygon[0].x, xmax = xmin, ymin = polygon[0].y, ymax = ymin;
  for (const Point& p : polygon) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  std::vector<Point> kernel = {{xmin, ymin}, {xmax, ymin}, {xmax, ymax}, {xmin, ymax}};
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n && !kernel.empty(); ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    std::vector<Point> next;
    for (std::size_t k = 0; k < kernel.size(); ++k) {
      const Point p = kernel[k];
      const Point q = kernel[(k + 1) % kernel.size()];
      const double sp = orientation(a, b, p);
      const double sq = orientation(a, b, q);
      if (sp >= 0.0) next.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) {
        const double t = sp / (sp - sq);
        next.push_back(p + t * (q - p));
      }
    }
    kernel = std::move(next);
  }
  return kernel;
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(std::span<const Point> polygon) {
  if (polygon.size() < 3) return 0.0;
  const Point o = polygon[0];
  double twice = 0.0;
  for (std::size_t i = 1; i + 1 < polygon.size(); ++i) {
    twice += cross(polygon[i] - o, polygon[i + 1] - o);
  }
  return 0.5 * twice;
}

bool is_simple_polygon(std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  const double size = bounding_size(polygon);
  if (size == 0.0) return false;
  const double eps = 1e-13 * size * size;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (distance(polygon[i], polygon[j]) <= 1e-13 * size) return false;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    // Consecutive edges may be collinear but must not fold back.
    const Point c = polygon[(i + 2) % n];
    if (std::abs(orientation(a, b, c)) <= eps && dot(b - a, c - b) < 0.0) return false;
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segments_touch(a, b, polygon[j], polygon[(j + 1) % n], eps)) return false;
    }
  }
  return true;
}

Eigen::Matrix3d ElementGeometry::mass_matrix() const {
  Eigen::Matrix3d m;
  m << moments[kOne], moments[kXi], moments[kEta],  //
      moments[kXi], moments[kXiXi], moments[kXiEta],  //
      moments[kEta], moments[kXiEta], moments[kEtaEta];
  return m;
}

ElementGeometry element_geometry(std::span<const Point> polygon, int element_id) {
  const std::size_t n = polygon.size();
  if (n < 3) throw MeshError(element_id, "polygon has fewer than 3 vertices");
  ElementGeometry g;
  g.vertices.assign(polygon.begin(), polygon.end());

  // Area and centroid relative to the first vertex.
  const Point o = polygon[0];
  double twice = 0.0;
  Point c{0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = polygon[i] - o;
    const Point q = polygon[(i + 1) % n] - o;
    const double w = cross(p, q);
    twice += w;
    c = c + w * (p + q);
  }
  g.area = 0.5 * twice;
  const double size = bounding_size(polygon);
  if (!(g.area > 1e-14 * size * size)) {
    throw MeshError(element_id, "non-positive area " + std::to_string(g.area));
  }
  if (!is_simple_polygon(polygon)) throw MeshError(element_id, "self-intersecting polygon");
  g.centroid = o + (1.0 / (3.0 * twice)) * c;

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      g.diameter = std::max(g.diameter, distance(polygon[i], polygon[j]));
    }
  }

  g.edges.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = polygon[i];
    const Point b = polygon[(i + 1) % n];
    EdgeGeometry& e = g.edges[i];
    e.length = distance(a, b);
    e.normal = {(b.y - a.y) / e.length, -(b.x - a.x) / e.length};
    e.midpoint = 0.5 * (a + b);
    g.perimeter += e.length;
  }

  // int_E xi^a eta^b = h^2 sum_edges int_0^1 xi^{a+1} eta^b / (a+1) d(eta);
  // the integrand is at most cubic in t, so 2-point Gauss is exact.
  const double gp = 0.5 / std::sqrt(3.0);
  const std::array<double, 2> nodes = {0.5 - gp, 0.5 + gp};
  const double h2 = g.diameter * g.diameter;
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = g.to_scaled(polygon[i]);
    const Point q = g.to_scaled(polygon[(i + 1) % n]);
    const double deta = q.y - p.y;
    for (const double t : nodes) {
      const Point s = p + t * (q - p);
      for (int m = 0; m < 6; ++m) {
        g.moments[m] += 0.5 * deta * ipow(s.x, kPowX[m] + 1) * ipow(s.y, kPowY[m]) /
                        (kPowX[m] + 1);
      }
    }
  }
  for (double& m : g.moments) m *= h2;
  return g;
}

ElementGeometry element_geometry(const PolygonalMesh& mesh, int element) {
  const auto pts = mesh.element_points(element);
  return element_geometry(pts, element);
}

bool is_star_point(std::span<const Point> polygon, Point star) {
  const double size = bounding_size(polygon);
  return clearance(polygon, star) > 1e-12 * size;
}

std::optional<Point> find_star_point(std::span<const Point> polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return std::nullopt;
  const double twice = 2.0 * signed_area(polygon);
  if (!(twice > 0.0)) return std::nullopt;
  Point centroid{0.0, 0.0};
  const Point o = polygon[0];
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = polygon[i] - o;
    const Point q = polygon[(i + 1) % n] - o;
    centroid = centroid + cross(p, q) * (p + q);
  }
  centroid = o + (1.0 / (3.0 * twice)) * centroid;
  if (is_star_point(polygon, centroid)) return centroid;

  std::vector<Point> candidates;
  Point average{0.0, 0.0};
  for (const Point& p : polygon) average = average + (1.0 / n) * p;
  candidates.push_back(average);
  for (std::size_t i = 0; i < n; ++i) {
    const Point triple = (1.0 / 3.0) * (polygon[(i + n - 1) % n] + polygon[i] + polygon[(i + 1) % n]);
    candidates.push_back(triple);
    candidates.push_back(0.5 * (triple + centroid));
  }
  const auto kernel = polygon_kernel(polygon);
  if (kernel.size() >= 3) {
    Point kc{0.0, 0.0};
    for (const Point& p : kernel) kc = kc + (1.0 / kernel.size()) * p;
    candidates.push_back(kc);
  }
  std::optional<Point> best;
  double best_clearance = 0.0;
  for (const Point& cand : candidates) {
    const double cl = clearance(polygon, cand);
    if (cl > best_clearance) {
      best_clearance = cl;
      best = cand;
    }
  }
  if (best && !is_star_point(polygon, *best)) return std::nullopt;
  return best;
}

SubTriangulation subtriangulate(std::span<const Point> polygon, std::optional<Point> star) {
  if (!star) {
    star = find_star_point(polygon);
    if (!star) throw MeshError(-1, "polygon is not star-shaped with respect to any candidate point");
  } else if (!is_star_point(polygon, *star)) {
    throw MeshError(-1, "polygon is not star-shaped with respect to the given point");
  }
  SubTriangulation sub;
  sub.star = *star;
  const std::size_t n = polygon.size();
  sub.triangles.reserve(n);
  sub.quadrature.reserve(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<Point, 3> tri = {*star, polygon[i], polygon[(i + 1) % n]};
    sub.triangles.push_back(tri);
    const double area = 0.5 * cross(tri[1] - tri[0], tri[2] - tri[0]);
    for (int k = 0; k < 3; ++k) {
      const Point p = (2.0 / 3.0) * tri[k] + (1.0 / 6.0) * (tri[(k + 1) % 3] + tri[(k + 2) % 3]);
      sub.quadrature.push_back({p, area / 3.0});
    }
  }
  return sub;
}

std::complex<double> integrate(const SubTriangulation& sub, const PointFunction& f) {
  std::complex<double> sum{0.0, 0.0};
  for (const auto& q : sub.quadrature) sum += q.weight * f(q.point);
  return sum;
}

}  // namespace vemspectra
