#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <unordered_map>

// Exact floating-point overlay; the default integer rescaling moves intersection points.
#define BOOST_GEOMETRY_NO_ROBUSTNESS
#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>

#include "vemspectra/error.hpp"
#include "vemspectra/geometry.hpp"
#include "vemspectra/mesh.hpp"

namespace vemspectra {

namespace {

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, /*ClockWise=*/false, /*Closed=*/true>;
using BgMultiPolygon = bg::model::multi_polygon<BgPolygon>;

struct Box {
  double xmin, xmax, ymin, ymax;
};

Box bounding_box(const std::vector<Point>& pts) {
  Box b{pts[0].x, pts[0].x, pts[0].y, pts[0].y};
  for (const Point& p : pts) {
    b.xmin = std::min(b.xmin, p.x);
    b.xmax = std::max(b.xmax, p.x);
    b.ymin = std::min(b.ymin, p.y);
    b.ymax = std::max(b.ymax, p.y);
  }
  return b;
}

BgPolygon to_boost(const std::vector<Point>& pts) {
  BgPolygon poly;
  for (const Point& p : pts) bg::append(poly.outer(), BgPoint(p.x, p.y));
  bg::append(poly.outer(), BgPoint(pts[0].x, pts[0].y));
  bg::correct(poly);
  return poly;
}

// Overlay output carries rounding error; put points
// that are within `tol` of the outline back onto it, corners first.
Point snap_to_outline(Point p, const std::vector<Point>& outline, double tol) {
  for (const Point& c : outline) {
    if (distance(p, c) <= tol) return c;
  }
  const std::size_t n = outline.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = outline[i], b = outline[(i + 1) % n];
    const Point d = b - a;
    const double t = dot(p - a, d) / dot(d, d);
    if (t < 0.0 || t > 1.0) continue;
    if (std::abs(cross(d, p - a)) / std::sqrt(dot(d, d)) > tol) continue;
    if (d.x == 0.0) return {a.x, p.y};
    if (d.y == 0.0) return {p.x, a.y};
    return a + t * d;
  }
  return p;
}

// Pieces of `cell` inside `domain`, as open CCW vertex cycles.
std::vector<std::vector<Point>> clip_to_domain(const std::vector<Point>& cell, const BgPolygon& domain,
                                               const std::vector<Point>& outline) {
  BgMultiPolygon result;
  bg::intersection(to_boost(cell), domain, result);
  const Box box = bounding_box(outline);
  const double tol = 1e-10 * std::max(box.xmax - box.xmin, box.ymax - box.ymin);
  std::vector<std::vector<Point>> pieces;
  for (const auto& poly : result) {
    std::vector<Point> ring;
    for (const auto& p : poly.outer()) ring.push_back(snap_to_outline({p.x(), p.y()}, outline, tol));
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    if (ring.size() >= 3) pieces.push_back(std::move(ring));
  }
  return pieces;
}

// Coordinates of the domain's corners along one axis.
std::vector<double> breakpoints(const std::vector<Point>& outline, bool along_x) {
  std::vector<double> v;
  for (const Point& p : outline) v.push_back(along_x ? p.x : p.y);
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Grid lines through every breakpoint with spacing close to 1/resolution.
std::vector<double> aligned_lines(const std::vector<double>& breaks, int resolution) {
  std::vector<double> lines = {breaks.front()};
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double len = breaks[k + 1] - breaks[k];
    const int parts = std::max(1, static_cast<int>(std::lround(len * resolution)));
    for (int i = 1; i < parts; ++i) lines.push_back(breaks[k] + len * i / parts);
    lines.push_back(breaks[k + 1]);
  }
  return lines;
}

PolygonalMesh structured_mesh(const DomainSpec& domain, bool triangles, int resolution) {
  const auto outline = domain.outline();
  const auto xs = aligned_lines(breakpoints(outline, true), resolution);
  const auto ys = aligned_lines(breakpoints(outline, false), resolution);
  const int nx = static_cast<int>(xs.size());
  std::vector<int> id(xs.size() * ys.size(), -1);
  std::vector<Point> vertices;
  auto vertex = [&](int i, int j) {
    int& slot = id[static_cast<std::size_t>(j) * nx + i];
    if (slot < 0) {
      slot = static_cast<int>(vertices.size());
      vertices.push_back({xs[i], ys[j]});
    }
    return slot;
  };
  std::vector<std::vector<int>> elements;
  for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const Point center{0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])};
      if (!domain.contains(center)) continue;
      const int ii = static_cast<int>(i), jj = static_cast<int>(j);
      const int v00 = vertex(ii, jj), v10 = vertex(ii + 1, jj);
      const int v11 = vertex(ii + 1, jj + 1), v01 = vertex(ii, jj + 1);
      if (triangles) {
        elements.push_back({v00, v10, v11});
        elements.push_back({v00, v11, v01});
      } else {
        elements.push_back({v00, v10, v11, v01});
      }
    }
  }
  return PolygonalMesh(std::move(vertices), std::move(elements));
}

// Spacing that divides every difference of the domain's y-breakpoints.
double y_alignment(const DomainSpec& domain) {
  return domain.kind == DomainKind::HShape ? 0.125 : 1.0;
}

PolygonalMesh hexagonal_mesh(const DomainSpec& domain, int resolution) {
  const auto outline = domain.outline();
  const Box box = bounding_box(outline);
  const BgPolygon clip = to_boost(outline);
  // Half-width a puts every x-breakpoint on a hexagon center or a vertical
  // edge; row spacing s puts every y-breakpoint on a row of centers.
  const double a = 0.5 / resolution;
  const double q = y_alignment(domain);
  const double s = q / std::max(1.0, std::round(q / (std::sqrt(3.0) * a)));
  const int rows = static_cast<int>(std::lround((box.ymax - box.ymin) / s));
  const int cols = static_cast<int>(std::lround((box.xmax - box.xmin) / (2.0 * a)));
  std::vector<std::vector<Point>> polygons;
  for (int j = 0; j <= rows; ++j) {
    const double cy = box.ymin + j * s;
    const double shift = (j % 2 == 0) ? 0.0 : a;
    for (int i = -1; i <= cols + 1; ++i) {
      const double cx = box.xmin + shift + 2.0 * a * i;
      const std::vector<Point> hex = {{cx, cy - 2.0 * s / 3.0}, {cx + a, cy - s / 3.0},
                                      {cx + a, cy + s / 3.0},   {cx, cy + 2.0 * s / 3.0},
                                      {cx - a, cy + s / 3.0},   {cx - a, cy - s / 3.0}};
      for (auto& piece : clip_to_domain(hex, clip, outline)) polygons.push_back(std::move(piece));
    }
  }
  return mesh_from_polygons(polygons);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Voronoi cell of seeds[k] restricted to `box`, by successive half-plane cuts.
std::vector<Point> voronoi_cell(const std::vector<Point>& seeds, std::size_t k, const Box& box) {
  std::vector<Point> cell = {{box.xmin, box.ymin}, {box.xmax, box.ymin}, {box.xmax, box.ymax}, {box.xmin, box.ymax}};
  const Point s = seeds[k];
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(seeds.size());
  for (std::size_t m = 0; m < seeds.size(); ++m) {
    if (m != k) order.push_back({distance(s, seeds[m]), m});
  }
  std::sort(order.begin(), order.end());
  for (const auto& [dist, m] : order) {
    double reach = 0.0;
    for (const Point& p : cell) reach = std::max(reach, distance(s, p));
    if (dist > 2.0 * reach) break;
    // Keep points closer to s than to seeds[m].
    const Point n = seeds[m] - s;
    const double offset = 0.5 * (dot(seeds[m], seeds[m]) - dot(s, s));
    std::vector<Point> next;
    for (std::size_t i = 0; i < cell.size(); ++i) {
      const Point p = cell[i];
      const Point r = cell[(i + 1) % cell.size()];
      const double fp = offset - dot(n, p);
      const double fr = offset - dot(n, r);
      if (fp >= 0.0) next.push_back(p);
      if ((fp >= 0.0) != (fr >= 0.0)) next.push_back(p + (fp / (fp - fr)) * (r - p));
    }
    cell = std::move(next);
  }
  return cell;
}

PolygonalMesh voronoi_mesh(const DomainSpec& domain, int resolution, std::uint64_t seed) {
  const auto outline = domain.outline();
  const Box box = bounding_box(outline);
  const BgPolygon clip = to_boost(outline);
  const double pad = 0.1 * std::max(box.xmax - box.xmin, box.ymax - box.ymin);
  const Box outer{box.xmin - pad, box.xmax + pad, box.ymin - pad, box.ymax + pad};

  const auto count = static_cast<std::size_t>(
      std::max(4L, std::lround(domain.area() * resolution * resolution)));
  std::mt19937_64 rng(seed);
  std::vector<Point> seeds;
  seeds.reserve(count);
  while (seeds.size() < count) {
    const Point p{box.xmin + (box.xmax - box.xmin) * uniform01(rng),
                  box.ymin + (box.ymax - box.ymin) * uniform01(rng)};
    if (domain.contains(p)) seeds.push_back(p);
  }

  constexpr int kLloydIterations = 2;
  for (int iter = 0; iter < kLloydIterations; ++iter) {
    std::vector<Point> moved = seeds;
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const auto pieces = clip_to_domain(voronoi_cell(seeds, k, outer), clip, outline);
      double best = 0.0;
      for (const auto& piece : pieces) {
        const double area = signed_area(piece);
        if (area > best) {
          best = area;
          moved[k] = element_geometry(piece).centroid;
        }
      }
      if (!domain.contains(moved[k])) moved[k] = seeds[k];
    }
    seeds = std::move(moved);
  }

  std::vector<std::vector<Point>> polygons;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    for (auto& piece : clip_to_domain(voronoi_cell(seeds, k, outer), clip, outline)) {
      polygons.push_back(std::move(piece));
    }
  }
  return mesh_from_polygons(polygons);
}

// Buckets points on a uniform grid for radius queries.
class PointGrid {
 public:
  PointGrid(double cell, double x0, double y0) : cell_(cell), x0_(x0), y0_(y0) {}

  void insert(Point p, int id) { buckets_[key(index(p.x, x0_), index(p.y, y0_))].push_back(id); }

  template <class Visit>
  void visit(double xmin, double xmax, double ymin, double ymax, Visit&& visit) const {
    for (long i = index(xmin, x0_); i <= index(xmax, x0_); ++i) {
      for (long j = index(ymin, y0_); j <= index(ymax, y0_); ++j) {
        const auto it = buckets_.find(key(i, j));
        if (it == buckets_.end()) continue;
        for (int id : it->second) visit(id);
      }
    }
  }

 private:
  long index(double v, double origin) const { return static_cast<long>(std::floor((v - origin) / cell_)); }
  static std::int64_t key(long i, long j) { return (static_cast<std::int64_t>(i) << 32) ^ (j & 0xffffffffL); }

  double cell_, x0_, y0_;
  std::unordered_map<std::int64_t, std::vector<int>> buckets_;
};

}  // namespace

PolygonalMesh mesh_from_polygons(const std::vector<std::vector<Point>>& polygons, double snap) {
  std::vector<Point> all;
  for (const auto& poly : polygons) all.insert(all.end(), poly.begin(), poly.end());
  if (all.empty()) throw MeshError(-1, "no polygons");
  const Box box = bounding_box(all);
  const double scale = std::max(box.xmax - box.xmin, box.ymax - box.ymin);
  const double tol = snap * scale;

  std::vector<Point> vertices;
  PointGrid merge_grid(std::max(tol, 1e-300) * 4.0, box.xmin, box.ymin);
  auto vertex_id = [&](Point p) {
    int found = -1;
    merge_grid.visit(p.x - tol, p.x + tol, p.y - tol, p.y + tol, [&](int id) {
      if (found < 0 && distance(vertices[id], p) <= tol) found = id;
    });
    if (found >= 0) return found;
    const int id = static_cast<int>(vertices.size());
    vertices.push_back(p);
    merge_grid.insert(p, id);
    return id;
  };

  std::vector<std::vector<int>> elements;
  double edge_sum = 0.0;
  std::size_t edge_count = 0;
  for (const auto& poly : polygons) {
    std::vector<int> cycle;
    for (const Point& p : poly) {
      const int id = vertex_id(p);
      if (cycle.empty() || cycle.back() != id) cycle.push_back(id);
    }
    while (cycle.size() > 1 && cycle.front() == cycle.back()) cycle.pop_back();
    if (cycle.size() < 3) continue;
    std::vector<Point> pts;
    for (int v : cycle) pts.push_back(vertices[v]);
    const double area = signed_area(pts);
    if (std::abs(area) <= tol * tol) continue;
    if (area < 0.0) std::reverse(cycle.begin(), cycle.end());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      edge_sum += distance(pts[i], pts[(i + 1) % pts.size()]);
      ++edge_count;
    }
    elements.push_back(std::move(cycle));
  }

  // Insert vertices that lie inside another element's edge (T-junctions).
  PointGrid edge_grid(std::max(edge_sum / std::max<std::size_t>(edge_count, 1), tol), box.xmin, box.ymin);
  for (std::size_t v = 0; v < vertices.size(); ++v) edge_grid.insert(vertices[v], static_cast<int>(v));
  for (auto& cycle : elements) {
    std::vector<int> grown;
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const int a = cycle[i];
      const int b = cycle[(i + 1) % cycle.size()];
      const Point pa = vertices[a], pb = vertices[b];
      const double len = distance(pa, pb);
      std::vector<std::pair<double, int>> inside;
      edge_grid.visit(std::min(pa.x, pb.x) - tol, std::max(pa.x, pb.x) + tol, std::min(pa.y, pb.y) - tol,
                      std::max(pa.y, pb.y) + tol, [&](int id) {
                        if (id == a || id == b) return;
                        const Point p = vertices[id];
                        const double t = dot(p - pa, pb - pa) / (len * len);
                        if (t * len <= tol || (1.0 - t) * len <= tol) return;
                        if (std::abs(cross(pb - pa, p - pa)) / len <= tol) inside.push_back({t, id});
                      });
      std::sort(inside.begin(), inside.end());
      grown.push_back(a);
      for (const auto& [t, id] : inside) grown.push_back(id);
    }
    cycle = std::move(grown);
  }

  // Drop unreferenced vertices, keeping first-use order.
  std::vector<int> remap(vertices.size(), -1);
  std::vector<Point> used;
  for (auto& cycle : elements) {
    for (int& v : cycle) {
      if (remap[v] < 0) {
        remap[v] = static_cast<int>(used.size());
        used.push_back(vertices[v]);
      }
      v = remap[v];
    }
  }
  return PolygonalMesh(std::move(used), std::move(elements));
}

PolygonalMesh build_mesh(const DomainSpec& domain, MeshFamily family, int resolution, std::uint64_t seed) {
  if (resolution < 1) throw Error("resolution must be >= 1");
  if (domain.kind == DomainKind::FromFile) throw Error("cannot generate a mesh for a file domain");
  switch (family) {
    case MeshFamily::Tria: return structured_mesh(domain, true, resolution);
    case MeshFamily::Quad: return structured_mesh(domain, false, resolution);
    case MeshFamily::Hexa: return hexagonal_mesh(domain, resolution);
    case MeshFamily::Voro: return voronoi_mesh(domain, resolution, seed);
    case MeshFamily::File: break;
  }
  throw Error("mesh family '" + family_name(family) + "' cannot be generated for domain " + domain.name());
}

}  // namespace vemspectra
