#include "vemspectra/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "vemspectra/error.hpp"
#include "vemspectra/geometry.hpp"

namespace vemspectra {

namespace {

std::uint64_t edge_key(int a, int b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

}  // namespace

PolygonalMesh::PolygonalMesh(std::vector<Point> vertices, std::vector<std::vector<int>> elements,
                             int generation)
    : vertices_(std::move(vertices)), elements_(std::move(elements)), generation_(generation) {
  const int nv = static_cast<int>(vertices_.size());
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& cycle = elements_[e];
    const int id = static_cast<int>(e);
    if (cycle.size() < 3) throw MeshError(id, "cycle has fewer than 3 vertices");
    for (int v : cycle) {
      if (v < 0 || v >= nv) throw MeshError(id, "vertex index " + std::to_string(v) + " out of range");
    }
    auto sorted = cycle;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw MeshError(id, "duplicate vertex index in cycle");
    }
    const auto pts = element_points(id);
    if (!(signed_area(pts) > 0.0)) throw MeshError(id, "cycle is not counter-clockwise with positive area");
    if (!is_simple_polygon(pts)) throw MeshError(id, "self-intersecting cycle");
  }
  build_topology();
}

void PolygonalMesh::build_topology() {
  edges_.clear();
  element_edges_.assign(elements_.size(), {});
  std::unordered_map<std::uint64_t, int> lookup;
  lookup.reserve(elements_.size() * 6);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto& cycle = elements_[e];
    const int id = static_cast<int>(e);
    auto& local = element_edges_[e];
    local.resize(cycle.size());
    for (std::size_t i = 0; i < cycle.size(); ++i) {
      const int a = cycle[i];
      const int b = cycle[(i + 1) % cycle.size()];
      const auto [it, inserted] = lookup.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
      if (inserted) {
        edges_.push_back(MeshEdge{{a, b}, id, -1});
      } else {
        MeshEdge& edge = edges_[it->second];
        if (edge.right >= 0) throw MeshError(id, "edge shared by more than two elements");
        if (edge.vertices[0] != b || edge.vertices[1] != a) {
          throw MeshError(id, "edge orientation agrees with its neighbour (overlapping elements)");
        }
        edge.right = id;
      }
      local[i] = it->second;
    }
  }
  boundary_.assign(vertices_.size(), false);
  for (const auto& edge : edges_) {
    if (edge.on_boundary()) {
      boundary_[edge.vertices[0]] = true;
      boundary_[edge.vertices[1]] = true;
    }
  }
}

std::vector<Point> PolygonalMesh::element_points(int e) const {
  std::vector<Point> pts;
  pts.reserve(elements_[e].size());
  for (int v : elements_[e]) pts.push_back(vertices_[v]);
  return pts;
}

double PolygonalMesh::total_area() const {
  double total = 0.0;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    total += signed_area(element_points(static_cast<int>(e)));
  }
  return total;
}

double PolygonalMesh::min_edge_ratio() const {
  double ratio = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const auto pts = element_points(static_cast<int>(e));
    double diameter = 0.0;
    double shortest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      shortest = std::min(shortest, distance(pts[i], pts[(i + 1) % pts.size()]));
      for (std::size_t j = i + 1; j < pts.size(); ++j) diameter = std::max(diameter, distance(pts[i], pts[j]));
    }
    ratio = std::min(ratio, shortest / diameter);
  }
  return ratio;
}

// ---------------------------------------------------------------------------
// Domains

DomainSpec DomainSpec::parse(const std::string& name) {
  if (name == "unit-square" || name == "square") return {DomainKind::UnitSquare};
  if (name == "lshape" || name == "L-shape" || name == "l-shape") return {DomainKind::LShape};
  if (name == "hshape" || name == "H-shape" || name == "h-shape") return {DomainKind::HShape};
  if (name == "file" || name == "from-file") return {DomainKind::FromFile};
  throw Error("unknown domain '" + name + "' (expected unit-square, lshape, hshape or file)");
}

std::string DomainSpec::name() const {
  switch (kind) {
    case DomainKind::UnitSquare: return "unit-square";
    case DomainKind::LShape: return "lshape";
    case DomainKind::HShape: return "hshape";
    case DomainKind::FromFile: return "file";
  }
  return "unknown";
}

std::vector<Point> DomainSpec::outline() const {
  switch (kind) {
    case DomainKind::UnitSquare:
      return {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    case DomainKind::LShape:
      // (-1,1)^2 minus [0,1]x[-1,0]
      return {{-1, -1}, {0, -1}, {0, 0}, {1, 0}, {1, 1}, {-1, 1}};
    case DomainKind::HShape:
      // (0,3/2)x(0,3) minus [1/2,1]x[0,5/4] and [1/2,1]x[15/8,3]
      return {{0, 0},     {0.5, 0},   {0.5, 1.25}, {1, 1.25},     {1, 0},   {1.5, 0},
              {1.5, 3},   {1, 3},     {1, 1.875},  {0.5, 1.875},  {0.5, 3}, {0, 3}};
    case DomainKind::FromFile:
      return {};
  }
  return {};
}

double DomainSpec::area() const { return signed_area(outline()); }

std::vector<Point> DomainSpec::reentrant_corners() const {
  const auto poly = outline();
  std::vector<Point> corners;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[(i + n - 1) % n];
    const Point b = poly[i];
    const Point c = poly[(i + 1) % n];
    if (cross(b - a, c - b) < 0.0) corners.push_back(b);
  }
  return corners;
}

bool DomainSpec::contains(Point p) const {
  const auto poly = outline();
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = poly[i];
    const Point b = poly[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

MeshFamily parse_family(const std::string& name) {
  if (name == "tria") return MeshFamily::Tria;
  if (name == "quad") return MeshFamily::Quad;
  if (name == "hexa") return MeshFamily::Hexa;
  if (name == "voro") return MeshFamily::Voro;
  if (name == "file") return MeshFamily::File;
  throw Error("unknown mesh family '" + name + "' (expected tria, quad, hexa, voro)");
}

std::string family_name(MeshFamily family) {
  switch (family) {
    case MeshFamily::Tria: return "tria";
    case MeshFamily::Quad: return "quad";
    case MeshFamily::Hexa: return "hexa";
    case MeshFamily::Voro: return "voro";
    case MeshFamily::File: return "file";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Text format

PolygonalMesh load_mesh(std::istream& in) {
  std::string line;
  int line_no = 0;
  auto next_line = [&](const char* what) -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(line_no + 1, std::string("unexpected end of input, expected ") + what);
  };
  auto expect_end = [&](std::istringstream& ss) {
    std::string rest;
    if (ss >> rest) throw ParseError(line_no, "unexpected trailing token '" + rest + "'");
  };

  {
    auto ss = next_line("header");
    std::string tag;
    int version = 0;
    if (!(ss >> tag >> version) || tag != "#poly-mesh" || version != 1) {
      throw ParseError(line_no, "expected header '#poly-mesh 1'");
    }
    expect_end(ss);
  }
  long nv = 0, ne = 0;
  {
    auto ss = next_line("vertex and element counts");
    if (!(ss >> nv >> ne) || nv < 3 || ne < 1) throw ParseError(line_no, "expected positive counts 'V E'");
    expect_end(ss);
  }
  std::vector<Point> vertices(static_cast<std::size_t>(nv));
  for (auto& p : vertices) {
    auto ss = next_line("vertex coordinates");
    if (!(ss >> p.x >> p.y) || !std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw ParseError(line_no, "expected vertex coordinates 'x y'");
    }
    expect_end(ss);
  }
  std::vector<std::vector<int>> elements(static_cast<std::size_t>(ne));
  for (std::size_t e = 0; e < elements.size(); ++e) {
    auto ss = next_line("element cycle");
    int n = 0;
    if (!(ss >> n) || n < 3) throw ParseError(line_no, "expected vertex count >= 3 for element " + std::to_string(e));
    auto& cycle = elements[e];
    cycle.resize(static_cast<std::size_t>(n));
    for (int& v : cycle) {
      if (!(ss >> v)) throw ParseError(line_no, "expected " + std::to_string(n) + " vertex indices");
      if (v < 0 || v >= nv) {
        throw ParseError(line_no, "vertex index " + std::to_string(v) + " out of range in element " +
                                      std::to_string(e));
      }
    }
    expect_end(ss);
    std::vector<Point> pts;
    for (int v : cycle) pts.push_back(vertices[v]);
    if (signed_area(pts) < 0.0) std::reverse(cycle.begin(), cycle.end());
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) throw ParseError(line_no, "trailing content");
  }
  return PolygonalMesh(std::move(vertices), std::move(elements));
}

void save_mesh(std::ostream& out, const PolygonalMesh& mesh) {
  out << "#poly-mesh 1\n" << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  out << std::setprecision(17);
  for (const Point& p : mesh.vertices()) out << p.x << ' ' << p.y << '\n';
  for (const auto& cycle : mesh.elements()) {
    out << cycle.size();
    for (int v : cycle) out << ' ' << v;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Refinement

namespace {

bool children_valid(const std::vector<Point>& pts, const std::vector<Point>& mids, Point center) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<Point, 4> quad = {mids[(i + n - 1) % n], pts[i], mids[i], center};
    if (!(signed_area(quad) > 0.0) || !is_simple_polygon(quad)) return false;
  }
  return true;
}

}  // namespace

PolygonalMesh refine(const PolygonalMesh& mesh, std::span<const int> marked) {
  if (marked.empty()) return mesh;
  const auto& elements = mesh.elements();
  std::vector<char> is_marked(elements.size(), 0);
  for (int e : marked) {
    if (e < 0 || static_cast<std::size_t>(e) >= elements.size()) {
      throw MeshError(e, "marked element id out of range");
    }
    is_marked[e] = 1;
  }

  std::vector<Point> vertices = mesh.vertices();
  std::vector<int> midpoint(mesh.edges().size(), -1);
  for (std::size_t e = 0; e < elements.size(); ++e) {
    if (!is_marked[e]) continue;
    for (int edge_id : mesh.element_edges(static_cast<int>(e))) {
      if (midpoint[edge_id] >= 0) continue;
      const auto& edge = mesh.edges()[edge_id];
      midpoint[edge_id] = static_cast<int>(vertices.size());
      vertices.push_back(0.5 * (vertices[edge.vertices[0]] + vertices[edge.vertices[1]]));
    }
  }

  std::vector<std::vector<int>> out;
  out.reserve(elements.size() + 4 * marked.size());
  for (std::size_t e = 0; e < elements.size(); ++e) {
    const auto& cycle = elements[e];
    const auto& local_edges = mesh.element_edges(static_cast<int>(e));
    const std::size_t n = cycle.size();
    if (!is_marked[e]) {
      std::vector<int> grown;
      grown.reserve(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        grown.push_back(cycle[i]);
        if (midpoint[local_edges[i]] >= 0) grown.push_back(midpoint[local_edges[i]]);
      }
      out.push_back(std::move(grown));
      continue;
    }
    const auto pts = mesh.element_points(static_cast<int>(e));
    std::vector<Point> mids(n);
    for (std::size_t i = 0; i < n; ++i) mids[i] = vertices[midpoint[local_edges[i]]];
    Point center = element_geometry(pts, static_cast<int>(e)).centroid;
    if (!children_valid(pts, mids, center)) {
      const auto star = find_star_point(pts);
      if (!star || !children_valid(pts, mids, *star)) {
        throw MeshError(static_cast<int>(e), "no interior point yields valid child quadrilaterals");
      }
      center = *star;
    }
    const int c = static_cast<int>(vertices.size());
    vertices.push_back(center);
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back({midpoint[local_edges[(i + n - 1) % n]], cycle[i], midpoint[local_edges[i]], c});
    }
  }
  return PolygonalMesh(std::move(vertices), std::move(out), mesh.generation() + 1);
}

PolygonalMesh uniform_refine(const PolygonalMesh& mesh) {
  std::vector<int> all(mesh.num_elements());
  for (std::size_t e = 0; e < all.size(); ++e) all[e] = static_cast<int>(e);
  return refine(mesh, all);
}

}  // namespace vemspectra
