#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vemspectra {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
double distance(Point a, Point b);

/// Signed area of a closed vertex cycle (positive when counter-clockwise).
double signed_area(std::span<const Point> polygon);

/// An edge between two consecutive cycle vertices. `vertices` follows the
/// orientation of the `left` element; `right` is -1 on the boundary.
struct MeshEdge {
  std::array<int, 2> vertices{};
  int left = -1;
  int right = -1;

  bool on_boundary() const { return right < 0; }
};

/// Conforming polygonal mesh. Elements are counter-clockwise vertex cycles;
/// collinear vertices (absorbed hanging nodes) are allowed. The constructor
/// validates every structural invariant and throws MeshError on violation.
class PolygonalMesh {
 public:
  PolygonalMesh() = default;
  PolygonalMesh(std::vector<Point> vertices, std::vector<std::vector<int>> elements,
                int generation = 0);

  const std::vector<Point>& vertices() const { return vertices_; }
  const std::vector<std::vector<int>>& elements() const { return elements_; }
  const std::vector<MeshEdge>& edges() const { return edges_; }
  /// Edge ids of element `e`; entry i is the edge from local vertex i to i+1.
  const std::vector<int>& element_edges(int e) const { return element_edges_[e]; }
  const std::vector<bool>& boundary_vertex_flags() const { return boundary_; }
  int generation() const { return generation_; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  std::vector<Point> element_points(int e) const;
  double total_area() const;
  /// Smallest ratio (shortest edge)/(element diameter) over all elements.
  double min_edge_ratio() const;

  friend bool operator==(const PolygonalMesh& a, const PolygonalMesh& b) {
    return a.generation_ == b.generation_ && a.vertices_ == b.vertices_ &&
           a.elements_ == b.elements_;
  }

 private:
  void build_topology();

  std::vector<Point> vertices_;
  std::vector<std::vector<int>> elements_;
  std::vector<MeshEdge> edges_;
  std::vector<std::vector<int>> element_edges_;
  std::vector<bool> boundary_;
  int generation_ = 0;
};

enum class DomainKind { UnitSquare, LShape, HShape, FromFile };

struct DomainSpec {
  DomainKind kind = DomainKind::UnitSquare;

  static DomainSpec parse(const std::string& name);
  std::string name() const;
  /// Counter-clockwise boundary of the domain (empty for FromFile).
  std::vector<Point> outline() const;
  double area() const;
  /// Non-convex boundary corners.
  std::vector<Point> reentrant_corners() const;
  bool contains(Point p) const;
};

enum class MeshFamily { Tria, Quad, Hexa, Voro, File };

MeshFamily parse_family(const std::string& name);
std::string family_name(MeshFamily family);

constexpr std::uint64_t kDefaultSeed = 20240601;

/// Generates a conforming mesh of `domain`. `resolution` is roughly the number
/// of elements per unit length; `seed` only affects the Voronoi family.
PolygonalMesh build_mesh(const DomainSpec& domain, MeshFamily family, int resolution,
                         std::uint64_t seed = kDefaultSeed);

/// Builds a conforming mesh from independently computed polygons: nearby
/// vertices are merged (relative tolerance `snap`), vertices lying inside a
/// neighbour's edge are inserted into that edge, and orientation is fixed.
PolygonalMesh mesh_from_polygons(const std::vector<std::vector<Point>>& polygons,
                                 double snap = 1e-9);

PolygonalMesh load_mesh(std::istream& in);
void save_mesh(std::ostream& out, const PolygonalMesh& mesh);

/// Splits every marked element into quadrilaterals joining its barycenter to
/// the edge midpoints; unmarked neighbours receive the midpoints as vertices.
PolygonalMesh refine(const PolygonalMesh& mesh, std::span<const int> marked);
PolygonalMesh uniform_refine(const PolygonalMesh& mesh);

}  // namespace vemspectra
