#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>

#include "vemspectra/eig.hpp"
#include "vemspectra/mesh.hpp"
#include "vemspectra/vem.hpp"

namespace testing {

using vemspectra::Point;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Convex polygon: sorted angles on a randomly stretched, rotated, shifted ellipse.
inline std::vector<Point> random_convex_polygon(std::mt19937_64& rng, int n) {
  std::vector<double> angles(n);
  for (auto& a : angles) a = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  for (int i = 1; i < n; ++i) {
    if (angles[i] - angles[i - 1] < 1e-2) angles[i] = angles[i - 1] + 1e-2;
  }
  const double rx = uniform(rng, 0.2, 3.0), ry = uniform(rng, 0.2, 3.0);
  const double rot = uniform(rng, 0.0, std::numbers::pi);
  const Point shift{uniform(rng, -5.0, 5.0), uniform(rng, -5.0, 5.0)};
  std::vector<Point> poly;
  for (double a : angles) {
    const double x = rx * std::cos(a), y = ry * std::sin(a);
    poly.push_back({shift.x + std::cos(rot) * x - std::sin(rot) * y, shift.y + std::sin(rot) * x + std::cos(rot) * y});
  }
  return poly;
}

// Star-shaped (possibly non-convex) polygon around a random center.
inline std::vector<Point> random_star_polygon(std::mt19937_64& rng, int n) {
  const Point c{uniform(rng, -2.0, 2.0), uniform(rng, -2.0, 2.0)};
  std::vector<Point> poly;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * (i + uniform(rng, 0.1, 0.9)) / n;
    const double r = uniform(rng, 0.3, 1.5);
    poly.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return poly;
}

// Degree-5 Dunavant rule (7 points) on a fan from vertex 0; valid for convex polygons.
inline double fan_integral(const std::vector<Point>& poly, const std::function<double(Point)>& f) {
  static const double a1 = 0.059715871789770, b1 = 0.470142064105115;
  static const double a2 = 0.797426985353087, b2 = 0.101286507323456;
  static const double w0 = 0.225, w1 = 0.132394152788506, w2 = 0.125939180544827;
  double sum = 0.0;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    const Point p0 = poly[0], p1 = poly[i], p2 = poly[i + 1];
    const double area = 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
    auto at = [&](double l0, double l1, double l2) {
      return Point{l0 * p0.x + l1 * p1.x + l2 * p2.x, l0 * p0.y + l1 * p1.y + l2 * p2.y};
    };
    double s = w0 * f(at(1.0 / 3, 1.0 / 3, 1.0 / 3));
    s += w1 * (f(at(a1, b1, b1)) + f(at(b1, a1, b1)) + f(at(b1, b1, a1)));
    s += w2 * (f(at(a2, b2, b2)) + f(at(b2, a2, b2)) + f(at(b2, b2, a2)));
    sum += area * s;
  }
  return sum;
}

// Reference generalized eigenvalues: Eigen's Francis QR on C^{-1} B (C is SPD),
// sorted by modulus.
inline std::vector<std::complex<double>> reference_eigenvalues(const Eigen::SparseMatrix<double>& b,
                                                        const Eigen::SparseMatrix<double>& c) {
  const Eigen::MatrixXd m = Eigen::MatrixXd(c).llt().solve(Eigen::MatrixXd(b));
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) throw std::runtime_error("reference eigensolver failed");
  std::vector<std::complex<double>> out(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(out.begin(), out.end(), [](auto x, auto y) { return std::abs(x) < std::abs(y); });
  return out;
}

// Random-coefficient system on a Voronoi mesh of the unit square; N stays below 500.
struct RandomSystem {
  vemspectra::PolygonalMesh mesh;
  vemspectra::GlobalSystem system;
};

inline RandomSystem random_system(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int resolution = 5 + static_cast<int>(rng() % 11);
  RandomSystem rs;
  rs.mesh = vemspectra::build_mesh(vemspectra::DomainSpec{vemspectra::DomainKind::UnitSquare},
                                   vemspectra::MeshFamily::Voro, resolution, seed);
  vemspectra::Coefficients coeffs;
  const double speed = uniform(rng, 0.0, 8.0);
  for (std::size_t e = 0; e < rs.mesh.num_elements(); ++e) {
    coeffs.kappa.push_back(uniform(rng, 0.5, 2.0));
    coeffs.advection.push_back({speed * uniform(rng, -1.0, 1.0), speed * uniform(rng, -1.0, 1.0)});
  }
  rs.system = vemspectra::assemble(rs.mesh, coeffs);
  return rs;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace testing
