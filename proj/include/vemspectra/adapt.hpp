#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vemspectra/eig.hpp"
#include "vemspectra/estimator.hpp"
#include "vemspectra/mesh.hpp"
#include "vemspectra/vem.hpp"

namespace vemspectra {

enum class StudyMode { Uniform, AdaptivePrimal, AdaptiveDual };

StudyMode parse_mode(const std::string& name);
std::string mode_name(StudyMode mode);

struct StudyConfig {
  DomainSpec domain;
  MeshFamily family = MeshFamily::Quad;
  int resolution = 4;
  /// Starting mesh for MeshFamily::File (and an override for any family).
  std::optional<PolygonalMesh> initial_mesh;
  StudyMode mode = StudyMode::AdaptivePrimal;
  double fraction = 0.5;
  /// 0-based position of the tracked eigenvalue in the sorted spectrum.
  int eig_index = 0;
  int steps = 8;
  std::optional<double> lambda_ref;
  double kappa = 1.0;
  Vec2 advection{0.0, 0.0};
  SolveOptions solver{.tol = 1e-8};
  std::uint64_t seed = kDefaultSeed;
  /// Stop once the free-dof count reaches this value (0 = no cap).
  int max_dofs = 0;

  void validate() const;
};

struct EstimatorSummary {
  double r_sq = 0.0;
  double theta_sq = 0.0;
  double jump_sq = 0.0;
  double eta_sq = 0.0;
  double eff = 0.0;  // NaN while no reference eigenvalue is known
};

struct StudyStep {
  int step = 0;
  int num_free = 0;
  std::size_t num_elements = 0;
  Complex lambda;
  EstimatorSummary primal;
  EstimatorSummary dual;
  double residual = 0.0;
  double seconds = 0.0;
};

struct StudyResult {
  std::vector<StudyStep> steps;
  double lambda_ref = 0.0;
  bool has_reference = false;
  bool reference_extrapolated = false;
  /// Least-squares slope of |lambda_ref - lambda_h| versus N, when defined.
  std::optional<double> rate;
  PolygonalMesh final_mesh;
  EigenPair final_pair;
  std::vector<double> final_eta;
  std::vector<double> final_eta_dual;
};

/// Maximum strategy: every element with eta_E >= fraction * max eta_E.
std::vector<int> mark(std::span<const double> eta, double fraction);
std::vector<int> mark(const EstimatorReport& report, double fraction);

/// Called after each recorded step with the mesh and normalized pair it used.
using StepObserver =
    std::function<void(const StudyStep&, const PolygonalMesh&, const GlobalSystem&, const EigenPair&)>;

/// Runs assemble -> solve -> indicators -> mark -> refine for `steps` rows.
/// Throws Error naming the failing step.
StudyResult run_study(const StudyConfig& config, const StepObserver& observer = {});

/// Known first eigenvalue for the unit square and the L-shape with constant
/// coefficients (shift kappa*mu + |theta|^2/(4 kappa)); nullopt otherwise.
std::optional<double> known_reference(const DomainSpec& domain, int eig_index, double kappa,
                                      Vec2 advection);

/// Least-squares slope of log(error) against log(N). Needs >= 3 positive points.
double fit_rate(std::span<const double> dofs, std::span<const double> errors);

struct Extrapolation {
  double lambda_ref = 0.0;
  double coefficient = 0.0;
  double exponent = 0.0;
  double residual_norm = 0.0;
};

/// Fits lambda_h(N) = lambda_ref + C N^{-t} by least squares with t free.
/// Needs >= 4 points; throws Error on an ill-conditioned fit.
Extrapolation extrapolate_reference(std::span<const double> dofs,
                                    std::span<const double> lambdas);

}  // namespace vemspectra
