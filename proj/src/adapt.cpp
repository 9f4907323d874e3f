#include "vemspectra/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "vemspectra/error.hpp"

namespace vemspectra {

StudyMode parse_mode(const std::string& name) {
  if (name == "uniform") return StudyMode::Uniform;
  if (name == "adaptive" || name == "adaptive-primal") return StudyMode::AdaptivePrimal;
  if (name == "adaptive-dual") return StudyMode::AdaptiveDual;
  throw Error("unknown study mode '" + name + "' (uniform, adaptive, adaptive-primal, adaptive-dual)");
}

std::string mode_name(StudyMode mode) {
  switch (mode) {
    case StudyMode::Uniform:
      return "uniform";
    case StudyMode::AdaptivePrimal:
      return "adaptive-primal";
    case StudyMode::AdaptiveDual:
      return "adaptive-dual";
  }
  return "?";
}

void StudyConfig::validate() const {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("marking fraction must lie in (0, 1]");
  if (steps < 1) throw Error("steps must be >= 1");
  if (eig_index < 0) throw Error("eigenvalue index must be non-negative");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw Error("kappa must be positive");
  if (!std::isfinite(advection[0]) || !std::isfinite(advection[1])) throw Error("advection must be finite");
  if (!initial_mesh && family == MeshFamily::File) throw Error("file mesh family needs an initial mesh");
  if (!initial_mesh && resolution < 1) throw Error("resolution must be >= 1");
  if (max_dofs < 0) throw Error("dof cap must be non-negative");
}

std::vector<int> mark(std::span<const double> eta, double fraction) {
  if (eta.empty()) throw Error("cannot mark an empty indicator set");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("marking fraction must lie in (0, 1]");
  double top = 0.0;
  for (double v : eta) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error("indicators must be finite and non-negative");
    top = std::max(top, v);
  }
  std::vector<int> marked;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (eta[i] >= fraction * top || eta[i] == top) marked.push_back(static_cast<int>(i));
  }
  return marked;
}

std::vector<int> mark(const EstimatorReport& report, double fraction) {
  const auto eta = report.element_eta();
  return mark(std::span<const double>(eta), fraction);
}

std::optional<double> known_reference(const DomainSpec& domain, int eig_index, double kappa, Vec2 advection) {
  if (eig_index != 0) return std::nullopt;
  double mu = 0.0;
  switch (domain.kind) {
    case DomainKind::UnitSquare:
      mu = 2.0 * std::numbers::pi * std::numbers::pi;
      break;
    case DomainKind::LShape:
      mu = 9.6397238;
      break;
    default:
      return std::nullopt;
  }
  const double speed_sq = advection[0] * advection[0] + advection[1] * advection[1];
  return kappa * mu + speed_sq / (4.0 * kappa);
}

double fit_rate(std::span<const double> dofs, std::span<const double> errors) {
  if (dofs.size() != errors.size()) throw Error("rate fit needs matching sequences");
  if (dofs.size() < 3) throw Error("rate fit needs at least 3 points");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    if (!(dofs[i] > 0.0) || !(errors[i] > 0.0)) throw Error("rate fit needs positive values");
    const double x = std::log(dofs[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(dofs.size());
  const double denom = n * sxx - sx * sx;
  if (!(std::abs(denom) > 1e-300)) throw Error("rate fit needs distinct dof counts");
  return (n * sxy - sx * sy) / denom;
}

namespace {

struct LinearFit {
  double lambda = 0.0;
  double coefficient = 0.0;  // against the scaled regressor (N / N0)^{-t}
  double residual_sq = std::numeric_limits<double>::infinity();
  double condition = std::numeric_limits<double>::infinity();
};

LinearFit fit_fixed_exponent(const std::vector<double>& scaled, std::span<const double> lambdas, double t) {
  const std::size_t n = scaled.size();
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::pow(scaled[i], -t);
    rhs[i] = lambdas[i];
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  LinearFit fit;
  const auto sv = svd.singularValues();
  fit.condition = sv[1] > 0.0 ? sv[0] / sv[1] : std::numeric_limits<double>::infinity();
  const Eigen::Vector2d x = svd.solve(rhs);
  fit.lambda = x[0];
  fit.coefficient = x[1];
  fit.residual_sq = (a * x - rhs).squaredNorm();
  return fit;
}

}  // namespace

Extrapolation extrapolate_reference(std::span<const double> dofs, std::span<const double> lambdas) {
  if (dofs.size() != lambdas.size()) throw Error("extrapolation needs matching sequences");
  if (dofs.size() < 4) throw Error("extrapolation needs at least 4 points");
  double n0 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dofs.size(); ++i) {
    if (!(dofs[i] > 0.0) || !std::isfinite(lambdas[i])) throw Error("extrapolation needs positive N and finite values");
    n0 = std::min(n0, dofs[i]);
  }
  std::vector<double> scaled;
  for (double n : dofs) scaled.push_back(n / n0);

  // Variable projection: the optimal (lambda, C) is linear for fixed t.
  constexpr double kMinT = 0.02, kMaxT = 8.0;
  auto objective = [&](double t) { return fit_fixed_exponent(scaled, lambdas, t).residual_sq; };
  constexpr int kGrid = 200;
  int best = 0;
  double best_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kGrid; ++i) {
    const double t = kMinT + (kMaxT - kMinT) * i / kGrid;
    const double v = objective(t);
    if (v < best_value) {
      best_value = v;
      best = i;
    }
  }
  const double step = (kMaxT - kMinT) / kGrid;
  const double lo = std::max(kMinT, kMinT + (best - 1) * step);
  const double hi = std::min(kMaxT, kMinT + (best + 1) * step);
  const auto [t_opt, r_opt] = boost::math::tools::brent_find_minima(objective, lo, hi, 50);
  (void)r_opt;
  LinearFit fit = fit_fixed_exponent(scaled, lambdas, t_opt);
  double t = t_opt;

  // Gauss-Newton polish on (lambda, C, t) jointly.
  const std::size_t m = scaled.size();
  for (int iter = 0; iter < 20; ++iter) {
    Eigen::MatrixXd jac(m, 3);
    Eigen::VectorXd res(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double p = std::pow(scaled[i], -t);
      res[i] = fit.lambda + fit.coefficient * p - lambdas[i];
      jac(i, 0) = 1.0;
      jac(i, 1) = p;
      jac(i, 2) = -fit.coefficient * p * std::log(scaled[i]);
    }
    const Eigen::Vector3d delta = jac.colPivHouseholderQr().solve(-res);
    if (!delta.allFinite()) break;
    LinearFit trial = fit;
    trial.lambda += delta[0];
    trial.coefficient += delta[1];
    const double t_trial = t + delta[2];
    if (!(t_trial > 0.0)) break;
    double trial_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = trial.lambda + trial.coefficient * std::pow(scaled[i], -t_trial) - lambdas[i];
      trial_sq += r * r;
    }
    if (!(trial_sq < fit.residual_sq)) break;
    trial.residual_sq = trial_sq;
    fit = trial;
    t = t_trial;
  }

  const bool at_bound = t <= kMinT + 0.5 * step || t >= kMaxT - 0.5 * step;
  if (at_bound || !(fit.condition < 1e12) || !std::isfinite(fit.lambda)) {
    std::ostringstream msg;
    msg << "ill-conditioned extrapolation: exponent " << t << ", condition " << fit.condition << ", residual "
        << std::sqrt(fit.residual_sq);
    throw Error(msg.str());
  }
  Extrapolation out;
  out.lambda_ref = fit.lambda;
  out.exponent = t;
  out.coefficient = fit.coefficient * std::pow(n0, t);
  out.residual_norm = std::sqrt(fit.residual_sq);
  return out;
}

StudyResult run_study(const StudyConfig& config, const StepObserver& observer) {
  config.validate();
  PolygonalMesh mesh =
      config.initial_mesh ? *config.initial_mesh : build_mesh(config.domain, config.family, config.resolution, config.seed);
  SolveOptions options = config.solver;
  options.num_pairs = std::max(options.num_pairs, config.eig_index + 1);

  StudyResult result;
  for (int step = 0; step < config.steps; ++step) {
    const auto start = std::chrono::steady_clock::now();
    StudyStep row;
    row.step = step;
    EigenPair pair;
    EstimatorReport primal, dual;
    GlobalSystem system;
    try {
      system = assemble(mesh, Coefficients::uniform(mesh.num_elements(), config.kappa, config.advection));
      auto pairs = solve_pairs(system, options);
      pair = std::move(pairs[static_cast<std::size_t>(config.eig_index)]);
      primal = primal_indicators(mesh, system, pair);
      dual = dual_indicators(mesh, system, pair);
    } catch (const std::exception& ex) {
      throw Error("study step " + std::to_string(step) + " (N = " + std::to_string(system.num_free) +
                  "): " + ex.what());
    }
    row.num_free = system.num_free;
    row.num_elements = mesh.num_elements();
    row.lambda = pair.lambda;
    row.primal = {primal.r_sq, primal.theta_sq, primal.jump_sq, primal.eta_sq,
                  std::numeric_limits<double>::quiet_NaN()};
    row.dual = {dual.r_sq, dual.theta_sq, dual.jump_sq, dual.eta_sq, std::numeric_limits<double>::quiet_NaN()};
    row.residual = std::max(pair.residual_right, pair.residual_left);

    const bool last = step + 1 == config.steps || (config.max_dofs > 0 && row.num_free >= config.max_dofs);
    PolygonalMesh next;
    if (!last) {
      if (config.mode == StudyMode::Uniform) {
        next = uniform_refine(mesh);
      } else {
        const auto& driver = config.mode == StudyMode::AdaptiveDual ? dual : primal;
        next = refine(mesh, mark(driver, config.fraction));
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.steps.push_back(row);
    if (observer) observer(row, mesh, system, pair);
    if (last) {
      result.final_eta = primal.element_eta();
      result.final_eta_dual = dual.element_eta();
      result.final_pair = std::move(pair);
      result.final_mesh = std::move(mesh);
      break;
    }
    mesh = std::move(next);
  }

  std::vector<double> ns, lams;
  for (const auto& row : result.steps) {
    ns.push_back(row.num_free);
    lams.push_back(row.lambda.real());
  }
  if (config.lambda_ref) {
    result.lambda_ref = *config.lambda_ref;
    result.has_reference = true;
  } else if (auto known = known_reference(config.domain, config.eig_index, config.kappa, config.advection)) {
    result.lambda_ref = *known;
    result.has_reference = true;
  } else if (result.steps.size() >= 4) {
    try {
      result.lambda_ref = extrapolate_reference(ns, lams).lambda_ref;
      result.has_reference = true;
      result.reference_extrapolated = true;
    } catch (const Error&) {
    }
  }
  if (result.has_reference) {
    std::vector<double> errors;
    for (auto& row : result.steps) {
      const Complex ref(result.lambda_ref, 0.0);
      errors.push_back(std::abs(ref - row.lambda));
      if (row.primal.eta_sq > 0.0) row.primal.eff = effectivity(ref, row.lambda, std::sqrt(row.primal.eta_sq));
      if (row.dual.eta_sq > 0.0) row.dual.eff = effectivity(ref, row.lambda, std::sqrt(row.dual.eta_sq));
    }
    try {
      result.rate = fit_rate(ns, errors);
    } catch (const Error&) {
    }
  }
  return result;
}

}  // namespace vemspectra
