#include "vemspectra/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "vemspectra/adapt.hpp"
#include "vemspectra/eig.hpp"
#include "vemspectra/error.hpp"
#include "vemspectra/estimator.hpp"
#include "vemspectra/io.hpp"
#include "vemspectra/mesh.hpp"
#include "vemspectra/vem.hpp"

namespace vemspectra {

namespace {

namespace fs = std::filesystem;

/// Bad flag combination detected after parsing; reported like a parse error.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string domain = "unit-square";
  std::string mesh;  // family name or path to a .poly file
  std::string family;
  int resolution = 8;
  std::uint64_t seed = kDefaultSeed;
  double kappa = 1.0;
  std::vector<double> advect = {0.0, 0.0};
  int num_eigs = 1;
  std::vector<double> shift = {0.0};
  double tol = 1e-10;
  double study_tol = 1e-8;
  int max_iterations = 200;
  std::string out;
  std::string vtk;
  // study only
  std::string mode = "adaptive-primal";
  int steps = 8;
  double fraction = 0.5;
  int eig_index = 1;
  double lambda_ref = std::nan("");
  int max_dofs = 0;
  bool dual_columns = false;
  // mesh only
  int refinements = 0;
};

bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.find('.') != std::string::npos || fs::exists(s);
}

void add_mesh_source(CLI::App* cmd, Options& o) {
  cmd->add_option("--domain", o.domain, "unit-square | lshape | hshape")->capture_default_str();
  cmd->add_option("--mesh", o.mesh, "mesh family (tria | quad | hexa | voro) or a .poly mesh file");
  cmd->add_option("--family", o.family, "mesh family (tria | quad | hexa | voro)");
  cmd->add_option("--resolution", o.resolution, "elements per unit length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "seed for Voronoi sites and solver start vectors")->capture_default_str();
}

void add_problem(CLI::App* cmd, Options& o, double& tol) {
  cmd->add_option("--kappa", o.kappa, "diffusion coefficient")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--advect", o.advect, "advection vector vx vy")->expected(2)->capture_default_str();
  cmd->add_option("--num-eigs", o.num_eigs, "eigenpairs to compute")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--shift", o.shift, "spectral shift: re [im]")->expected(1, 2)->capture_default_str();
  cmd->add_option("--tol", tol, "eigenpair residual tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--max-iterations", o.max_iterations, "Krylov restart cycles")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

struct MeshSource {
  DomainSpec domain;
  MeshFamily family = MeshFamily::Quad;
  std::optional<PolygonalMesh> file_mesh;
};

MeshSource resolve_mesh(const Options& o, const CLI::App* cmd) {
  MeshSource src;
  try {
    src.domain = DomainSpec::parse(o.domain);
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }
  std::string family = o.family;
  if (!o.mesh.empty()) {
    if (looks_like_path(o.mesh)) {
      if (!o.family.empty()) throw UsageError("--family cannot be combined with a mesh file");
      src.file_mesh = import_mesh(o.mesh);
      src.family = MeshFamily::File;
      if (cmd->count("--domain") == 0) src.domain = DomainSpec{DomainKind::FromFile};
      return src;
    }
    if (!o.family.empty() && o.family != o.mesh) throw UsageError("--mesh and --family disagree");
    family = o.mesh;
  }
  if (family.empty()) family = "quad";
  try {
    src.family = parse_family(family);
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }
  if (src.family == MeshFamily::File) throw UsageError("the file family needs --mesh <path>");
  if (src.domain.kind == DomainKind::FromFile) throw UsageError("--domain file needs --mesh <path>");
  return src;
}

PolygonalMesh make_mesh(const Options& o, const MeshSource& src) {
  if (src.file_mesh) return *src.file_mesh;
  return build_mesh(src.domain, src.family, o.resolution, o.seed);
}

SolveOptions solver_options(const Options& o) {
  SolveOptions s;
  s.num_pairs = o.num_eigs;
  s.shift = Complex(o.shift.at(0), o.shift.size() > 1 ? o.shift[1] : 0.0);
  s.tol = o.tol;
  s.max_iterations = o.max_iterations;
  s.seed = o.seed;
  return s;
}

std::string sci(double v, int digits = 10) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*e", digits, v);
  return buf;
}

std::vector<std::complex<double>> to_std(const Eigen::VectorXcd& v) {
  return {v.data(), v.data() + v.size()};
}

// Expands an element-wise quantity to vertices by averaging over the incident elements.
std::vector<double> element_to_vertex(const PolygonalMesh& mesh, const std::vector<double>& values) {
  std::vector<double> sum(mesh.num_vertices(), 0.0), count(mesh.num_vertices(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    for (int v : mesh.elements()[e]) {
      sum[v] += values[e];
      count[v] += 1.0;
    }
  }
  for (std::size_t v = 0; v < sum.size(); ++v) {
    if (count[v] > 0.0) sum[v] /= count[v];
  }
  return sum;
}

int run_mesh(const Options& o, const CLI::App* cmd, std::ostream& out) {
  const MeshSource src = resolve_mesh(o, cmd);
  PolygonalMesh mesh = make_mesh(o, src);
  for (int i = 0; i < o.refinements; ++i) mesh = uniform_refine(mesh);
  export_mesh(o.out, mesh);
  if (!o.vtk.empty()) export_vtk(o.vtk, mesh, {});
  out << "vertices " << mesh.num_vertices() << "\nelements " << mesh.num_elements() << "\narea "
      << sci(mesh.total_area(), 12) << "\nmin_edge_ratio " << sci(mesh.min_edge_ratio(), 4) << '\n';
  return 0;
}

int run_solve(const Options& o, const CLI::App* cmd, std::ostream& out) {
  const MeshSource src = resolve_mesh(o, cmd);
  const PolygonalMesh mesh = make_mesh(o, src);
  const GlobalSystem system =
      assemble(mesh, Coefficients::uniform(mesh.num_elements(), o.kappa, {o.advect[0], o.advect[1]}));
  const auto pairs = solve_pairs(system, solver_options(o));
  out << "# N = " << system.num_free << ", elements = " << mesh.num_elements() << '\n';
  out << "# k lambda_re lambda_im residual_right residual_left eta eta_dual\n";
  std::vector<VtkField> fields;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const double eta = primal_indicators(mesh, system, p).eta();
    const double eta_dual = dual_indicators(mesh, system, p).eta();
    out << k + 1 << ' ' << sci(p.lambda.real()) << ' ' << sci(p.lambda.imag()) << ' ' << sci(p.residual_right, 3)
        << ' ' << sci(p.residual_left, 3) << ' ' << sci(eta, 4) << ' ' << sci(eta_dual, 4)
        << (p.pairing_warning ? " pairing-warning" : "") << '\n';
    const std::string tag = std::to_string(k + 1);
    fields.push_back({"u" + tag, to_std(system.vertex_values(p.right))});
    fields.push_back({"u_dual" + tag, to_std(system.vertex_values(p.left))});
  }
  if (!o.vtk.empty()) export_vtk(o.vtk, mesh, fields);
  if (!o.out.empty()) export_mesh(o.out, mesh);
  return 0;
}

int run_study_command(const Options& o, const CLI::App* cmd, std::ostream& out) {
  const MeshSource src = resolve_mesh(o, cmd);
  StudyConfig config;
  config.domain = src.domain;
  config.family = src.family;
  config.resolution = o.resolution;
  config.initial_mesh = src.file_mesh;
  try {
    config.mode = parse_mode(o.mode);
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }
  config.fraction = o.fraction;
  config.eig_index = o.eig_index - 1;
  config.steps = o.steps;
  if (!std::isnan(o.lambda_ref)) config.lambda_ref = o.lambda_ref;
  config.kappa = o.kappa;
  config.advection = {o.advect[0], o.advect[1]};
  config.solver = solver_options(o);
  config.solver.tol = o.study_tol;
  config.seed = o.seed;
  config.max_dofs = o.max_dofs;
  try {
    config.validate();
  } catch (const Error& ex) {
    throw UsageError(ex.what());
  }

  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  const bool write_steps = !o.vtk.empty();
  out << "# step N lambda_re lambda_im eta2 eta*2 seconds\n";
  const StudyResult result = run_study(
      config, [&](const StudyStep& row, const PolygonalMesh& mesh, const GlobalSystem& system, const EigenPair& pair) {
        out << row.step << ' ' << row.num_free << ' ' << sci(row.lambda.real()) << ' ' << sci(row.lambda.imag(), 3)
            << ' ' << sci(row.primal.eta_sq, 4) << ' ' << sci(row.dual.eta_sq, 4) << ' ' << sci(row.seconds, 2)
            << std::endl;
        if (write_steps) {
          export_vtk(dir / (o.vtk + "_" + std::to_string(row.step) + ".vtk"), mesh,
                     {{"u", to_std(system.vertex_values(pair.right))},
                      {"u_dual", to_std(system.vertex_values(pair.left))}});
        }
      });
  const bool dual = o.dual_columns || config.mode == StudyMode::AdaptiveDual;
  export_csv(dir / "study.csv", result, dual);
  export_mesh(dir / "final_mesh.poly", result.final_mesh);
  const GlobalSystem final_system = assemble(
      result.final_mesh, Coefficients::uniform(result.final_mesh.num_elements(), config.kappa, config.advection));
  export_vtk(dir / "final.vtk", result.final_mesh,
             {{"u", to_std(final_system.vertex_values(result.final_pair.right))},
              {"u_dual", to_std(final_system.vertex_values(result.final_pair.left))},
              {"eta", element_to_vertex(result.final_mesh, result.final_eta)},
              {"eta_dual", element_to_vertex(result.final_mesh, result.final_eta_dual)}});
  if (result.has_reference) {
    out << "# lambda_ref " << sci(result.lambda_ref) << (result.reference_extrapolated ? " (extrapolated)" : "")
        << '\n';
  }
  if (result.rate) out << "# rate " << sci(*result.rate, 4) << '\n';
  out << "# wrote " << (dir / "study.csv").string() << '\n';
  return 0;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Virtual element solver for non-symmetric convection-diffusion eigenproblems", "vemspectra"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags take precedence)");
  app.require_subcommand(1);
  Options o;

  auto* mesh_cmd = app.add_subcommand("mesh", "generate a mesh and write it as a .poly file");
  add_mesh_source(mesh_cmd, o);
  mesh_cmd->add_option("--refine", o.refinements, "uniform refinements applied after generation")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  mesh_cmd->add_option("--out", o.out, "output .poly file")->required();
  mesh_cmd->add_option("--vtk", o.vtk, "also write the mesh as legacy VTK");

  auto* solve_cmd = app.add_subcommand("solve", "compute eigenpairs on one mesh");
  add_mesh_source(solve_cmd, o);
  add_problem(solve_cmd, o, o.tol);
  solve_cmd->add_option("--vtk", o.vtk, "write eigenfunctions as legacy VTK");
  solve_cmd->add_option("--out", o.out, "write the mesh used as a .poly file");

  auto* study_cmd = app.add_subcommand("study", "uniform or adaptive refinement study");
  add_mesh_source(study_cmd, o);
  add_problem(study_cmd, o, o.study_tol);
  study_cmd->add_option("--mode", o.mode, "uniform | adaptive | adaptive-primal | adaptive-dual")
      ->capture_default_str();
  study_cmd->add_option("--steps", o.steps, "number of refinement steps")->capture_default_str()->check(CLI::PositiveNumber);
  study_cmd->add_option("--fraction", o.fraction, "marking fraction of the largest indicator")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  study_cmd->add_option("--eig-index", o.eig_index, "tracked eigenvalue (1 = nearest the shift)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  study_cmd->add_option("--lambda-ref", o.lambda_ref, "reference eigenvalue for errors and effectivities");
  study_cmd->add_option("--max-dofs", o.max_dofs, "stop once N reaches this value (0 = off)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  study_cmd->add_flag("--dual-columns", o.dual_columns, "add dual estimator columns to the CSV");
  study_cmd->add_option("--vtk", o.vtk, "per-step VTK snapshots with this file prefix");
  study_cmd->add_option("--out", o.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*mesh_cmd) return run_mesh(o, mesh_cmd, out);
    if (*solve_cmd) return run_solve(o, solve_cmd, out);
    return run_study_command(o, study_cmd, out);
  } catch (const UsageError& ex) {
    err << "usage error: " << ex.what() << "\nRun with --help for more information.\n";
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
}

}  // namespace vemspectra
