#include "vemspectra/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <system_error>

#include <unistd.h>

#include "vemspectra/error.hpp"

namespace vemspectra {

namespace fs = std::filesystem;

void write_atomically(const fs::path& path, const std::function<void(std::ostream&)>& writer) {
  fs::path temp = path;
  temp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + temp.string() + " for writing");
    try {
      writer(out);
    } catch (...) {
      out.close();
      std::error_code ignored;
      fs::remove(temp, ignored);
      throw;
    }
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(temp, ignored);
      throw Error("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(temp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(temp, ignored);
    throw Error("cannot write " + path.string() + ": " + ec.message());
  }
}

void write_vtk(std::ostream& out, const PolygonalMesh& mesh, const std::vector<VtkField>& fields) {
  const std::size_t nv = mesh.num_vertices();
  for (const auto& f : fields) {
    const std::size_t len = std::visit([](const auto& v) { return v.size(); }, f.values);
    if (len != nv) {
      throw Error("field '" + f.name + "' has " + std::to_string(len) + " values for " + std::to_string(nv) +
                  " vertices");
    }
  }
  out << "# vtk DataFile Version 3.0\n";
  out << "vemspectra polygonal mesh\n";
  out << "ASCII\n";
  out << "DATASET POLYDATA\n";
  out.precision(17);
  out << "POINTS " << nv << " double\n";
  for (const Point& p : mesh.vertices()) out << p.x << ' ' << p.y << " 0\n";
  std::size_t total = 0;
  for (const auto& cycle : mesh.elements()) total += cycle.size() + 1;
  out << "POLYGONS " << mesh.num_elements() << ' ' << total << '\n';
  for (const auto& cycle : mesh.elements()) {
    out << cycle.size();
    for (int v : cycle) out << ' ' << v;
    out << '\n';
  }
  if (fields.empty()) return;
  out << "POINT_DATA " << nv << '\n';
  auto scalars = [&](const std::string& name, auto&& value) {
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < nv; ++i) out << value(i) << '\n';
  };
  for (const auto& f : fields) {
    if (const auto* real = std::get_if<std::vector<double>>(&f.values)) {
      scalars(f.name, [&](std::size_t i) { return (*real)[i]; });
    } else {
      const auto& cplx = std::get<std::vector<std::complex<double>>>(f.values);
      scalars(f.name + "_re", [&](std::size_t i) { return cplx[i].real(); });
      scalars(f.name + "_im", [&](std::size_t i) { return cplx[i].imag(); });
      scalars(f.name + "_abs", [&](std::size_t i) { return std::abs(cplx[i]); });
    }
  }
}

void export_vtk(const fs::path& path, const PolygonalMesh& mesh, const std::vector<VtkField>& fields) {
  write_atomically(path, [&](std::ostream& out) { write_vtk(out, mesh, fields); });
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", v);
  return buf;
}

}  // namespace

void write_csv(std::ostream& out, const StudyResult& result, bool dual_columns) {
  if (result.steps.empty()) throw Error("study result has no steps");
  out << "N,lambda_h,R2,Theta2,J2,eta2,eff";
  if (dual_columns) out << ",R*2,Theta*2,J*2,eta*2,eff*";
  out << '\n';
  for (const auto& row : result.steps) {
    out << row.num_free << ',' << sci(row.lambda.real()) << ',' << sci(row.primal.r_sq) << ','
        << sci(row.primal.theta_sq) << ',' << sci(row.primal.jump_sq) << ',' << sci(row.primal.eta_sq) << ','
        << sci(row.primal.eff);
    if (dual_columns) {
      out << ',' << sci(row.dual.r_sq) << ',' << sci(row.dual.theta_sq) << ',' << sci(row.dual.jump_sq) << ','
          << sci(row.dual.eta_sq) << ',' << sci(row.dual.eff);
    }
    out << '\n';
  }
}

void export_csv(const fs::path& path, const StudyResult& result, bool dual_columns) {
  write_atomically(path, [&](std::ostream& out) { write_csv(out, result, dual_columns); });
}

void export_mesh(const fs::path& path, const PolygonalMesh& mesh) {
  write_atomically(path, [&](std::ostream& out) { save_mesh(out, mesh); });
}

PolygonalMesh import_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file " + path.string());
  return load_mesh(in);
}

}  // namespace vemspectra
