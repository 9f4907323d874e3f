#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "vemspectra/adapt.hpp"
#include "vemspectra/mesh.hpp"

namespace vemspectra {

/// Writes through a temporary sibling file and renames it over `path`.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& writer);

/// Per-vertex field; complex fields expand to <name>_re, <name>_im, <name>_abs.
struct VtkField {
  std::string name;
  std::variant<std::vector<double>, std::vector<std::complex<double>>> values;
};

void write_vtk(std::ostream& out, const PolygonalMesh& mesh, const std::vector<VtkField>& fields);
void export_vtk(const std::filesystem::path& path, const PolygonalMesh& mesh,
                const std::vector<VtkField>& fields);

void write_csv(std::ostream& out, const StudyResult& result, bool dual_columns);
void export_csv(const std::filesystem::path& path, const StudyResult& result, bool dual_columns);

void export_mesh(const std::filesystem::path& path, const PolygonalMesh& mesh);
PolygonalMesh import_mesh(const std::filesystem::path& path);

}  // namespace vemspectra
