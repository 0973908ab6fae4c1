#include "lakit/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace lakit {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_arrays(std::ofstream& out, const std::vector<VtkField>& fields, int count,
                  const char* what) {
  for (const auto& f : fields) {
    if (f.components != 1 && f.components != 2)
      throw std::invalid_argument("export_vtk: field " + f.name +
                                  " must have 1 or 2 components");
    if (static_cast<int>(f.values.size()) != count * f.components)
      throw std::invalid_argument("export_vtk: field " + f.name + " has " +
                                  std::to_string(f.values.size()) + " values, expected " +
                                  std::to_string(count * f.components) + " for " + what);
    if (f.components == 1) {
      out << "SCALARS " << f.name << " double 1\n";
      out << "LOOKUP_TABLE default\n";
      for (int i = 0; i < count; ++i) out << fmt(f.values[i]) << "\n";
    } else {
      out << "VECTORS " << f.name << " double\n";
      for (int i = 0; i < count; ++i)
        out << fmt(f.values[2 * i]) << " " << fmt(f.values[2 * i + 1]) << " 0\n";
    }
  }
}

}  // namespace

void export_vtk(const std::string& path, const Mesh& mesh,
                const std::vector<VtkField>& point_fields,
                const std::vector<VtkField>& cell_fields) {
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline games
  if (!out) throw std::invalid_argument("export_vtk: cannot open " + path);

  out << "# vtk DataFile Version 3.0\n";
  out << "lakit field export\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_nodes() << " double\n";
  for (const auto& p : mesh.nodes) out << fmt(p.x()) << " " << fmt(p.y()) << " 0\n";

  out << "CELLS " << mesh.num_cells() << " " << 4 * mesh.num_cells() << "\n";
  for (const auto& t : mesh.cells) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) out << "5\n";

  if (!point_fields.empty()) {
    out << "POINT_DATA " << mesh.num_nodes() << "\n";
    write_arrays(out, point_fields, mesh.num_nodes(), "point data");
  }
  if (!cell_fields.empty()) {
    out << "CELL_DATA " << mesh.num_cells() << "\n";
    write_arrays(out, cell_fields, mesh.num_cells(), "cell data");
  }
  if (!out) throw std::runtime_error("export_vtk: write failed for " + path);
}

}  // namespace lakit
