#pragma once

#include <string>
#include <vector>

#include "lakit/mesh.hpp"

namespace lakit {

// One named array, either per node or per cell depending on which list it
// is passed in.  values holds components interleaved (size = count * comps).
struct VtkField {
  std::string name;
  int components = 1;  // 1 renders as SCALARS, 2 as VECTORS with z = 0
  std::vector<double> values;
};

// Legacy ASCII unstructured grid.  Output is deterministic: fields appear
// in the order given and every float prints with 17 significant digits.
void export_vtk(const std::string& path, const Mesh& mesh,
                const std::vector<VtkField>& point_fields,
                const std::vector<VtkField>& cell_fields);

}  // namespace lakit
