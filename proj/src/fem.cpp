#include "lakit/fem.hpp"

#include <cmath>
#include <stdexcept>

namespace lakit {

std::string family_name(Family f) {
  switch (f) {
    case Family::LagrangeContinuous: return "LagrangeContinuous";
    case Family::LagrangeDiscontinuous: return "LagrangeDiscontinuous";
    case Family::FacetTrace: return "FacetTrace";
    case Family::GlobalScalar: return "GlobalScalar";
  }
  return "?";
}

QuadratureRule vertex_rule() {
  return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
}

QuadratureRule facet_endpoint_rule() {
  return {{{1, 0, 0}, {0, 1, 0}}, {0.5, 0.5}};
}

QuadratureRule midedge_rule() {
  return {{{0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}, {1.0 / 3, 1.0 / 3, 1.0 / 3}};
}

QuadratureRule facet_gauss_rule() {
  const double a = 0.5 - 0.5 / std::sqrt(3.0), b = 0.5 + 0.5 / std::sqrt(3.0);
  return {{{1 - a, a, 0}, {1 - b, b, 0}}, {0.5, 0.5}};
}

void eval_basis(const Mesh& mesh, int cell, int degree, const std::array<double, 3>& bary,
                std::vector<double>& values, std::vector<Eigen::Vector2d>& grads) {
  const auto& t = mesh.cells[cell];
  const Eigen::Vector2d p0 = mesh.nodes[t[0]], p1 = mesh.nodes[t[1]], p2 = mesh.nodes[t[2]];
  const double a2 = 2.0 * mesh.cell_area(cell);
  auto perp = [](const Eigen::Vector2d& v) { return Eigen::Vector2d(-v.y(), v.x()); };
  const std::array<Eigen::Vector2d, 3> gl = {perp(p2 - p1) / a2, perp(p0 - p2) / a2,
                                             perp(p1 - p0) / a2};
  switch (degree) {
    case 0:
      values = {1.0};
      grads = {Eigen::Vector2d::Zero()};
      return;
    case 1:
      values = {bary[0], bary[1], bary[2]};
      grads = {gl[0], gl[1], gl[2]};
      return;
    case 2: {
      values.resize(6);
      grads.resize(6);
      for (int i = 0; i < 3; ++i) {
        values[i] = bary[i] * (2 * bary[i] - 1);
        grads[i] = (4 * bary[i] - 1) * gl[i];
      }
      for (int e = 0; e < 3; ++e) {
        const int i = (e + 1) % 3, j = (e + 2) % 3;
        values[3 + e] = 4 * bary[i] * bary[j];
        grads[3 + e] = 4 * (bary[j] * gl[i] + bary[i] * gl[j]);
      }
      return;
    }
    default:
      throw std::invalid_argument("eval_basis: degree must be 0, 1 or 2");
  }
}

int FunctionSpace::cell_dof(int cell, int local, int comp) const {
  switch (family) {
    case Family::LagrangeContinuous: {
      const auto& t = mesh->cells[cell];
      const int ent = local < 3 ? t[local] : mesh->num_nodes() + mesh->cell_facets[cell][local - 3];
      return ent * value_dim + comp;
    }
    case Family::LagrangeDiscontinuous:
      return (cell * cell_locals + local) * value_dim + comp;
    default:
      throw std::logic_error("cell_dof: family has no cell DOFs");
  }
}

int FunctionSpace::facet_dof(int facet, int local, int comp) const {
  if (family != Family::FacetTrace) throw std::logic_error("facet_dof: FacetTrace only");
  return (facet * facet_locals + local) * value_dim + comp;
}

FunctionSpace build_space(const Mesh& mesh, Family family, int degree, int value_dim) {
  if (value_dim < 1) throw std::invalid_argument("build_space: value_dim must be positive");
  auto bad = [&]() {
    return std::invalid_argument("build_space: unsupported pair (" + family_name(family) +
                                 ", degree " + std::to_string(degree) + ")");
  };
  FunctionSpace sp;
  sp.mesh = &mesh;
  sp.family = family;
  sp.degree = degree;
  sp.value_dim = value_dim;
  switch (family) {
    case Family::LagrangeContinuous: {
      if (degree < 1 || degree > 2) throw bad();
      sp.cell_locals = degree == 1 ? 3 : 6;
      const int ents = mesh.num_nodes() + (degree == 2 ? mesh.num_facets() : 0);
      sp.dof_count = ents * value_dim;
      sp.dof_coordinates.resize(sp.dof_count);
      for (int i = 0; i < mesh.num_nodes(); ++i)
        for (int k = 0; k < value_dim; ++k) sp.dof_coordinates[i * value_dim + k] = mesh.nodes[i];
      if (degree == 2)
        for (int f = 0; f < mesh.num_facets(); ++f) {
          const Eigen::Vector2d mid =
              0.5 * (mesh.nodes[mesh.facets[f].nodes[0]] + mesh.nodes[mesh.facets[f].nodes[1]]);
          for (int k = 0; k < value_dim; ++k)
            sp.dof_coordinates[(mesh.num_nodes() + f) * value_dim + k] = mid;
        }
      break;
    }
    case Family::LagrangeDiscontinuous: {
      if (degree < 0 || degree > 2) throw bad();
      sp.cell_locals = degree == 0 ? 1 : degree == 1 ? 3 : 6;
      sp.dof_count = mesh.num_cells() * sp.cell_locals * value_dim;
      sp.dof_coordinates.resize(sp.dof_count);
      for (int c = 0; c < mesh.num_cells(); ++c)
        for (int j = 0; j < sp.cell_locals; ++j) {
          Eigen::Vector2d p;
          if (degree == 0) {
            p = mesh.cell_centroid(c);
          } else if (j < 3) {
            p = mesh.nodes[mesh.cells[c][j]];
          } else {
            const int i1 = (j - 3 + 1) % 3, i2 = (j - 3 + 2) % 3;
            p = 0.5 * (mesh.nodes[mesh.cells[c][i1]] + mesh.nodes[mesh.cells[c][i2]]);
          }
          for (int k = 0; k < value_dim; ++k) sp.dof_coordinates[sp.cell_dof(c, j, k)] = p;
        }
      break;
    }
    case Family::FacetTrace: {
      if (degree < 1 || degree > 2) throw bad();
      sp.facet_locals = degree + 1;
      sp.dof_count = mesh.num_facets() * sp.facet_locals * value_dim;
      sp.dof_coordinates.resize(sp.dof_count);
      for (int f = 0; f < mesh.num_facets(); ++f) {
        const Eigen::Vector2d a = mesh.nodes[mesh.facets[f].nodes[0]];
        const Eigen::Vector2d b = mesh.nodes[mesh.facets[f].nodes[1]];
        for (int j = 0; j < sp.facet_locals; ++j) {
          const Eigen::Vector2d p = j == 0 ? a : j == 1 ? b : Eigen::Vector2d(0.5 * (a + b));
          for (int k = 0; k < value_dim; ++k) sp.dof_coordinates[sp.facet_dof(f, j, k)] = p;
        }
      }
      break;
    }
    case Family::GlobalScalar: {
      if (degree != 0) throw bad();
      sp.dof_count = value_dim;
      sp.dof_coordinates.assign(value_dim, Eigen::Vector2d::Zero());
      break;
    }
  }
  return sp;
}

namespace {

void require_cell_family(const FunctionSpace& sp, const char* who) {
  if (sp.family != Family::LagrangeContinuous && sp.family != Family::LagrangeDiscontinuous)
    throw std::invalid_argument(std::string(who) + ": needs a cell-based Lagrange space");
}

}  // namespace

// The facet endpoints are vertices of the cell, so no geometric solve is
// involved and the coordinates are exact.
std::array<double, 3> facet_point_barycentric(const Mesh& mesh, int facet, int cell, double s) {
  const auto& fn = mesh.facets[facet].nodes;
  const auto& t = mesh.cells[cell];
  std::array<double, 3> bary{0, 0, 0};
  int found = 0;
  for (int l = 0; l < 3; ++l) {
    if (t[l] == fn[0]) {
      bary[l] = 1 - s;
      ++found;
    } else if (t[l] == fn[1]) {
      bary[l] = s;
      ++found;
    }
  }
  if (found != 2) throw std::logic_error("facet endpoints are not vertices of the cell");
  return bary;
}

std::array<LinearRow, 3> strain_operator(const FunctionSpace& space, int cell,
                                         const std::array<double, 3>& bary) {
  require_cell_family(space, "strain_operator");
  if (space.value_dim != 2)
    throw std::invalid_argument("strain_operator: needs a 2-component space");
  if (space.degree < 1) throw std::invalid_argument("strain_operator: needs degree >= 1");
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  eval_basis(*space.mesh, cell, space.degree, bary, vals, grads);
  std::array<LinearRow, 3> rows;
  for (int j = 0; j < space.cell_locals; ++j) {
    const Eigen::Vector2d g = grads[j];
    const int dx = space.cell_dof(cell, j, 0), dy = space.cell_dof(cell, j, 1);
    if (g.x() != 0.0) {
      rows[0].emplace_back(dx, g.x());
      rows[2].emplace_back(dy, 0.5 * g.x());
    }
    if (g.y() != 0.0) {
      rows[1].emplace_back(dy, g.y());
      rows[2].emplace_back(dx, 0.5 * g.y());
    }
  }
  return rows;
}

std::array<LinearRow, 2> gradient_operator(const FunctionSpace& space, int cell,
                                           const std::array<double, 3>& bary) {
  require_cell_family(space, "gradient_operator");
  if (space.value_dim != 1) throw std::invalid_argument("gradient_operator: scalar spaces only");
  if (space.degree < 1) throw std::invalid_argument("gradient_operator: needs degree >= 1");
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  eval_basis(*space.mesh, cell, space.degree, bary, vals, grads);
  std::array<LinearRow, 2> rows;
  for (int j = 0; j < space.cell_locals; ++j) {
    const int d = space.cell_dof(cell, j, 0);
    if (grads[j].x() != 0.0) rows[0].emplace_back(d, grads[j].x());
    if (grads[j].y() != 0.0) rows[1].emplace_back(d, grads[j].y());
  }
  return rows;
}

std::vector<LinearRow> value_operator(const FunctionSpace& space, int cell,
                                      const std::array<double, 3>& bary) {
  require_cell_family(space, "value_operator");
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  eval_basis(*space.mesh, cell, space.degree, bary, vals, grads);
  std::vector<LinearRow> rows(space.value_dim);
  for (int j = 0; j < space.cell_locals; ++j) {
    if (vals[j] == 0.0) continue;
    for (int k = 0; k < space.value_dim; ++k)
      rows[k].emplace_back(space.cell_dof(cell, j, k), vals[j]);
  }
  return rows;
}

namespace {

// Side trace in the facet frame: rows (v.n, v.t) with an overall sign.
void add_side_trace(std::array<LinearRow, 2>& rows, const FunctionSpace& space, int facet,
                    int cell, double s, double sign) {
  const Mesh& mesh = *space.mesh;
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  eval_basis(mesh, cell, space.degree, facet_point_barycentric(mesh, facet, cell, s), vals, grads);
  const auto [n, t] = mesh.facet_frame(facet);
  for (int j = 0; j < space.cell_locals; ++j) {
    if (vals[j] == 0.0) continue;
    const int dx = space.cell_dof(cell, j, 0), dy = space.cell_dof(cell, j, 1);
    rows[0].emplace_back(dx, sign * vals[j] * n.x());
    rows[0].emplace_back(dy, sign * vals[j] * n.y());
    rows[1].emplace_back(dx, sign * vals[j] * t.x());
    rows[1].emplace_back(dy, sign * vals[j] * t.y());
  }
}

}  // namespace

std::array<LinearRow, 2> jump_operator(const FunctionSpace& space, int facet, double s) {
  if (space.family != Family::LagrangeDiscontinuous)
    throw std::invalid_argument("jump_operator: discontinuous spaces only");
  if (space.value_dim != 2) throw std::invalid_argument("jump_operator: needs a 2-component space");
  const Facet& f = space.mesh->facets[facet];
  if (f.on_boundary()) throw std::invalid_argument("jump_operator: boundary facet has no jump");
  std::array<LinearRow, 2> rows;
  add_side_trace(rows, space, facet, f.cells[1], s, +1.0);
  add_side_trace(rows, space, facet, f.cells[0], s, -1.0);
  return rows;
}

std::array<LinearRow, 2> trace_operator(const FunctionSpace& space, int facet, double s) {
  require_cell_family(space, "trace_operator");
  if (space.value_dim != 2) throw std::invalid_argument("trace_operator: needs a 2-component space");
  std::array<LinearRow, 2> rows;
  add_side_trace(rows, space, facet, space.mesh->facets[facet].cells[0], s, +1.0);
  return rows;
}

namespace {

template <typename Force>
void check_cell_force_size(const std::vector<Force>& f, int num_cells, const char* who) {
  if (!f.empty() && f.size() != 1 && static_cast<int>(f.size()) != num_cells)
    throw std::invalid_argument(std::string(who) +
                                ": cell force must be empty, uniform (1) or per-cell");
}

}  // namespace

Eigen::VectorXd assemble_load_functional(
    const FunctionSpace& space, const std::vector<Eigen::Vector2d>& cell_force,
    const std::map<std::string, Eigen::Vector2d>& tractions) {
  require_cell_family(space, "assemble_load_functional");
  if (space.value_dim != 2)
    throw std::invalid_argument("assemble_load_functional: needs a 2-component space");
  const Mesh& mesh = *space.mesh;
  check_cell_force_size(cell_force, mesh.num_cells(), "assemble_load_functional");

  Eigen::VectorXd F = Eigen::VectorXd::Zero(space.dof_count);
  if (!cell_force.empty()) {
    const QuadratureRule rule = midedge_rule();
    std::vector<double> vals;
    std::vector<Eigen::Vector2d> grads;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const Eigen::Vector2d f = cell_force.size() == 1 ? cell_force[0] : cell_force[c];
      if (f.isZero()) continue;
      const double area = mesh.cell_area(c);
      for (size_t q = 0; q < rule.points.size(); ++q) {
        eval_basis(mesh, c, space.degree, rule.points[q], vals, grads);
        const double w = rule.weights[q] * area;
        for (int j = 0; j < space.cell_locals; ++j) {
          F[space.cell_dof(c, j, 0)] += w * vals[j] * f.x();
          F[space.cell_dof(c, j, 1)] += w * vals[j] * f.y();
        }
      }
    }
  }

  for (const auto& [tag, t] : tractions) {
    const std::vector<int> fs = mesh.boundary_facets(tag);
    if (fs.empty()) throw std::invalid_argument("assemble_load_functional: unknown tag " + tag);
    const QuadratureRule rule = facet_gauss_rule();
    std::vector<double> vals;
    std::vector<Eigen::Vector2d> grads;
    for (int f : fs) {
      const int c = mesh.facets[f].cells[0];
      for (size_t q = 0; q < rule.points.size(); ++q) {
        const double s = rule.points[q][1];
        eval_basis(mesh, c, space.degree, facet_point_barycentric(mesh, f, c, s), vals, grads);
        const double w = rule.weights[q] * mesh.facets[f].length;
        for (int j = 0; j < space.cell_locals; ++j) {
          if (vals[j] == 0.0) continue;
          F[space.cell_dof(c, j, 0)] += w * vals[j] * t.x();
          F[space.cell_dof(c, j, 1)] += w * vals[j] * t.y();
        }
      }
    }
  }
  return F;
}

Eigen::VectorXd assemble_scalar_load(const FunctionSpace& space,
                                     const std::vector<double>& cell_force) {
  require_cell_family(space, "assemble_scalar_load");
  if (space.value_dim != 1) throw std::invalid_argument("assemble_scalar_load: scalar spaces only");
  const Mesh& mesh = *space.mesh;
  check_cell_force_size(cell_force, mesh.num_cells(), "assemble_scalar_load");
  Eigen::VectorXd F = Eigen::VectorXd::Zero(space.dof_count);
  if (cell_force.empty()) return F;
  const QuadratureRule rule = midedge_rule();
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double f = cell_force.size() == 1 ? cell_force[0] : cell_force[c];
    if (f == 0.0) continue;
    const double area = mesh.cell_area(c);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      eval_basis(mesh, c, space.degree, rule.points[q], vals, grads);
      for (int j = 0; j < space.cell_locals; ++j)
        F[space.cell_dof(c, j, 0)] += rule.weights[q] * area * vals[j] * f;
    }
  }
  return F;
}

std::map<int, double> apply_dirichlet(const FunctionSpace& space,
                                      const std::vector<DirichletBC>& bcs) {
  if (space.family == Family::GlobalScalar)
    throw std::invalid_argument("apply_dirichlet: GlobalScalar has no boundary DOFs");
  const Mesh& mesh = *space.mesh;
  std::map<int, double> fixed;

  auto fix = [&](int dof, double value) {
    auto [it, fresh] = fixed.emplace(dof, value);
    if (!fresh && std::abs(it->second - value) > 1e-14)
      throw std::invalid_argument("apply_dirichlet: conflicting values on DOF " +
                                  std::to_string(dof));
  };

  for (const auto& bc : bcs) {
    std::vector<int> comps = bc.components;
    if (comps.empty())
      for (int k = 0; k < space.value_dim; ++k) comps.push_back(k);
    for (size_t i = 0; i < comps.size(); ++i)
      if (comps[i] < 0 || comps[i] >= space.value_dim)
        throw std::invalid_argument("apply_dirichlet: component out of range for tag " + bc.tag);
    if (!bc.values.empty() && bc.values.size() != comps.size())
      throw std::invalid_argument("apply_dirichlet: values/components size mismatch for tag " +
                                  bc.tag);
    auto value_of = [&](size_t i) { return bc.values.empty() ? 0.0 : bc.values[i]; };

    const std::vector<int> fs = mesh.boundary_facets(bc.tag);
    if (fs.empty()) throw std::invalid_argument("apply_dirichlet: unknown tag " + bc.tag);
    for (int f : fs) {
      const Facet& fa = mesh.facets[f];
      if (space.family == Family::FacetTrace) {
        for (int j = 0; j < space.facet_locals; ++j)
          for (size_t i = 0; i < comps.size(); ++i)
            fix(space.facet_dof(f, j, comps[i]), value_of(i));
        continue;
      }
      const int c = fa.cells[0];
      const auto& t = mesh.cells[c];
      for (int l = 0; l < 3; ++l)
        if ((t[l] == fa.nodes[0] || t[l] == fa.nodes[1]) && space.degree >= 1)
          for (size_t i = 0; i < comps.size(); ++i)
            fix(space.cell_dof(c, l, comps[i]), value_of(i));
      if (space.degree == 2)
        for (int e = 0; e < 3; ++e)
          if (mesh.cell_facets[c][e] == f)
            for (size_t i = 0; i < comps.size(); ++i)
              fix(space.cell_dof(c, 3 + e, comps[i]), value_of(i));
    }
  }

  // Continuous spaces share node DOFs between cells, so DOFs found through
  // one adjacent cell cover the facet; discontinuous trace DOFs were reached
  // through cells[0], the only cell of a boundary facet.
  return fixed;
}

DofReduction make_reduction(int dof_count, const std::map<int, double>& fixed) {
  DofReduction red;
  red.reduced.assign(dof_count, -1);
  red.fixed_values.assign(dof_count, 0.0);
  for (int d = 0; d < dof_count; ++d) {
    auto it = fixed.find(d);
    if (it == fixed.end())
      red.reduced[d] = red.active_count++;
    else
      red.fixed_values[d] = it->second;
  }
  return red;
}

}  // namespace lakit
