#include "lakit/formulations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lakit {

namespace {

// Affine combination of program unknowns standing in for one descriptor
// input: terms (block, local, coeff) plus a constant from eliminated DOFs.
struct AffineExpr {
  std::vector<std::tuple<int, int, double>> terms;
  double constant = 0.0;
};

AffineExpr map_row(const LinearRow& row, int block, const DofReduction* red, double scale = 1.0) {
  AffineExpr e;
  e.terms.reserve(row.size());
  for (const auto& [dof, coeff] : row) {
    const double v = scale * coeff;
    if (red == nullptr) {
      e.terms.emplace_back(block, dof, v);
    } else if (red->reduced[dof] >= 0) {
      e.terms.emplace_back(block, red->reduced[dof], v);
    } else {
      e.constant += v * red->fixed_values[dof];
    }
  }
  return e;
}

AffineExpr minus(AffineExpr a, const AffineExpr& b) {
  for (const auto& [blk, loc, c] : b.terms) a.terms.emplace_back(blk, loc, -c);
  a.constant -= b.constant;
  return a;
}

// Row-wise dense copy of a descriptor; the matrices are tiny and fixed per
// criterion, the sparse originals are column-major.
struct DenseFunc {
  const ConicFunction* f;
  Eigen::MatrixXd A, B;
  explicit DenseFunc(const ConicFunction& fn)
      : f(&fn), A(Eigen::MatrixXd(fn.A)), B(Eigen::MatrixXd(fn.B)) {}
};

DofReduction identity_reduction(int n) {
  DofReduction r;
  r.reduced.resize(n);
  std::iota(r.reduced.begin(), r.reduced.end(), 0);
  r.fixed_values.assign(n, 0.0);
  r.active_count = n;
  return r;
}

int make_aux_block(ConicProgram& prog, const std::string& name, const ConicFunction& f,
                   int count) {
  if (f.p == 0 || count == 0) return -1;
  ConeProduct prod;
  prod.blocks.reserve(f.cones.blocks.size() * count);
  for (int i = 0; i < count; ++i)
    for (const auto& c : f.cones.blocks) prod.append(c);
  return prog.add_block(name, prod);
}

// Appends instances of a conic-representable function at affine inputs,
// claiming consecutive slices of one aux block.
struct Instantiator {
  ConicProgram& prog;
  BuiltProgram& built;
  int aux_block = -1;
  int aux_at = 0;

  std::vector<int> add(const DenseFunc& d, const std::vector<AffineExpr>& input, double weight,
                       const std::string& group) {
    const ConicFunction& f = *d.f;
    std::vector<int> rows;
    rows.reserve(f.rows());
    for (int r = 0; r < f.rows(); ++r) {
      double shift = 0.0;
      for (int k = 0; k < f.n; ++k) shift += d.A(r, k) * input[k].constant;
      const double lo = std::isfinite(f.bl[r]) ? f.bl[r] - shift : f.bl[r];
      const double hi = std::isfinite(f.bu[r]) ? f.bu[r] - shift : f.bu[r];
      const int row = prog.add_row(lo, hi, group);
      rows.push_back(row);
      for (int k = 0; k < f.n; ++k) {
        const double a = d.A(r, k);
        if (a == 0.0) continue;
        for (const auto& [blk, loc, c] : input[k].terms) prog.add_coeff(row, blk, loc, a * c);
      }
      for (int j = 0; j < f.p; ++j)
        if (d.B(r, j) != 0.0) prog.add_coeff(row, aux_block, aux_at + j, d.B(r, j));
    }
    for (int k = 0; k < f.n; ++k) {
      if (f.cx[k] == 0.0) continue;
      for (const auto& [blk, loc, c] : input[k].terms)
        prog.add_objective(blk, loc, weight * f.cx[k] * c);
      built.objective_offset += weight * f.cx[k] * input[k].constant;
    }
    for (int j = 0; j < f.p; ++j)
      if (f.cy[j] != 0.0) prog.add_objective(aux_block, aux_at + j, weight * f.cy[j]);
    aux_at += f.p;
    return rows;
  }
};

void require_plane(const Criterion& crit, const char* who) {
  if (crit.stress_dim != 3)
    throw std::invalid_argument(std::string(who) + ": needs a plane (3-component) criterion");
}

Eigen::Vector2d cell_value(const std::vector<Eigen::Vector2d>& per_cell, int c) {
  if (per_cell.empty()) return Eigen::Vector2d::Zero();
  return per_cell.size() == 1 ? per_cell[0] : per_cell[c];
}

void check_per_cell(const std::vector<Eigen::Vector2d>& v, int ncells, const char* who) {
  if (!v.empty() && v.size() != 1 && static_cast<int>(v.size()) != ncells)
    throw std::invalid_argument(std::string(who) +
                                ": body force must be empty, uniform (1) or per-cell");
}

bool fixes_all_components(const DirichletBC& bc, int value_dim) {
  if (bc.components.empty()) return true;
  std::vector<int> c = bc.components;
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return static_cast<int>(c.size()) == value_dim;
}

Eigen::Vector2d prescribed_vector(const DirichletBC& bc) {
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  if (bc.values.empty()) return v;
  if (bc.components.empty()) {
    for (int k = 0; k < 2 && k < static_cast<int>(bc.values.size()); ++k) v[k] = bc.values[k];
  } else {
    for (size_t i = 0; i < bc.components.size(); ++i) v[bc.components[i]] = bc.values[i];
  }
  return v;
}

}  // namespace

BuiltProgram build_kinematic_ub(const Mesh& mesh, int space_deg, const Criterion& criterion,
                                const LoadingSpec& loading, const std::vector<DirichletBC>& bcs,
                                bool discontinuous) {
  require_plane(criterion, "build_kinematic_ub");
  if (space_deg < 1 || space_deg > 2)
    throw std::invalid_argument("build_kinematic_ub: velocity degree must be 1 or 2");
  check_per_cell(loading.body_force, mesh.num_cells(), "build_kinematic_ub");
  check_per_cell(loading.fixed_body_force, mesh.num_cells(), "build_kinematic_ub");

  BuiltProgram bp;
  bp.kind = ProgramKind::KinematicUB;
  bp.mesh = &mesh;

  const Family fam = discontinuous ? Family::LagrangeDiscontinuous : Family::LagrangeContinuous;
  const FunctionSpace space = build_space(mesh, fam, space_deg, 2);

  // Discontinuous runs let fully fixed boundaries slide with dissipation;
  // partially fixed tags still eliminate their trace components.
  std::vector<DirichletBC> eliminate;
  std::vector<const DirichletBC*> slide_tags;
  for (const auto& bc : bcs) {
    if (discontinuous && fixes_all_components(bc, 2))
      slide_tags.push_back(&bc);
    else
      eliminate.push_back(bc);
  }

  const std::map<int, double> fixed = apply_dirichlet(space, eliminate);
  const DofReduction red = make_reduction(space.dof_count, fixed);
  if (red.active_count == 0)
    throw std::invalid_argument("build_kinematic_ub: every velocity DOF is fixed");

  const Eigen::VectorXd Fdrv =
      assemble_load_functional(space, loading.body_force, loading.tractions);
  if (Fdrv.lpNorm<Eigen::Infinity>() == 0.0)
    throw std::invalid_argument("build_kinematic_ub: zero driving load");

  const int ublk = bp.program.add_block("u", ConeKind::Free, red.active_count);
  bp.program.block(ublk).recovery = {space.dof_count, red.reduced, red.fixed_values};

  const QuadratureRule rule = vertex_rule();
  const int npts = static_cast<int>(rule.points.size());
  const DenseFunc dsup(criterion.support_strain);
  const int pib =
      make_aux_block(bp.program, "pi", criterion.support_strain, mesh.num_cells() * npts);
  Instantiator cells{bp.program, bp, pib, 0};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    for (int q = 0; q < npts; ++q) {
      const auto srows = strain_operator(space, c, rule.points[q]);
      std::vector<AffineExpr> in(3);
      for (int k = 0; k < 3; ++k) in[k] = map_row(srows[k], ublk, &red);
      const int at = cells.aux_at;
      cells.add(dsup, in, area * rule.weights[q], "support");
      bp.primal_terms.push_back({false, c, pib, at, criterion.support_strain.p});
    }
  }

  if (discontinuous) {
    int ninst = 0;
    for (int f = 0; f < mesh.num_facets(); ++f)
      if (!mesh.facets[f].on_boundary()) ninst += 2;
    std::vector<std::pair<int, const DirichletBC*>> boundary_jumps;
    for (const DirichletBC* bc : slide_tags) {
      const std::vector<int> fs = mesh.boundary_facets(bc->tag);
      if (fs.empty())
        throw std::invalid_argument("build_kinematic_ub: unknown tag " + bc->tag);
      for (int f : fs) boundary_jumps.emplace_back(f, bc);
      ninst += 2 * static_cast<int>(fs.size());
    }

    const DenseFunc djump(criterion.support_jump);
    const int pjb = make_aux_block(bp.program, "pij", criterion.support_jump, ninst);
    Instantiator jumps{bp.program, bp, pjb, 0};
    const QuadratureRule frule = facet_endpoint_rule();

    for (int f = 0; f < mesh.num_facets(); ++f) {
      if (mesh.facets[f].on_boundary()) continue;
      for (size_t q = 0; q < frule.points.size(); ++q) {
        const double s = frule.points[q][1];
        const auto jr = jump_operator(space, f, s);
        std::vector<AffineExpr> in = {map_row(jr[0], ublk, &red), map_row(jr[1], ublk, &red)};
        const int at = jumps.aux_at;
        jumps.add(djump, in, frule.weights[q] * mesh.facets[f].length, "jump");
        bp.primal_terms.push_back({true, f, pjb, at, criterion.support_jump.p});
      }
    }
    // Fixed boundary: the jump is the prescribed velocity minus the inside
    // trace, with the outward normal.
    for (const auto& [f, bc] : boundary_jumps) {
      const auto [n, t] = mesh.facet_frame(f);
      const Eigen::Vector2d uD = prescribed_vector(*bc);
      for (size_t q = 0; q < frule.points.size(); ++q) {
        const double s = frule.points[q][1];
        const auto tr = trace_operator(space, f, s);
        std::vector<AffineExpr> in = {map_row(tr[0], ublk, &red, -1.0),
                                      map_row(tr[1], ublk, &red, -1.0)};
        in[0].constant += uD.dot(n);
        in[1].constant += uD.dot(t);
        const int at = jumps.aux_at;
        jumps.add(djump, in, frule.weights[q] * mesh.facets[f].length, "jump");
        bp.primal_terms.push_back({true, f, pjb, at, criterion.support_jump.p});
      }
    }
  }

  double rhs = 1.0;
  for (int d = 0; d < space.dof_count; ++d)
    if (red.reduced[d] < 0) rhs -= Fdrv[d] * red.fixed_values[d];
  const int nrow = bp.program.add_row(rhs, rhs, "normalization");
  for (int d = 0; d < space.dof_count; ++d)
    if (red.reduced[d] >= 0 && Fdrv[d] != 0.0)
      bp.program.add_coeff(nrow, ublk, red.reduced[d], Fdrv[d]);

  if (!loading.fixed_body_force.empty() || !loading.fixed_tractions.empty()) {
    const Eigen::VectorXd F0 =
        assemble_load_functional(space, loading.fixed_body_force, loading.fixed_tractions);
    for (int d = 0; d < space.dof_count; ++d) {
      if (F0[d] == 0.0) continue;
      if (red.reduced[d] >= 0)
        bp.program.add_objective(ublk, red.reduced[d], -F0[d]);
      else
        bp.objective_offset -= F0[d] * red.fixed_values[d];
    }
  }

  bp.fields.push_back({"velocity", ublk, fam, space_deg, 2, red});
  return bp;
}

BuiltProgram build_static_lb(const Mesh& mesh, const Criterion& criterion,
                             const LoadingSpec& loading) {
  require_plane(criterion, "build_static_lb");
  if (!loading.fixed_body_force.empty() || !loading.fixed_tractions.empty())
    throw std::invalid_argument("build_static_lb: fixed loads are not supported");
  check_per_cell(loading.body_force, mesh.num_cells(), "build_static_lb");

  BuiltProgram bp;
  bp.kind = ProgramKind::StaticLB;
  bp.mesh = &mesh;
  bp.objective_sign = -1.0;

  const FunctionSpace sspace = build_space(mesh, Family::LagrangeDiscontinuous, 1, 3);
  const int sblk = bp.program.add_block("sigma", ConeKind::Free, sspace.dof_count);
  const int lblk = bp.program.add_block("lambda", ConeKind::Free, 1);
  bp.program.add_objective(lblk, 0, -1.0);

  // Cell equilibrium div(sigma) + lambda f = 0, area-weighted so the duals
  // carry velocity scale.
  std::vector<double> vals;
  std::vector<Eigen::Vector2d> grads;
  bp.cell_equilibrium_rows.resize(mesh.num_cells());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    eval_basis(mesh, c, 1, {1.0 / 3, 1.0 / 3, 1.0 / 3}, vals, grads);
    const int rx = bp.program.add_row(0.0, 0.0, "equilibrium");
    const int ry = bp.program.add_row(0.0, 0.0, "equilibrium");
    for (int j = 0; j < 3; ++j) {
      const Eigen::Vector2d g = grads[j];
      if (g.x() != 0.0) {
        bp.program.add_coeff(rx, sblk, sspace.cell_dof(c, j, 0), area * g.x());
        bp.program.add_coeff(ry, sblk, sspace.cell_dof(c, j, 2), area * g.x());
      }
      if (g.y() != 0.0) {
        bp.program.add_coeff(rx, sblk, sspace.cell_dof(c, j, 2), area * g.y());
        bp.program.add_coeff(ry, sblk, sspace.cell_dof(c, j, 1), area * g.y());
      }
    }
    const Eigen::Vector2d f = cell_value(loading.body_force, c);
    if (f.x() != 0.0) bp.program.add_coeff(rx, lblk, 0, area * f.x());
    if (f.y() != 0.0) bp.program.add_coeff(ry, lblk, 0, area * f.y());
    bp.cell_equilibrium_rows[c] = {rx, ry};
  }

  // Traction rows of one side at one endpoint: sigma.n components.
  auto add_traction = [&](int row_x, int row_y, int cell, int facet, double s, double w) {
    const Eigen::Vector2d n = mesh.facets[facet].normal;
    const auto sv = value_operator(sspace, cell, facet_point_barycentric(mesh, facet, cell, s));
    for (const auto& [dof, co] : sv[0]) bp.program.add_coeff(row_x, sblk, dof, w * co * n.x());
    for (const auto& [dof, co] : sv[1]) bp.program.add_coeff(row_y, sblk, dof, w * co * n.y());
    for (const auto& [dof, co] : sv[2]) {
      bp.program.add_coeff(row_x, sblk, dof, w * co * n.y());
      bp.program.add_coeff(row_y, sblk, dof, w * co * n.x());
    }
  };

  const QuadratureRule frule = facet_endpoint_rule();
  for (int f = 0; f < mesh.num_facets(); ++f) {
    const Facet& fa = mesh.facets[f];
    if (fa.on_boundary()) continue;
    for (size_t q = 0; q < frule.points.size(); ++q) {
      const double s = frule.points[q][1], w = frule.weights[q] * fa.length;
      const int rx = bp.program.add_row(0.0, 0.0, "continuity");
      const int ry = bp.program.add_row(0.0, 0.0, "continuity");
      add_traction(rx, ry, fa.cells[1], f, s, +w);
      add_traction(rx, ry, fa.cells[0], f, s, -w);
    }
  }

  for (const auto& [tag, t] : loading.tractions) {
    const std::vector<int> fs = mesh.boundary_facets(tag);
    if (fs.empty()) throw std::invalid_argument("build_static_lb: unknown tag " + tag);
    for (int f : fs) {
      for (size_t q = 0; q < frule.points.size(); ++q) {
        const double s = frule.points[q][1], w = frule.weights[q] * mesh.facets[f].length;
        const int rx = bp.program.add_row(0.0, 0.0, "traction");
        const int ry = bp.program.add_row(0.0, 0.0, "traction");
        add_traction(rx, ry, mesh.facets[f].cells[0], f, s, w);
        if (t.x() != 0.0) bp.program.add_coeff(rx, lblk, 0, -w * t.x());
        if (t.y() != 0.0) bp.program.add_coeff(ry, lblk, 0, -w * t.y());
      }
    }
  }

  // Strength at the vertices; convexity extends it over each cell.
  const DenseFunc dind(criterion.indicator);
  const int gblk = make_aux_block(bp.program, "G", criterion.indicator, mesh.num_cells() * 3);
  Instantiator strength{bp.program, bp, gblk, 0};
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (int v = 0; v < 3; ++v) {
      std::vector<AffineExpr> in(3);
      for (int k = 0; k < 3; ++k)
        in[k].terms.emplace_back(sblk, sspace.cell_dof(c, v, k), 1.0);
      bp.dual_terms.push_back({c, strength.add(dind, in, 1.0, "strength")});
    }

  bp.fields.push_back(
      {"stress", sblk, Family::LagrangeDiscontinuous, 1, 3, identity_reduction(sspace.dof_count)});
  return bp;
}

BuiltProgram build_mixed(const Mesh& mesh, int u_deg, int sig_deg, const Criterion& criterion,
                         const LoadingSpec& loading, const std::vector<DirichletBC>& bcs) {
  require_plane(criterion, "build_mixed");
  const bool low = u_deg == 1 && sig_deg == 0, high = u_deg == 2 && sig_deg == 1;
  if (!low && !high)
    throw std::invalid_argument(
        "build_mixed: supported degree pairs are (1,0) and (2,1), got (" +
        std::to_string(u_deg) + "," + std::to_string(sig_deg) + ")");
  check_per_cell(loading.body_force, mesh.num_cells(), "build_mixed");
  check_per_cell(loading.fixed_body_force, mesh.num_cells(), "build_mixed");

  BuiltProgram bp;
  bp.kind = ProgramKind::Mixed;
  bp.mesh = &mesh;
  bp.objective_sign = -1.0;

  const FunctionSpace uspace = build_space(mesh, Family::LagrangeContinuous, u_deg, 2);
  const FunctionSpace sspace = build_space(mesh, Family::LagrangeDiscontinuous, sig_deg, 3);
  const std::map<int, double> fixed = apply_dirichlet(uspace, bcs);
  const DofReduction red = make_reduction(uspace.dof_count, fixed);
  if (red.active_count == 0)
    throw std::invalid_argument("build_mixed: every velocity DOF is fixed");

  const Eigen::VectorXd Fdrv =
      assemble_load_functional(uspace, loading.body_force, loading.tractions);
  Eigen::VectorXd F0 = Eigen::VectorXd::Zero(uspace.dof_count);
  if (!loading.fixed_body_force.empty() || !loading.fixed_tractions.empty())
    F0 = assemble_load_functional(uspace, loading.fixed_body_force, loading.fixed_tractions);

  const int sblk = bp.program.add_block("sigma", ConeKind::Free, sspace.dof_count);
  const int lblk = bp.program.add_block("lambda", ConeKind::Free, 1);
  bp.program.add_objective(lblk, 0, -1.0);

  // One weak-equilibrium row per active velocity DOF.
  bp.velocity_dual_rows.assign(uspace.dof_count, -1);
  std::vector<int> row_of_red(red.active_count, -1);
  for (int d = 0; d < uspace.dof_count; ++d) {
    if (red.reduced[d] < 0) continue;
    const int r = bp.program.add_row(F0[d], F0[d], "virtual_work");
    if (Fdrv[d] != 0.0) bp.program.add_coeff(r, lblk, 0, -Fdrv[d]);
    row_of_red[red.reduced[d]] = r;
    bp.velocity_dual_rows[d] = r;
  }

  const QuadratureRule rule = low ? QuadratureRule{{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, {1.0}}
                                  : vertex_rule();
  const double pair_weight[3] = {1.0, 1.0, 2.0};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    for (size_t q = 0; q < rule.points.size(); ++q) {
      const double w = area * rule.weights[q];
      const auto eps = strain_operator(uspace, c, rule.points[q]);
      const auto sv = value_operator(sspace, c, rule.points[q]);
      for (int comp = 0; comp < 3; ++comp)
        for (const auto& [udof, ec] : eps[comp]) {
          if (red.reduced[udof] < 0) continue;
          const int row = row_of_red[red.reduced[udof]];
          for (const auto& [sdof, sc] : sv[comp])
            bp.program.add_coeff(row, sblk, sdof, w * pair_weight[comp] * ec * sc);
        }
    }
  }

  const DenseFunc dind(criterion.indicator);
  const int npts = low ? 1 : 3;
  const int gblk = make_aux_block(bp.program, "G", criterion.indicator, mesh.num_cells() * npts);
  Instantiator strength{bp.program, bp, gblk, 0};
  for (int c = 0; c < mesh.num_cells(); ++c)
    for (int v = 0; v < npts; ++v) {
      std::vector<AffineExpr> in(3);
      for (int k = 0; k < 3; ++k)
        in[k].terms.emplace_back(sblk, sspace.cell_dof(c, low ? 0 : v, k), 1.0);
      bp.dual_terms.push_back({c, strength.add(dind, in, 1.0, "strength")});
    }

  bp.velocity_degree = u_deg;
  bp.velocity_normalizer = Fdrv;
  bp.fields.push_back({"stress", sblk, Family::LagrangeDiscontinuous, sig_deg, 3,
                       identity_reduction(sspace.dof_count)});
  bp.fields.push_back({"velocity", -1, Family::LagrangeContinuous, u_deg, 2, red});
  return bp;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Pairs entities on opposite unit-cell edges by the other coordinate.
void match_periodic(const std::vector<std::pair<double, int>>& lo,
                    std::vector<std::pair<double, int>> hi, double tol, UnionFind& uf,
                    const char* who) {
  std::vector<std::pair<double, int>> a(lo);
  std::sort(a.begin(), a.end());
  std::sort(hi.begin(), hi.end());
  if (a.size() != hi.size())
    throw std::invalid_argument(std::string(who) + ": unmatched periodic nodes");
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i].first - hi[i].first) > tol)
      throw std::invalid_argument(std::string(who) + ": unmatched periodic nodes");
    uf.unite(hi[i].second, a[i].second);
  }
}

}  // namespace

BuiltProgram build_homogenization_kin(const Mesh& mesh, const Criterion& criterion,
                                      const Eigen::Vector3d& Sigma0, int space_deg) {
  require_plane(criterion, "build_homogenization_kin");
  if (space_deg < 1 || space_deg > 2)
    throw std::invalid_argument("build_homogenization_kin: fluctuation degree must be 1 or 2");
  if (Sigma0.norm() == 0.0)
    throw std::invalid_argument("build_homogenization_kin: Sigma0 must be nonzero");

  BuiltProgram bp;
  bp.kind = ProgramKind::HomogKin;
  bp.mesh = &mesh;

  const FunctionSpace space =
      build_space(mesh, Family::LagrangeContinuous, space_deg, 2);

  double xmin = kInf, xmax = -kInf, ymin = kInf, ymax = -kInf;
  for (const auto& p : mesh.nodes) {
    xmin = std::min(xmin, p.x());
    xmax = std::max(xmax, p.x());
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const double tol = 1e-9 * std::max(xmax - xmin, ymax - ymin);

  const int nscalar = space.dof_count / 2;  // entities: nodes, then P2 facets
  UnionFind uf(nscalar);

  auto on_line = [&](double v, double target) { return std::abs(v - target) <= tol; };
  {
    std::vector<std::pair<double, int>> left, right, bottom, top;
    std::vector<bool> on_bnd(mesh.num_nodes(), false);
    for (const auto& fa : mesh.facets)
      if (fa.on_boundary()) on_bnd[fa.nodes[0]] = on_bnd[fa.nodes[1]] = true;
    for (int i = 0; i < mesh.num_nodes(); ++i) {
      if (!on_bnd[i]) continue;
      const auto& p = mesh.nodes[i];
      if (on_line(p.x(), xmin)) left.emplace_back(p.y(), i);
      if (on_line(p.x(), xmax)) right.emplace_back(p.y(), i);
      if (on_line(p.y(), ymin)) bottom.emplace_back(p.x(), i);
      if (on_line(p.y(), ymax)) top.emplace_back(p.x(), i);
    }
    match_periodic(left, right, tol, uf, "build_homogenization_kin");
    match_periodic(bottom, top, tol, uf, "build_homogenization_kin");
    if (space_deg == 2) {
      std::vector<std::pair<double, int>> fl, fr, fb, ft;
      for (int f = 0; f < mesh.num_facets(); ++f) {
        if (!mesh.facets[f].on_boundary()) continue;
        const Eigen::Vector2d m =
            0.5 * (mesh.nodes[mesh.facets[f].nodes[0]] + mesh.nodes[mesh.facets[f].nodes[1]]);
        const int ent = mesh.num_nodes() + f;
        if (on_line(m.x(), xmin)) fl.emplace_back(m.y(), ent);
        if (on_line(m.x(), xmax)) fr.emplace_back(m.y(), ent);
        if (on_line(m.y(), ymin)) fb.emplace_back(m.x(), ent);
        if (on_line(m.y(), ymax)) ft.emplace_back(m.x(), ent);
      }
      match_periodic(fl, fr, tol, uf, "build_homogenization_kin");
      match_periodic(fb, ft, tol, uf, "build_homogenization_kin");
    }
  }

  // Pin one corner's class to remove the rigid translation of the
  // fluctuation (it never changes the strain).
  int pinned = uf.find(0);
  for (int i = 0; i < mesh.num_nodes(); ++i)
    if (on_line(mesh.nodes[i].x(), xmin) && on_line(mesh.nodes[i].y(), ymin)) {
      pinned = uf.find(i);
      break;
    }

  DofReduction red;
  red.reduced.assign(space.dof_count, -1);
  red.fixed_values.assign(space.dof_count, 0.0);
  std::map<int, int> rep_col;
  int next = 0;
  for (int e = 0; e < nscalar; ++e) {
    const int r = uf.find(e);
    if (r == pinned) continue;
    auto it = rep_col.find(r);
    int col;
    if (it == rep_col.end()) {
      col = next;
      rep_col.emplace(r, col);
      next += 2;
    } else {
      col = it->second;
    }
    red.reduced[2 * e] = col;
    red.reduced[2 * e + 1] = col + 1;
  }
  red.active_count = next;

  const int dblk = bp.program.add_block("D", ConeKind::Free, 3);
  const int ublk = bp.program.add_block("u", ConeKind::Free, red.active_count);
  bp.program.block(ublk).recovery = {space.dof_count, red.reduced, red.fixed_values};

  const QuadratureRule rule = vertex_rule();
  const DenseFunc dsup(criterion.support_strain);
  const int pib = make_aux_block(bp.program, "pi", criterion.support_strain,
                                 mesh.num_cells() * static_cast<int>(rule.points.size()));
  Instantiator cells{bp.program, bp, pib, 0};
  double area_total = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    area_total += area;
    for (size_t q = 0; q < rule.points.size(); ++q) {
      const auto srows = strain_operator(space, c, rule.points[q]);
      std::vector<AffineExpr> in(3);
      for (int k = 0; k < 3; ++k) {
        in[k] = map_row(srows[k], ublk, &red);
        in[k].terms.emplace_back(dblk, k, 1.0);
      }
      const int at = cells.aux_at;
      cells.add(dsup, in, area * rule.weights[q], "support");
      bp.primal_terms.push_back({false, c, pib, at, criterion.support_strain.p});
    }
  }

  const int nrow = bp.program.add_row(1.0, 1.0, "normalization");
  bp.program.add_coeff(nrow, dblk, 0, area_total * Sigma0[0]);
  bp.program.add_coeff(nrow, dblk, 1, area_total * Sigma0[1]);
  bp.program.add_coeff(nrow, dblk, 2, 2.0 * area_total * Sigma0[2]);

  bp.fields.push_back({"macro_strain", dblk, Family::GlobalScalar, 0, 3, identity_reduction(3)});
  bp.fields.push_back({"fluctuation", ublk, Family::LagrangeContinuous, space_deg, 2, red});
  return bp;
}

BuiltProgram build_thick_plate_kin(const Mesh& mesh, const Criterion& criterion, double pressure,
                                   const std::vector<std::string>& clamped_tags,
                                   const std::vector<std::string>& supported_tags) {
  if (criterion.stress_dim != 5)
    throw std::invalid_argument("build_thick_plate_kin: needs a plate (5-component) criterion");
  if (pressure == 0.0)
    throw std::invalid_argument("build_thick_plate_kin: zero driving pressure");

  BuiltProgram bp;
  bp.kind = ProgramKind::ThickPlateKin;
  bp.mesh = &mesh;

  const FunctionSpace wspace = build_space(mesh, Family::LagrangeContinuous, 2, 1);
  const FunctionSpace tspace = build_space(mesh, Family::LagrangeDiscontinuous, 1, 2);

  std::vector<DirichletBC> bcs;
  for (const auto& tag : clamped_tags) bcs.push_back({tag, {}, {}});
  for (const auto& tag : supported_tags) bcs.push_back({tag, {}, {}});
  const std::map<int, double> fixed = apply_dirichlet(wspace, bcs);
  const DofReduction redw = make_reduction(wspace.dof_count, fixed);
  if (redw.active_count == 0)
    throw std::invalid_argument("build_thick_plate_kin: every deflection DOF is fixed");

  const int wblk = bp.program.add_block("w", ConeKind::Free, redw.active_count);
  bp.program.block(wblk).recovery = {wspace.dof_count, redw.reduced, redw.fixed_values};
  const int tblk = bp.program.add_block("theta", ConeKind::Free, tspace.dof_count);

  const QuadratureRule rule = vertex_rule();
  const int npts = static_cast<int>(rule.points.size());
  const DenseFunc dsup(criterion.support_strain);
  const int pib =
      make_aux_block(bp.program, "pi", criterion.support_strain, mesh.num_cells() * npts);
  Instantiator cells{bp.program, bp, pib, 0};
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double area = mesh.cell_area(c);
    for (int q = 0; q < npts; ++q) {
      const auto chi = strain_operator(tspace, c, rule.points[q]);
      const auto gw = gradient_operator(wspace, c, rule.points[q]);
      const auto tv = value_operator(tspace, c, rule.points[q]);
      std::vector<AffineExpr> in(5);
      for (int k = 0; k < 3; ++k) in[k] = map_row(chi[k], tblk, nullptr);
      in[3] = minus(map_row(gw[0], wblk, &redw), map_row(tv[0], tblk, nullptr));
      in[4] = minus(map_row(gw[1], wblk, &redw), map_row(tv[1], tblk, nullptr));
      const int at = cells.aux_at;
      cells.add(dsup, in, area * rule.weights[q], "support");
      bp.primal_terms.push_back({false, c, pib, at, criterion.support_strain.p});
    }
  }

  int ninst = 0;
  for (int f = 0; f < mesh.num_facets(); ++f)
    if (!mesh.facets[f].on_boundary()) ninst += 2;
  std::vector<int> clamped_facets;
  for (const auto& tag : clamped_tags) {
    const std::vector<int> fs = mesh.boundary_facets(tag);
    if (fs.empty()) throw std::invalid_argument("build_thick_plate_kin: unknown tag " + tag);
    clamped_facets.insert(clamped_facets.end(), fs.begin(), fs.end());
  }
  ninst += 2 * static_cast<int>(clamped_facets.size());

  const DenseFunc djump(criterion.support_jump);
  const int pjb = make_aux_block(bp.program, "pij", criterion.support_jump, ninst);
  Instantiator jumps{bp.program, bp, pjb, 0};
  const QuadratureRule frule = facet_endpoint_rule();
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (mesh.facets[f].on_boundary()) continue;
    for (size_t q = 0; q < frule.points.size(); ++q) {
      const double s = frule.points[q][1];
      const auto jr = jump_operator(tspace, f, s);
      // Deflection is continuous: the w-jump input is identically zero.
      std::vector<AffineExpr> in = {map_row(jr[0], tblk, nullptr), map_row(jr[1], tblk, nullptr),
                                    AffineExpr{}};
      const int at = jumps.aux_at;
      jumps.add(djump, in, frule.weights[q] * mesh.facets[f].length, "jump");
      bp.primal_terms.push_back({true, f, pjb, at, criterion.support_jump.p});
    }
  }
  for (int f : clamped_facets) {
    const int c0 = mesh.facets[f].cells[0];
    for (size_t q = 0; q < frule.points.size(); ++q) {
      const double s = frule.points[q][1];
      const auto tr = trace_operator(tspace, f, s);
      const auto wv = value_operator(wspace, c0, facet_point_barycentric(mesh, f, c0, s));
      std::vector<AffineExpr> in = {map_row(tr[0], tblk, nullptr, -1.0),
                                    map_row(tr[1], tblk, nullptr, -1.0),
                                    map_row(wv[0], wblk, &redw, -1.0)};
      const int at = jumps.aux_at;
      jumps.add(djump, in, frule.weights[q] * mesh.facets[f].length, "jump");
      bp.primal_terms.push_back({true, f, pjb, at, criterion.support_jump.p});
    }
  }

  const Eigen::VectorXd Fw = assemble_scalar_load(wspace, {pressure});
  double rhs = 1.0;
  for (int d = 0; d < wspace.dof_count; ++d)
    if (redw.reduced[d] < 0) rhs -= Fw[d] * redw.fixed_values[d];
  const int nrow = bp.program.add_row(rhs, rhs, "normalization");
  for (int d = 0; d < wspace.dof_count; ++d)
    if (redw.reduced[d] >= 0 && Fw[d] != 0.0)
      bp.program.add_coeff(nrow, wblk, redw.reduced[d], Fw[d]);

  bp.fields.push_back({"deflection", wblk, Family::LagrangeContinuous, 2, 1, redw});
  bp.fields.push_back({"rotation", tblk, Family::LagrangeDiscontinuous, 1, 2,
                       identity_reduction(tspace.dof_count)});
  return bp;
}

Solution extract_fields(const BuiltProgram& built, const ProgramSolution& raw) {
  Solution sol;
  sol.status = raw.status;
  sol.x = raw.x;
  sol.row_dual = raw.row_dual;
  sol.objective = raw.objective;
  sol.primal_residual = raw.primal_residual;
  sol.dual_residual = raw.dual_residual;
  sol.gap = raw.gap;
  sol.iterations = raw.iterations;
  sol.log = raw.log;

  const bool ub_side = built.kind == ProgramKind::KinematicUB ||
                       built.kind == ProgramKind::HomogKin ||
                       built.kind == ProgramKind::ThickPlateKin;
  switch (raw.status) {
    case SolveStatus::Optimal:
    case SolveStatus::MaxIterations:
      sol.load_factor = built.objective_sign * raw.objective + built.objective_offset;
      break;
    case SolveStatus::PrimalInfeasible:
      sol.load_factor = ub_side ? kInf : -kInf;
      break;
    case SolveStatus::DualInfeasible:
      sol.load_factor = ub_side ? -kInf : kInf;
      break;
    case SolveStatus::NumericalFailure:
      sol.load_factor = std::numeric_limits<double>::quiet_NaN();
      break;
  }

  for (const auto& fd : built.fields) {
    if (fd.block < 0) continue;
    const auto& blk = built.program.block(fd.block);
    const int full = static_cast<int>(fd.reduction.reduced.size());
    Eigen::VectorXd v(full);
    for (int d = 0; d < full; ++d)
      v[d] = fd.reduction.reduced[d] >= 0 ? raw.x[blk.offset + fd.reduction.reduced[d]]
                                          : fd.reduction.fixed_values[d];
    sol.fields[fd.name] = std::move(v);
  }

  std::map<std::string, std::vector<double>> groups;
  for (int r = 0; r < built.program.num_rows(); ++r)
    groups[built.program.row_group(r)].push_back(raw.row_dual[r]);
  for (auto& [name, v] : groups)
    sol.group_duals[name] = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));

  if (built.kind == ProgramKind::StaticLB && raw.status == SolveStatus::Optimal &&
      built.mesh != nullptr) {
    const Mesh& mesh = *built.mesh;
    Eigen::VectorXd pv = Eigen::VectorXd::Zero(2 * mesh.num_nodes());
    Eigen::VectorXd cnt = Eigen::VectorXd::Zero(mesh.num_nodes());
    for (int c = 0; c < mesh.num_cells(); ++c) {
      const double ux = raw.row_dual[built.cell_equilibrium_rows[c][0]];
      const double uy = raw.row_dual[built.cell_equilibrium_rows[c][1]];
      for (int v : mesh.cells[c]) {
        pv[2 * v] += ux;
        pv[2 * v + 1] += uy;
        cnt[v] += 1.0;
      }
    }
    for (int i = 0; i < mesh.num_nodes(); ++i)
      if (cnt[i] > 0) {
        pv[2 * i] /= cnt[i];
        pv[2 * i + 1] /= cnt[i];
      }
    sol.fields["pseudo_velocity"] = std::move(pv);
  }

  if (!built.velocity_dual_rows.empty() && raw.status == SolveStatus::Optimal) {
    const int full = static_cast<int>(built.velocity_dual_rows.size());
    Eigen::VectorXd u = Eigen::VectorXd::Zero(full);
    for (int d = 0; d < full; ++d)
      if (built.velocity_dual_rows[d] >= 0) u[d] = raw.row_dual[built.velocity_dual_rows[d]];
    const double power = built.velocity_normalizer.size() == full
                             ? built.velocity_normalizer.dot(u)
                             : 0.0;
    if (std::abs(power) > 1e-12) u /= power;
    sol.fields["velocity"] = std::move(u);
  }

  return sol;
}

Solution solve_built(const BuiltProgram& built, const SolverSettings& settings) {
  return extract_fields(built, solve_program(built.program, settings));
}

}  // namespace lakit
