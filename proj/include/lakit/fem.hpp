#pragma once

#include "lakit/mesh.hpp"

#include <Eigen/Core>
#include <array>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace lakit {

enum class Family { LagrangeContinuous, LagrangeDiscontinuous, FacetTrace, GlobalScalar };

std::string family_name(Family f);

// Quadrature points in barycentric coordinates with weights summing to 1;
// scale by |T| (triangles) or length (facet rules, points (1-s, s, 0)).
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

// Triangle vertices, weight 1/3 each.  Exact for affine integrands and by
// excess for convex ones, which is what keeps kinematic bounds rigorous.
QuadratureRule vertex_rule();
// Segment endpoints, weight 1/2 each.  Same exact/by-excess property on facets.
QuadratureRule facet_endpoint_rule();
// Edge midpoints, weight 1/3 each; exact for quadratics.
QuadratureRule midedge_rule();
// Two-point Gauss on a segment; exact for cubics.
QuadratureRule facet_gauss_rule();

// Scalar Lagrange basis (degree 0..2) on a cell at a barycentric point:
// values and physical gradients.  Degree-2 locals 3+e sit on the edge
// opposite vertex e, matching Mesh::cell_facets.
void eval_basis(const Mesh& mesh, int cell, int degree, const std::array<double, 3>& bary,
                std::vector<double>& values, std::vector<Eigen::Vector2d>& grads);

struct FunctionSpace {
  const Mesh* mesh = nullptr;
  Family family = Family::LagrangeContinuous;
  int degree = 1;
  int value_dim = 1;
  int dof_count = 0;
  int cell_locals = 0;   // scalar basis functions per cell; 0 for facet/global families
  int facet_locals = 0;  // scalar DOFs per facet; FacetTrace only
  std::vector<Eigen::Vector2d> dof_coordinates;

  int cell_dof(int cell, int local, int comp) const;
  int facet_dof(int facet, int local, int comp) const;
};

// Deterministic DOF numbering: entity index (nodes, then facet midpoints for
// continuous degree 2), each scalar entity expanded by value_dim components.
// Supported pairs: LagrangeContinuous 1-2, LagrangeDiscontinuous 0-2,
// FacetTrace 1-2, GlobalScalar 0.
FunctionSpace build_space(const Mesh& mesh, Family family, int degree, int value_dim);

// Assembled sparse row: (global DOF, coefficient) pairs.
using LinearRow = std::vector<std::pair<int, double>>;

// Barycentric coordinates in `cell` of the point at parameter s along the
// facet (s = 0 at facet.nodes[0]); exact, via local-vertex matching.
std::array<double, 3> facet_point_barycentric(const Mesh& mesh, int facet, int cell, double s);

// Symmetric-gradient rows (dxx, dyy, dxy) at a barycentric point of a cell;
// dxy carries the 1/2.  Vector spaces of degree >= 1 only.
std::array<LinearRow, 3> strain_operator(const FunctionSpace& space, int cell,
                                         const std::array<double, 3>& bary);

// Gradient rows (d/dx, d/dy) of a scalar space.
std::array<LinearRow, 2> gradient_operator(const FunctionSpace& space, int cell,
                                           const std::array<double, 3>& bary);

// Field value rows, one per component.
std::vector<LinearRow> value_operator(const FunctionSpace& space, int cell,
                                      const std::array<double, 3>& bary);

// Jump of a vector field across an interior facet at parameter s in [0, 1]
// (s = 0 at facet.nodes[0]): cells[1] trace minus cells[0] trace, expressed
// in the facet frame as (v.n, v.t).  Discontinuous spaces only.
std::array<LinearRow, 2> jump_operator(const FunctionSpace& space, int facet, double s);

// Trace of the cells[0]-side field at parameter s, in the facet frame.
std::array<LinearRow, 2> trace_operator(const FunctionSpace& space, int facet, double s);

// Work functional u -> sum_T f.u dx + sum_tagged t.u dS for a vector space.
// cell_force is empty, one uniform value, or one value per cell.  Unknown
// traction tags are an error.
Eigen::VectorXd assemble_load_functional(const FunctionSpace& space,
                                         const std::vector<Eigen::Vector2d>& cell_force,
                                         const std::map<std::string, Eigen::Vector2d>& tractions);

// Same for a scalar space with scalar cell loads (plate pressure).
Eigen::VectorXd assemble_scalar_load(const FunctionSpace& space,
                                     const std::vector<double>& cell_force);

struct DirichletBC {
  std::string tag;
  std::vector<int> components;  // fixed components; empty = all
  std::vector<double> values;   // per components entry; empty = zeros
};

// DOF -> prescribed value for every DOF supported on a tagged boundary facet
// (degree-2 edge DOFs included).  Conflicting prescriptions are an error.
std::map<int, double> apply_dirichlet(const FunctionSpace& space,
                                      const std::vector<DirichletBC>& bcs);

// Elimination bookkeeping: full DOF -> reduced column (or -1 when fixed).
struct DofReduction {
  std::vector<int> reduced;
  std::vector<double> fixed_values;  // full length, zero on active DOFs
  int active_count = 0;
};
DofReduction make_reduction(int dof_count, const std::map<int, double>& fixed);

}  // namespace lakit
