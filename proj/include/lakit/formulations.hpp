#pragma once

#include "lakit/criteria.hpp"
#include "lakit/fem.hpp"
#include "lakit/ipm.hpp"
#include "lakit/mesh.hpp"
#include "lakit/program.hpp"

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

namespace lakit {

// Driving loads scale with the load factor; fixed loads do not.  Body
// forces are empty, one uniform value, or one value per cell.  The static
// builder rejects fixed loads; a free surface is a zero traction entry.
struct LoadingSpec {
  std::vector<Eigen::Vector2d> body_force;
  std::map<std::string, Eigen::Vector2d> tractions;
  std::vector<Eigen::Vector2d> fixed_body_force;
  std::map<std::string, Eigen::Vector2d> fixed_tractions;
};

enum class ProgramKind { KinematicUB, StaticLB, Mixed, HomogKin, ThickPlateKin };

// A lowered ConicProgram plus everything needed to read fields, bounds and
// dissipation back out of a solver run.
struct BuiltProgram {
  ConicProgram program;
  ProgramKind kind = ProgramKind::KinematicUB;
  const Mesh* mesh = nullptr;

  // Reported load factor = objective_sign * (c.x) + objective_offset.
  double objective_sign = 1.0;
  double objective_offset = 0.0;

  struct Field {
    std::string name;
    int block = -1;
    Family family = Family::LagrangeContinuous;
    int degree = 1;
    int value_dim = 1;
    DofReduction reduction;  // full DOF <-> block column
  };
  std::vector<Field> fields;

  // Kinematic-side dissipation: objective slices of an aux block, one per
  // quadrature instance.
  struct PrimalTerm {
    bool facet = false;
    int entity = -1;
    int block = -1;
    int offset = 0;
    int len = 0;
  };
  std::vector<PrimalTerm> primal_terms;

  // Static-side dissipation: criterion rows per cell; the dual decomposition
  // -sum(b.y) over an instance is its contribution to the total.
  struct DualTerm {
    int cell = -1;
    std::vector<int> rows;
  };
  std::vector<DualTerm> dual_terms;

  // Equilibrium rows (x, y) per cell; StaticLB only.  Duals are the P0
  // pseudo-velocity read by extract_fields.
  std::vector<std::array<int, 2>> cell_equilibrium_rows;

  // Mixed only: virtual-work row per velocity DOF (-1 where eliminated),
  // whose duals form the pseudo-velocity, normalized against this driving
  // functional.
  std::vector<int> velocity_dual_rows;
  int velocity_degree = 0;
  Eigen::VectorXd velocity_normalizer;
};

// Variational forms.  Preconditions are validated and violations throw
// std::invalid_argument.

// min sum w.pi(grad_s u) [+ jump terms] - fixed-load power, over velocity
// fields with unit driving power.  Support terms sit at the vertex-rule
// points of every cell.  Discontinuous runs add jump dissipation on interior
// facet endpoints; tags fully fixed by a DirichletBC then dissipate against
// the prescribed boundary velocity instead of eliminating trace DOFs, while
// partially fixed tags eliminate the constrained trace components.
BuiltProgram build_kinematic_ub(const Mesh& mesh, int space_deg, const Criterion& criterion,
                                const LoadingSpec& loading, const std::vector<DirichletBC>& bcs,
                                bool discontinuous = false);

// max lambda over P1-discontinuous stress fields satisfying cell equilibrium
// (area-weighted rows, duals are P0 pseudo-velocities), traction continuity
// at interior facet endpoints, boundary tractions sigma.n = lambda t on every
// tag present in loading.tractions (zero entries mark free surfaces; absent
// tags are supported edges), and the strength criterion at cell vertices.
BuiltProgram build_static_lb(const Mesh& mesh, const Criterion& criterion,
                             const LoadingSpec& loading);

// Weak saddle form: stress DOFs tested against every active velocity basis
// function, criterion at quadrature points.  (u_deg, sig_deg) is (1,0) with
// centroid quadrature (equals the P1 kinematic bound) or (2,1) with the
// vertex rule (keeps upper-bound status).
BuiltProgram build_mixed(const Mesh& mesh, int u_deg, int sig_deg, const Criterion& criterion,
                         const LoadingSpec& loading, const std::vector<DirichletBC>& bcs);

// Unit-cell kinematic bound on the macroscopic strength along Sigma0: the
// macroscopic strain D joins the periodic fluctuation as an unknown, with
// |A| Sigma0 : D = 1 as normalization.  Periodicity is enforced by DOF
// identification (slaves share the master column); one corner is pinned.
BuiltProgram build_homogenization_kin(const Mesh& mesh, const Criterion& criterion,
                                      const Eigen::Vector3d& Sigma0, int space_deg = 1);

// Thick-plate kinematic bound: continuous P2 deflection (fixed on clamped
// and supported tags), discontinuous P1 rotations with interior jump terms
// and boundary jump terms on clamped tags, vertex-rule strain points,
// normalization integral(pressure * w) = 1.
BuiltProgram build_thick_plate_kin(const Mesh& mesh, const Criterion& criterion, double pressure,
                                   const std::vector<std::string>& clamped_tags,
                                   const std::vector<std::string>& supported_tags = {});

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  double load_factor = 0.0;  // +-inf where the status implies an unbounded bound
  std::map<std::string, Eigen::VectorXd> fields;       // full-DOF vectors by field name
  std::map<std::string, Eigen::VectorXd> group_duals;  // program-row duals per group
  Eigen::VectorXd x;                                   // program-level primal
  Eigen::VectorXd row_dual;
  double objective = 0.0;
  double primal_residual = 0.0, dual_residual = 0.0, gap = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> log;
};

// Maps a raw solve back to named fields.  Static runs gain a continuous P1
// "pseudo_velocity" (nodal average of the equilibrium duals); mixed runs a
// "velocity" from the virtual-work duals, rescaled to unit driving power.
Solution extract_fields(const BuiltProgram& built, const ProgramSolution& raw);

Solution solve_built(const BuiltProgram& built, const SolverSettings& settings = {});

}  // namespace lakit
