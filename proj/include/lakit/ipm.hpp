#pragma once

#include <Eigen/SparseCore>
#include <string>
#include <utility>
#include <vector>

#include "lakit/program.hpp"

namespace lakit {

// Equality-standard conic form  min c.x  s.t.  A x = b,  x in K.
// K leads with one Free block covering all unconstrained entries.
struct StandardForm {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  ConeProduct cones;
  std::vector<std::string> warnings;  // e.g. dropped vacuous rows
};

// Column/row correspondence between a ConicProgram and its standard form.
struct StandardIndex {
  std::vector<int> std_of_var;            // program col -> standard col
  std::vector<int> var_of_std;            // standard col -> program col, -1 for slacks
  std::vector<std::vector<int>> std_rows; // program row -> standard rows (0..2)
};

// Range rows become equalities: one nonneg slack per one-sided bound, two
// for a two-sided finite range; rows with both bounds infinite are dropped.
std::pair<StandardForm, StandardIndex> to_standard_form(const ConicProgram& prog);

enum class SolveStatus {
  Optimal,
  PrimalInfeasible,
  DualInfeasible,
  MaxIterations,
  NumericalFailure,
};

const char* status_name(SolveStatus status);

struct SolverSettings {
  double tol_gap = 1e-8;
  double tol_feas = 1e-8;
  int max_iterations = 100;
  double static_regularization = 1e-9;
  double step_fraction = 0.99;  // fraction of the distance to the boundary
  bool verbose = false;
};

struct IterationRecord {
  int iter = 0;
  double mu = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  double step = 0.0;
  double sigma = 0.0;
};

struct SolverResult {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x, y, s;
  double objective = 0.0;        // c.x at the returned point
  double dual_objective = 0.0;   // b.y
  double primal_residual = 0.0;  // ||Ax-b|| / (1+||b||)
  double dual_residual = 0.0;    // ||A'y+s-c|| / (1+||c||)
  double gap = 0.0;              // |c.x-b.y| / (1+|c.x|)
  int iterations = 0;
  std::vector<IterationRecord> log;
  // PrimalInfeasible: y,s scaled so b.y = 1 and A'y+s ~ 0, s in K*.
  // DualInfeasible:   x scaled so c.x = -1 and Ax ~ 0, x in K.
};

// Residual triple (primal, dual, gap) at an arbitrary point, with the same
// normalizations the convergence test uses.
struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};
Residuals residuals(const StandardForm& sf, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& s);

// Fixed-width text rendering of an iteration log; identical logs give
// identical strings, which is what the determinism checks compare.
std::string format_log(const std::vector<IterationRecord>& log);

// Primal-dual Mehrotra predictor-corrector with Nesterov-Todd scalings.
// Deterministic: identical inputs produce identical iterates and logs.
SolverResult solve(const StandardForm& sf, const SolverSettings& settings);

// Solution mapped back to program numbering: slack columns dropped, each
// program row's dual the sum of its standard-row duals.
struct ProgramSolution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x;
  Eigen::VectorXd row_dual;
  double objective = 0.0;
  double dual_objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::vector<IterationRecord> log;
};

ProgramSolution solve_program(const ConicProgram& prog, const SolverSettings& settings);

}  // namespace lakit
