#pragma once

#include <string>

#include "lakit/adapt.hpp"
#include "lakit/config.hpp"

namespace lakit {

// Process exit codes, total over solver statuses: Optimal 0, primal
// infeasible 2, dual infeasible 3, iteration limit 4, numerical failure 5.
// Code 1 is reserved for configuration and I/O errors.
int exit_code_for(SolveStatus status);

Mesh make_mesh(const ProblemConfig& cfg);
BuiltProgram build_problem(const ProblemConfig& cfg, const Mesh& mesh);

// Each entry point writes its artifacts under cfg.output.directory and
// returns the process exit code.
int run_solve(const ProblemConfig& cfg);
int run_adapt(ProblemConfig cfg);
int run_convergence(ProblemConfig cfg, int levels);
int run_sweep(const ProblemConfig& cfg, int directions);
int run_export_cbf(const ProblemConfig& cfg);

}  // namespace lakit
