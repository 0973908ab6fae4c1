#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lakit/formulations.hpp"

namespace lakit {

// Where the optimum spends its dissipation.  cell[] is what marking ranks:
// interior quadrature contributions plus each facet share split evenly
// between its neighbors (a boundary facet feeds its only cell).  facet[]
// keeps the raw per-facet values for reporting.
struct DissipationMap {
  std::vector<double> cell;
  std::vector<double> facet;
  double total = 0.0;
};

// Needs an optimal solution; bound programs charge the objective slices of
// the auxiliary variables, equilibrium programs charge the dual
// decomposition of the strength constraints.
DissipationMap dissipation_map(const BuiltProgram& built, const Solution& sol);

// Ascending cell ids of the minimal descending-contribution prefix whose
// sum reaches eta * total.  Ties break toward the lower index; a zero map
// marks nothing and leaves a warning.
std::vector<int> mark_cells(const DissipationMap& dmap, double eta,
                            std::vector<std::string>* warnings = nullptr);

struct AdaptStep {
  int step = 0;
  int cells = 0;
  int dofs = 0;
  double load_factor = 0.0;
  double dissipation_total = 0.0;
  double seconds = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  int marked = 0;
  Mesh mesh;  // the mesh this step solved on
  DissipationMap dmap;
};

using BuilderFn = std::function<BuiltProgram(const Mesh&)>;

// steps rounds of solve -> map -> mark -> refine.  Stops early when the
// solver fails (partial records kept), the mark comes back empty, or the
// load factor moves less than 1e-4 relative between consecutive solves.
std::vector<AdaptStep> adapt_loop(const Mesh& mesh0, const BuilderFn& builder, int steps,
                                  double eta, const SolverSettings& settings = {},
                                  std::vector<std::string>* warnings = nullptr);

}  // namespace lakit
