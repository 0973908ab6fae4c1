#include "lakit/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lakit {

namespace {

// b.y share of one row.  Range rows attribute to the side the dual pushes
// on (positive duals belong to lower bounds in this row convention).
double bound_times_dual(double lo, double hi, double y) {
  const double b = y >= 0.0 ? lo : hi;
  return std::isfinite(b) ? b * y : 0.0;
}

}  // namespace

DissipationMap dissipation_map(const BuiltProgram& built, const Solution& sol) {
  if (sol.status != SolveStatus::Optimal)
    throw std::invalid_argument("dissipation_map: needs an optimal solution");
  if (built.mesh == nullptr)
    throw std::invalid_argument("dissipation_map: program has no mesh");
  const Mesh& mesh = *built.mesh;

  DissipationMap dm;
  dm.cell.assign(mesh.num_cells(), 0.0);
  dm.facet.assign(mesh.num_facets(), 0.0);

  if (!built.primal_terms.empty()) {
    const std::vector<double>& c = built.program.objective();
    for (const auto& t : built.primal_terms) {
      const int base = built.program.block(t.block).offset + t.offset;
      double v = 0.0;
      for (int j = 0; j < t.len; ++j) v += c[base + j] * sol.x[base + j];
      if (t.facet)
        dm.facet[t.entity] += v;
      else
        dm.cell[t.entity] += v;
    }
    for (int f = 0; f < mesh.num_facets(); ++f) {
      const double v = dm.facet[f];
      if (v == 0.0) continue;
      const Facet& fa = mesh.facets[f];
      if (fa.on_boundary()) {
        dm.cell[fa.cells[0]] += v;
      } else {
        dm.cell[fa.cells[0]] += 0.5 * v;
        dm.cell[fa.cells[1]] += 0.5 * v;
      }
    }
  } else {
    // Equilibrium formulations: the strength rows of a cell carry exactly
    // that cell's share of the dual objective, which totals the load
    // factor.  Tiny negative shares are numerical and clamp to zero.
    for (const auto& t : built.dual_terms) {
      double v = 0.0;
      for (int r : t.rows)
        v -= bound_times_dual(built.program.row_lo(r), built.program.row_hi(r), sol.row_dual[r]);
      dm.cell[t.cell] += v;
    }
    for (double& v : dm.cell) v = std::max(v, 0.0);
  }

  dm.total = std::accumulate(dm.cell.begin(), dm.cell.end(), 0.0);
  return dm;
}

std::vector<int> mark_cells(const DissipationMap& dmap, double eta,
                            std::vector<std::string>* warnings) {
  if (!(eta > 0.0 && eta <= 1.0))
    throw std::invalid_argument("mark_cells: eta must lie in (0, 1]");
  if (dmap.total <= 0.0) {
    if (warnings) warnings->push_back("mark_cells: zero total dissipation, nothing marked");
    return {};
  }
  std::vector<int> order(dmap.cell.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (dmap.cell[a] != dmap.cell[b]) return dmap.cell[a] > dmap.cell[b];
    return a < b;
  });
  std::vector<int> marked;
  double cum = 0.0;
  const double target = eta * dmap.total;
  for (int c : order) {
    if (dmap.cell[c] <= 0.0) break;
    marked.push_back(c);
    cum += dmap.cell[c];
    if (cum >= target) break;
  }
  std::sort(marked.begin(), marked.end());
  return marked;
}

std::vector<AdaptStep> adapt_loop(const Mesh& mesh0, const BuilderFn& builder, int steps,
                                  double eta, const SolverSettings& settings,
                                  std::vector<std::string>* warnings) {
  if (steps < 1) throw std::invalid_argument("adapt_loop: steps must be >= 1");

  std::vector<AdaptStep> out;
  Mesh mesh = mesh0;
  for (int s = 0; s < steps; ++s) {
    AdaptStep rec;
    rec.step = s;
    rec.cells = mesh.num_cells();
    rec.mesh = mesh;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const BuiltProgram bp = builder(mesh);
      rec.dofs = bp.program.num_vars();
      const Solution sol = solve_built(bp, settings);
      rec.status = sol.status;
      rec.load_factor = sol.load_factor;
      if (sol.status == SolveStatus::Optimal) {
        rec.dmap = dissipation_map(bp, sol);
        rec.dissipation_total = rec.dmap.total;
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("adapt step " + std::to_string(s) + ": " + e.what());
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (rec.status != SolveStatus::Optimal) {
      out.push_back(std::move(rec));
      if (warnings)
        warnings->push_back("adapt step " + std::to_string(s) + ": solver returned " +
                            status_name(rec.status) + ", stopping");
      break;
    }

    const std::vector<int> marks = mark_cells(rec.dmap, eta, warnings);
    rec.marked = static_cast<int>(marks.size());
    const bool settled =
        s > 0 && std::abs(rec.load_factor - out.back().load_factor) <=
                     1e-4 * std::max(1.0, std::abs(out.back().load_factor));
    out.push_back(std::move(rec));
    if (marks.empty() || settled) break;

    std::vector<bool> flags(mesh.num_cells(), false);
    for (int c : marks) flags[c] = true;
    mesh = refine_marked(mesh, flags);
  }
  return out;
}

}  // namespace lakit
