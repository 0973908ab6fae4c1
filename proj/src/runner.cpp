#include "lakit/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lakit/cbf.hpp"
#include "lakit/criteria.hpp"
#include "lakit/vtk.hpp"

namespace lakit {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

bool wants(const ProblemConfig& cfg, const char* format) {
  for (const auto& f : cfg.output.formats)
    if (f == format) return true;
  return false;
}

// Collects artifacts as they are produced so a MANIFEST can report what a
// failed run managed to flush.
struct Manifest {
  fs::path dir;
  std::vector<std::string> files;
  std::vector<std::string> notes;

  explicit Manifest(const std::string& directory) : dir(directory) {
    fs::create_directories(dir);
  }
  fs::path path(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
  void finish(bool complete, const std::string& status) {
    std::ofstream out(dir / "MANIFEST", std::ios::binary);
    out << "complete = " << (complete ? "true" : "false") << "\n";
    out << "status = " << status << "\n";
    out << "seeds = none\n";
    for (const auto& n : notes) out << "note = " << n << "\n";
    for (const auto& f : files) out << "file = " << f << "\n";
  }
};

LoadingSpec loading_of(const ProblemConfig& cfg) {
  LoadingSpec l;
  l.body_force = cfg.body_force;
  l.tractions = cfg.tractions;
  l.fixed_body_force = cfg.fixed_body_force;
  l.fixed_tractions = cfg.fixed_tractions;
  return l;
}

std::vector<DirichletBC> velocity_bcs(const ProblemConfig& cfg) {
  std::vector<DirichletBC> out;
  for (const auto& bc : cfg.bcs) {
    std::istringstream is(bc.value);
    std::string which;
    is >> which;
    DirichletBC d;
    d.tag = bc.tag;
    if (which == "x")
      d.components = {0};
    else if (which == "y")
      d.components = {1};
    else if (which != "both")
      throw std::invalid_argument("bc " + bc.tag + ": expected x, y or both, got '" + bc.value +
                                  "'");
    double v;
    while (is >> v) d.values.push_back(v);
    const size_t expect = d.components.empty() ? 2 : 1;
    if (!d.values.empty() && d.values.size() != expect)
      throw std::invalid_argument("bc " + bc.tag + ": expected " + std::to_string(expect) +
                                  " prescribed values");
    out.push_back(std::move(d));
  }
  return out;
}

double wall_seconds(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int threads_cap() {
  const char* env = std::getenv("LAKIT_THREADS");
  if (env == nullptr) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

void append_disc_field(std::vector<VtkField>& cf, const Mesh& mesh, const std::string& name,
                       int degree, int vd, const Eigen::VectorXd& v) {
  const int locals = degree == 0 ? 1 : (degree == 1 ? 3 : 6);
  const char* suffix3[3] = {"_xx", "_yy", "_xy"};
  const int narrays = vd <= 2 ? 1 : vd;
  for (int a = 0; a < narrays; ++a) {
    VtkField f;
    f.name = narrays == 1 ? name : name + suffix3[a];
    f.components = vd <= 2 ? vd : 1;
    f.values.reserve(mesh.num_cells() * f.components);
    for (int c = 0; c < mesh.num_cells(); ++c)
      for (int comp = 0; comp < f.components; ++comp) {
        const int k = narrays == 1 ? comp : a;
        double mean = 0.0;
        for (int j = 0; j < locals; ++j) mean += v[(c * locals + j) * vd + k];
        f.values.push_back(mean / locals);
      }
    cf.push_back(std::move(f));
  }
}

void collect_vtk_fields(const BuiltProgram& bp, const Solution& sol, std::vector<VtkField>& pf,
                        std::vector<VtkField>& cf) {
  const Mesh& mesh = *bp.mesh;
  for (const auto& fd : bp.fields) {
    const auto it = sol.fields.find(fd.name);
    if (it == sol.fields.end()) continue;
    const Eigen::VectorXd& v = it->second;
    if (fd.family == Family::LagrangeContinuous && fd.value_dim <= 2) {
      VtkField f{fd.name, fd.value_dim, {}};
      f.values.assign(v.data(), v.data() + mesh.num_nodes() * fd.value_dim);
      pf.push_back(std::move(f));
    } else if (fd.family == Family::LagrangeDiscontinuous) {
      append_disc_field(cf, mesh, fd.name, fd.degree, fd.value_dim, v);
    }
  }
  const auto pv = sol.fields.find("pseudo_velocity");
  if (pv != sol.fields.end()) {
    VtkField f{"pseudo_velocity", 2, {}};
    f.values.assign(pv->second.data(), pv->second.data() + 2 * mesh.num_nodes());
    pf.push_back(std::move(f));
  }
}

void write_summary(std::ofstream& out, const ProblemConfig& cfg, const Mesh& mesh,
                   const BuiltProgram& bp, const Solution& sol, double seconds) {
  out << "formulation = " << cfg.formulation << "\n";
  out << "criterion = " << cfg.criterion.name << "\n";
  out << "cells = " << mesh.num_cells() << "\n";
  out << "nodes = " << mesh.num_nodes() << "\n";
  out << "dofs = " << bp.program.num_vars() << "\n";
  out << "rows = " << bp.program.num_rows() << "\n";
  out << "status = " << status_name(sol.status) << "\n";
  out << "lambda = " << fmt(sol.load_factor) << "\n";
  out << "objective = " << fmt(sol.objective) << "\n";
  out << "iterations = " << sol.iterations << "\n";
  out << "primal_residual = " << fmt(sol.primal_residual) << "\n";
  out << "dual_residual = " << fmt(sol.dual_residual) << "\n";
  out << "gap = " << fmt(sol.gap) << "\n";
  out << "seconds = " << fmt(seconds) << "\n";
  const auto ms = sol.fields.find("macro_strain");
  if (ms != sol.fields.end()) {
    out << "macro_strain_xx = " << fmt(ms->second[0]) << "\n";
    out << "macro_strain_yy = " << fmt(ms->second[1]) << "\n";
    out << "macro_strain_xy = " << fmt(ms->second[2]) << "\n";
  }
}

void export_run_artifacts(Manifest& man, const ProblemConfig& cfg, const Mesh& mesh,
                          const BuiltProgram& bp, const Solution& sol) {
  if (wants(cfg, "vtk")) {
    std::vector<VtkField> pf, cf;
    collect_vtk_fields(bp, sol, pf, cf);
    if (sol.status == SolveStatus::Optimal &&
        (!bp.primal_terms.empty() || !bp.dual_terms.empty())) {
      const DissipationMap dm = dissipation_map(bp, sol);
      VtkField dens{"dissipation_density", 1, {}};
      dens.values.reserve(mesh.num_cells());
      for (int c = 0; c < mesh.num_cells(); ++c)
        dens.values.push_back(dm.cell[c] / mesh.cell_area(c));
      cf.push_back(std::move(dens));
    }
    export_vtk(man.path("fields.vtk").string(), mesh, pf, cf);
  }
  if (wants(cfg, "log")) {
    std::ofstream out(man.path("solve.log"), std::ios::binary);
    out << format_log(sol.log);
  }
  if (wants(cfg, "cbf")) {
    const auto [sf, index] = to_standard_form(bp.program);
    (void)index;
    export_cbf(man.path("program.cbf").string(), sf);
  }
}

}  // namespace

int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return 0;
    case SolveStatus::PrimalInfeasible: return 2;
    case SolveStatus::DualInfeasible: return 3;
    case SolveStatus::MaxIterations: return 4;
    case SolveStatus::NumericalFailure: return 5;
  }
  return 5;
}

Mesh make_mesh(const ProblemConfig& cfg) {
  if (!cfg.mesh.file.empty()) return load_mesh(cfg.mesh.file);
  return generate_rectangle(cfg.mesh.width, cfg.mesh.height, cfg.mesh.nx, cfg.mesh.ny,
                            {"left", "right", "bottom", "top"});
}

BuiltProgram build_problem(const ProblemConfig& cfg, const Mesh& mesh) {
  const Criterion crit = make_criterion(cfg.criterion.name, cfg.criterion.params);
  const LoadingSpec loading = loading_of(cfg);

  if (cfg.formulation == "ub" || cfg.formulation == "ub-disc")
    return build_kinematic_ub(mesh, cfg.degree, crit, loading, velocity_bcs(cfg),
                              cfg.formulation == "ub-disc");
  if (cfg.formulation == "lb") {
    if (!cfg.bcs.empty())
      throw std::invalid_argument(
          "lb takes no [bc] entries; a boundary is supported exactly when it has no traction");
    return build_static_lb(mesh, crit, loading);
  }
  if (cfg.formulation == "mixed")
    return build_mixed(mesh, cfg.degree, cfg.sigma_degree < 0 ? cfg.degree - 1 : cfg.sigma_degree,
                       crit, loading, velocity_bcs(cfg));
  if (cfg.formulation == "homog-kin") {
    if (!cfg.bcs.empty())
      throw std::invalid_argument("homog-kin takes no [bc] entries; the cell is periodic");
    return build_homogenization_kin(mesh, crit, cfg.sigma0, cfg.degree);
  }
  if (cfg.formulation == "thick-plate") {
    std::vector<std::string> clamped, supported;
    for (const auto& bc : cfg.bcs) {
      if (bc.value == "clamped")
        clamped.push_back(bc.tag);
      else if (bc.value == "supported")
        supported.push_back(bc.tag);
      else
        throw std::invalid_argument("bc " + bc.tag +
                                    ": thick-plate expects clamped or supported, got '" +
                                    bc.value + "'");
    }
    return build_thick_plate_kin(mesh, crit, cfg.pressure, clamped, supported);
  }
  throw std::invalid_argument("unknown formulation " + cfg.formulation);
}

int run_solve(const ProblemConfig& cfg) {
  Manifest man(cfg.output.directory);
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const Mesh mesh = make_mesh(cfg);
    const BuiltProgram bp = build_problem(cfg, mesh);
    const Solution sol = solve_built(bp, cfg.solver);
    const double secs = wall_seconds(t0);

    {
      std::ofstream out(man.path("summary.txt"), std::ios::binary);
      write_summary(out, cfg, mesh, bp, sol, secs);
    }
    if (wants(cfg, "csv")) {
      std::ofstream out(man.path("convergence.csv"), std::ios::binary);
      out << "level,cells,dofs,lambda,status,seconds\n";
      out << 0 << "," << mesh.num_cells() << "," << bp.program.num_vars() << ","
          << fmt(sol.load_factor) << "," << status_name(sol.status) << "," << fmt(secs) << "\n";
    }
    export_run_artifacts(man, cfg, mesh, bp, sol);
    man.finish(true, status_name(sol.status));
    return exit_code_for(sol.status);
  } catch (const std::exception& e) {
    man.notes.push_back(e.what());
    man.finish(false, "error");
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_convergence(ProblemConfig cfg, int levels) {
  if (levels < 1) levels = cfg.refinement.steps > 0 ? cfg.refinement.steps : 3;
  Manifest man(cfg.output.directory);
  try {
    Mesh mesh = make_mesh(cfg);
    std::ofstream csv(man.path("convergence.csv"), std::ios::binary);
    csv << "level,cells,dofs,lambda,status,seconds\n";

    SolveStatus last_status = SolveStatus::NumericalFailure;
    for (int level = 0; level < levels; ++level) {
      const auto t0 = std::chrono::steady_clock::now();
      const BuiltProgram bp = build_problem(cfg, mesh);
      const Solution sol = solve_built(bp, cfg.solver);
      const double secs = wall_seconds(t0);
      last_status = sol.status;
      csv << level << "," << mesh.num_cells() << "," << bp.program.num_vars() << ","
          << fmt(sol.load_factor) << "," << status_name(sol.status) << "," << fmt(secs) << "\n";

      if (level + 1 == levels || sol.status != SolveStatus::Optimal) {
        std::ofstream out(man.path("summary.txt"), std::ios::binary);
        write_summary(out, cfg, mesh, bp, sol, secs);
        export_run_artifacts(man, cfg, mesh, bp, sol);
        if (sol.status != SolveStatus::Optimal && level + 1 < levels)
          man.notes.push_back("stopped at level " + std::to_string(level) + " on " +
                              status_name(sol.status));
        break;
      }
      mesh = refine_marked(mesh, std::vector<bool>(mesh.num_cells(), true));
    }
    man.finish(true, status_name(last_status));
    return exit_code_for(last_status);
  } catch (const std::exception& e) {
    man.notes.push_back(e.what());
    man.finish(false, "error");
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_adapt(ProblemConfig cfg) {
  if (cfg.refinement.steps < 1) cfg.refinement.steps = 4;
  Manifest man(cfg.output.directory);
  try {
    const Mesh mesh0 = make_mesh(cfg);
    std::vector<std::string> warnings;
    const auto records = adapt_loop(
        mesh0, [&](const Mesh& m) { return build_problem(cfg, m); }, cfg.refinement.steps,
        cfg.refinement.eta, cfg.solver, &warnings);

    {
      std::ofstream csv(man.path("adapt.csv"), std::ios::binary);
      csv << "step,cells,dofs,lambda,dissipation_total,seconds\n";
      for (const auto& r : records)
        csv << r.step << "," << r.cells << "," << r.dofs << "," << fmt(r.load_factor) << ","
            << fmt(r.dissipation_total) << "," << fmt(r.seconds) << "\n";
    }
    const AdaptStep& last = records.back();
    {
      std::ofstream out(man.path("summary.txt"), std::ios::binary);
      out << "formulation = " << cfg.formulation << "\n";
      out << "criterion = " << cfg.criterion.name << "\n";
      out << "steps = " << records.size() << "\n";
      out << "cells = " << last.cells << "\n";
      out << "dofs = " << last.dofs << "\n";
      out << "status = " << status_name(last.status) << "\n";
      out << "lambda = " << fmt(last.load_factor) << "\n";
      out << "dissipation_total = " << fmt(last.dissipation_total) << "\n";
    }
    if (wants(cfg, "vtk") && last.status == SolveStatus::Optimal) {
      VtkField dens{"dissipation_density", 1, {}};
      dens.values.reserve(last.mesh.num_cells());
      for (int c = 0; c < last.mesh.num_cells(); ++c)
        dens.values.push_back(last.dmap.cell[c] / last.mesh.cell_area(c));
      export_vtk(man.path("fields.vtk").string(), last.mesh, {}, {dens});
    }
    for (const auto& w : warnings) man.notes.push_back(w);
    man.finish(true, status_name(last.status));
    return exit_code_for(last.status);
  } catch (const std::exception& e) {
    man.notes.push_back(e.what());
    man.finish(false, "error");
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_sweep(const ProblemConfig& cfg, int directions) {
  Manifest man(cfg.output.directory);
  try {
    if (cfg.formulation != "homog-kin")
      throw std::invalid_argument("sweep needs formulation = homog-kin");
    if (directions < 3) throw std::invalid_argument("sweep needs at least 3 directions");

    const Mesh mesh = make_mesh(cfg);
    struct Row {
      double psi = 0, lambda = 0;
      Eigen::Vector3d sigma0 = Eigen::Vector3d::Zero();
      SolveStatus status = SolveStatus::NumericalFailure;
    };
    std::vector<Row> rows(directions);

    const int nthreads = std::min(threads_cap(), directions);
    auto worker = [&](int first) {
      for (int i = first; i < directions; i += nthreads) {
        Row& r = rows[i];
        r.psi = 2.0 * M_PI * i / directions;
        r.sigma0 = {std::cos(r.psi), -std::cos(r.psi), std::sin(r.psi)};
        ProblemConfig local = cfg;
        local.sigma0 = r.sigma0;
        const BuiltProgram bp = build_problem(local, mesh);
        const Solution sol = solve_built(bp, cfg.solver);
        r.lambda = sol.load_factor;
        r.status = sol.status;
      }
    };
    if (nthreads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
      for (auto& th : pool) th.join();
    }

    std::ofstream csv(man.path("polygon.csv"), std::ios::binary);
    csv << "index,psi,sxx,syy,sxy,lambda,x,y,status\n";
    SolveStatus worst = SolveStatus::Optimal;
    for (int i = 0; i < directions; ++i) {
      const Row& r = rows[i];
      csv << i << "," << fmt(r.psi) << "," << fmt(r.sigma0[0]) << "," << fmt(r.sigma0[1]) << ","
          << fmt(r.sigma0[2]) << "," << fmt(r.lambda) << "," << fmt(r.lambda * std::cos(r.psi))
          << "," << fmt(r.lambda * std::sin(r.psi)) << "," << status_name(r.status) << "\n";
      if (exit_code_for(r.status) > exit_code_for(worst)) worst = r.status;
    }
    man.finish(true, status_name(worst));
    return exit_code_for(worst);
  } catch (const std::exception& e) {
    man.notes.push_back(e.what());
    man.finish(false, "error");
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

int run_export_cbf(const ProblemConfig& cfg) {
  Manifest man(cfg.output.directory);
  try {
    const Mesh mesh = make_mesh(cfg);
    const BuiltProgram bp = build_problem(cfg, mesh);
    const auto [sf, index] = to_standard_form(bp.program);
    (void)index;
    export_cbf(man.path("program.cbf").string(), sf);
    man.finish(true, "Exported");
    return 0;
  } catch (const std::exception& e) {
    man.notes.push_back(e.what());
    man.finish(false, "error");
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace lakit
