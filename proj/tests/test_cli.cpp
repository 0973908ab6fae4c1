#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "lakit/adapt.hpp"
#include "lakit/config.hpp"
#include "lakit/runner.hpp"
#include "lakit/vtk.hpp"

using namespace lakit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path dir;
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    dir = fs::temp_directory_path() / ("lakit_cli_" + std::to_string(rng()));
    fs::create_directories(dir);
  }
  ~TempDir() { fs::remove_all(dir); }
  std::string str() const { return dir.string(); }
};

// Vertical cut under self-weight, small enough to solve in milliseconds.
std::string cut_config(const std::string& outdir, const std::string& extra = "") {
  return "[problem]\n"
         "formulation = ub\n"
         "degree = 2\n"
         "[mesh]\n"
         "width = 1\n"
         "height = 1.5\n"
         "nx = 2\n"
         "ny = 2\n"
         "[criterion]\n"
         "name = MohrCoulomb2D\n"
         "c = 1\n"
         "phi_deg = 30\n"
         "[loading]\n"
         "body_force = 0 -1\n"
         "[bc]\n"
         "bottom = both\n" +
         extra +
         "[output]\n"
         "directory = " +
         outdir + "\n";
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("config defaults and normalized round trip") {
  const ProblemConfig cfg = parse_config_text(
      "[criterion]\nname = Tresca2D\nk = 2\n"
      "[bc]\nbottom = both\n"
      "[loading]\nbody_force = 0 -1\n");
  CHECK(cfg.formulation == "ub");
  CHECK(cfg.degree == 2);
  CHECK(cfg.mesh.file.empty());
  CHECK(cfg.mesh.nx == 1);
  CHECK(cfg.criterion.name == "Tresca2D");
  CHECK(cfg.criterion.params.at("k") == 2.0);
  CHECK(cfg.solver.tol_gap == 1e-8);
  CHECK(cfg.refinement.mode == "none");
  CHECK(cfg.output.directory == "out");
  REQUIRE(cfg.bcs.size() == 1);
  CHECK(cfg.bcs[0].tag == "bottom");

  // Emission is normalized: emit(parse(emit(c))) == emit(c).
  const std::string once = emit_config(cfg);
  const std::string twice = emit_config(parse_config_text(once));
  CHECK(once == twice);
}

TEST_CASE("config round trip keeps every field") {
  ProblemConfig cfg;
  cfg.formulation = "mixed";
  cfg.degree = 2;
  cfg.sigma_degree = 1;
  cfg.mesh.width = 5.0;
  cfg.mesh.height = 2.0;
  cfg.mesh.nx = 10;
  cfg.mesh.ny = 4;
  cfg.criterion.name = "vonMises2D";
  cfg.criterion.params["k"] = 0.577;
  cfg.body_force = {Eigen::Vector2d(0.0, -9.81)};
  cfg.tractions["top"] = Eigen::Vector2d(0.25, -1.5);
  cfg.fixed_tractions["right"] = Eigen::Vector2d(0.0, 0.125);
  cfg.bcs = {{"bottom", "both"}, {"left", "x"}};
  cfg.solver.tol_gap = 1e-9;
  cfg.solver.max_iterations = 50;
  cfg.refinement.mode = "adaptive";
  cfg.refinement.steps = 3;
  cfg.refinement.eta = 0.4;
  cfg.output.directory = "runs/demo";
  cfg.output.formats = {"vtk", "cbf"};

  const ProblemConfig back = parse_config_text(emit_config(cfg));
  CHECK(back.formulation == cfg.formulation);
  CHECK(back.sigma_degree == 1);
  CHECK(back.mesh.nx == 10);
  CHECK(back.criterion.params.at("k") == 0.577);
  CHECK(back.body_force.at(0).y() == -9.81);
  CHECK(back.tractions.at("top").x() == 0.25);
  CHECK(back.fixed_tractions.at("right").y() == 0.125);
  CHECK(back.bcs.size() == 2);
  CHECK(back.solver.tol_gap == 1e-9);
  CHECK(back.solver.max_iterations == 50);
  CHECK(back.refinement.eta == 0.4);
  CHECK(back.output.formats == cfg.output.formats);
  CHECK(emit_config(back) == emit_config(cfg));
}

TEST_CASE("config rejections carry the line number") {
  auto throws_with = [](const std::string& text, const std::string& needle) {
    try {
      parse_config_text(text, "test.ini");
      FAIL_CHECK("expected parse failure for: " << needle);
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  throws_with("[nope]\n", "unknown section");
  throws_with("[problem]\nbogus = 1\n", "test.ini:2");
  throws_with("[problem]\nbogus = 1\n", "unknown key 'bogus'");
  throws_with("[problem]\ndegree = two\n", "not an integer");
  throws_with("key = 1\n", "outside any section");
  throws_with("[solver]\ntol_gap\n", "expected key = value");
  throws_with("[problem]\nformulation = warp\n", "unknown formulation");
  throws_with("[problem]\nformulation = mixed\ndegree = 2\nsigma_degree = 0\n",
              "allowed pairs are (1,0) and (2,1)");
  throws_with("[mesh]\nfile = m.txt\nnx = 2\n", "either file or generator");
  throws_with("[refinement]\nmode = sometimes\n", "none, uniform or adaptive");
  throws_with("[refinement]\nmode = adaptive\n", "steps must be >= 1");
  throws_with("[refinement]\nmode = adaptive\nsteps = 2\neta = 0\n", "eta");
  throws_with("[output]\nformats = vtk pdf\n", "unknown output format");
  throws_with("[criterion]\nname = Banana\n", "unknown criterion");
}

TEST_CASE("solve run writes its artifact set") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(cut_config(td.str()));
  cfg.output.formats = {"vtk", "csv", "log", "cbf"};
  const int code = run_solve(cfg);
  CHECK(code == 0);

  for (const char* name :
       {"summary.txt", "convergence.csv", "fields.vtk", "solve.log", "program.cbf", "MANIFEST"})
    CHECK(fs::exists(td.dir / name));

  const std::string summary = slurp(td.dir / "summary.txt");
  CHECK(summary.find("status = Optimal") != std::string::npos);
  CHECK(summary.find("lambda = ") != std::string::npos);
  CHECK(summary.find("formulation = ub") != std::string::npos);

  const std::string manifest = slurp(td.dir / "MANIFEST");
  CHECK(manifest.find("complete = true") != std::string::npos);
  CHECK(manifest.find("file = fields.vtk") != std::string::npos);

  const std::string csv = slurp(td.dir / "convergence.csv");
  CHECK(count_lines(csv) == 2);
  CHECK(csv.find("level,cells,dofs,lambda,status,seconds") == 0);

  CHECK(slurp(td.dir / "solve.log").find("iter") == 0);
  const std::string cbf = slurp(td.dir / "program.cbf");
  CHECK(cbf.find("VER") == 0);
  CHECK(cbf.find("OBJSENSE\nMIN") != std::string::npos);
  CHECK(cbf.find("VAR") != std::string::npos);
  CHECK(cbf.find("CON") != std::string::npos);

  // Deterministic pipeline: a second identical run reproduces the VTK bytes.
  const std::string vtk1 = slurp(td.dir / "fields.vtk");
  REQUIRE(run_solve(cfg) == 0);
  CHECK(slurp(td.dir / "fields.vtk") == vtk1);
}

TEST_CASE("vtk dissipation density sums back to the bound") {
  TempDir td;
  const ProblemConfig cfg = parse_config_text(cut_config(td.str()));
  REQUIRE(run_solve(cfg) == 0);

  const Mesh mesh = make_mesh(cfg);
  const BuiltProgram bp = build_problem(cfg, mesh);
  const Solution sol = solve_built(bp, cfg.solver);
  REQUIRE(sol.status == SolveStatus::Optimal);

  // Minimal legacy-VTK scan: POINTS / CELLS headers plus the density array.
  std::ifstream in(td.dir / "fields.vtk");
  REQUIRE(in.good());
  std::string tok;
  int points = -1, cells = -1;
  std::vector<double> density;
  while (in >> tok) {
    if (tok == "POINTS") in >> points;
    if (tok == "CELLS") in >> cells;
    if (tok == "dissipation_density") {
      in >> tok >> tok;  // "double 1"
      in >> tok >> tok;  // "LOOKUP_TABLE default"
      density.resize(mesh.num_cells());
      for (double& v : density) {
        const bool ok = static_cast<bool>(in >> v);
        REQUIRE(ok);
      }
    }
  }
  CHECK(points == mesh.num_nodes());
  CHECK(cells == mesh.num_cells());
  REQUIRE(static_cast<int>(density.size()) == mesh.num_cells());

  double total = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) total += density[c] * mesh.cell_area(c);
  const DissipationMap dm = dissipation_map(bp, sol);
  CHECK(total == doctest::Approx(dm.total).epsilon(1e-8));
  CHECK(total == doctest::Approx(sol.load_factor).epsilon(1e-6));
}

TEST_CASE("export_vtk validates array sizes") {
  const Mesh m = generate_rectangle(1.0, 1.0, 1, 1);
  TempDir td;
  VtkField bad{"broken", 1, {1.0, 2.0}};  // 4 cells, 2 values
  CHECK_THROWS_AS(export_vtk((td.dir / "x.vtk").string(), m, {}, {bad}),
                  std::invalid_argument);
  VtkField nodal{"ok", 2, std::vector<double>(2 * m.num_nodes(), 0.5)};
  export_vtk((td.dir / "ok.vtk").string(), m, {nodal}, {});
  CHECK(slurp(td.dir / "ok.vtk").find("# vtk DataFile Version 3.0") == 0);
}

TEST_CASE("failed runs exit through the config error path") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(cut_config(td.str()));
  cfg.criterion.params.clear();  // MohrCoulomb2D now lacks c and phi
  CHECK(run_solve(cfg) == 1);
  const std::string manifest = slurp(td.dir / "MANIFEST");
  CHECK(manifest.find("complete = false") != std::string::npos);
  CHECK(manifest.find("note = ") != std::string::npos);
}

TEST_CASE("unbounded static run maps to exit code 3") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(
      "[problem]\nformulation = lb\ndegree = 2\n"
      "[mesh]\nnx = 1\nny = 1\n"
      "[criterion]\nname = Tresca2D\nk = 1\n"
      "[loading]\ntraction.top = 0 0\n"
      "[output]\ndirectory = " +
      td.str() + "\n");
  CHECK(run_solve(cfg) == 3);
  CHECK(slurp(td.dir / "summary.txt").find("status = DualInfeasible") != std::string::npos);
}

TEST_CASE("convergence run reports one row per level") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(cut_config(td.str()));
  REQUIRE(run_convergence(cfg, 2) == 0);
  std::istringstream csv(slurp(td.dir / "convergence.csv"));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "level,cells,dofs,lambda,status,seconds");
  int prev_cells = 0;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    int level, cells;
    char comma;
    const bool ok = static_cast<bool>(ls >> level >> comma >> cells);
    REQUIRE(ok);
    CHECK(level == rows);
    CHECK(cells > prev_cells);
    prev_cells = cells;
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("adaptive run records its steps") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(cut_config(td.str(), "[refinement]\nmode = adaptive\nsteps = 2\neta = 0.6\n"));
  REQUIRE(run_adapt(cfg) == 0);
  const std::string csv = slurp(td.dir / "adapt.csv");
  CHECK(csv.find("step,cells,dofs,lambda,dissipation_total,seconds") == 0);
  CHECK(count_lines(csv) >= 2);  // header + at least the first solve
  CHECK(fs::exists(td.dir / "fields.vtk"));
  CHECK(slurp(td.dir / "summary.txt").find("lambda = ") != std::string::npos);
}

TEST_CASE("strength sweep traces a closed polygon") {
  TempDir td;
  ProblemConfig cfg = parse_config_text(
      "[problem]\nformulation = homog-kin\ndegree = 1\n"
      "[mesh]\nnx = 2\nny = 2\n"
      "[criterion]\nname = vonMises2D\nk = 1\n"
      "[output]\ndirectory = " +
      td.str() + "\n");
  REQUIRE(run_sweep(cfg, 4) == 0);
  std::istringstream csv(slurp(td.dir / "polygon.csv"));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "index,psi,sxx,syy,sxy,lambda,x,y,status");
  int rows = 0;
  while (std::getline(csv, line)) {
    // Deviatoric directions of a uniform von Mises cell all collapse at k.
    const auto lam_pos = line.find("Optimal");
    CHECK(lam_pos != std::string::npos);
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 9);
    CHECK(std::stod(fields[5]) == doctest::Approx(1.0).epsilon(1e-6));
    ++rows;
  }
  CHECK(rows == 4);
}
