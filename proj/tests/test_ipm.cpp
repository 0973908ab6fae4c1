#include <cmath>
#include <random>

#include "doctest.h"
#include "lakit/ipm.hpp"

using namespace lakit;

namespace {

const SolverSettings kSt{};

// Strictly feasible primal-dual pair by construction: pick interior x0 and
// s0, set b = A x0 and c = A' y0 + s0.  The instance is then solvable and
// the solver has no excuse.
struct RandomInstance {
  StandardForm sf;
  ConeProduct cones;
};

Eigen::VectorXd interior_point(const ConeProduct& cones, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::normal_distribution<double> g(0.0, 0.3);
  Eigen::VectorXd z(cones.total_dim());
  int at = 0;
  for (const auto& blk : cones.blocks) {
    switch (blk.kind) {
      case ConeKind::Free:
        for (int i = 0; i < blk.dim; ++i) z[at + i] = g(rng);
        break;
      case ConeKind::NonNeg:
        for (int i = 0; i < blk.dim; ++i) z[at + i] = u(rng);
        break;
      case ConeKind::Quad: {
        double nrm = 0.0;
        for (int i = 1; i < blk.dim; ++i) {
          z[at + i] = g(rng);
          nrm += z[at + i] * z[at + i];
        }
        z[at] = std::sqrt(nrm) + u(rng);
        break;
      }
      case ConeKind::RQuad: {
        double nrm = 0.0;
        for (int i = 2; i < blk.dim; ++i) {
          z[at + i] = g(rng);
          nrm += z[at + i] * z[at + i];
        }
        z[at + 1] = u(rng) + 0.5;
        z[at] = nrm / (2.0 * z[at + 1]) + u(rng);
        break;
      }
    }
    at += blk.dim;
  }
  return z;
}

RandomInstance random_instance(std::mt19937& rng) {
  RandomInstance inst;
  std::uniform_int_distribution<int> kind(0, 3), dim(2, 4);
  ConeProduct& K = inst.cones;
  K.append(ConeKind::Free, dim(rng));
  const int extra = 2 + kind(rng);
  for (int i = 0; i < extra; ++i) {
    switch (kind(rng)) {
      case 0: K.append(ConeKind::NonNeg, dim(rng)); break;
      case 1: K.append(ConeKind::Quad, 1 + dim(rng)); break;
      case 2: K.append(ConeKind::RQuad, 1 + dim(rng)); break;
      default: K.append(ConeKind::NonNeg, 1); break;
    }
  }
  const int n = K.total_dim();
  const int m = std::max(1, n / 2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  const Eigen::VectorXd x0 = interior_point(K, rng);
  const Eigen::VectorXd s0 = [&] {
    Eigen::VectorXd s = interior_point(K, rng);
    int at = 0;  // dual of the free block is {0}
    for (const auto& blk : K.blocks) {
      if (blk.kind == ConeKind::Free)
        for (int i = 0; i < blk.dim; ++i) s[at + i] = 0.0;
      at += blk.dim;
    }
    return s;
  }();
  Eigen::VectorXd y0(m);
  for (int i = 0; i < m; ++i) y0[i] = g(rng);

  inst.sf.c = A.transpose() * y0 + s0;
  inst.sf.A = A.sparseView();
  inst.sf.b = A * x0;
  inst.sf.cones = K;
  return inst;
}

}  // namespace

TEST_CASE("equality range pins a free variable") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::Free, 1);
  prog.add_objective(x, 0, 1.0);
  const int r = prog.add_row(1.0, 1.0, "pin");
  prog.add_coeff(r, x, 0, 1.0);

  const auto [sf, idx] = to_standard_form(prog);
  CHECK(sf.c.size() == 1);  // no slack for an equality
  CHECK(sf.b.size() == 1);
  CHECK(idx.std_rows[0].size() == 1);

  const ProgramSolution ps = solve_program(prog, kSt);
  CHECK(ps.status == SolveStatus::Optimal);
  CHECK(ps.x[0] == doctest::Approx(1.0));
}

TEST_CASE("one-sided upper bound gains one nonneg slack") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::Free, 1);
  prog.add_objective(x, 0, -1.0);  // push against the bound
  const int r = prog.add_row(-kInf, 3.0, "cap");
  prog.add_coeff(r, x, 0, 2.0);

  const auto [sf, idx] = to_standard_form(prog);
  CHECK(sf.c.size() == 2);
  REQUIRE(sf.cones.blocks.size() == 2);
  CHECK(sf.cones.blocks[1].kind == ConeKind::NonNeg);
  CHECK(idx.var_of_std[1] == -1);  // slack column is not a program variable

  const ProgramSolution ps = solve_program(prog, kSt);
  CHECK(ps.status == SolveStatus::Optimal);
  CHECK(ps.x[0] == doctest::Approx(1.5));
}

TEST_CASE("two-sided finite range spends two slacks") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::Free, 1);
  prog.add_objective(x, 0, 1.0);
  const int r = prog.add_row(-2.0, 5.0, "range");
  prog.add_coeff(r, x, 0, 1.0);

  const auto [sf, idx] = to_standard_form(prog);
  CHECK(sf.b.size() == 2);
  CHECK(idx.std_rows[0].size() == 2);

  const ProgramSolution ps = solve_program(prog, kSt);
  CHECK(ps.status == SolveStatus::Optimal);
  CHECK(ps.x[0] == doctest::Approx(-2.0));
}

TEST_CASE("vacuous rows are dropped with a warning") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::NonNeg, 1);
  prog.add_objective(x, 0, 1.0);
  const int r = prog.add_row(-kInf, kInf, "nothing");
  prog.add_coeff(r, x, 0, 1.0);

  const auto [sf, idx] = to_standard_form(prog);
  CHECK(sf.b.size() == 0);
  CHECK(sf.warnings.size() == 1);
  CHECK(idx.std_rows[0].empty());
}

TEST_CASE("free columns lead after reordering") {
  ConicProgram prog;
  const int n1 = prog.add_block("n", ConeKind::NonNeg, 2);
  const int f1 = prog.add_block("f", ConeKind::Free, 2);
  const int q1 = prog.add_block("q", ConeKind::Quad, 3);
  const int r = prog.add_row(1.0, 1.0, "mix");
  prog.add_coeff(r, n1, 0, 1.0);
  prog.add_coeff(r, f1, 1, 2.0);
  prog.add_coeff(r, q1, 0, 3.0);

  const auto [sf, idx] = to_standard_form(prog);
  REQUIRE(sf.cones.blocks.size() >= 2);
  CHECK(sf.cones.blocks[0].kind == ConeKind::Free);
  CHECK(sf.cones.blocks[0].dim == 2);
  // Program var -> std var is a bijection onto the non-slack columns.
  std::vector<int> seen(sf.c.size(), 0);
  for (int v = 0; v < prog.num_vars(); ++v) {
    REQUIRE(idx.std_of_var[v] >= 0);
    REQUIRE(idx.std_of_var[v] < static_cast<int>(sf.c.size()));
    seen[idx.std_of_var[v]] += 1;
    CHECK(idx.var_of_std[idx.std_of_var[v]] == v);
  }
  for (int count : seen) CHECK(count <= 1);
}

TEST_CASE("norm minimization through a quadratic cone") {
  ConicProgram prog;
  const int q = prog.add_block("q", ConeKind::Quad, 3);
  prog.add_objective(q, 0, 1.0);
  const int r1 = prog.add_row(3.0, 3.0, "pin");
  prog.add_coeff(r1, q, 1, 1.0);
  const int r2 = prog.add_row(4.0, 4.0, "pin");
  prog.add_coeff(r2, q, 2, 1.0);

  const ProgramSolution ps = solve_program(prog, kSt);
  CHECK(ps.status == SolveStatus::Optimal);
  CHECK(ps.objective == doctest::Approx(5.0));
}

TEST_CASE("LP lands on the cheap vertex") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::NonNeg, 2);
  prog.add_objective(x, 0, 1.0);
  prog.add_objective(x, 1, 2.0);
  const int r = prog.add_row(1.0, 1.0, "sum");
  prog.add_coeff(r, x, 0, 1.0);
  prog.add_coeff(r, x, 1, 1.0);

  const ProgramSolution ps = solve_program(prog, kSt);
  CHECK(ps.status == SolveStatus::Optimal);
  CHECK(ps.objective == doctest::Approx(1.0));
  CHECK(ps.x[0] == doctest::Approx(1.0));
  CHECK(ps.x[1] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("residual formulas") {
  StandardForm sf;
  Eigen::MatrixXd A(1, 2);
  A << 1, 1;
  sf.A = A.sparseView();
  sf.b = Eigen::VectorXd::Constant(1, 1.0);
  sf.c = Eigen::VectorXd(2);
  sf.c << 1, 2;
  sf.cones.append(ConeKind::NonNeg, 2);

  Eigen::VectorXd x(2), y(1), s(2);
  x << 1, 0;
  y << 1;
  s << 0, 1;
  const Residuals exact = residuals(sf, x, y, s);
  CHECK(exact.primal <= 1e-12);
  CHECK(exact.dual <= 1e-12);
  CHECK(exact.gap <= 1e-12);

  Eigen::VectorXd xp = x;
  xp[0] += 1e-3;
  const Residuals p1 = residuals(sf, xp, y, s);
  xp[0] = x[0] + 2e-3;
  const Residuals p2 = residuals(sf, xp, y, s);
  CHECK(p2.primal == doctest::Approx(2.0 * p1.primal).epsilon(1e-9));

  StandardForm empty;
  empty.A = Eigen::SparseMatrix<double>(0, 0);
  empty.b = Eigen::VectorXd(0);
  empty.c = Eigen::VectorXd(0);
  const Residuals zero =
      residuals(empty, Eigen::VectorXd(0), Eigen::VectorXd(0), Eigen::VectorXd(0));
  CHECK(zero.primal == 0.0);
  CHECK(zero.dual == 0.0);
  CHECK(zero.gap == 0.0);
}

TEST_CASE("primal infeasibility certificate") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::NonNeg, 1);
  const int r = prog.add_row(-1.0, -1.0, "impossible");
  prog.add_coeff(r, x, 0, 1.0);

  const auto [sf, idx] = to_standard_form(prog);
  const SolverResult res = solve(sf, kSt);
  REQUIRE(res.status == SolveStatus::PrimalInfeasible);
  CHECK(res.y.dot(sf.b) > 1e-12);
  const Eigen::VectorXd aty_s = sf.A.transpose() * res.y + res.s;
  CHECK(aty_s.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, res.y.lpNorm<Eigen::Infinity>()));
  CHECK(cone_contains(sf.cones, res.s, 1e-7));
}

TEST_CASE("dual infeasibility certificate") {
  ConicProgram prog;
  const int x = prog.add_block("x", ConeKind::Free, 2);
  prog.add_objective(x, 0, -1.0);
  const int r = prog.add_row(0.0, 0.0, "tie");
  prog.add_coeff(r, x, 0, 1.0);
  prog.add_coeff(r, x, 1, -1.0);

  const auto [sf, idx] = to_standard_form(prog);
  const SolverResult res = solve(sf, kSt);
  REQUIRE(res.status == SolveStatus::DualInfeasible);
  CHECK(res.x.dot(sf.c) < -1e-12);
  const Eigen::VectorXd ax = sf.A * res.x;
  CHECK(ax.lpNorm<Eigen::Infinity>() <= 1e-6 * std::max(1.0, res.x.lpNorm<Eigen::Infinity>()));
  CHECK(cone_contains(sf.cones, res.x, 1e-7));
}

TEST_CASE("bitwise deterministic logs") {
  std::mt19937 rng(321);
  const RandomInstance inst = random_instance(rng);
  const SolverResult a = solve(inst.sf, kSt);
  const SolverResult b = solve(inst.sf, kSt);
  CHECK(format_log(a.log) == format_log(b.log));
  CHECK(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mu == b.log[i].mu);  // bitwise, no tolerance
    CHECK(a.log[i].step == b.log[i].step);
  }
}

TEST_CASE("random strictly feasible instances solve to tolerance") {
  std::mt19937 rng(90210);
  for (int trial = 0; trial < 20; ++trial) {
    CAPTURE(trial);
    const RandomInstance inst = random_instance(rng);
    const SolverResult res = solve(inst.sf, kSt);
    REQUIRE(res.status == SolveStatus::Optimal);
    CHECK(res.primal_residual <= 1e-8);
    CHECK(res.dual_residual <= 1e-8);
    CHECK(res.gap <= 1e-8);
    const Residuals check = residuals(inst.sf, res.x, res.y, res.s);
    CHECK(check.primal <= 1e-8);
    CHECK(check.dual <= 1e-8);
    // Iterates stay conic; the dual slack sits in the (self-)dual cone and
    // its free part must vanish.
    CHECK(cone_contains(inst.sf.cones, res.x, 1e-7));
    CHECK(cone_contains(inst.sf.cones, res.s, 1e-7));
    CHECK(res.s.head(inst.sf.cones.blocks[0].dim).lpNorm<Eigen::Infinity>() <= 1e-7);
  }
}
