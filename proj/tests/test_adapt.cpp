#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lakit/adapt.hpp"

using namespace lakit;

namespace {

Mesh cut_mesh(int nx, int ny) {
  return generate_rectangle(1.0, 1.5, nx, ny, {"left", "right", "bottom", "top"});
}

LoadingSpec gravity() {
  LoadingSpec l;
  l.body_force = {Eigen::Vector2d(0.0, -1.0)};
  return l;
}

const std::vector<DirichletBC> kFixedBottom = {{"bottom", {}, {}}};

BuiltProgram cut_ub(const Mesh& m, bool disc = false) {
  return build_kinematic_ub(m, 2, make_criterion("MohrCoulomb2D", {{"c", 1.0}, {"phi_deg", 30.0}}),
                            gravity(), kFixedBottom, disc);
}

DissipationMap hand_map(std::vector<double> cells) {
  DissipationMap d;
  d.cell = std::move(cells);
  d.total = std::accumulate(d.cell.begin(), d.cell.end(), 0.0);
  return d;
}

}  // namespace

TEST_CASE("marking picks the smallest dominating prefix") {
  const DissipationMap d = hand_map({4.0, 3.0, 2.0, 1.0});
  CHECK(mark_cells(d, 0.5) == std::vector<int>{0, 1});       // 7 >= 5
  CHECK(mark_cells(d, 0.39) == std::vector<int>{0});         // 4 >= 3.9
  CHECK(mark_cells(d, 1.0) == std::vector<int>{0, 1, 2, 3});

  // Ties break toward the lower cell id, result comes back ascending.
  const DissipationMap tie = hand_map({1.0, 2.0, 2.0, 1.0});
  CHECK(mark_cells(tie, 0.5) == std::vector<int>{1, 2});

  const DissipationMap uniform = hand_map(std::vector<double>(7, 1.0));
  CHECK(mark_cells(uniform, 0.5).size() == 4);  // ceil(7/2)

  // Zero and negative contributions are never marked.
  const DissipationMap mixed = hand_map({2.0, 0.0, -1.0, 3.0});
  const auto picks = mark_cells(mixed, 1.0);
  CHECK(picks == std::vector<int>{0, 3});

  std::vector<std::string> warn;
  const DissipationMap dead = hand_map({0.0, 0.0});
  CHECK(mark_cells(dead, 0.5, &warn).empty());
  CHECK(warn.size() == 1);

  CHECK_THROWS_AS(mark_cells(d, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(mark_cells(d, 1.5), std::invalid_argument);
}

TEST_CASE("kinematic dissipation map reproduces the objective") {
  const Mesh m = cut_mesh(2, 2);
  const BuiltProgram bp = cut_ub(m);
  const Solution sol = solve_built(bp);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const DissipationMap dm = dissipation_map(bp, sol);

  REQUIRE(static_cast<int>(dm.cell.size()) == m.num_cells());
  // No fixed loads, so total dissipation is the bound itself.
  CHECK(dm.total == doctest::Approx(sol.load_factor).epsilon(1e-6));
  const double folded = std::accumulate(dm.cell.begin(), dm.cell.end(), 0.0);
  CHECK(folded == doctest::Approx(dm.total).epsilon(1e-10));
  for (double v : dm.facet) CHECK(v == 0.0);  // continuous run has no jumps
}

TEST_CASE("discontinuous run folds facet shares into cells") {
  const Mesh m = cut_mesh(2, 2);
  const BuiltProgram bp = cut_ub(m, true);
  const Solution sol = solve_built(bp);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const DissipationMap dm = dissipation_map(bp, sol);

  CHECK(dm.total == doctest::Approx(sol.load_factor).epsilon(1e-6));
  CHECK(std::accumulate(dm.cell.begin(), dm.cell.end(), 0.0) ==
        doctest::Approx(dm.total).epsilon(1e-10));
  CHECK(static_cast<int>(dm.facet.size()) == m.num_facets());
}

TEST_CASE("static dissipation map uses the dual decomposition") {
  const Mesh m = cut_mesh(2, 2);
  LoadingSpec l = gravity();
  l.tractions = {{"left", Eigen::Vector2d::Zero()},
                 {"right", Eigen::Vector2d::Zero()},
                 {"top", Eigen::Vector2d::Zero()}};
  const BuiltProgram bp =
      build_static_lb(m, make_criterion("MohrCoulomb2D", {{"c", 1.0}, {"phi_deg", 30.0}}), l);
  const Solution sol = solve_built(bp);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const DissipationMap dm = dissipation_map(bp, sol);

  CHECK(dm.total == doctest::Approx(sol.load_factor).epsilon(1e-5));
  for (double v : dm.cell) CHECK(v >= 0.0);
}

TEST_CASE("uniform problem spreads dissipation evenly") {
  // A homogeneous periodic cell deforms uniformly, so equal-area cells carry
  // equal shares.
  const Mesh m = generate_rectangle(1.0, 1.0, 2, 2);
  const BuiltProgram bp =
      build_homogenization_kin(m, make_criterion("vonMises2D", {{"k", 1.0}}),
                               Eigen::Vector3d(1.0, -1.0, 0.0));
  const Solution sol = solve_built(bp);
  REQUIRE(sol.status == SolveStatus::Optimal);
  const DissipationMap dm = dissipation_map(bp, sol);
  const double share = dm.total / m.num_cells();
  for (double v : dm.cell) CHECK(v == doctest::Approx(share).epsilon(1e-5));
}

TEST_CASE("dissipation map rejects failed solves") {
  const Mesh m = cut_mesh(1, 1);
  LoadingSpec l;
  l.tractions = {{"top", Eigen::Vector2d::Zero()}};
  const BuiltProgram bp =
      build_static_lb(m, make_criterion("Tresca2D", {{"k", 1.0}}), l);
  const Solution sol = solve_built(bp);
  REQUIRE(sol.status == SolveStatus::DualInfeasible);
  CHECK_THROWS_AS(dissipation_map(bp, sol), std::invalid_argument);
}

TEST_CASE("adapt loop refines where the mechanism runs") {
  const Mesh m0 = cut_mesh(2, 2);
  std::vector<std::string> warn;
  const auto steps =
      adapt_loop(m0, [](const Mesh& m) { return cut_ub(m); }, 3, 0.5, {}, &warn);

  REQUIRE(!steps.empty());
  CHECK(steps[0].cells == m0.num_cells());
  double prev = std::numeric_limits<double>::infinity();
  for (size_t s = 0; s < steps.size(); ++s) {
    const AdaptStep& st = steps[s];
    CHECK(st.step == static_cast<int>(s));
    CHECK(st.status == SolveStatus::Optimal);
    CHECK(st.load_factor > 0.0);
    CHECK(st.load_factor <= prev * (1.0 + 1e-8));  // nested spaces
    CHECK(st.mesh.num_cells() == st.cells);
    CHECK(st.dofs > 0);
    CHECK(st.dissipation_total == doctest::Approx(st.load_factor).epsilon(1e-6));
    CHECK(st.seconds >= 0.0);
    if (s + 1 < steps.size()) {
      CHECK(st.marked > 0);
      CHECK(steps[s + 1].cells > st.cells);
    }
    prev = st.load_factor;
  }

  CHECK_THROWS_AS(adapt_loop(m0, [](const Mesh& m) { return cut_ub(m); }, 0, 0.5),
                  std::invalid_argument);
}

TEST_CASE("adapt loop reports the failing step") {
  const Mesh m0 = cut_mesh(1, 1);
  const int first_cells = m0.num_cells();
  auto builder = [&](const Mesh& m) -> BuiltProgram {
    if (m.num_cells() > first_cells) throw std::invalid_argument("boom");
    return cut_ub(m);
  };
  CHECK_THROWS_WITH_AS(adapt_loop(m0, builder, 3, 0.9), "adapt step 1: boom",
                       std::runtime_error);
}
