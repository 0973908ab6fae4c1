#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lakit/mesh.hpp"

using namespace lakit;

namespace {

double total_area(const Mesh& m) {
  double a = 0.0;
  for (int c = 0; c < m.num_cells(); ++c) a += m.cell_area(c);
  return a;
}

void check_invariants(const Mesh& m) {
  for (int c = 0; c < m.num_cells(); ++c) CHECK(m.cell_area(c) > 0.0);
  int boundary = 0;
  for (const auto& f : m.facets) {
    if (f.on_boundary())
      ++boundary;
    else
      CHECK(f.cells[1] >= 0);
    CHECK(f.normal.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.length > 0.0);
  }
  // Euler characteristic of a disk.
  CHECK(m.num_nodes() - m.num_facets() + m.num_cells() == 1);
  CHECK(boundary > 0);
}

std::string tmpfile_path(const char* name) {
  return std::string("/tmp/lakit_test_") + name;
}

}  // namespace

TEST_CASE("smallest crossed rectangle") {
  const Mesh m = generate_rectangle(1.0, 1.0, 1, 1);
  CHECK(m.num_cells() == 4);
  CHECK(m.num_nodes() == 5);
  check_invariants(m);
  int tagged = 0;
  for (const auto& [f, tag] : m.facet_tags) {
    CHECK(tag == "border");
    CHECK(m.facets[f].on_boundary());
    ++tagged;
  }
  CHECK(tagged == 4);
  CHECK(total_area(m) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("area conservation and tag sides") {
  const Mesh m = generate_rectangle(2.0, 1.0, 2, 1, {"left", "right", "bottom", "top"});
  CHECK(total_area(m) == doctest::Approx(2.0).epsilon(1e-12));
  std::map<std::string, int> counts;
  for (const auto& [f, tag] : m.facet_tags) ++counts[tag];
  CHECK(counts["bottom"] == 2);
  CHECK(counts["top"] == 2);
  CHECK(counts["left"] == 1);
  CHECK(counts["right"] == 1);
  for (int f : m.boundary_facets("bottom")) {
    CHECK(m.facets[f].normal.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.facets[f].normal.y() == doctest::Approx(-1.0).epsilon(1e-12));
  }
}

TEST_CASE("dense grid topology walk") {
  const Mesh m = generate_rectangle(1.0, 1.0, 10, 10);
  CHECK(m.num_cells() == 400);
  check_invariants(m);
  for (int c = 0; c < m.num_cells(); ++c)
    for (int le = 0; le < 3; ++le) {
      const int f = m.cell_facets[c][le];
      // The facet opposite a local vertex never touches that vertex.
      const int opp = m.cells[c][le];
      CHECK(m.facets[f].nodes[0] != opp);
      CHECK(m.facets[f].nodes[1] != opp);
    }
}

TEST_CASE("facet frames are right-handed and outward on the boundary") {
  const Mesh m = generate_rectangle(1.5, 1.0, 3, 2);
  for (int f = 0; f < m.num_facets(); ++f) {
    const auto [n, t] = m.facet_frame(f);
    CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n.dot(t) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(t.x() * n.y() - t.y() * n.x() == doctest::Approx(1.0).epsilon(1e-12));
    if (m.facets[f].on_boundary()) {
      const Eigen::Vector2d mid =
          0.5 * (m.nodes[m.facets[f].nodes[0]] + m.nodes[m.facets[f].nodes[1]]);
      const Eigen::Vector2d inward = m.cell_centroid(m.facets[f].cells[0]) - mid;
      CHECK(n.dot(inward) < 0.0);
    }
  }
}

TEST_CASE("horizontal facet with first cell below points up") {
  Mesh m;
  m.nodes = {{0, 0}, {1, 0}, {0.5, 1}, {0.5, -1}};
  m.cells = {{0, 1, 2}, {1, 0, 3}};
  build_topology(m);
  int shared = -1;
  for (int f = 0; f < m.num_facets(); ++f)
    if (!m.facets[f].on_boundary()) shared = f;
  REQUIRE(shared >= 0);
  const auto [n, t] = m.facet_frame(shared);
  const bool cell0_is_upper = m.facets[shared].cells[0] == 0;
  // Normal leaves cells[0]; the frame follows.
  CHECK(n.y() == doctest::Approx(cell0_is_upper ? -1.0 : 1.0).epsilon(1e-12));
  CHECK(t.x() == doctest::Approx(cell0_is_upper ? -1.0 : 1.0).epsilon(1e-12));
}

TEST_CASE("validation rejects broken inputs") {
  Mesh dup;
  dup.nodes = {{0, 0}, {1, 0}, {0, 1}};
  dup.cells = {{0, 1, 2}, {1, 2, 0}};  // same triangle twice
  CHECK_THROWS_AS(build_topology(dup), std::invalid_argument);

  Mesh oob;
  oob.nodes = {{0, 0}, {1, 0}, {0, 1}};
  oob.cells = {{0, 1, 7}};
  CHECK_THROWS_AS(build_topology(oob), std::invalid_argument);

  Mesh flipped;
  flipped.nodes = {{0, 0}, {1, 0}, {0, 1}};
  flipped.cells = {{0, 2, 1}};  // clockwise: negative area
  CHECK_THROWS_AS(build_topology(flipped), std::invalid_argument);

  Mesh fan;  // three cells share the edge 0-1
  fan.nodes = {{0, 0}, {1, 0}, {0, 1}, {0, -1}, {2, 1}};
  fan.cells = {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}};
  CHECK_THROWS_AS(build_topology(fan), std::invalid_argument);
}

TEST_CASE("mesh file round-trip") {
  const Mesh m = generate_rectangle(1.0, 1.0, 4, 4, {"left", "right", "bottom", "top"});
  const std::string path = tmpfile_path("roundtrip.msh");
  save_mesh(m, path);
  const Mesh r = load_mesh(path);
  REQUIRE(r.num_nodes() == m.num_nodes());
  REQUIRE(r.num_cells() == m.num_cells());
  for (int i = 0; i < m.num_nodes(); ++i) CHECK(r.nodes[i] == m.nodes[i]);
  for (int c = 0; c < m.num_cells(); ++c) CHECK(r.cells[c] == m.cells[c]);
  CHECK(r.facet_tags.size() == m.facet_tags.size());
  for (const auto& [f, tag] : m.facet_tags) {
    auto it = r.facet_tags.find(f);
    REQUIRE(it != r.facet_tags.end());
    CHECK(it->second == tag);
  }
  std::remove(path.c_str());
}

TEST_CASE("mesh file errors carry line numbers") {
  auto write = [&](const char* name, const std::string& text) {
    const std::string path = tmpfile_path(name);
    std::ofstream(path) << text;
    return path;
  };
  const std::string bad_header = write("h.msh", "not-a-mesh\n");
  CHECK_THROWS_AS(load_mesh(bad_header), std::invalid_argument);

  const std::string tiny = write("t.msh",
                                 "lakit-mesh 1\n"
                                 "nodes 3\n0 0\n1 0\n0 1\n"
                                 "cells 1\n0 1 2\n");
  const Mesh one = load_mesh(tiny);
  CHECK(one.num_cells() == 1);
  CHECK(one.num_facets() == 3);
  for (const auto& f : one.facets) CHECK(f.on_boundary());

  const std::string dup = write("d.msh",
                                "lakit-mesh 1\n"
                                "nodes 3\n0 0\n1 0\n0 1\n"
                                "cells 2\n0 1 2\n1 2 0\n");
  CHECK_THROWS_AS(load_mesh(dup), std::invalid_argument);

  const std::string trailing = write("x.msh",
                                     "lakit-mesh 1\n"
                                     "nodes 3\n0 0\n1 0\n0 1\n"
                                     "cells 1\n0 1 2\nwhat is this\n");
  CHECK_THROWS_AS(load_mesh(trailing), std::invalid_argument);

  for (const char* n : {"h.msh", "t.msh", "d.msh", "x.msh"})
    std::remove(tmpfile_path(n).c_str());
}

TEST_CASE("red refinement of everything") {
  const Mesh m = generate_rectangle(1.0, 1.0, 1, 1, {"left", "right", "bottom", "top"});
  const Mesh r = refine_marked(m, std::vector<bool>(m.num_cells(), true));
  CHECK(r.num_cells() == 16);
  CHECK(total_area(r) == doctest::Approx(1.0).epsilon(1e-12));
  check_invariants(r);
  std::map<std::string, int> counts;
  for (const auto& [f, tag] : r.facet_tags) ++counts[tag];
  CHECK(counts["bottom"] == 2);  // split boundary facets keep their tag
  CHECK(counts["top"] == 2);
  CHECK(counts["left"] == 2);
  CHECK(counts["right"] == 2);
}

TEST_CASE("no marks is the identity") {
  const Mesh m = generate_rectangle(1.0, 2.0, 2, 3);
  const Mesh r = refine_marked(m, std::vector<bool>(m.num_cells(), false));
  CHECK(r.num_nodes() == m.num_nodes());
  REQUIRE(r.num_cells() == m.num_cells());
  for (int c = 0; c < m.num_cells(); ++c) CHECK(r.cells[c] == m.cells[c]);
}

TEST_CASE("single mark stays conforming through green closure") {
  const Mesh m = generate_rectangle(1.0, 1.0, 2, 2);
  std::vector<bool> marks(m.num_cells(), false);
  marks[5] = true;
  const Mesh r = refine_marked(m, marks);
  CHECK(r.num_cells() > m.num_cells());
  CHECK(total_area(r) == doctest::Approx(1.0).epsilon(1e-12));
  check_invariants(r);

  // Refining the result with no marks must reproduce it exactly even
  // though green pairs get coalesced and re-emitted.
  const Mesh again = refine_marked(r, std::vector<bool>(r.num_cells(), false));
  REQUIRE(again.num_cells() == r.num_cells());
  REQUIRE(again.num_nodes() == r.num_nodes());
  for (int c = 0; c < r.num_cells(); ++c) CHECK(again.cells[c] == r.cells[c]);
  for (int i = 0; i < r.num_nodes(); ++i) CHECK(again.nodes[i] == r.nodes[i]);

  // A green pair marked later first coalesces back to its parent.
  std::vector<bool> marks2(r.num_cells(), false);
  for (const auto& g : r.green) {
    marks2[g.child0] = true;
    break;
  }
  if (!r.green.empty()) {
    const Mesh rr = refine_marked(r, marks2);
    CHECK(total_area(rr) == doctest::Approx(1.0).epsilon(1e-12));
    check_invariants(rr);
  }
}

TEST_CASE("deep neighbour next to a green pair stays conforming") {
  // Refine the left quad fully; the right quad's west triangle closes with a
  // green pair whose pre-split edge lies on x = 1.  Then refine the child
  // cell touching the lower half of that edge: the half-edge gains a node
  // the recombined pair cannot see unless the closure promotes it to red.
  const Mesh m = generate_rectangle(2.0, 1.0, 2, 1, {"left", "right", "bottom", "top"});
  std::vector<bool> marks(m.num_cells(), false);
  for (int c = 0; c < m.num_cells(); ++c)
    if (m.cell_centroid(c).x() < 1.0) marks[c] = true;
  const Mesh r = refine_marked(m, marks);
  check_invariants(r);

  auto on_lower_half = [&](const Mesh& mm, int c) {
    int hits = 0;
    for (int v : mm.cells[c]) {
      const Eigen::Vector2d p = mm.nodes[v];
      if (std::abs(p.x() - 1.0) < 1e-12 && p.y() < 0.5 + 1e-12) ++hits;
    }
    return hits == 2;
  };
  std::vector<bool> marks2(r.num_cells(), false);
  int found = 0;
  for (int c = 0; c < r.num_cells(); ++c)
    if (r.cell_centroid(c).x() < 1.0 && on_lower_half(r, c)) {
      marks2[c] = true;
      ++found;
    }
  REQUIRE(found > 0);
  const Mesh rr = refine_marked(r, marks2);
  check_invariants(rr);
  CHECK(total_area(rr) == doctest::Approx(2.0).epsilon(1e-12));

  // No node may sit strictly inside another facet.
  for (const auto& f : rr.facets) {
    const Eigen::Vector2d a = rr.nodes[f.nodes[0]], b = rr.nodes[f.nodes[1]];
    for (int v = 0; v < rr.num_nodes(); ++v) {
      if (v == f.nodes[0] || v == f.nodes[1]) continue;
      const Eigen::Vector2d p = rr.nodes[v];
      const double t = (p - a).dot(b - a) / (b - a).squaredNorm();
      if (t <= 1e-9 || t >= 1.0 - 1e-9) continue;
      CHECK((p - (a + t * (b - a))).norm() > 1e-9);
    }
  }

  // The pass must leave consistent green bookkeeping: an idle pass is the
  // identity on cells and nodes.
  const Mesh again = refine_marked(rr, std::vector<bool>(rr.num_cells(), false));
  REQUIRE(again.num_cells() == rr.num_cells());
  REQUIRE(again.num_nodes() == rr.num_nodes());
  for (int c = 0; c < rr.num_cells(); ++c) CHECK(again.cells[c] == rr.cells[c]);
}

TEST_CASE("refinement is deterministic") {
  const Mesh m = generate_rectangle(1.0, 1.0, 3, 3);
  std::vector<bool> marks(m.num_cells(), false);
  marks[0] = marks[7] = marks[20] = true;
  const Mesh a = refine_marked(m, marks);
  const Mesh b = refine_marked(m, marks);
  REQUIRE(a.num_cells() == b.num_cells());
  for (int c = 0; c < a.num_cells(); ++c) CHECK(a.cells[c] == b.cells[c]);
  std::ostringstream sa, sb;
  const std::string pa = tmpfile_path("det_a.msh"), pb = tmpfile_path("det_b.msh");
  save_mesh(a, pa);
  save_mesh(b, pb);
  std::ifstream fa(pa), fb(pb);
  std::stringstream ba, bb;
  ba << fa.rdbuf();
  bb << fb.rdbuf();
  CHECK(ba.str() == bb.str());
  std::remove(pa.c_str());
  std::remove(pb.c_str());
}
