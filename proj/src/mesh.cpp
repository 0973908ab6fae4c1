#include "lakit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lakit {

namespace {

double signed_area(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   const Eigen::Vector2d& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

using EdgeKey = std::pair<int, int>;
EdgeKey edge_key(int a, int b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace

double Mesh::cell_area(int c) const {
  const auto& t = cells[c];
  return signed_area(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
}

Eigen::Vector2d Mesh::cell_centroid(int c) const {
  const auto& t = cells[c];
  return (nodes[t[0]] + nodes[t[1]] + nodes[t[2]]) / 3.0;
}

std::pair<Eigen::Vector2d, Eigen::Vector2d> Mesh::facet_frame(int f) const {
  const Eigen::Vector2d n = facets[f].normal;
  return {n, Eigen::Vector2d(n.y(), -n.x())};
}

std::vector<int> Mesh::boundary_facets(const std::string& tag) const {
  std::vector<int> out;
  for (const auto& [f, t] : facet_tags)
    if (t == tag) out.push_back(f);
  return out;
}

void build_topology(Mesh& mesh) {
  const int nn = mesh.num_nodes(), nc = mesh.num_cells();
  std::set<std::array<int, 3>> seen;
  for (int c = 0; c < nc; ++c) {
    for (int v : mesh.cells[c])
      if (v < 0 || v >= nn)
        throw std::invalid_argument("cell " + std::to_string(c) + " references node " +
                                    std::to_string(v) + " outside 0.." + std::to_string(nn - 1));
    std::array<int, 3> key = mesh.cells[c];
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second)
      throw std::invalid_argument("cell " + std::to_string(c) + " duplicates an earlier cell");
    if (!(mesh.cell_area(c) > 0.0))
      throw std::invalid_argument("cell " + std::to_string(c) +
                                  " has non-positive area; nodes must wind counter-clockwise");
  }

  mesh.facets.clear();
  mesh.cell_facets.assign(nc, {-1, -1, -1});
  std::map<EdgeKey, int> by_key;
  for (int c = 0; c < nc; ++c) {
    const auto& t = mesh.cells[c];
    for (int le = 0; le < 3; ++le) {
      const int a = t[(le + 1) % 3], b = t[(le + 2) % 3];
      const EdgeKey key = edge_key(a, b);
      auto it = by_key.find(key);
      if (it == by_key.end()) {
        Facet f;
        f.nodes = {key.first, key.second};
        f.cells = {c, -1};
        by_key[key] = mesh.num_facets();
        mesh.cell_facets[c][le] = mesh.num_facets();
        mesh.facets.push_back(f);
      } else {
        Facet& f = mesh.facets[it->second];
        if (f.cells[1] >= 0)
          throw std::invalid_argument("edge (" + std::to_string(key.first) + "," +
                                      std::to_string(key.second) +
                                      ") is shared by more than two cells");
        f.cells[1] = c;
        mesh.cell_facets[c][le] = it->second;
      }
    }
  }

  for (auto& f : mesh.facets) {
    const Eigen::Vector2d a = mesh.nodes[f.nodes[0]], b = mesh.nodes[f.nodes[1]];
    const Eigen::Vector2d e = b - a;
    f.length = e.norm();
    if (!(f.length > 0.0))
      throw std::invalid_argument("degenerate facet between coincident nodes " +
                                  std::to_string(f.nodes[0]) + " and " +
                                  std::to_string(f.nodes[1]));
    Eigen::Vector2d n(e.y() / f.length, -e.x() / f.length);
    const Eigen::Vector2d mid = 0.5 * (a + b);
    if (n.dot(mesh.cell_centroid(f.cells[0]) - mid) > 0.0) n = -n;
    f.normal = n;
  }
}

Mesh generate_rectangle(double width, double height, int nx, int ny, const EdgeTags& tags) {
  if (!(width > 0.0) || !(height > 0.0))
    throw std::invalid_argument("generate_rectangle: needs positive width and height");
  if (nx < 1 || ny < 1) throw std::invalid_argument("generate_rectangle: needs nx, ny >= 1");

  Mesh mesh;
  const double dx = width / nx, dy = height / ny;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) mesh.nodes.emplace_back(i * dx, j * dy);
  const int ngrid = (nx + 1) * (ny + 1);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) mesh.nodes.emplace_back((i + 0.5) * dx, (j + 0.5) * dy);

  auto grid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = grid(i, j), b = grid(i + 1, j), c = grid(i + 1, j + 1), d = grid(i, j + 1);
      const int m = ngrid + j * nx + i;
      mesh.cells.push_back({a, b, m});
      mesh.cells.push_back({b, c, m});
      mesh.cells.push_back({c, d, m});
      mesh.cells.push_back({d, a, m});
    }

  build_topology(mesh);

  const double tol = 1e-12 * std::max(width, height);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.facets[f].on_boundary()) continue;
    const Eigen::Vector2d a = mesh.nodes[mesh.facets[f].nodes[0]];
    const Eigen::Vector2d b = mesh.nodes[mesh.facets[f].nodes[1]];
    std::string tag;
    if (std::abs(a.y()) < tol && std::abs(b.y()) < tol) tag = tags.bottom;
    else if (std::abs(a.y() - height) < tol && std::abs(b.y() - height) < tol) tag = tags.top;
    else if (std::abs(a.x()) < tol && std::abs(b.x()) < tol) tag = tags.left;
    else if (std::abs(a.x() - width) < tol && std::abs(b.x() - width) < tol) tag = tags.right;
    if (!tag.empty()) mesh.facet_tags[f] = tag;
  }
  return mesh;
}

// ---------------------------------------------------------------- serialization

Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open mesh file: " + path);

  int lineno = 0;
  auto next_line = [&](std::string& line) {
    while (std::getline(in, line)) {
      ++lineno;
      const auto h = line.find('#');
      if (h != std::string::npos) line.erase(h);
      if (line.find_first_not_of(" \t\r\n") != std::string::npos) return true;
    }
    return false;
  };
  auto fail = [&](const std::string& what) -> std::invalid_argument {
    return std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + what);
  };

  std::string line;
  if (!next_line(line)) throw fail("empty mesh file");
  {
    std::istringstream ss(line);
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "lakit-mesh" || version != 1)
      throw fail("expected header 'lakit-mesh 1'");
  }

  Mesh mesh;
  if (!next_line(line)) throw fail("missing node section");
  std::istringstream ns(line);
  std::string word;
  long nn = -1;
  ns >> word >> nn;
  if (word != "nodes" || nn < 0) throw fail("expected 'nodes <count>'");
  mesh.nodes.reserve(nn);
  for (long i = 0; i < nn; ++i) {
    if (!next_line(line)) throw fail("node list ends early");
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) throw fail("expected 'x y'");
    mesh.nodes.emplace_back(x, y);
  }

  if (!next_line(line)) throw fail("missing cell section");
  std::istringstream cs(line);
  long nc = -1;
  cs >> word >> nc;
  if (word != "cells" || nc < 0) throw fail("expected 'cells <count>'");
  mesh.cells.reserve(nc);
  for (long i = 0; i < nc; ++i) {
    if (!next_line(line)) throw fail("cell list ends early");
    std::istringstream ls(line);
    int a, b, c;
    if (!(ls >> a >> b >> c)) throw fail("expected 'i j k'");
    mesh.cells.push_back({a, b, c});
  }

  try {
    build_topology(mesh);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }

  if (next_line(line)) {
    std::istringstream ts(line);
    long nt = -1;
    ts >> word >> nt;
    if (word != "tags" || nt < 0) throw fail("expected 'tags <count>'");
    std::map<EdgeKey, int> boundary;
    for (int f = 0; f < mesh.num_facets(); ++f)
      if (mesh.facets[f].on_boundary())
        boundary[{mesh.facets[f].nodes[0], mesh.facets[f].nodes[1]}] = f;
    for (long i = 0; i < nt; ++i) {
      if (!next_line(line)) throw fail("tag list ends early");
      std::istringstream ls(line);
      int a, b;
      std::string name;
      if (!(ls >> a >> b >> name)) throw fail("expected 'a b name'");
      auto it = boundary.find(edge_key(a, b));
      if (it == boundary.end())
        throw fail("tagged edge (" + std::to_string(a) + "," + std::to_string(b) +
                   ") is not a boundary facet");
      mesh.facet_tags[it->second] = name;
    }
    if (next_line(line)) throw fail("unexpected trailing content");
  }
  return mesh;
}

void save_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write mesh file: " + path);
  char buf[80];
  out << "lakit-mesh 1\n";
  out << "nodes " << mesh.num_nodes() << "\n";
  for (const auto& p : mesh.nodes) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g\n", p.x(), p.y());
    out << buf;
  }
  out << "cells " << mesh.num_cells() << "\n";
  for (const auto& t : mesh.cells) out << t[0] << " " << t[1] << " " << t[2] << "\n";
  if (!mesh.facet_tags.empty()) {
    out << "tags " << mesh.facet_tags.size() << "\n";
    for (const auto& [f, name] : mesh.facet_tags)
      out << mesh.facets[f].nodes[0] << " " << mesh.facets[f].nodes[1] << " " << name << "\n";
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

// ---------------------------------------------------------------- refinement

namespace {

// A cell of the working mesh with green pairs coalesced back into their
// parents.  anchor = lowest constituent cell index, used to emit children
// in an order that reproduces the input when nothing is split.
struct VirtualCell {
  std::array<int, 3> nodes{};
  int anchor = 0;
  int presplit_mid = -1;  // existing midpoint on edge (nodes[0], nodes[1])
};

}  // namespace

Mesh refine_marked(const Mesh& mesh, const std::vector<bool>& marks) {
  if (static_cast<int>(marks.size()) != mesh.num_cells())
    throw std::invalid_argument("refine_marked: one mark per cell required");

  std::vector<int> green_of(mesh.num_cells(), -1);
  for (size_t g = 0; g < mesh.green.size(); ++g) {
    green_of[mesh.green[g].child0] = static_cast<int>(g);
    green_of[mesh.green[g].child1] = static_cast<int>(g);
  }

  std::vector<VirtualCell> vc;
  std::vector<bool> vmark;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    if (green_of[c] >= 0) {
      const auto& gp = mesh.green[green_of[c]];
      if (c != gp.child0) continue;  // emit the pair once, at its anchor
      VirtualCell v;
      v.nodes = gp.parent;
      v.anchor = gp.child0;
      v.presplit_mid = gp.midnode;
      vc.push_back(v);
      vmark.push_back(marks[gp.child0] || marks[gp.child1]);
    } else {
      VirtualCell v;
      v.nodes = mesh.cells[c];
      v.anchor = c;
      vc.push_back(v);
      vmark.push_back(marks[c]);
    }
  }

  // Split-edge closure: pre-split parent edges stay split (their midpoints
  // are referenced by already-refined neighbours); red cells split all
  // three edges; a cell with two or more split edges turns red.
  std::map<EdgeKey, int> split;  // edge -> midpoint node (-1 until created)
  for (const auto& v : vc)
    if (v.presplit_mid >= 0) split[edge_key(v.nodes[0], v.nodes[1])] = v.presplit_mid;

  std::vector<bool> red(vc.size(), false);
  for (size_t i = 0; i < vc.size(); ++i) red[i] = vmark[i];
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < vc.size(); ++i) {
      if (!red[i]) continue;
      for (int le = 0; le < 3; ++le) {
        const EdgeKey k = edge_key(vc[i].nodes[(le + 1) % 3], vc[i].nodes[(le + 2) % 3]);
        if (!split.count(k)) {
          split[k] = -1;
          changed = true;
        }
      }
    }
    for (size_t i = 0; i < vc.size(); ++i) {
      if (red[i]) continue;
      int ns = 0;
      for (int le = 0; le < 3; ++le)
        ns += split.count(edge_key(vc[i].nodes[(le + 1) % 3], vc[i].nodes[(le + 2) % 3]));
      if (ns >= 2) {
        red[i] = true;
        changed = true;
      }
    }
    // A neighbour refined one level deeper can split a HALF of the pre-split
    // edge.  The recombined parent never sees that edge among its own three,
    // and a re-emitted green pair cannot host the new node, so the parent
    // must go red (its affected quadrants then green-bisect on emission).
    for (size_t i = 0; i < vc.size(); ++i) {
      if (red[i] || vc[i].presplit_mid < 0) continue;
      if (split.count(edge_key(vc[i].nodes[0], vc[i].presplit_mid)) ||
          split.count(edge_key(vc[i].presplit_mid, vc[i].nodes[1]))) {
        red[i] = true;
        changed = true;
      }
    }
  }

  Mesh out;
  out.nodes = mesh.nodes;
  for (auto& [key, mid] : split) {
    if (mid >= 0) continue;
    mid = out.num_nodes();
    out.nodes.push_back(0.5 * (mesh.nodes[key.first] + mesh.nodes[key.second]));
  }

  // Old boundary tags keyed by endpoint pair, plus the halves of any tagged
  // edge split in this pass.
  std::map<EdgeKey, std::string> tag_of;
  for (const auto& [f, name] : mesh.facet_tags)
    tag_of[{mesh.facets[f].nodes[0], mesh.facets[f].nodes[1]}] = name;
  for (const auto& [key, mid] : split) {
    auto it = tag_of.find(key);
    if (it == tag_of.end()) continue;
    tag_of[edge_key(key.first, mid)] = it->second;
    tag_of[edge_key(mid, key.second)] = it->second;
  }

  std::vector<size_t> order(vc.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return vc[a].anchor < vc[b].anchor; });

  auto midpoint = [&](int a, int b) -> int {
    auto it = split.find(edge_key(a, b));
    return it == split.end() ? -1 : it->second;
  };

  // Outer quadrant of a red cell.  When the parent was a recombined green
  // pair, the halves of its pre-split edge may carry midpoints of their own
  // (from a neighbour a full level deeper); such a quadrant is emitted as a
  // green pair on the existing node.  All other quadrant edges use nodes
  // created this pass, so at most one edge can match.
  auto emit_quadrant = [&](const std::array<int, 3>& t) {
    for (int le = 0; le < 3; ++le) {
      const int va = t[(le + 1) % 3], vb = t[(le + 2) % 3], vo = t[le];
      const int h = midpoint(va, vb);
      if (h < 0) continue;
      Mesh::GreenPair gp;
      gp.child0 = out.num_cells();
      gp.child1 = out.num_cells() + 1;
      gp.parent = {va, vb, vo};
      gp.midnode = h;
      out.cells.push_back({va, h, vo});
      out.cells.push_back({h, vb, vo});
      out.green.push_back(gp);
      return;
    }
    out.cells.push_back(t);
  };

  for (size_t oi : order) {
    const auto& v = vc[oi];
    const int n0 = v.nodes[0], n1 = v.nodes[1], n2 = v.nodes[2];
    if (red[oi]) {
      const int m01 = midpoint(n0, n1), m12 = midpoint(n1, n2), m20 = midpoint(n2, n0);
      emit_quadrant({n0, m01, m20});
      emit_quadrant({m01, n1, m12});
      emit_quadrant({m20, m12, n2});
      out.cells.push_back({m01, m12, m20});
      continue;
    }
    std::array<int, 3> split_mid{midpoint(n1, n2), midpoint(n2, n0), midpoint(n0, n1)};
    const int nsplit = (split_mid[0] >= 0) + (split_mid[1] >= 0) + (split_mid[2] >= 0);
    if (nsplit == 0) {
      out.cells.push_back(v.nodes);
      continue;
    }
    // Exactly one split edge: green bisection toward the opposite vertex.
    int le = split_mid[0] >= 0 ? 0 : split_mid[1] >= 0 ? 1 : 2;
    const int va = v.nodes[(le + 1) % 3], vb = v.nodes[(le + 2) % 3], vo = v.nodes[le];
    const int m = split_mid[le];
    Mesh::GreenPair gp;
    gp.child0 = out.num_cells();
    gp.child1 = out.num_cells() + 1;
    gp.parent = {va, vb, vo};
    gp.midnode = m;
    out.cells.push_back({va, m, vo});
    out.cells.push_back({m, vb, vo});
    out.green.push_back(gp);
  }

  build_topology(out);
  for (int f = 0; f < out.num_facets(); ++f) {
    if (!out.facets[f].on_boundary()) continue;
    auto it = tag_of.find({out.facets[f].nodes[0], out.facets[f].nodes[1]});
    if (it != tag_of.end()) out.facet_tags[f] = it->second;
  }
  return out;
}

}  // namespace lakit
