#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <string>
#include <vector>

namespace lakit {

// Facet between two cells (or a cell and the boundary).  The unit normal
// points out of cells[0], which is the lower-indexed adjacent cell; on the
// boundary it points outward.  Endpoint nodes are stored ascending.
struct Facet {
  std::array<int, 2> nodes{-1, -1};
  std::array<int, 2> cells{-1, -1};  // cells[1] = -1 on the boundary
  Eigen::Vector2d normal = Eigen::Vector2d::Zero();
  double length = 0.0;

  bool on_boundary() const { return cells[1] < 0; }
};

// Conforming triangle mesh with counter-clockwise cells and derived facet
// topology.  Green-closure ancestry is carried so a later refinement pass
// can undo the closure before splitting further; it is not serialized, so
// a reloaded mesh refines as if every cell were original.
struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> cells;
  std::vector<Facet> facets;
  std::vector<std::array<int, 3>> cell_facets;  // facet opposite local vertex
  std::map<int, std::string> facet_tags;        // boundary facet -> tag

  struct GreenPair {
    int child0 = -1, child1 = -1;       // consecutive cell indices
    std::array<int, 3> parent{};        // split edge is (parent[0], parent[1])
    int midnode = -1;
  };
  std::vector<GreenPair> green;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_cells() const { return static_cast<int>(cells.size()); }
  int num_facets() const { return static_cast<int>(facets.size()); }

  double cell_area(int c) const;
  Eigen::Vector2d cell_centroid(int c) const;
  // Right-handed facet frame {normal, tangent} with cross(t, n) = +1, so an
  // upward normal pairs with a tangent along +x.
  std::pair<Eigen::Vector2d, Eigen::Vector2d> facet_frame(int f) const;
  std::vector<int> boundary_facets(const std::string& tag) const;
};

struct EdgeTags {
  std::string left = "border", right = "border", bottom = "border", top = "border";
};

// Crossed-diagonal rectangle: nx x ny grid rectangles, each split into four
// triangles around its center node.
Mesh generate_rectangle(double width, double height, int nx, int ny,
                        const EdgeTags& tags = {});

// Rebuilds facets, areas and adjacency from nodes/cells; throws
// std::invalid_argument on non-positive areas, out-of-range indices or
// non-manifold edges.  Callers mutating nodes/cells directly must re-run.
void build_topology(Mesh& mesh);

// Plain text format "lakit-mesh 1" with node, cell and boundary-tag
// sections; errors carry 1-based line numbers.
Mesh load_mesh(const std::string& path);
void save_mesh(const Mesh& mesh, const std::string& path);

// Red refinement of marked cells with green conformity closure.  Green
// pairs touched by a new pass are first coalesced back into their parent.
// Boundary tags propagate to child facets.  No marks returns an identical
// mesh.
Mesh refine_marked(const Mesh& mesh, const std::vector<bool>& marks);

}  // namespace lakit
