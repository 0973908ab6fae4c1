#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

namespace lakit {

// Cone vocabulary shared by the solver, the strength criteria and the
// program builders.  Only symmetric cones with closed-form scalings are
// admitted; semidefinite blocks are intentionally absent.
enum class ConeKind {
  Free,    // R^d, no constraint
  NonNeg,  // componentwise x >= 0
  Quad,    // z0 >= ||z1..zd-1||_2, d >= 1
  RQuad,   // 2 z0 z1 >= ||z2..zd-1||^2, z0,z1 >= 0, d >= 2
};

struct ConeSpec {
  ConeKind kind = ConeKind::Free;
  int dim = 0;
};

const char* cone_name(ConeKind kind);

// Ordered product of cone blocks. Dimensions are cumulative.
struct ConeProduct {
  std::vector<ConeSpec> blocks;

  int total_dim() const;
  void append(const ConeSpec& spec) { blocks.push_back(spec); }
  void append(ConeKind kind, int dim) { blocks.push_back({kind, dim}); }
};

// Signed distance-like margin: >= 0 exactly when z lies in the cone.
// NonNeg: min z_i; Quad: z0 - ||zbar||; RQuad uses the Quad margin of the
// rotated point so the scale stays comparable across kinds.
double cone_margin(const ConeSpec& spec, const Eigen::VectorXd& z);

bool cone_contains(const ConeSpec& spec, const Eigen::VectorXd& z, double tol);
bool cone_contains(const ConeProduct& product, const Eigen::VectorXd& z, double tol);

// Conic-representable function
//   F(x) = min_y  cx.x + cy.y   s.t.  bl <= A x + B y <= bu,  y in K,
// with the convention F(x) = +inf when no feasible y exists.  Criteria
// expose indicators (cx = cy = 0) and support functions in this shape, and
// the assemblers substitute affine maps of the global unknowns for x.
struct ConicFunction {
  int n = 0;  // input dimension
  int p = 0;  // auxiliary dimension, total over cones
  Eigen::VectorXd cx;               // size n
  Eigen::VectorXd cy;               // size p
  Eigen::SparseMatrix<double> A;    // r x n
  Eigen::SparseMatrix<double> B;    // r x p
  Eigen::VectorXd bl, bu;           // size r, +-inf allowed
  ConeProduct cones;                // product over y

  int rows() const { return static_cast<int>(A.rows()); }
};

// Structural checks: dimension agreement, bl <= bu, every cone block
// admissible (positive dimension, RQuad >= 2).  Returns human-readable
// defects; empty means well-formed.
std::vector<std::string> validate(const ConicFunction& f);

struct SolverSettings;

// Evaluates F(x) by solving the inner minimization with the embedded
// interior-point solver.  Infeasible inner problem reports +inf.  Throws
// std::invalid_argument on malformed descriptors and std::runtime_error
// when the solve fails numerically.
double evaluate_via_solver(const ConicFunction& f, const Eigen::VectorXd& x,
                           const SolverSettings& settings);

}  // namespace lakit
