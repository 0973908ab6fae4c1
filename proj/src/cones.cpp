#include "lakit/cones.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lakit/ipm.hpp"
#include "lakit/program.hpp"

namespace lakit {

const char* cone_name(ConeKind kind) {
  switch (kind) {
    case ConeKind::Free: return "Free";
    case ConeKind::NonNeg: return "NonNeg";
    case ConeKind::Quad: return "Quad";
    case ConeKind::RQuad: return "RQuad";
  }
  return "?";
}

int ConeProduct::total_dim() const {
  int n = 0;
  for (const auto& b : blocks) n += b.dim;
  return n;
}

double cone_margin(const ConeSpec& spec, const Eigen::VectorXd& z) {
  if (z.size() != spec.dim) throw std::invalid_argument("cone_margin: dimension mismatch");
  switch (spec.kind) {
    case ConeKind::Free:
      return std::numeric_limits<double>::infinity();
    case ConeKind::NonNeg:
      return z.size() == 0 ? std::numeric_limits<double>::infinity() : z.minCoeff();
    case ConeKind::Quad: {
      const double tail = z.size() > 1 ? z.tail(z.size() - 1).norm() : 0.0;
      return z[0] - tail;
    }
    case ConeKind::RQuad: {
      // Margin of the image under the involution mapping RQuad onto Quad:
      // ((z0+z1)/sqrt2, (z0-z1)/sqrt2, z2..), so scales match the Quad case.
      const double s = 1.0 / std::sqrt(2.0);
      const double head = s * (z[0] + z[1]);
      Eigen::VectorXd tail(z.size() - 1);
      tail[0] = s * (z[0] - z[1]);
      if (z.size() > 2) tail.tail(z.size() - 2) = z.tail(z.size() - 2);
      return head - tail.norm();
    }
  }
  return -std::numeric_limits<double>::infinity();
}

bool cone_contains(const ConeSpec& spec, const Eigen::VectorXd& z, double tol) {
  return cone_margin(spec, z) >= -tol;
}

bool cone_contains(const ConeProduct& product, const Eigen::VectorXd& z, double tol) {
  if (z.size() != product.total_dim())
    throw std::invalid_argument("cone_contains: dimension mismatch");
  int at = 0;
  for (const auto& b : product.blocks) {
    if (!cone_contains(b, z.segment(at, b.dim), tol)) return false;
    at += b.dim;
  }
  return true;
}

static void check_block(const ConeSpec& b, std::vector<std::string>& out) {
  if (b.dim <= 0)
    out.push_back(std::string(cone_name(b.kind)) + " block with non-positive dimension");
  if (b.kind == ConeKind::RQuad && b.dim < 2) out.push_back("RQuad block needs dimension >= 2");
}

std::vector<std::string> validate(const ConicFunction& f) {
  std::vector<std::string> defects;
  if (f.n < 0 || f.p < 0) defects.push_back("negative dimension");
  if (f.cx.size() != f.n) defects.push_back("cx size disagrees with n");
  if (f.cy.size() != f.p) defects.push_back("cy size disagrees with p");
  if (f.A.cols() != f.n) defects.push_back("A column count disagrees with n");
  if (f.B.cols() != f.p) defects.push_back("B column count disagrees with p");
  if (f.A.rows() != f.B.rows()) defects.push_back("A and B row counts disagree");
  if (f.bl.size() != f.A.rows() || f.bu.size() != f.A.rows())
    defects.push_back("bound vectors disagree with row count");
  for (int i = 0; i < f.bl.size() && i < f.bu.size(); ++i)
    if (!(f.bl[i] <= f.bu[i])) defects.push_back("row " + std::to_string(i) + " has bl > bu");
  for (const auto& b : f.cones.blocks) check_block(b, defects);
  if (f.cones.total_dim() != f.p) defects.push_back("cone product dimension disagrees with p");
  return defects;
}

double evaluate_via_solver(const ConicFunction& f, const Eigen::VectorXd& x,
                           const SolverSettings& settings) {
  auto defects = validate(f);
  if (!defects.empty()) throw std::invalid_argument("evaluate_via_solver: " + defects.front());
  if (x.size() != f.n) throw std::invalid_argument("evaluate_via_solver: x size disagrees with n");

  const double fixed = f.n > 0 ? f.cx.dot(x) : 0.0;
  const Eigen::VectorXd shift = f.A * x;

  if (f.p == 0) {
    for (int i = 0; i < shift.size(); ++i)
      if (shift[i] < f.bl[i] - 1e-9 || shift[i] > f.bu[i] + 1e-9)
        return std::numeric_limits<double>::infinity();
    return fixed;
  }

  ConicProgram prog;
  const int y = prog.add_block("y", f.cones);

  std::vector<std::vector<std::pair<int, double>>> per_row(f.rows());
  for (int c = 0; c < f.B.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(f.B, c); it; ++it)
      per_row[it.row()].push_back({static_cast<int>(it.col()), it.value()});

  for (int r = 0; r < f.rows(); ++r) {
    const int row = prog.add_row(f.bl[r] - shift[r], f.bu[r] - shift[r], "eval");
    for (const auto& [col, val] : per_row[r]) prog.add_coeff(row, y, col, val);
  }
  for (int j = 0; j < f.p; ++j) prog.add_objective(y, j, f.cy[j]);

  const SolverResult res = solve(to_standard_form(prog).first, settings);
  switch (res.status) {
    case SolveStatus::Optimal:
      return fixed + res.objective;
    case SolveStatus::PrimalInfeasible:
      return std::numeric_limits<double>::infinity();
    case SolveStatus::DualInfeasible:
      return -std::numeric_limits<double>::infinity();
    default:
      throw std::runtime_error("evaluate_via_solver: solver reported " +
                               std::string(status_name(res.status)));
  }
}

}  // namespace lakit
