#include "lakit/cbf.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lakit {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* cone_keyword(ConeKind kind) {
  switch (kind) {
    case ConeKind::Free: return "F";
    case ConeKind::NonNeg: return "L+";
    case ConeKind::Quad: return "Q";
    case ConeKind::RQuad: return "QR";
  }
  throw std::logic_error("cbf_text: unknown cone kind");
}

}  // namespace

std::string cbf_text(const StandardForm& sf) {
  std::ostringstream o;
  o << "VER\n1\n\n";
  o << "OBJSENSE\nMIN\n\n";

  o << "VAR\n" << sf.c.size() << " " << sf.cones.blocks.size() << "\n";
  for (const auto& b : sf.cones.blocks) o << cone_keyword(b.kind) << " " << b.dim << "\n";
  o << "\n";

  const int m = static_cast<int>(sf.b.size());
  o << "CON\n" << m << " 1\nL= " << m << "\n\n";

  int obj_nnz = 0;
  for (int j = 0; j < sf.c.size(); ++j)
    if (sf.c[j] != 0.0) ++obj_nnz;
  o << "OBJACOORD\n" << obj_nnz << "\n";
  for (int j = 0; j < sf.c.size(); ++j)
    if (sf.c[j] != 0.0) o << j << " " << fmt(sf.c[j]) << "\n";
  o << "\n";

  int a_nnz = 0;
  for (int k = 0; k < sf.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sf.A, k); it; ++it)
      if (it.value() != 0.0) ++a_nnz;
  o << "ACOORD\n" << a_nnz << "\n";
  for (int k = 0; k < sf.A.outerSize(); ++k)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sf.A, k); it; ++it)
      if (it.value() != 0.0) o << it.row() << " " << it.col() << " " << fmt(it.value()) << "\n";
  o << "\n";

  int b_nnz = 0;
  for (int i = 0; i < m; ++i)
    if (sf.b[i] != 0.0) ++b_nnz;
  o << "BCOORD\n" << b_nnz << "\n";
  for (int i = 0; i < m; ++i)
    if (sf.b[i] != 0.0) o << i << " " << fmt(sf.b[i]) << "\n";

  return o.str();
}

void export_cbf(const std::string& path, const StandardForm& sf) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("export_cbf: cannot open " + path);
  out << cbf_text(sf);
  if (!out) throw std::runtime_error("export_cbf: write failed for " + path);
}

}  // namespace lakit
