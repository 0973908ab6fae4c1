#include "lakit/ipm.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lakit {

const char* status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::PrimalInfeasible: return "PrimalInfeasible";
    case SolveStatus::DualInfeasible: return "DualInfeasible";
    case SolveStatus::MaxIterations: return "MaxIterations";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

// ---------------------------------------------------------------- standard form

std::pair<StandardForm, StandardIndex> to_standard_form(const ConicProgram& prog) {
  StandardForm sf;
  StandardIndex idx;

  const int nv = prog.num_vars();
  idx.std_of_var.assign(nv, -1);

  // Free entries first, then cone entries in declaration order.
  int nfree = 0;
  for (int b = 0; b < prog.num_blocks(); ++b) {
    const auto& blk = prog.block(b);
    int at = blk.offset;
    for (const auto& cone : blk.cones.blocks) {
      if (cone.kind == ConeKind::Free)
        for (int k = 0; k < cone.dim; ++k) idx.std_of_var[at + k] = nfree++;
      at += cone.dim;
    }
  }
  int ncone = 0;
  ConeProduct cones;
  if (nfree > 0) cones.append(ConeKind::Free, nfree);
  for (int b = 0; b < prog.num_blocks(); ++b) {
    const auto& blk = prog.block(b);
    int at = blk.offset;
    for (const auto& cone : blk.cones.blocks) {
      if (cone.kind != ConeKind::Free) {
        for (int k = 0; k < cone.dim; ++k) idx.std_of_var[at + k] = nfree + ncone + k;
        ncone += cone.dim;
        cones.append(cone);
      }
      at += cone.dim;
    }
  }

  // Row plan: equalities kept, one slack per one-sided bound, two for a
  // finite range, vacuous rows dropped.
  const int nr = prog.num_rows();
  int mrows = 0, nslack = 0;
  std::vector<double> rhs;
  struct SlackPlan { int std_row; double sign; };
  std::vector<SlackPlan> slacks;
  idx.std_rows.assign(nr, {});
  for (int r = 0; r < nr; ++r) {
    const double lo = prog.row_lo(r), hi = prog.row_hi(r);
    const bool flo = std::isfinite(lo), fhi = std::isfinite(hi);
    if (!flo && !fhi) {
      sf.warnings.push_back("row " + std::to_string(r) + " (" + prog.row_group(r) +
                            ") has no finite bound; dropped");
      continue;
    }
    if (flo && fhi && lo == hi) {
      idx.std_rows[r].push_back(mrows);
      rhs.push_back(lo);
      ++mrows;
      continue;
    }
    if (fhi) {  // a.z + s = hi, s >= 0
      idx.std_rows[r].push_back(mrows);
      rhs.push_back(hi);
      slacks.push_back({mrows, +1.0});
      ++mrows;
      ++nslack;
    }
    if (flo) {  // a.z - s = lo, s >= 0
      idx.std_rows[r].push_back(mrows);
      rhs.push_back(lo);
      slacks.push_back({mrows, -1.0});
      ++mrows;
      ++nslack;
    }
  }

  const int n = nv + nslack;
  idx.var_of_std.assign(n, -1);
  for (int v = 0; v < nv; ++v) idx.var_of_std[idx.std_of_var[v]] = v;
  if (nslack > 0) cones.append(ConeKind::NonNeg, nslack);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(prog.triplets().size() * 2 + nslack);
  for (const auto& t : prog.triplets())
    for (int sr : idx.std_rows[t.row()]) trips.emplace_back(sr, idx.std_of_var[t.col()], t.value());
  for (int k = 0; k < nslack; ++k) trips.emplace_back(slacks[k].std_row, nv + k, slacks[k].sign);

  sf.A.resize(mrows, n);
  sf.A.setFromTriplets(trips.begin(), trips.end());
  sf.A.makeCompressed();
  sf.b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), mrows);
  sf.c = Eigen::VectorXd::Zero(n);
  const auto& obj = prog.objective();
  for (int v = 0; v < nv; ++v) sf.c[idx.std_of_var[v]] = obj[v];
  sf.cones = cones;
  return {std::move(sf), std::move(idx)};
}

// ---------------------------------------------------------------- residuals

Residuals residuals(const StandardForm& sf, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& s) {
  Residuals r;
  const double cx = sf.c.dot(x), by = sf.b.size() ? sf.b.dot(y) : 0.0;
  r.primal = (sf.A * x - sf.b).norm() / (1.0 + sf.b.norm());
  r.dual = (sf.A.transpose() * y + s - sf.c).norm() / (1.0 + sf.c.norm());
  r.gap = std::abs(cx - by) / (1.0 + std::abs(cx));
  return r;
}

// ---------------------------------------------------------------- cone kernels

namespace {

struct Block {
  ConeKind kind;  // NonNeg or Quad after internal rotation
  int off;        // offset within the cone part
  int dim;
  bool from_rquad;
};

struct Scaling {
  // NonNeg: d2 = s/x per entry (the W^-2 diagonal), lam = sqrt(x s).
  // Quad: eta, wb (unit hyperbolic point), lam = W^-1 x.
  Eigen::VectorXd d2;
  double eta = 1.0;
  Eigen::VectorXd wb;
  Eigen::VectorXd lam;
};

Eigen::VectorXd jmul(const Eigen::VectorXd& z) {  // J z = (z0, -zbar)
  Eigen::VectorXd r = -z;
  r[0] = z[0];
  return r;
}

// Wbar z where Wbar = [[w0, wt'], [wt, I + wt wt'/(1+w0)]].
Eigen::VectorXd wbar_apply(const Eigen::VectorXd& wb, const Eigen::VectorXd& z) {
  const int d = static_cast<int>(z.size());
  Eigen::VectorXd r(d);
  const double w0 = wb[0];
  const auto wt = wb.tail(d - 1);
  const auto zt = z.tail(d - 1);
  const double dot = wt.dot(zt);
  r[0] = w0 * z[0] + dot;
  r.tail(d - 1) = zt + (z[0] + dot / (1.0 + w0)) * wt;
  return r;
}

Eigen::VectorXd quad_prod(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const int d = static_cast<int>(u.size());
  Eigen::VectorXd r(d);
  r[0] = u.dot(v);
  r.tail(d - 1) = u[0] * v.tail(d - 1) + v[0] * u.tail(d - 1);
  return r;
}

// z with lam o z = d (Jordan division in the quadratic algebra).
Eigen::VectorXd quad_div(const Eigen::VectorXd& lam, const Eigen::VectorXd& d) {
  const int n = static_cast<int>(lam.size());
  const double det = lam[0] * lam[0] - lam.tail(n - 1).squaredNorm();
  Eigen::VectorXd z(n);
  z[0] = (lam[0] * d[0] - lam.tail(n - 1).dot(d.tail(n - 1))) / det;
  z.tail(n - 1) = (d.tail(n - 1) - z[0] * lam.tail(n - 1)) / lam[0];
  return z;
}

double quad_margin(const Eigen::VectorXd& z) {
  return z[0] - (z.size() > 1 ? z.tail(z.size() - 1).norm() : 0.0);
}

// Largest step keeping z + alpha dz inside the block's cone.
double step_to_boundary(const Block& blk, const Eigen::VectorXd& z, const Eigen::VectorXd& dz) {
  const double inf = std::numeric_limits<double>::infinity();
  if (blk.kind == ConeKind::NonNeg) {
    double a = inf;
    for (int i = 0; i < blk.dim; ++i)
      if (dz[i] < 0.0) a = std::min(a, -z[i] / dz[i]);
    return a;
  }
  const int d = blk.dim;
  // Membership needs both z0 >= ||zt|| and z0 >= 0.  The z0 cap matters when
  // the ray passes near the apex: cancellation in the quadratic can hide its
  // roots there, while the sign flip of z0 is computed exactly.
  double best = dz[0] < 0.0 ? -z[0] / dz[0] : inf;
  const double c0 = z[0] * z[0] - z.tail(d - 1).squaredNorm();
  const double b0 = 2.0 * (z[0] * dz[0] - z.tail(d - 1).dot(dz.tail(d - 1)));
  const double a0 = dz[0] * dz[0] - dz.tail(d - 1).squaredNorm();
  if (std::abs(a0) < 1e-14 * (std::abs(b0) + std::abs(c0) + 1e-300))
    return std::min(best, b0 < 0.0 ? -c0 / b0 : inf);
  const double disc = b0 * b0 - 4.0 * a0 * c0;
  if (disc < 0.0) return best;  // a0 > 0 branch: the quadratic never crosses
  const double sq = std::sqrt(disc);
  const double q = -0.5 * (b0 + (b0 >= 0.0 ? sq : -sq));
  for (double root : {a0 != 0.0 ? q / a0 : inf, q != 0.0 ? c0 / q : inf})
    if (root > 0.0 && root < best) best = root;
  return best;
}

}  // namespace

// ---------------------------------------------------------------- solver

SolverResult solve(const StandardForm& sf, const SolverSettings& settings) {
  const int n = static_cast<int>(sf.A.cols());
  const int m = static_cast<int>(sf.A.rows());
  if (sf.c.size() != n || sf.b.size() != m)
    throw std::invalid_argument("solve: inconsistent problem dimensions");
  if (sf.cones.total_dim() != n)
    throw std::invalid_argument("solve: cone product does not cover all variables");

  SolverResult res;
  if (n == 0) {
    const bool feas = m == 0 || sf.b.norm() == 0.0;
    res.status = feas ? SolveStatus::Optimal : SolveStatus::PrimalInfeasible;
    res.x.resize(0);
    res.s.resize(0);
    res.y = Eigen::VectorXd::Zero(m);
    if (!feas) res.y = sf.b / sf.b.squaredNorm();  // A'y vacuous, b.y = 1
    if (m) res.primal_residual = feas ? 0.0 : sf.b.norm() / (1.0 + sf.b.norm());
    return res;
  }

  // Internal layout: free entries first, one Block per cone, RQuad blocks
  // rotated onto Quad by the symmetric involution
  //   (z0, z1, zr) -> ((z0+z1)/sqrt2, (z0-z1)/sqrt2, zr).
  int nfree = 0;
  for (const auto& cone : sf.cones.blocks)
    if (cone.kind == ConeKind::Free) nfree += cone.dim;

  std::vector<Block> blocks;
  double nu = 0.0;
  std::vector<int> perm(n);  // internal index -> external index
  {
    int ifree = 0, icone = nfree, extoff = 0;
    for (const auto& cone : sf.cones.blocks) {
      if (cone.kind == ConeKind::Free) {
        for (int k = 0; k < cone.dim; ++k) perm[ifree++] = extoff + k;
      } else {
        Block blk;
        blk.kind = cone.kind == ConeKind::NonNeg ? ConeKind::NonNeg : ConeKind::Quad;
        blk.from_rquad = cone.kind == ConeKind::RQuad;
        blk.off = icone - nfree;
        blk.dim = cone.dim;
        blocks.push_back(blk);
        nu += cone.kind == ConeKind::NonNeg ? cone.dim : 1.0;
        for (int k = 0; k < cone.dim; ++k) perm[icone++] = extoff + k;
      }
      extoff += cone.dim;
    }
  }
  const int nf = nfree, nk = n - nfree;

  Eigen::SparseMatrix<double> A(m, n);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
  {
    std::vector<int> inv(n);
    for (int i = 0; i < n; ++i) inv[perm[i]] = i;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(sf.A.nonZeros());
    for (int cidx = 0; cidx < sf.A.outerSize(); ++cidx)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sf.A, cidx); it; ++it)
        trips.emplace_back(static_cast<int>(it.row()), inv[static_cast<int>(it.col())],
                           it.value());
    A.setFromTriplets(trips.begin(), trips.end());
    for (int i = 0; i < n; ++i) c[inv[i]] = sf.c[i];

    bool any_rquad = false;
    for (const auto& blk : blocks) any_rquad |= blk.from_rquad;
    if (any_rquad) {
      const double s2 = 1.0 / std::sqrt(2.0);
      std::vector<Eigen::Triplet<double>> rt;
      std::vector<bool> plain(n, true);
      for (const auto& blk : blocks) {
        if (!blk.from_rquad) continue;
        const int j0 = nf + blk.off, j1 = j0 + 1;
        plain[j0] = plain[j1] = false;
        rt.emplace_back(j0, j0, s2);
        rt.emplace_back(j0, j1, s2);
        rt.emplace_back(j1, j0, s2);
        rt.emplace_back(j1, j1, -s2);
      }
      for (int i = 0; i < n; ++i)
        if (plain[i]) rt.emplace_back(i, i, 1.0);
      Eigen::SparseMatrix<double> R(n, n);
      R.setFromTriplets(rt.begin(), rt.end());
      A = (A * R).eval();
      c = (R * c).eval();
    }
    A.makeCompressed();
  }
  Eigen::VectorXd b = sf.b;
  const double bnorm = 1.0 + b.norm(), cnorm = 1.0 + c.norm();

  // Ruiz equilibration in the internal layout.  Rows scale freely, free and
  // NonNeg columns per entry, Quad blocks by one shared factor so the cone is
  // preserved.  Stopping and the reported residuals stay in the original
  // units; only the iterates and the KKT systems see the scaled data.
  Eigen::VectorXd rvec = Eigen::VectorXd::Ones(m);
  Eigen::VectorXd dvec = Eigen::VectorXd::Ones(n);
  for (int pass = 0; pass < 10; ++pass) {
    Eigen::VectorXd rmax = Eigen::VectorXd::Zero(m), cmax = Eigen::VectorXd::Zero(n);
    for (int cidx = 0; cidx < A.outerSize(); ++cidx)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, cidx); it; ++it) {
        const double a = std::abs(it.value());
        rmax[it.row()] = std::max(rmax[it.row()], a);
        cmax[it.col()] = std::max(cmax[it.col()], a);
      }
    for (const auto& blk : blocks) {
      if (blk.kind != ConeKind::Quad) continue;
      const double g = cmax.segment(nf + blk.off, blk.dim).maxCoeff();
      cmax.segment(nf + blk.off, blk.dim).setConstant(g);
    }
    double spread = 1.0;
    for (int i = 0; i < m; ++i) {
      if (rmax[i] == 0.0) rmax[i] = 1.0;
      spread = std::max({spread, rmax[i], 1.0 / rmax[i]});
    }
    for (int j = 0; j < n; ++j) {
      if (cmax[j] == 0.0) cmax[j] = 1.0;
      spread = std::max({spread, cmax[j], 1.0 / cmax[j]});
    }
    if (spread < 1.1) break;
    const Eigen::VectorXd rs = rmax.array().sqrt().inverse();
    const Eigen::VectorXd cs = cmax.array().sqrt().inverse();
    for (int cidx = 0; cidx < A.outerSize(); ++cidx)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, cidx); it; ++it)
        it.valueRef() *= rs[it.row()] * cs[it.col()];
    rvec = rvec.cwiseProduct(rs);
    dvec = dvec.cwiseProduct(cs);
  }
  b = b.cwiseProduct(rvec);
  c = c.cwiseProduct(dvec);

  auto unrotate = [&](Eigen::VectorXd& z) {
    const double s2 = 1.0 / std::sqrt(2.0);
    for (const auto& blk : blocks) {
      if (!blk.from_rquad) continue;
      const double a0 = z[nf + blk.off], a1 = z[nf + blk.off + 1];
      z[nf + blk.off] = s2 * (a0 + a1);
      z[nf + blk.off + 1] = s2 * (a0 - a1);
    }
  };

  // Initial point: free 0, NonNeg 1, Quad identity; RQuad-born blocks are
  // the rotated image of (1,1,0,..).  Duals mirror the primal cone part.
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (const auto& blk : blocks) {
    const int o = nf + blk.off;
    if (blk.kind == ConeKind::NonNeg) {
      x.segment(o, blk.dim).setOnes();
      s.segment(o, blk.dim).setOnes();
    } else {
      x[o] = blk.from_rquad ? std::sqrt(2.0) : 1.0;
      s[o] = x[o];
    }
  }

  const int nkkt = n + m;
  Eigen::SparseMatrix<double> K(nkkt, nkkt);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>>
      ldlt;
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  bool lu_ready = false;
  bool analyzed = false;
  double eps = settings.static_regularization;
  std::vector<Scaling> scal(blocks.size());

  auto assemble_kkt = [&](double reg) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(A.nonZeros() * 2 + n + m + nk * 4);
    for (int i = 0; i < nf; ++i) trips.emplace_back(i, i, -reg);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& blk = blocks[bi];
      const int o = nf + blk.off;
      if (blk.kind == ConeKind::NonNeg) {
        for (int i = 0; i < blk.dim; ++i)
          trips.emplace_back(o + i, o + i, -scal[bi].d2[i] - reg);
      } else {
        // W^-2 = eta^-2 (2 u u' - J) with u = J wb.
        const Eigen::VectorXd u = jmul(scal[bi].wb);
        const double ie2 = 1.0 / (scal[bi].eta * scal[bi].eta);
        for (int i = 0; i < blk.dim; ++i)
          for (int j = 0; j < blk.dim; ++j) {
            double v = 2.0 * u[i] * u[j];
            if (i == j) v -= (i == 0 ? 1.0 : -1.0);
            trips.emplace_back(o + i, o + j, -ie2 * v - (i == j ? reg : 0.0));
          }
      }
    }
    for (int cidx = 0; cidx < A.outerSize(); ++cidx)
      for (Eigen::SparseMatrix<double>::InnerIterator it(A, cidx); it; ++it) {
        trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                           it.value());
        trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                           it.value());
      }
    for (int r = 0; r < m; ++r) trips.emplace_back(n + r, n + r, reg);
    K.setFromTriplets(trips.begin(), trips.end());
  };

  // Residual refinement against the unregularized operator.
  auto kkt_solve = [&](const Eigen::VectorXd& rhs, double reg) {
    auto resid = [&](const Eigen::VectorXd& zz) {
      Eigen::VectorXd r = rhs - K.selfadjointView<Eigen::Lower>() * zz;
      r.head(n) -= reg * zz.head(n);
      r.tail(m) += reg * zz.tail(m);
      return r;
    };
    Eigen::VectorXd z = ldlt.solve(rhs);
    Eigen::VectorXd r = resid(z);
    double rn = r.lpNorm<Eigen::Infinity>();
    const double target = 1e-13 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    // Refinement can diverge when the factor is poor at extreme barrier
    // conditioning; keep only corrections that actually shrink the residual.
    for (int pass = 0; pass < 8 && rn > target; ++pass) {
      const Eigen::VectorXd z2 = z + ldlt.solve(r);
      const Eigen::VectorXd r2 = resid(z2);
      const double rn2 = r2.lpNorm<Eigen::Infinity>();
      if (rn2 < rn) {
        z = z2;
        r = r2;
      }
      if (rn2 >= 0.5 * rn) break;
      rn = rn2;
    }
    // Unpivoted LDLT can stop contracting near the barrier's conditioning
    // limit, leaving a dual-residual noise floor the iteration cannot cross.
    // A pivoted LU factor of the same matrix restores machine-level backward
    // error; it is built at most once per KKT matrix and only on demand.
    if (rn > 100.0 * target) {
      if (!lu_ready) {
        lu.compute(K);
        lu_ready = lu.info() == Eigen::Success;
      }
      if (lu_ready) {
        Eigen::VectorXd z2 = lu.solve(rhs);
        for (int pass = 0; pass < 3; ++pass) {
          const Eigen::VectorXd r2 = resid(z2);
          if (r2.lpNorm<Eigen::Infinity>() <= target) break;
          z2 += lu.solve(r2);
        }
        if (resid(z2).lpNorm<Eigen::Infinity>() < rn) z = z2;
      }
    }
    return z;
  };

  auto update_scalings = [&]() {
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& blk = blocks[bi];
      const int o = nf + blk.off;
      auto& sc = scal[bi];
      if (blk.kind == ConeKind::NonNeg) {
        sc.d2 = s.segment(o, blk.dim).array() / x.segment(o, blk.dim).array();
        sc.lam = (x.segment(o, blk.dim).array() * s.segment(o, blk.dim).array()).sqrt();
      } else {
        const Eigen::VectorXd xb = x.segment(o, blk.dim), sb = s.segment(o, blk.dim);
        const double ax = std::sqrt(xb[0] * xb[0] - xb.tail(blk.dim - 1).squaredNorm());
        const double as = std::sqrt(sb[0] * sb[0] - sb.tail(blk.dim - 1).squaredNorm());
        const Eigen::VectorXd xt = xb / ax, st = sb / as;
        const double gamma = std::sqrt(0.5 * (1.0 + xt.dot(st)));
        sc.wb = (xt + jmul(st)) / (2.0 * gamma);
        sc.eta = std::sqrt(ax / as);
        sc.lam = jmul(wbar_apply(sc.wb, jmul(xb))) / sc.eta;  // W^-1 x
      }
    }
  };

  // Cone-part operators; all arguments sized nk.
  auto apply_winv = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(nk);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& blk = blocks[bi];
      const auto vb = v.segment(blk.off, blk.dim);
      if (blk.kind == ConeKind::NonNeg)
        r.segment(blk.off, blk.dim) = vb.array() * scal[bi].d2.array().sqrt();
      else
        r.segment(blk.off, blk.dim) =
            jmul(wbar_apply(scal[bi].wb, jmul(vb))) / scal[bi].eta;
    }
    return r;
  };
  auto apply_w = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd r(nk);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& blk = blocks[bi];
      const auto vb = v.segment(blk.off, blk.dim);
      if (blk.kind == ConeKind::NonNeg)
        r.segment(blk.off, blk.dim) = vb.array() / scal[bi].d2.array().sqrt();
      else
        r.segment(blk.off, blk.dim) = scal[bi].eta * wbar_apply(scal[bi].wb, vb);
    }
    return r;
  };
  auto jordan_prod = [&](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    Eigen::VectorXd r(nk);
    for (const auto& blk : blocks) {
      const auto ub = u.segment(blk.off, blk.dim), vb = v.segment(blk.off, blk.dim);
      if (blk.kind == ConeKind::NonNeg)
        r.segment(blk.off, blk.dim) = ub.array() * vb.array();
      else
        r.segment(blk.off, blk.dim) = quad_prod(ub, vb);
    }
    return r;
  };
  auto jordan_div = [&](const Eigen::VectorXd& lam, const Eigen::VectorXd& d) {
    Eigen::VectorXd r(nk);
    for (const auto& blk : blocks) {
      const auto lb = lam.segment(blk.off, blk.dim), db = d.segment(blk.off, blk.dim);
      if (blk.kind == ConeKind::NonNeg)
        r.segment(blk.off, blk.dim) = db.array() / lb.array();
      else
        r.segment(blk.off, blk.dim) = quad_div(lb, db);
    }
    return r;
  };
  auto max_step = [&](const Eigen::VectorXd& z, const Eigen::VectorXd& dz) {
    double a = std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks)
      a = std::min(a, step_to_boundary(blk, z.segment(blk.off, blk.dim),
                                       dz.segment(blk.off, blk.dim)));
    return a;
  };
  auto min_margin = [&](const Eigen::VectorXd& z) {
    double mg = std::numeric_limits<double>::infinity();
    for (const auto& blk : blocks) {
      const auto zb = z.segment(blk.off, blk.dim);
      mg = std::min(mg, blk.kind == ConeKind::NonNeg ? zb.minCoeff() : quad_margin(zb));
    }
    return mg;
  };

  // Neighbourhood guard: a product pair orders of magnitude below the mean
  // marks a degenerating pair, and the scalings built from such a point lose
  // the KKT system to roundoff.  Keeping every Jordan eigenvalue of x o s
  // above a fixed fraction of mu bounds the scaling spread independently of
  // how small mu gets; cone membership alone does not.
  const double gamma_nbhd = 1e-3;
  auto centered = [&](const Eigen::VectorXd& xn, const Eigen::VectorXd& sn) {
    double mn = std::numeric_limits<double>::infinity(), tot = 0.0;
    for (const auto& blk : blocks) {
      const auto xb = xn.segment(blk.off, blk.dim), sb = sn.segment(blk.off, blk.dim);
      if (blk.kind == ConeKind::NonNeg) {
        for (int i = 0; i < blk.dim; ++i) {
          const double p = xb[i] * sb[i];
          mn = std::min(mn, p);
          tot += p;
        }
      } else {
        const double z0 = xb.dot(sb);
        const Eigen::VectorXd zb =
            xb[0] * sb.tail(blk.dim - 1) + sb[0] * xb.tail(blk.dim - 1);
        mn = std::min(mn, z0 - zb.norm());
        tot += z0;
      }
    }
    return mn >= gamma_nbhd * (tot / nu);
  };

  Eigen::VectorXd e = Eigen::VectorXd::Zero(nk);
  for (const auto& blk : blocks) {
    if (blk.kind == ConeKind::NonNeg)
      e.segment(blk.off, blk.dim).setOnes();
    else
      e[blk.off] = 1.0;
  }

  auto finish = [&](SolveStatus st) -> SolverResult& {
    res.status = st;
    Eigen::VectorXd xo = x.cwiseProduct(dvec), so = s.cwiseQuotient(dvec);
    unrotate(xo);
    unrotate(so);
    res.x.resize(n);
    res.s.resize(n);
    for (int i = 0; i < n; ++i) {
      res.x[perm[i]] = xo[i];
      res.s[perm[i]] = so[i];
    }
    res.y = y.cwiseProduct(rvec);
    res.objective = sf.c.dot(res.x);
    res.dual_objective = m ? sf.b.dot(res.y) : 0.0;
    const Residuals rr = residuals(sf, res.x, res.y, res.s);
    res.primal_residual = rr.primal;
    res.dual_residual = rr.dual;
    res.gap = rr.gap;
    return res;
  };

  // Certificates are normalized so b.y = 1 resp. c.x = -1.
  auto try_primal_cert = [&](double tol) {
    const double by = m ? b.dot(y) : 0.0;
    if (!(by > 1e-12)) return false;
    const Eigen::VectorXd yh = y / by, sh = s / by;
    const double viol = (A.transpose() * yh + sh).lpNorm<Eigen::Infinity>();
    if (viol > tol * (1.0 + yh.lpNorm<Eigen::Infinity>())) return false;
    x.setZero();
    y = yh;
    s = sh;
    finish(SolveStatus::PrimalInfeasible);
    return true;
  };
  auto try_dual_cert = [&](double tol) {
    const double cx = c.dot(x);
    if (!(cx < -1e-12)) return false;
    const Eigen::VectorXd xh = x / (-cx);
    const double viol = m ? (A * xh).lpNorm<Eigen::Infinity>() : 0.0;
    if (viol > tol * (1.0 + xh.lpNorm<Eigen::Infinity>())) return false;
    x = xh;
    y.setZero();
    s.setZero();
    finish(SolveStatus::DualInfeasible);
    return true;
  };

  const double init_norm = std::max(1.0, x.lpNorm<Eigen::Infinity>());
  int consecutive_small = 0;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    const Eigen::VectorXd rp = b - A * x;
    const Eigen::VectorXd rd = c - A.transpose() * y - s;
    const double cx = c.dot(x), by = m ? b.dot(y) : 0.0;
    const double rpn = rp.cwiseQuotient(rvec).norm() / bnorm;
    const double rdn = rd.cwiseQuotient(dvec).norm() / cnorm;
    const double gap = std::abs(cx - by) / (1.0 + std::abs(cx));
    const double mu = nk > 0 ? x.segment(nf, nk).dot(s.segment(nf, nk)) / nu : 0.0;

    IterationRecord rec;
    rec.iter = iter;
    rec.mu = mu;
    rec.primal_residual = rpn;
    rec.dual_residual = rdn;
    rec.gap = gap;
    res.log.push_back(rec);
    res.iterations = iter;
    if (settings.verbose)
      std::fprintf(stderr, "ipm %3d mu=%9.2e rp=%9.2e rd=%9.2e gap=%9.2e\n", iter, mu, rpn,
                   rdn, gap);

    if (!std::isfinite(mu) || !std::isfinite(rpn) || !std::isfinite(rdn)) {
      if (try_primal_cert(1e-6)) return res;
      if (try_dual_cert(1e-6)) return res;
      return finish(SolveStatus::NumericalFailure);
    }
    if (rpn <= settings.tol_feas && rdn <= settings.tol_feas && gap <= settings.tol_gap)
      return finish(SolveStatus::Optimal);
    if (try_primal_cert(settings.tol_feas)) return res;
    if (try_dual_cert(settings.tol_feas)) return res;
    const double iterate_norm = std::max({x.lpNorm<Eigen::Infinity>(),
                                          y.lpNorm<Eigen::Infinity>(),
                                          s.lpNorm<Eigen::Infinity>()});
    if (iterate_norm > 1e6 * init_norm) {
      // Diverging iterates on an unsolvable problem purify into a Farkas
      // direction; accept it at a looser tolerance before giving up.
      if (try_primal_cert(1e-6)) return res;
      if (try_dual_cert(1e-6)) return res;
      if (iterate_norm > 1e10 * init_norm) return finish(SolveStatus::NumericalFailure);
    }
    if (iter == settings.max_iterations) return finish(SolveStatus::MaxIterations);

    update_scalings();
    double reg = eps;
    for (;;) {
      assemble_kkt(reg);
      lu_ready = false;
      if (!analyzed) {
        ldlt.analyzePattern(K);
        analyzed = true;
      }
      ldlt.factorize(K);
      if (ldlt.info() == Eigen::Success) break;
      reg *= 10.0;
      if (reg > 1e-4) return finish(SolveStatus::NumericalFailure);
    }
    eps = std::max(settings.static_regularization, reg);

    Eigen::VectorXd lam(nk), lamlam(nk);
    if (nk > 0) {
      for (size_t bi = 0; bi < blocks.size(); ++bi)
        lam.segment(blocks[bi].off, blocks[bi].dim) = scal[bi].lam;
      lamlam = jordan_prod(lam, lam);
    }

    auto newton = [&](const Eigen::VectorXd& dtarget, Eigen::VectorXd& dx,
                      Eigen::VectorXd& dy, Eigen::VectorXd& ds) {
      Eigen::VectorXd rhs(nkkt);
      rhs.head(nf) = rd.head(nf);
      Eigen::VectorXd wig;
      if (nk > 0) {
        wig = apply_winv(jordan_div(lam, dtarget));
        rhs.segment(nf, nk) = rd.segment(nf, nk) - wig;
      }
      rhs.tail(m) = rp;
      const Eigen::VectorXd z = kkt_solve(rhs, reg);
      dx = z.head(n);
      dy = z.tail(m);
      ds = Eigen::VectorXd::Zero(n);
      // ds from the scaling equation keeps the complementarity row exact,
      // which is what drives mu; the dual row absorbs the KKT solve error
      // and recovers because rd re-enters the right-hand side every time.
      if (nk > 0)
        ds.segment(nf, nk) = wig - apply_winv(apply_winv(dx.segment(nf, nk)));
    };

    double sigma = 0.0;
    Eigen::VectorXd dx, dy, ds;
    if (nk > 0) {
      Eigen::VectorXd dxa, dya, dsa;
      newton(-lamlam, dxa, dya, dsa);
      const double amax = std::min({1.0, max_step(x.segment(nf, nk), dxa.segment(nf, nk)),
                                    max_step(s.segment(nf, nk), dsa.segment(nf, nk))});
      const double mu_aff = (x.segment(nf, nk) + amax * dxa.segment(nf, nk))
                                .dot(s.segment(nf, nk) + amax * dsa.segment(nf, nk)) /
                            nu;
      sigma = std::clamp(std::pow(std::max(0.0, mu_aff) / mu, 3.0), 0.0, 1.0);
      // Centering floor: complementarity must not outrun feasibility.  Once
      // mu falls orders below the residual level, the scalings get so
      // ill-conditioned that the recovered directions stop reducing rd at
      // all, and the residual rows never converge.
      const double feas = std::max(rpn, rdn);
      if (feas > 1e4 * mu)
        sigma = std::max(sigma, 0.9);
      else if (feas > 1e2 * mu)
        sigma = std::max(sigma, 0.5);
      const Eigen::VectorXd corr =
          jordan_prod(apply_winv(dxa.segment(nf, nk)), apply_w(dsa.segment(nf, nk)));
      const Eigen::VectorXd dtarget = sigma * mu * e - lamlam - corr;
      newton(dtarget, dx, dy, ds);
    } else {
      Eigen::VectorXd empty(0);
      newton(empty, dx, dy, ds);
    }

    double alpha = 1.0;
    if (nk > 0) {
      const double amax = std::min(max_step(x.segment(nf, nk), dx.segment(nf, nk)),
                                   max_step(s.segment(nf, nk), ds.segment(nf, nk)));
      alpha = std::min(1.0, settings.step_fraction * amax);
      bool inside = false;
      for (int tries = 0; tries < 30 && !inside; ++tries) {
        const Eigen::VectorXd xn = x.segment(nf, nk) + alpha * dx.segment(nf, nk);
        const Eigen::VectorXd sn = s.segment(nf, nk) + alpha * ds.segment(nf, nk);
        inside = min_margin(xn) > 0.0 && min_margin(sn) > 0.0 && centered(xn, sn);
        if (!inside) alpha *= 0.8;
      }
      if (!inside) alpha = 0.0;  // a conic iterate is worth more than progress
    }

    x += alpha * dx;
    y += alpha * dy;
    s += alpha * ds;
    res.log.back().step = alpha;
    res.log.back().sigma = sigma;

    if (alpha < 1e-9) {
      if (++consecutive_small >= 3) {
        if (try_primal_cert(1e-6)) return res;
        if (try_dual_cert(1e-6)) return res;
        return finish(SolveStatus::NumericalFailure);
      }
    } else {
      consecutive_small = 0;
    }
  }
  return finish(SolveStatus::MaxIterations);
}

std::string format_log(const std::vector<IterationRecord>& log) {
  std::string out = "iter            mu          rp          rd         gap       alpha       sigma\n";
  char buf[128];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%4d  %12.6e %11.5e %11.5e %11.5e %11.5e %11.5e\n", r.iter,
                  r.mu, r.primal_residual, r.dual_residual, r.gap, r.step, r.sigma);
    out += buf;
  }
  return out;
}

ProgramSolution solve_program(const ConicProgram& prog, const SolverSettings& settings) {
  auto [sf, idx] = to_standard_form(prog);
  SolverResult res = solve(sf, settings);

  ProgramSolution ps;
  ps.status = res.status;
  ps.x.resize(prog.num_vars());
  for (int v = 0; v < prog.num_vars(); ++v) ps.x[v] = res.x[idx.std_of_var[v]];
  ps.row_dual = Eigen::VectorXd::Zero(prog.num_rows());
  for (int r = 0; r < prog.num_rows(); ++r)
    for (int sr : idx.std_rows[r]) ps.row_dual[r] += res.y[sr];
  ps.objective = res.objective;
  ps.dual_objective = res.dual_objective;
  ps.primal_residual = res.primal_residual;
  ps.dual_residual = res.dual_residual;
  ps.gap = res.gap;
  ps.iterations = res.iterations;
  ps.log = std::move(res.log);
  return ps;
}

}  // namespace lakit
