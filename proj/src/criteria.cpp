#include "lakit/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lakit {

namespace {

constexpr double kPi = 3.14159265358979323846;

Eigen::SparseMatrix<double> from_dense(int rows, int cols,
                                       const std::vector<Eigen::Triplet<double>>& t) {
  Eigen::SparseMatrix<double> m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  m.makeCompressed();
  return m;
}

ConicFunction make_descriptor(int n, const ConeProduct& cones,
                              const std::vector<Eigen::Triplet<double>>& at,
                              const std::vector<Eigen::Triplet<double>>& bt, int rows,
                              const Eigen::VectorXd& rhs, const Eigen::VectorXd& cx,
                              const Eigen::VectorXd& cy) {
  ConicFunction f;
  f.n = n;
  f.p = cones.total_dim();
  f.cones = cones;
  f.A = from_dense(rows, n, at);
  f.B = from_dense(rows, f.p, bt);
  f.bl = rhs;
  f.bu = rhs;
  f.cx = cx;
  f.cy = cy;
  return f;
}

// Shared template for the cone-type plane criteria
//   sqrt((sxx-syy)^2 + 4 sxy^2) <= 2 C - S (sxx + syy),
// covering Mohr-Coulomb (C = c cos phi, S = sin phi), Tresca and plane
// strain von Mises (C = k, S = 0) and the plane strain reduction of
// Drucker-Prager.  The support form stays well posed at S = 0.
struct ConeTypeCriterion {
  double C, S;

  ConicFunction indicator() const {
    // y = M sigma + (2C, 0, 0), y in Q3, with M rows
    // (-S,-S,0), (1,-1,0), (0,0,2).
    std::vector<Eigen::Triplet<double>> at{{0, 0, -S}, {0, 1, -S}, {1, 0, 1.0},
                                           {1, 1, -1.0}, {2, 2, 2.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 0, -1.0}, {1, 1, -1.0}, {2, 2, -1.0}};
    Eigen::VectorXd rhs(3);
    rhs << -2.0 * C, 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    return make_descriptor(3, k, at, bt, 3, rhs, Eigen::VectorXd::Zero(3),
                           Eigen::VectorXd::Zero(3));
  }

  ConicFunction support_strain() const {
    // pi(d) = min C y0  s.t.  d = P y, y in Q3, with P rows
    // (S/2, 1/2, 0), (S/2, -1/2, 0), (0, 0, 1/2); finite exactly when
    // tr d >= S sqrt((dxx-dyy)^2 + 4 dxy^2).
    std::vector<Eigen::Triplet<double>> at{{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 0, -0.5 * S}, {0, 1, -0.5},
                                           {1, 0, -0.5 * S}, {1, 1, 0.5},
                                           {2, 2, -0.5}};
    Eigen::VectorXd cy(3);
    cy << C, 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    return make_descriptor(3, k, at, bt, 3, Eigen::VectorXd::Zero(3),
                           Eigen::VectorXd::Zero(3), cy);
  }

  ConicFunction support_jump() const {
    // Slip dissipation: C/S v_n on v_n >= S ||v||; encoded S-robustly as
    // v_n = S y0, (y1, y2) = (v_n, v_t), y in Q3, value C y0, which at
    // S = 0 degenerates to C |v_t| with v_n pinned to zero.
    std::vector<Eigen::Triplet<double>> at{{0, 0, 1.0}, {1, 0, -1.0}, {2, 1, -1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 0, -S}, {1, 1, 1.0}, {2, 2, 1.0}};
    Eigen::VectorXd cy(3);
    cy << C, 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    return make_descriptor(2, k, at, bt, 3, Eigen::VectorXd::Zero(3),
                           Eigen::VectorXd::Zero(2), cy);
  }
};

Criterion cone_type(const std::string& name, double C, double S,
                    const std::map<std::string, double>& params) {
  Criterion cr;
  cr.name = name;
  cr.stress_dim = 3;
  cr.params = params;
  ConeTypeCriterion t{C, S};
  cr.indicator = t.indicator();
  cr.support_strain = t.support_strain();
  cr.support_jump = t.support_jump();
  return cr;
}

Criterion make_rankine(double ft, double fc, const std::map<std::string, double>& params) {
  if (!(ft > 0.0) || !(fc > 0.0))
    throw std::invalid_argument("Rankine2D needs ft > 0 and fc > 0");
  Criterion cr;
  cr.name = "Rankine2D";
  cr.stress_dim = 3;
  cr.params = params;

  // Principal stresses in [-fc, ft]: two Mohr-circle cones on
  // (mean, (sxx-syy)/2, sxy).
  {
    std::vector<Eigen::Triplet<double>> at{
        {0, 0, 0.5},  {0, 1, 0.5},  {1, 0, -0.5}, {1, 1, 0.5},  {2, 2, -1.0},
        {3, 0, -0.5}, {3, 1, -0.5}, {4, 0, -0.5}, {4, 1, 0.5},  {5, 2, -1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 0, 1.0}, {1, 1, 1.0}, {2, 2, 1.0},
                                           {3, 3, 1.0}, {4, 4, 1.0}, {5, 5, 1.0}};
    Eigen::VectorXd rhs(6);
    rhs << ft, 0.0, 0.0, fc, 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    k.append(ConeKind::Quad, 3);
    cr.indicator = make_descriptor(3, k, at, bt, 6, rhs, Eigen::VectorXd::Zero(3),
                                   Eigen::VectorXd::Zero(6));
  }
  // pi(d) = min 2 ft a0 + 2 fc b0 over tensor splits d = a - b with a, b
  // positive semidefinite; the spectral split attains the supremum
  // ft max(di,0) + fc max(-di,0) over principal strains.
  {
    std::vector<Eigen::Triplet<double>> at{{0, 0, -0.5}, {0, 1, -0.5}, {1, 0, -0.5},
                                           {1, 1, 0.5},  {2, 2, -1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 0, 1.0}, {0, 3, -1.0}, {1, 1, 1.0},
                                           {1, 4, -1.0}, {2, 2, 1.0}, {2, 5, -1.0}};
    Eigen::VectorXd cy(6);
    cy << 2.0 * ft, 0.0, 0.0, 2.0 * fc, 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    k.append(ConeKind::Quad, 3);
    cr.support_strain = make_descriptor(3, k, at, bt, 3, Eigen::VectorXd::Zero(3),
                                        Eigen::VectorXd::Zero(3), cy);
  }
  // Jump: ft (||v|| + v_n)/2 + fc (||v|| - v_n)/2 via one Q3 bound r >= ||v||.
  {
    std::vector<Eigen::Triplet<double>> at{{0, 0, -1.0}, {1, 1, -1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 1, 1.0}, {1, 2, 1.0}};
    Eigen::VectorXd cx(2), cy(3);
    cx << 0.5 * (ft - fc), 0.0;
    cy << 0.5 * (ft + fc), 0.0, 0.0;
    ConeProduct k;
    k.append(ConeKind::Quad, 3);
    cr.support_jump = make_descriptor(2, k, at, bt, 2, Eigen::VectorXd::Zero(2), cx, cy);
  }
  return cr;
}

Criterion make_thick_plate(double M0, double Q0, const std::map<std::string, double>& params) {
  if (!(M0 > 0.0) || !(Q0 > 0.0))
    throw std::invalid_argument("ThickPlateDecoupled needs M0 > 0 and Q0 > 0");
  Criterion cr;
  cr.name = "ThickPlateDecoupled";
  cr.stress_dim = 5;
  cr.params = params;

  const double r3 = std::sqrt(3.0);
  // Bending: von Mises resultant set Mxx^2 - Mxx Myy + Myy^2 + 3 Mxy^2
  // <= M0^2, written ||E M|| <= M0 with an upper-triangular E; shear:
  // ||(Qx, Qy)|| <= Q0.
  {
    std::vector<Eigen::Triplet<double>> at{{1, 0, -1.0}, {1, 1, 0.5},  {2, 1, -0.5 * r3},
                                           {3, 2, -r3},  {5, 3, -1.0}, {6, 4, -1.0}};
    std::vector<Eigen::Triplet<double>> bt;
    for (int i = 0; i < 7; ++i) bt.push_back({i, i, 1.0});
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(7);
    rhs[0] = M0;
    rhs[4] = Q0;
    ConeProduct k;
    k.append(ConeKind::Quad, 4);
    k.append(ConeKind::Quad, 3);
    cr.indicator = make_descriptor(5, k, at, bt, 7, rhs, Eigen::VectorXd::Zero(5),
                                   Eigen::VectorXd::Zero(7));
  }
  // pi(chi, gamma) = M0 ||E^-T D chi|| + Q0 ||gamma||, D = diag(1,1,2).
  {
    std::vector<Eigen::Triplet<double>> at{{0, 0, 1.0},      {1, 0, 1.0 / r3},
                                           {1, 1, 2.0 / r3}, {2, 2, 2.0 / r3},
                                           {3, 3, 1.0},      {4, 4, 1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 1, -1.0}, {1, 2, -1.0}, {2, 3, -1.0},
                                           {3, 5, -1.0}, {4, 6, -1.0}};
    Eigen::VectorXd cy = Eigen::VectorXd::Zero(7);
    cy[0] = M0;
    cy[4] = Q0;
    ConeProduct k;
    k.append(ConeKind::Quad, 4);
    k.append(ConeKind::Quad, 3);
    cr.support_strain = make_descriptor(5, k, at, bt, 5, Eigen::VectorXd::Zero(5),
                                        Eigen::VectorXd::Zero(5), cy);
  }
  // Jump input (jump theta_n, jump theta_t, jump w) in the facet frame:
  // curvature part of theta (x)s n has components (tn, 0, tt/2).
  {
    std::vector<Eigen::Triplet<double>> at{
        {0, 0, 1.0}, {1, 0, 1.0 / r3}, {2, 1, 1.0 / r3}, {3, 2, 1.0}};
    std::vector<Eigen::Triplet<double>> bt{{0, 1, -1.0}, {1, 2, -1.0}, {2, 3, -1.0},
                                           {3, 5, -1.0}};
    Eigen::VectorXd cy = Eigen::VectorXd::Zero(6);
    cy[0] = M0;
    cy[4] = Q0;
    ConeProduct k;
    k.append(ConeKind::Quad, 4);
    k.append(ConeKind::Quad, 2);
    cr.support_jump = make_descriptor(3, k, at, bt, 4, Eigen::VectorXd::Zero(4),
                                      Eigen::VectorXd::Zero(3), cy);
  }
  return cr;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double take(std::map<std::string, double>& p, const std::string& key, bool& found) {
  auto it = p.find(key);
  if (it == p.end()) {
    found = false;
    return 0.0;
  }
  found = true;
  const double v = it->second;
  p.erase(it);
  return v;
}

double require(std::map<std::string, double>& p, const std::string& key,
               const std::string& who) {
  bool found = false;
  const double v = take(p, key, found);
  if (!found) throw std::invalid_argument(who + " needs parameter '" + key + "'");
  return v;
}

double angle_param(std::map<std::string, double>& p, const std::string& who) {
  bool has_rad = false, has_deg = false;
  const double rad = take(p, "phi", has_rad);
  const double deg = take(p, "phi_deg", has_deg);
  if (has_rad == has_deg)
    throw std::invalid_argument(who + " needs exactly one of 'phi' or 'phi_deg'");
  return has_rad ? rad : deg * kPi / 180.0;
}

void reject_leftovers(const std::map<std::string, double>& p, const std::string& who) {
  if (!p.empty())
    throw std::invalid_argument("unknown parameter '" + p.begin()->first + "' for " + who);
}

}  // namespace

std::vector<std::string> criterion_names() {
  return {"MohrCoulomb2D", "Tresca2D", "vonMises2D", "DruckerPrager2D", "Rankine2D",
          "ThickPlateDecoupled"};
}

Criterion make_criterion(const std::string& name,
                         const std::map<std::string, double>& params) {
  const std::string key = lower(name);
  std::map<std::string, double> p = params;

  if (key == "mohrcoulomb2d") {
    const double c = require(p, "c", "MohrCoulomb2D");
    const double phi = angle_param(p, "MohrCoulomb2D");
    reject_leftovers(p, "MohrCoulomb2D");
    if (!(c > 0.0)) throw std::invalid_argument("MohrCoulomb2D needs c > 0");
    if (!(phi >= 0.0 && phi < 0.5 * kPi))
      throw std::invalid_argument("MohrCoulomb2D needs 0 <= phi < pi/2");
    Criterion cr = cone_type("MohrCoulomb2D", c * std::cos(phi), std::sin(phi), params);
    return cr;
  }
  if (key == "tresca2d" || key == "vonmises2d") {
    const double k = require(p, "k", name);
    reject_leftovers(p, name);
    if (!(k > 0.0)) throw std::invalid_argument(name + " needs k > 0");
    return cone_type(key == "tresca2d" ? "Tresca2D" : "vonMises2D", k, 0.0, params);
  }
  if (key == "druckerprager2d") {
    const double c = require(p, "c", "DruckerPrager2D");
    const double phi = angle_param(p, "DruckerPrager2D");
    reject_leftovers(p, "DruckerPrager2D");
    if (!(c > 0.0)) throw std::invalid_argument("DruckerPrager2D needs c > 0");
    if (!(phi >= 0.0 && phi < 0.5 * kPi))
      throw std::invalid_argument("DruckerPrager2D needs 0 <= phi < pi/2");
    // Compression-cone match: a = 6 c cos phi / (sqrt3 (3 - sin phi)),
    // b = 2 sin phi / (sqrt3 (3 - sin phi)).  Out-of-plane stress is free
    // in plane strain; minimizing it out leaves the cone-type criterion
    // with C = a / sqrt(1 - 3 b^2), S = 3 b / sqrt(1 - 3 b^2).
    const double den = std::sqrt(3.0) * (3.0 - std::sin(phi));
    const double a = 6.0 * c * std::cos(phi) / den;
    const double b = 2.0 * std::sin(phi) / den;
    const double t = 1.0 - 3.0 * b * b;
    if (!(t > 1e-12))
      throw std::invalid_argument("DruckerPrager2D friction angle too large for plane strain");
    return cone_type("DruckerPrager2D", a / std::sqrt(t), 3.0 * b / std::sqrt(t), params);
  }
  if (key == "rankine2d") {
    const double ft = require(p, "ft", "Rankine2D");
    const double fc = require(p, "fc", "Rankine2D");
    reject_leftovers(p, "Rankine2D");
    return make_rankine(ft, fc, params);
  }
  if (key == "thickplatedecoupled") {
    const double m0 = require(p, "M0", "ThickPlateDecoupled");
    const double q0 = require(p, "Q0", "ThickPlateDecoupled");
    reject_leftovers(p, "ThickPlateDecoupled");
    return make_thick_plate(m0, q0, params);
  }
  std::string known;
  for (const auto& s : criterion_names()) known += (known.empty() ? "" : ", ") + s;
  throw std::invalid_argument("unknown criterion '" + name + "' (known: " + known + ")");
}

}  // namespace lakit
