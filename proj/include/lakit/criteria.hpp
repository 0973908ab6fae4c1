#pragma once

#include <map>
#include <string>
#include <vector>

#include "lakit/cones.hpp"

namespace lakit {

// A strength criterion bundled with its conic descriptors.
//
// Conventions: plane problems use stress (sxx, syy, sxy) and strain rate
// (dxx, dyy, dxy) with the duality pairing s:d = sxx dxx + syy dyy +
// 2 sxy dxy.  Plates use resultants (Mxx, Myy, Mxy, Qx, Qy) against
// (cxx, cyy, cxy, gx, gy) with the same doubled shear weight on cxy.
//
// indicator:      F(sigma) = 0 on the strength set, +inf outside.
// support_strain: pi(d) = sup { sigma : d }, the plastic dissipation density.
// support_jump:   dissipation of a velocity jump in the facet frame;
//                 input (v_n, v_t) for continua, (jump theta_n, jump
//                 theta_t, jump w) for plates.  Equals support_strain of
//                 the symmetrized rank-one strain v (x)s n.
struct Criterion {
  std::string name;
  int stress_dim = 3;
  std::map<std::string, double> params;
  ConicFunction indicator;
  ConicFunction support_strain;
  ConicFunction support_jump;
};

// Known names: MohrCoulomb2D (c, phi|phi_deg), Tresca2D (k), vonMises2D (k),
// DruckerPrager2D (c, phi|phi_deg), Rankine2D (ft, fc),
// ThickPlateDecoupled (M0, Q0).  Angles in radians unless the _deg key is
// used.  Unknown names, unknown keys and out-of-range values throw
// std::invalid_argument.
Criterion make_criterion(const std::string& name,
                         const std::map<std::string, double>& params);

std::vector<std::string> criterion_names();

}  // namespace lakit
