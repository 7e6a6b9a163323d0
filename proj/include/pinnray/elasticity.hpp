#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "pinnray/common.hpp"

namespace pinnray {

// Plane reduction of the isotropic constitutive law. `as_paper` keeps the
// (1-mu) denominator in the volumetric factor; it coincides with
// `plane_stress`. `plane_strain` replaces that factor with (1-2*mu).
enum class PlaneFormulation { as_paper, plane_strain, plane_stress };

inline const char* to_string(PlaneFormulation f) {
  switch (f) {
    case PlaneFormulation::as_paper: return "as_paper";
    case PlaneFormulation::plane_strain: return "plane_strain";
    case PlaneFormulation::plane_stress: return "plane_stress";
  }
  return "?";
}

struct MaterialModel {
  double youngs_modulus = 1.0;  // MPa
  double poisson_ratio = 0.0;   // dimensionless
  PlaneFormulation formulation = PlaneFormulation::as_paper;

  void validate() const {
    if (!(youngs_modulus > 0.0))
      throw ConfigError("material: Young's modulus must be positive, got " +
                        std::to_string(youngs_modulus));
    if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5))
      throw ConfigError("material: Poisson ratio must lie in [0, 0.5), got " +
                        std::to_string(poisson_ratio));
  }
};

// Symmetric 2x2 tensor samples. Only one shear component is stored, so
// symmetry holds by construction. `xy` is the tensor shear (not the
// engineering shear 2*eps_xy).
struct Strain2 {
  double xx = 0.0, yy = 0.0, xy = 0.0;
};
struct Stress2 {
  double xx = 0.0, yy = 0.0, xy = 0.0;  // MPa
};

// The two scalar factors of the plane constitutive law:
//   sigma_aa = c * (eps_xx + eps_yy) + d * eps_aa,  sigma_xy = d * eps_xy.
struct ConstitutiveFactors {
  double volumetric = 0.0;  // c
  double deviatoric = 0.0;  // d
};

inline ConstitutiveFactors constitutive_factors(const MaterialModel& mat) {
  mat.validate();
  const double e = mat.youngs_modulus;
  const double mu = mat.poisson_ratio;
  const double d = e / (1.0 + mu);
  double denom;
  if (mat.formulation == PlaneFormulation::plane_strain) {
    denom = (1.0 + mu) * (1.0 - 2.0 * mu);
    if (std::abs(1.0 - 2.0 * mu) < 1e-12)
      throw ConfigError("material: plane_strain is singular at mu = 0.5");
  } else {
    denom = (1.0 + mu) * (1.0 - mu);
  }
  return {e * mu / denom, d};
}

inline Strain2 strain_from_jacobian(double du_dx, double du_dy, double dv_dx,
                                    double dv_dy) {
  return {du_dx, dv_dy, 0.5 * (du_dy + dv_dx)};
}

inline Stress2 stress_from_strain(const Strain2& eps, const MaterialModel& mat) {
  const auto [c, d] = constitutive_factors(mat);
  const double tr = eps.xx + eps.yy;
  return {c * tr + d * eps.xx, c * tr + d * eps.yy, d * eps.xy};
}

// Internal-energy density per unit thickness, MPa = mJ/mm^3. The factor 2 on
// the shear term realizes the double sum over the (xy) and (yx) index pairs.
inline double energy_density(const Stress2& sig, const Strain2& eps) {
  return 0.5 * (sig.xx * eps.xx + sig.yy * eps.yy + 2.0 * sig.xy * eps.xy);
}

// 3x3 constitutive matrix acting on the engineering-strain vector
// (eps_xx, eps_yy, gamma_xy) with gamma_xy = 2*eps_xy. This is the matrix the
// finite-element assembly consumes.
inline Eigen::Matrix3d constitutive_matrix(const MaterialModel& mat) {
  const auto [c, d] = constitutive_factors(mat);
  Eigen::Matrix3d m;
  m << c + d, c, 0.0,
       c, c + d, 0.0,
       0.0, 0.0, 0.5 * d;
  return m;
}

}  // namespace pinnray
