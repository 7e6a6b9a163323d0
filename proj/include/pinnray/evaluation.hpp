#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pinnray/common.hpp"
#include "pinnray/elasticity.hpp"
#include "pinnray/fem.hpp"
#include "pinnray/geometry.hpp"
#include "pinnray/network.hpp"

namespace pinnray {

enum class Phase { initial, final };

struct MarkerObservation {
  int marker_id = 0;              // indexed 1..N, left to right
  Phase phase = Phase::initial;
  std::vector<Vec2> frames;       // pixel coordinates, one per video frame
};

// 2x3 affine map from pixel to world coordinates (mm).
struct PixelToWorld {
  Eigen::Matrix<double, 2, 3> m = Eigen::Matrix<double, 2, 3>::Zero();
  double residual_rms = 0.0;

  Vec2 apply(const Vec2& px) const {
    return m * Eigen::Vector3d(px.x(), px.y(), 1.0);
  }
  static PixelToWorld identity();
};

struct MarkerDisplacement {
  int marker_id = 0;
  Vec2 position;      // initial world position (x_M, y_M), mm
  Vec2 displacement;  // (u_M, v_M), mm
};

// Least-squares affine fit from >= 3 non-collinear (pixel, world) pairs.
PixelToWorld fit_pixel_to_world(
    const std::vector<std::pair<Vec2, Vec2>>& correspondences);

// Per marker: frame-mean pixel position per phase -> world transform ->
// displacement = final - initial. Markers must appear in both phases.
std::vector<MarkerDisplacement> smooth_and_difference(
    const std::vector<MarkerObservation>& initial,
    const std::vector<MarkerObservation>& final_obs,
    const PixelToWorld& transform);

// L1 deviation |u_hat - u| + |v_hat - v|, mm.
double absolute_error(const Vec2& estimate, const Vec2& measured);

enum class ErrorComponent { u, v, disp };

// Component u/v: mean of per-marker |du| or |dv|. disp: sum of the u and v
// means, which equals the mean of the per-marker absolute errors.
double mean_absolute_error(const std::vector<Vec2>& estimates,
                           const std::vector<Vec2>& measured,
                           ErrorComponent component);

struct MethodMetrics {
  std::string method;
  double mae_u = 0.0;
  double mae_v = 0.0;
  double mae_disp = 0.0;
  std::vector<double> per_marker_ae;
};

MethodMetrics compute_metrics(const std::string& method,
                              const std::vector<Vec2>& estimates,
                              const std::vector<Vec2>& measured);

std::string metrics_to_json(const std::vector<MethodMetrics>& metrics);
// Table-shaped comparison: one row per component, one column per method.
std::string metrics_table(const std::vector<MethodMetrics>& metrics);

// --- marker file formats -----------------------------------------------------

// Raw pixel observations: header marker_id,phase,frame_index,px,py.
std::vector<MarkerObservation> read_marker_observations(std::istream& in);
std::vector<MarkerObservation> read_marker_observations_file(
    const std::string& path);

// Calibration pairs: header px,py,x,y.
std::vector<std::pair<Vec2, Vec2>> read_correspondences_file(
    const std::string& path);

// World-frame marker displacements: header marker_id,x,y,u,v.
void write_marker_displacements(const std::vector<MarkerDisplacement>& markers,
                                std::ostream& out);
void write_marker_displacements_file(
    const std::vector<MarkerDisplacement>& markers, const std::string& path);
std::vector<MarkerDisplacement> read_marker_displacements(std::istream& in);
std::vector<MarkerDisplacement> read_marker_displacements_file(
    const std::string& path);

// --- field export ------------------------------------------------------------

struct GridSpec {
  double x0 = 0, x1 = 1;
  double y0 = 0, y1 = 1;
  int nx = 10, ny = 10;
};

// Regular-grid samples of displacement, strain and stress. Rows cover the
// in-domain grid points only; header
// x,y,u,v,eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy.
void export_fields(const DisplacementNet& net, const MaterialModel& mat,
                   const Domain2D& domain, const GridSpec& grid,
                   std::ostream& out);
void export_fields(const FemSolution& solution, const GridSpec& grid,
                   std::ostream& out);

}  // namespace pinnray
