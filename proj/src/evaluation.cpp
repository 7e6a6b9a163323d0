#include "pinnray/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pinnray {

namespace {

using json = nlohmann::ordered_json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

PixelToWorld PixelToWorld::identity() {
  PixelToWorld t;
  t.m << 1, 0, 0, 0, 1, 0;
  return t;
}

PixelToWorld fit_pixel_to_world(
    const std::vector<std::pair<Vec2, Vec2>>& correspondences) {
  if (correspondences.size() < 3)
    throw ConfigError("fit_pixel_to_world: need at least 3 correspondences");

  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rx = Eigen::Vector3d::Zero();
  Eigen::Vector3d ry = Eigen::Vector3d::Zero();
  for (const auto& [px, world] : correspondences) {
    const Eigen::Vector3d p(px.x(), px.y(), 1.0);
    g += p * p.transpose();
    rx += world.x() * p;
    ry += world.y() * p;
  }
  // A rank-deficient normal matrix means the pixels are collinear.
  Eigen::FullPivLU<Eigen::Matrix3d> lu(g);
  lu.setThreshold(1e-10);
  if (lu.rank() < 3)
    throw ConfigError(
        "fit_pixel_to_world: correspondences are collinear or degenerate");

  PixelToWorld t;
  t.m.row(0) = lu.solve(rx).transpose();
  t.m.row(1) = lu.solve(ry).transpose();

  double ss = 0.0;
  for (const auto& [px, world] : correspondences)
    ss += (t.apply(px) - world).squaredNorm();
  t.residual_rms = std::sqrt(ss / static_cast<double>(correspondences.size()));

  const Eigen::Matrix2d linear = t.m.leftCols<2>();
  if (std::abs(linear.determinant()) < 1e-14)
    throw ConfigError("fit_pixel_to_world: fitted linear part is singular");
  return t;
}

std::vector<MarkerDisplacement> smooth_and_difference(
    const std::vector<MarkerObservation>& initial,
    const std::vector<MarkerObservation>& final_obs,
    const PixelToWorld& transform) {
  auto mean_by_id = [](const std::vector<MarkerObservation>& obs,
                       Phase expect) {
    std::map<int, Vec2> out;
    for (const MarkerObservation& o : obs) {
      if (o.phase != expect)
        throw ConfigError("smooth_and_difference: observation for marker " +
                          std::to_string(o.marker_id) + " has the wrong phase");
      if (o.frames.empty())
        throw ConfigError("smooth_and_difference: marker " +
                          std::to_string(o.marker_id) + " has no frames");
      if (out.count(o.marker_id))
        throw ConfigError("smooth_and_difference: duplicate marker id " +
                          std::to_string(o.marker_id));
      Vec2 mean = Vec2::Zero();
      for (const Vec2& f : o.frames) mean += f;
      out[o.marker_id] = mean / static_cast<double>(o.frames.size());
    }
    return out;
  };

  const std::map<int, Vec2> init_px = mean_by_id(initial, Phase::initial);
  const std::map<int, Vec2> fin_px = mean_by_id(final_obs, Phase::final);

  std::vector<int> missing;
  for (const auto& [id, px] : init_px)
    if (!fin_px.count(id)) missing.push_back(id);
  for (const auto& [id, px] : fin_px)
    if (!init_px.count(id)) missing.push_back(id);
  if (!missing.empty()) {
    std::string ids;
    for (int id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
    throw ConfigError(
        "smooth_and_difference: markers present in one phase only: " + ids);
  }

  std::vector<MarkerDisplacement> out;
  for (const auto& [id, px0] : init_px) {
    const Vec2 w0 = transform.apply(px0);
    const Vec2 w1 = transform.apply(fin_px.at(id));
    out.push_back({id, w0, w1 - w0});
  }
  return out;
}

double absolute_error(const Vec2& estimate, const Vec2& measured) {
  return std::abs(estimate.x() - measured.x()) +
         std::abs(estimate.y() - measured.y());
}

double mean_absolute_error(const std::vector<Vec2>& estimates,
                           const std::vector<Vec2>& measured,
                           ErrorComponent component) {
  if (estimates.size() != measured.size())
    throw ConfigError("mean_absolute_error: length mismatch (" +
                      std::to_string(estimates.size()) + " vs " +
                      std::to_string(measured.size()) + ")");
  if (estimates.empty())
    throw ConfigError("mean_absolute_error: empty input");
  if (component == ErrorComponent::disp) {
    // Sum of the component means; identical to the mean of per-marker AE.
    return mean_absolute_error(estimates, measured, ErrorComponent::u) +
           mean_absolute_error(estimates, measured, ErrorComponent::v);
  }
  const int c = component == ErrorComponent::u ? 0 : 1;
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i)
    acc += std::abs(estimates[i][c] - measured[i][c]);
  return acc / static_cast<double>(estimates.size());
}

MethodMetrics compute_metrics(const std::string& method,
                              const std::vector<Vec2>& estimates,
                              const std::vector<Vec2>& measured) {
  MethodMetrics m;
  m.method = method;
  m.mae_u = mean_absolute_error(estimates, measured, ErrorComponent::u);
  m.mae_v = mean_absolute_error(estimates, measured, ErrorComponent::v);
  m.mae_disp = mean_absolute_error(estimates, measured, ErrorComponent::disp);
  for (std::size_t i = 0; i < estimates.size(); ++i)
    m.per_marker_ae.push_back(absolute_error(estimates[i], measured[i]));
  return m;
}

std::string metrics_to_json(const std::vector<MethodMetrics>& metrics) {
  json arr = json::array();
  for (const MethodMetrics& m : metrics) {
    json j;
    j["method"] = m.method;
    j["mae_u"] = m.mae_u;
    j["mae_v"] = m.mae_v;
    j["mae_disp"] = m.mae_disp;
    j["per_marker_ae"] = m.per_marker_ae;
    arr.push_back(std::move(j));
  }
  return arr.dump(1);
}

std::string metrics_table(const std::vector<MethodMetrics>& metrics) {
  std::ostringstream os;
  os << "component";
  for (const MethodMetrics& m : metrics) os << "," << m.method;
  os << "\n";
  const char* rows[3] = {"u", "v", "disp"};
  for (int r = 0; r < 3; ++r) {
    os << rows[r];
    for (const MethodMetrics& m : metrics) {
      const double v = r == 0 ? m.mae_u : r == 1 ? m.mae_v : m.mae_disp;
      char buf[40];
      std::snprintf(buf, sizeof buf, ",%.6g", v);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

std::vector<MarkerObservation> read_marker_observations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      line != "marker_id,phase,frame_index,px,py")
    throw IoError("marker observations: bad header, expected "
                  "marker_id,phase,frame_index,px,py");
  std::map<std::pair<int, int>, MarkerObservation> grouped;  // (id, phase)
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5)
      throw IoError("marker observations: bad row at line " +
                    std::to_string(lineno));
    const int id = std::atoi(f[0].c_str());
    Phase phase;
    if (f[1] == "initial")
      phase = Phase::initial;
    else if (f[1] == "final")
      phase = Phase::final;
    else
      throw IoError("marker observations: unknown phase '" + f[1] +
                    "' at line " + std::to_string(lineno));
    auto& obs = grouped[{id, static_cast<int>(phase)}];
    obs.marker_id = id;
    obs.phase = phase;
    obs.frames.emplace_back(std::atof(f[3].c_str()), std::atof(f[4].c_str()));
  }
  std::vector<MarkerObservation> out;
  for (auto& [key, obs] : grouped) out.push_back(std::move(obs));
  return out;
}

std::vector<MarkerObservation> read_marker_observations_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open marker observations: " + path);
  return read_marker_observations(in);
}

std::vector<std::pair<Vec2, Vec2>> read_correspondences_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open correspondences: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "px,py,x,y")
    throw IoError("correspondences: bad header, expected px,py,x,y");
  std::vector<std::pair<Vec2, Vec2>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw IoError("correspondences: bad row: " + line);
    out.push_back({Vec2(std::atof(f[0].c_str()), std::atof(f[1].c_str())),
                   Vec2(std::atof(f[2].c_str()), std::atof(f[3].c_str()))});
  }
  return out;
}

void write_marker_displacements(const std::vector<MarkerDisplacement>& markers,
                                std::ostream& out) {
  out << "marker_id,x,y,u,v\n";
  char buf[200];
  for (const MarkerDisplacement& m : markers) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", m.marker_id,
                  m.position.x(), m.position.y(), m.displacement.x(),
                  m.displacement.y());
    out << buf;
  }
}

void write_marker_displacements_file(
    const std::vector<MarkerDisplacement>& markers, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write markers: " + path);
  write_marker_displacements(markers, out);
}

std::vector<MarkerDisplacement> read_marker_displacements(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "marker_id,x,y,u,v")
    throw IoError("marker displacements: bad header, expected marker_id,x,y,u,v");
  std::vector<MarkerDisplacement> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MarkerDisplacement m;
    double x, y, u, v;
    if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg,%lg", &m.marker_id, &x, &y,
                    &u, &v) != 5)
      throw IoError("marker displacements: bad row: " + line);
    m.position = Vec2(x, y);
    m.displacement = Vec2(u, v);
    out.push_back(m);
  }
  return out;
}

std::vector<MarkerDisplacement> read_marker_displacements_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open markers: " + path);
  return read_marker_displacements(in);
}

// ---------------------------------------------------------------------------
// Field export
// ---------------------------------------------------------------------------

namespace {

void write_field_header(std::ostream& out) {
  out << "x,y,u,v,eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy\n";
}

void write_field_row(std::ostream& out, const Vec2& p, const Vec2& disp,
                     const Strain2& eps, const Stress2& sig) {
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                p.x(), p.y(), disp.x(), disp.y(), eps.xx, eps.yy, eps.xy,
                sig.xx, sig.yy, sig.xy);
  out << buf;
}

template <class Inside, class Sample>
void export_grid(const GridSpec& grid, std::ostream& out, Inside inside,
                 Sample sample) {
  if (grid.nx < 1 || grid.ny < 1)
    throw ConfigError("export_fields: grid must have nx, ny >= 1");
  write_field_header(out);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      const double x =
          grid.nx == 1 ? grid.x0
                       : grid.x0 + (grid.x1 - grid.x0) * i / (grid.nx - 1);
      const double y =
          grid.ny == 1 ? grid.y0
                       : grid.y0 + (grid.y1 - grid.y0) * j / (grid.ny - 1);
      const Vec2 p(x, y);
      if (!inside(p)) continue;
      sample(p);
    }
  }
}

}  // namespace

void export_fields(const DisplacementNet& net, const MaterialModel& mat,
                   const Domain2D& domain, const GridSpec& grid,
                   std::ostream& out) {
  export_grid(
      grid, out, [&](const Vec2& p) { return point_in_material(domain, p); },
      [&](const Vec2& p) {
        const ScalarEval u = eval_with_input_derivs(net, Half::u, p.x(), p.y());
        const ScalarEval v = eval_with_input_derivs(net, Half::v, p.x(), p.y());
        const Strain2 eps =
            strain_from_jacobian(u.d_dx, u.d_dy, v.d_dx, v.d_dy);
        write_field_row(out, p, Vec2(u.value, v.value), eps,
                        stress_from_strain(eps, mat));
      });
}

void export_fields(const FemSolution& solution, const GridSpec& grid,
                   std::ostream& out) {
  export_grid(
      grid, out,
      [&](const Vec2& p) { return find_triangle(solution.mesh, p) >= 0; },
      [&](const Vec2& p) {
        const Vec2 disp = interpolate(solution, p);
        const ElementState s = element_state_at(solution, p);
        write_field_row(out, p, disp, s.strain, s.stress);
      });
}

}  // namespace pinnray
