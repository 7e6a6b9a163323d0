#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pinnray/common.hpp"

namespace pinnray {

using Polygon = std::vector<Vec2>;    // closed implicitly (last != first)
using Polyline = std::vector<Vec2>;

// The nine design parameters, units mm / degrees.
struct FinRayParams {
  double height = 90.0;        // H
  double base_length = 30.0;   // L
  double width = 20.0;         // W (out-of-plane; carried, unused in 2D)
  double tip_angle = 20.0;     // L_angle, degrees from vertical
  double tip_length = 20.0;    // L_tip
  int rib_count = 4;           // N
  double rib_thickness = 2.0;  // t_rib
  double flex_thickness = 2.0; // t_flex (front wall)
  double back_thickness = 2.0; // t_back (back wall, also the base wall)

  void validate() const;
};

// A planar material region: CCW outer boundary, CW holes, and named boundary
// polylines lying on the outer boundary.
struct Domain2D {
  Polygon outer;
  std::vector<Polygon> holes;
  std::map<std::string, Polyline> edges;
};

struct TriangleMesh {
  std::vector<Vec2> nodes;
  std::vector<std::array<int, 3>> triangles;  // positively oriented
  struct BoundaryEdge {
    int a = 0, b = 0;
    std::string name;
  };
  std::vector<BoundaryEdge> boundary;
};

// --- polygon utilities -------------------------------------------------------

double polygon_area(const Polygon& poly);  // signed, CCW positive
bool polygon_is_simple(const Polygon& poly);
bool point_in_polygon(const Polygon& poly, const Vec2& p);
double distance_to_polygon(const Polygon& poly, const Vec2& p);

// Inside the outer polygon and outside every hole. `boundary_tol` counts
// points within that distance of any boundary as material.
bool point_in_material(const Domain2D& domain, const Vec2& p,
                       double boundary_tol = 0.0);

struct Bounds {
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
};
Bounds domain_bounds(const Domain2D& domain);
double material_area(const Domain2D& domain);  // outer minus holes

// --- Fin Ray construction ----------------------------------------------------

// Reference layout, design frame: base edge along y = 0 from (0,0) to (L,0);
// straight front wall up the y axis; tip face of length L_tip tilted by
// L_angle towards the back; straight back wall from (L,0) to the tip apex.
// The inner cavity is the wall-offset interior, crossed by N horizontal ribs
// evenly spaced over the cavity height; the N+1 voids between them become
// holes. Named edges: base, back, tip, front.
Domain2D build_finray(const FinRayParams& params);

// Rigid rotation into the experiment frame: (x, y) -> (y, -x). The finger
// lies along +x with the front wall on y = 0 and the base edge on x = 0.
Domain2D rotate_to_experiment_frame(const Domain2D& domain);
Vec2 rotate_point_to_experiment_frame(const Vec2& p);

// --- point sampling ----------------------------------------------------------

// Uniform rejection sampling over the material region.
std::vector<Vec2> sample_collocation(const Domain2D& domain, int n,
                                     std::uint64_t seed);
// All mesh nodes, in node order.
std::vector<Vec2> sample_collocation(const TriangleMesh& mesh);

// n >= 2 points evenly spaced by arc length along the named edge,
// endpoints included.
std::vector<Vec2> sample_boundary(const Domain2D& domain,
                                  const std::string& edge_name, int n);

// --- MSH 2.2 ASCII subset ------------------------------------------------------

TriangleMesh parse_mesh(std::istream& in);
TriangleMesh parse_mesh_file(const std::string& path);
void write_mesh(const TriangleMesh& mesh, std::ostream& out);
void write_mesh_file(const TriangleMesh& mesh, const std::string& path);

double mesh_area(const TriangleMesh& mesh);
int nearest_node(const TriangleMesh& mesh, const Vec2& p);

// --- JSON serialization --------------------------------------------------------

std::string finray_params_to_json(const FinRayParams& p);
FinRayParams finray_params_from_json(const std::string& text);
std::string domain_to_json(const Domain2D& d);
Domain2D domain_from_json(const std::string& text);

}  // namespace pinnray
