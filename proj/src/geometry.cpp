#include "pinnray/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace pinnray {

namespace {

using json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Proper or touching intersection of segments pq and rs.
bool segments_intersect(const Vec2& p, const Vec2& q, const Vec2& r,
                        const Vec2& s) {
  auto orient = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross(b - a, c - a);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  auto on_seg = [](const Vec2& a, const Vec2& b, const Vec2& c) {
    return std::min(a.x(), b.x()) - 1e-12 <= c.x() &&
           c.x() <= std::max(a.x(), b.x()) + 1e-12 &&
           std::min(a.y(), b.y()) - 1e-12 <= c.y() &&
           c.y() <= std::max(a.y(), b.y()) + 1e-12;
  };
  const int o1 = orient(p, q, r), o2 = orient(p, q, s);
  const int o3 = orient(r, s, p), o4 = orient(r, s, q);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_seg(p, q, r)) return true;
  if (o2 == 0 && on_seg(p, q, s)) return true;
  if (o3 == 0 && on_seg(r, s, p)) return true;
  if (o4 == 0 && on_seg(r, s, q)) return true;
  return false;
}

double dist_point_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return (p - (a + t * d)).norm();
}

// Half-plane n.dot(x) <= c clip of a convex polygon (one Sutherland-Hodgman
// pass). Returns the clipped polygon, possibly empty.
Polygon clip_halfplane(const Polygon& poly, const Vec2& n, double c) {
  Polygon out;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % m];
    const double da = n.dot(a) - c;
    const double db = n.dot(b) - c;
    if (da <= 1e-12) out.push_back(a);
    if ((da < -1e-12 && db > 1e-12) || (da > 1e-12 && db < -1e-12)) {
      const double t = da / (da - db);
      out.push_back(a + t * (b - a));
    }
  }
  // Drop near-duplicate vertices the clipping may introduce.
  Polygon dedup;
  for (const Vec2& v : out) {
    if (dedup.empty() || (dedup.back() - v).norm() > 1e-9) dedup.push_back(v);
  }
  if (dedup.size() >= 2 && (dedup.front() - dedup.back()).norm() <= 1e-9)
    dedup.pop_back();
  return dedup;
}

Polygon reversed(Polygon p) {
  std::reverse(p.begin(), p.end());
  return p;
}

json polygon_to_json(const Polygon& p) {
  json arr = json::array();
  for (const Vec2& v : p) arr.push_back({v.x(), v.y()});
  return arr;
}

Polygon polygon_from_json(const json& arr) {
  Polygon p;
  for (const auto& v : arr) p.emplace_back(v[0].get<double>(), v[1].get<double>());
  return p;
}

}  // namespace

void FinRayParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw GeometryError(std::string("finray: ") + name +
                          " must be positive");
  };
  positive(height, "height");
  positive(base_length, "base_length");
  positive(width, "width");
  positive(tip_length, "tip_length");
  positive(rib_thickness, "rib_thickness");
  positive(flex_thickness, "flex_thickness");
  positive(back_thickness, "back_thickness");
  if (rib_count < 0) throw GeometryError("finray: rib_count must be >= 0");
  if (!(tip_angle > 0.0 && tip_angle < 90.0))
    throw GeometryError("finray: tip_angle must lie in (0, 90) degrees");
  if (!(tip_length * std::cos(tip_angle * kPi / 180.0) < height))
    throw GeometryError("finray: tip segment taller than the finger");
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i)
    a += cross(poly[i], poly[(i + 1) % m]);
  return 0.5 * a;
}

bool polygon_is_simple(const Polygon& poly) {
  const std::size_t m = poly.size();
  if (m < 3) return false;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      // Skip adjacent edges (they share an endpoint).
      if (j == i || (j + 1) % m == i || (i + 1) % m == j) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % m], poly[j],
                             poly[(j + 1) % m]))
        return false;
    }
  }
  return true;
}

bool point_in_polygon(const Polygon& poly, const Vec2& p) {
  // Crossing-number test.
  bool inside = false;
  const std::size_t m = poly.size();
  for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double xint =
          a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
      if (p.x() < xint) inside = !inside;
    }
  }
  return inside;
}

double distance_to_polygon(const Polygon& poly, const Vec2& p) {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i)
    d = std::min(d, dist_point_segment(p, poly[i], poly[(i + 1) % m]));
  return d;
}

bool point_in_material(const Domain2D& domain, const Vec2& p,
                       double boundary_tol) {
  const bool in_outer =
      point_in_polygon(domain.outer, p) ||
      (boundary_tol > 0.0 && distance_to_polygon(domain.outer, p) <= boundary_tol);
  if (!in_outer) return false;
  for (const Polygon& h : domain.holes) {
    if (point_in_polygon(h, p)) {
      if (boundary_tol > 0.0 && distance_to_polygon(h, p) <= boundary_tol)
        continue;  // on the hole rim counts as material
      return false;
    }
  }
  return true;
}

Bounds domain_bounds(const Domain2D& domain) {
  Bounds b;
  b.xmin = b.ymin = std::numeric_limits<double>::infinity();
  b.xmax = b.ymax = -std::numeric_limits<double>::infinity();
  for (const Vec2& v : domain.outer) {
    b.xmin = std::min(b.xmin, v.x());
    b.xmax = std::max(b.xmax, v.x());
    b.ymin = std::min(b.ymin, v.y());
    b.ymax = std::max(b.ymax, v.y());
  }
  return b;
}

double material_area(const Domain2D& domain) {
  double a = std::abs(polygon_area(domain.outer));
  for (const Polygon& h : domain.holes) a -= std::abs(polygon_area(h));
  return a;
}

Domain2D build_finray(const FinRayParams& params) {
  params.validate();
  const double alpha = params.tip_angle * kPi / 180.0;
  const double h = params.height;
  const double l = params.base_length;

  const Vec2 v0(0.0, 0.0);
  const Vec2 v1(l, 0.0);
  const Vec2 v2(params.tip_length * std::sin(alpha), h);  // tip apex
  const Vec2 v3(0.0, h - params.tip_length * std::cos(alpha));

  Domain2D dom;
  dom.outer = {v0, v1, v2, v3};
  if (polygon_area(dom.outer) <= 0.0 || !polygon_is_simple(dom.outer))
    throw GeometryError("finray: outer boundary self-intersects");
  dom.edges["base"] = {v0, v1};
  dom.edges["back"] = {v1, v2};
  dom.edges["tip"] = {v2, v3};
  dom.edges["front"] = {v3, v0};

  // Inner cavity: intersection of the four wall-offset half-planes, clipped
  // from the outer bounding quad. For a CCW outer boundary the inward offset
  // of edge (a -> b) keeps the half-plane on the left of the edge.
  Polygon cavity = dom.outer;
  auto clip_inward = [&](const Vec2& a, const Vec2& b, double thickness,
                         const char* wall) {
    const Vec2 d = (b - a).normalized();
    const Vec2 inward(-d.y(), d.x());  // left normal of a CCW edge
    // Interior side: inward.dot(x) >= inward.dot(a) + t, i.e.
    // (-inward).dot(x) <= -(inward.dot(a) + t).
    cavity = clip_halfplane(cavity, -inward, -(inward.dot(a) + thickness));
    if (cavity.size() < 3)
      throw GeometryError(std::string("finray: walls overlap, cavity vanishes "
                                      "after offsetting the ") +
                          wall + " wall");
  };
  clip_inward(v0, v1, params.back_thickness, "base");
  clip_inward(v1, v2, params.back_thickness, "back");
  clip_inward(v2, v3, params.flex_thickness, "tip");
  clip_inward(v3, v0, params.flex_thickness, "front");

  if (polygon_area(cavity) <= 1e-9)
    throw GeometryError("finray: walls overlap, cavity has no area");
  for (const Vec2& c : cavity)
    if (!point_in_polygon(dom.outer, c) &&
        distance_to_polygon(dom.outer, c) > 1e-9)
      throw GeometryError("finray: wall thickness exceeds the outline");

  double cav_lo = std::numeric_limits<double>::infinity();
  double cav_hi = -std::numeric_limits<double>::infinity();
  for (const Vec2& c : cavity) {
    cav_lo = std::min(cav_lo, c.y());
    cav_hi = std::max(cav_hi, c.y());
  }

  // N ribs at evenly spaced heights split the cavity into N+1 voids.
  const int n = params.rib_count;
  const double span = cav_hi - cav_lo;
  if (n > 0 && n * params.rib_thickness >= span)
    throw GeometryError("finray: ribs thicker than the cavity height");
  std::vector<double> cuts_lo{cav_lo}, cuts_hi;
  for (int k = 1; k <= n; ++k) {
    const double yk = cav_lo + span * static_cast<double>(k) / (n + 1);
    cuts_hi.push_back(yk - 0.5 * params.rib_thickness);
    cuts_lo.push_back(yk + 0.5 * params.rib_thickness);
  }
  cuts_hi.push_back(cav_hi);

  for (int k = 0; k <= n; ++k) {
    if (!(cuts_lo[k] < cuts_hi[k] - 1e-9))
      throw GeometryError("finray: rib " + std::to_string(k) +
                          " leaves no void between walls");
    Polygon band = clip_halfplane(cavity, Vec2(0.0, -1.0), -cuts_lo[k]);
    band = clip_halfplane(band, Vec2(0.0, 1.0), cuts_hi[k]);
    if (band.size() < 3 || std::abs(polygon_area(band)) < 1e-9)
      throw GeometryError("finray: degenerate void between ribs " +
                          std::to_string(k));
    dom.holes.push_back(reversed(band));  // holes are stored clockwise
  }
  return dom;
}

Domain2D rotate_to_experiment_frame(const Domain2D& domain) {
  Domain2D out;
  auto rot = [](const Polygon& p) {
    Polygon q;
    q.reserve(p.size());
    for (const Vec2& v : p) q.push_back(rotate_point_to_experiment_frame(v));
    return q;
  };
  out.outer = rot(domain.outer);
  for (const Polygon& h : domain.holes) out.holes.push_back(rot(h));
  for (const auto& [name, line] : domain.edges) out.edges[name] = rot(line);
  return out;
}

Vec2 rotate_point_to_experiment_frame(const Vec2& p) {
  return {p.y(), -p.x()};
}

std::vector<Vec2> sample_collocation(const Domain2D& domain, int n,
                                     std::uint64_t seed) {
  if (n <= 0) throw GeometryError("sample_collocation: n must be positive");
  if (material_area(domain) <= 0.0)
    throw GeometryError("sample_collocation: domain has no material area");
  const Bounds b = domain_bounds(domain);
  std::mt19937_64 rng(seed);
  std::vector<Vec2> pts;
  pts.reserve(n);
  // The material fraction of the paper design's bounding box is ~18%, so cap
  // attempts generously rather than risk an infinite loop on thin geometry.
  const std::int64_t max_attempts = 10000ll * n + 1000000ll;
  std::int64_t attempts = 0;
  while (static_cast<int>(pts.size()) < n) {
    if (++attempts > max_attempts)
      throw GeometryError("sample_collocation: rejection sampling stalled");
    const Vec2 p(b.xmin + (b.xmax - b.xmin) * uniform01(rng),
                 b.ymin + (b.ymax - b.ymin) * uniform01(rng));
    if (point_in_material(domain, p)) pts.push_back(p);
  }
  return pts;
}

std::vector<Vec2> sample_collocation(const TriangleMesh& mesh) {
  return mesh.nodes;
}

std::vector<Vec2> sample_boundary(const Domain2D& domain,
                                  const std::string& edge_name, int n) {
  auto it = domain.edges.find(edge_name);
  if (it == domain.edges.end())
    throw GeometryError("sample_boundary: unknown edge '" + edge_name + "'");
  if (n < 2) throw GeometryError("sample_boundary: n must be >= 2");
  const Polyline& line = it->second;
  if (line.size() < 2)
    throw GeometryError("sample_boundary: edge '" + edge_name +
                        "' is degenerate");

  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i + 1 < line.size(); ++i)
    cum.push_back(cum.back() + (line[i + 1] - line[i]).norm());
  const double total = cum.back();
  if (total <= 0.0)
    throw GeometryError("sample_boundary: edge '" + edge_name +
                        "' has zero length");

  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double s = total * static_cast<double>(i) / (n - 1);
    auto seg = std::upper_bound(cum.begin(), cum.end(), s) - cum.begin();
    seg = std::min<std::ptrdiff_t>(seg, static_cast<std::ptrdiff_t>(cum.size()) - 1);
    const std::size_t j = static_cast<std::size_t>(seg - 1);
    const double seg_len = cum[j + 1] - cum[j];
    const double t = seg_len > 0.0 ? (s - cum[j]) / seg_len : 0.0;
    pts.push_back(line[j] + t * (line[j + 1] - line[j]));
  }
  return pts;
}

// ---------------------------------------------------------------------------
// MSH 2.2 ASCII subset
// ---------------------------------------------------------------------------

namespace {

struct LineReader {
  std::istream& in;
  int lineno = 0;

  bool next(std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      if (!out.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw MeshParseError("mesh parse error at line " + std::to_string(lineno) +
                         ": " + msg);
  }
};

double tri_signed_area(const TriangleMesh& m, const std::array<int, 3>& t) {
  const Vec2& a = m.nodes[t[0]];
  const Vec2& b = m.nodes[t[1]];
  const Vec2& c = m.nodes[t[2]];
  return 0.5 * cross(b - a, c - a);
}

}  // namespace

TriangleMesh parse_mesh(std::istream& in) {
  LineReader rd{in};
  TriangleMesh mesh;
  std::map<int, int> id_to_index;
  std::map<int, std::string> physical_names;  // dim-1 physical tag -> name
  std::string line;

  while (rd.next(line)) {
    if (line == "$MeshFormat") {
      if (!rd.next(line)) rd.fail("truncated $MeshFormat");
      std::istringstream is(line);
      double version = 0;
      int file_type = 0, data_size = 0;
      if (!(is >> version >> file_type >> data_size))
        rd.fail("malformed $MeshFormat header");
      if (std::abs(version - 2.2) > 1e-9 || file_type != 0)
        rd.fail("unsupported mesh format (need 2.2 ASCII)");
      if (!rd.next(line) || line != "$EndMeshFormat")
        rd.fail("missing $EndMeshFormat");
    } else if (line == "$PhysicalNames") {
      if (!rd.next(line)) rd.fail("truncated $PhysicalNames");
      const int count = std::atoi(line.c_str());
      for (int i = 0; i < count; ++i) {
        if (!rd.next(line)) rd.fail("truncated $PhysicalNames");
        std::istringstream is(line);
        int dim = 0, tag = 0;
        std::string name;
        if (!(is >> dim >> tag)) rd.fail("malformed physical name entry");
        std::getline(is, name);
        const auto first = name.find('"');
        const auto last = name.rfind('"');
        if (first == std::string::npos || last <= first)
          rd.fail("physical name must be quoted");
        if (dim == 1) physical_names[tag] = name.substr(first + 1, last - first - 1);
      }
      if (!rd.next(line) || line != "$EndPhysicalNames")
        rd.fail("missing $EndPhysicalNames");
    } else if (line == "$Nodes") {
      if (!rd.next(line)) rd.fail("truncated $Nodes");
      const long count = std::atol(line.c_str());
      for (long i = 0; i < count; ++i) {
        if (!rd.next(line)) rd.fail("truncated $Nodes");
        std::istringstream is(line);
        int id = 0;
        double x = 0, y = 0, z = 0;
        if (!(is >> id >> x >> y >> z)) rd.fail("malformed node entry");
        if (std::abs(z) > 1e-9)
          rd.fail("node " + std::to_string(id) + " has nonzero z coordinate");
        id_to_index[id] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.emplace_back(x, y);
      }
      if (!rd.next(line) || line != "$EndNodes") rd.fail("missing $EndNodes");
    } else if (line == "$Elements") {
      if (!rd.next(line)) rd.fail("truncated $Elements");
      const long count = std::atol(line.c_str());
      for (long i = 0; i < count; ++i) {
        if (!rd.next(line)) rd.fail("truncated $Elements");
        std::istringstream is(line);
        int id = 0, type = 0, ntags = 0;
        if (!(is >> id >> type >> ntags)) rd.fail("malformed element entry");
        std::vector<int> tags(ntags);
        for (int& t : tags)
          if (!(is >> t)) rd.fail("malformed element tags");
        auto read_node = [&]() {
          int nid = 0;
          if (!(is >> nid)) rd.fail("malformed element connectivity");
          auto it = id_to_index.find(nid);
          if (it == id_to_index.end())
            rd.fail("element references unknown node " + std::to_string(nid));
          return it->second;
        };
        if (type == 1) {  // 2-node line
          const int a = read_node(), b = read_node();
          std::string name;
          if (!tags.empty()) {
            auto pn = physical_names.find(tags[0]);
            name = (pn != physical_names.end()) ? pn->second
                                                : std::to_string(tags[0]);
          }
          mesh.boundary.push_back({a, b, name});
        } else if (type == 2) {  // 3-node triangle
          std::array<int, 3> t{read_node(), read_node(), read_node()};
          mesh.triangles.push_back(t);
          const double area = tri_signed_area(mesh, mesh.triangles.back());
          if (std::abs(area) < 1e-12)
            rd.fail("degenerate triangle (element " + std::to_string(id) +
                    ")");
          if (area < 0.0)
            std::swap(mesh.triangles.back()[1], mesh.triangles.back()[2]);
        } else {
          rd.fail("unsupported element type " + std::to_string(type) +
                  " (element " + std::to_string(id) + ")");
        }
      }
      if (!rd.next(line) || line != "$EndElements")
        rd.fail("missing $EndElements");
    } else if (line[0] == '$') {
      // Skip unknown sections up to their matching end marker.
      const std::string end = "$End" + line.substr(1);
      while (rd.next(line) && line != end) {
      }
    } else {
      rd.fail("unexpected content: " + line);
    }
  }
  if (mesh.nodes.empty()) throw MeshParseError("mesh has no nodes");
  if (mesh.triangles.empty()) throw MeshParseError("mesh has no triangles");
  return mesh;
}

TriangleMesh parse_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  return parse_mesh(in);
}

void write_mesh(const TriangleMesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";

  std::map<std::string, int> name_tags;
  for (const auto& be : mesh.boundary)
    if (!be.name.empty() && !name_tags.count(be.name))
      name_tags[be.name] = static_cast<int>(name_tags.size()) + 1;
  if (!name_tags.empty()) {
    out << "$PhysicalNames\n" << name_tags.size() << "\n";
    for (const auto& [name, tag] : name_tags)
      out << "1 " << tag << " \"" << name << "\"\n";
    out << "$EndPhysicalNames\n";
  }

  char buf[64];
  out << "$Nodes\n" << mesh.nodes.size() << "\n";
  for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g %.17g 0\n", i + 1,
                  mesh.nodes[i].x(), mesh.nodes[i].y());
    out << buf;
  }
  out << "$EndNodes\n";

  out << "$Elements\n" << mesh.boundary.size() + mesh.triangles.size() << "\n";
  std::size_t eid = 1;
  for (const auto& be : mesh.boundary) {
    const int tag = be.name.empty() ? 0 : name_tags[be.name];
    out << eid++ << " 1 2 " << tag << " " << tag << " " << be.a + 1 << " "
        << be.b + 1 << "\n";
  }
  for (const auto& t : mesh.triangles)
    out << eid++ << " 2 2 0 0 " << t[0] + 1 << " " << t[1] + 1 << " "
        << t[2] + 1 << "\n";
  out << "$EndElements\n";
}

void write_mesh_file(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file: " + path);
  write_mesh(mesh, out);
}

double mesh_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (const auto& t : mesh.triangles) a += tri_signed_area(mesh, t);
  return a;
}

int nearest_node(const TriangleMesh& mesh, const Vec2& p) {
  if (mesh.nodes.empty()) throw GeometryError("nearest_node on empty mesh");
  int best = 0;
  double best_d = (mesh.nodes[0] - p).squaredNorm();
  for (std::size_t i = 1; i < mesh.nodes.size(); ++i) {
    const double d = (mesh.nodes[i] - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

std::string finray_params_to_json(const FinRayParams& p) {
  json j;
  j["H"] = p.height;
  j["L"] = p.base_length;
  j["W"] = p.width;
  j["L_angle"] = p.tip_angle;
  j["L_tip"] = p.tip_length;
  j["N"] = p.rib_count;
  j["t_rib"] = p.rib_thickness;
  j["t_flex"] = p.flex_thickness;
  j["t_back"] = p.back_thickness;
  return j.dump(1);
}

FinRayParams finray_params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed finray params JSON: ") + e.what());
  }
  FinRayParams p;
  p.height = j.at("H").get<double>();
  p.base_length = j.at("L").get<double>();
  p.width = j.at("W").get<double>();
  p.tip_angle = j.at("L_angle").get<double>();
  p.tip_length = j.at("L_tip").get<double>();
  p.rib_count = j.at("N").get<int>();
  p.rib_thickness = j.at("t_rib").get<double>();
  p.flex_thickness = j.at("t_flex").get<double>();
  p.back_thickness = j.at("t_back").get<double>();
  return p;
}

std::string domain_to_json(const Domain2D& d) {
  json j;
  j["outer"] = polygon_to_json(d.outer);
  json holes = json::array();
  for (const Polygon& h : d.holes) holes.push_back(polygon_to_json(h));
  j["holes"] = std::move(holes);
  json edges;
  for (const auto& [name, line] : d.edges) edges[name] = polygon_to_json(line);
  j["edges"] = std::move(edges);
  return j.dump(1);
}

Domain2D domain_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed domain JSON: ") + e.what());
  }
  Domain2D d;
  d.outer = polygon_from_json(j.at("outer"));
  for (const auto& h : j.at("holes")) d.holes.push_back(polygon_from_json(h));
  if (j.contains("edges"))
    for (const auto& [name, line] : j.at("edges").items())
      d.edges[name] = polygon_from_json(line);
  return d;
}

}  // namespace pinnray
