#include "pinnray/fem.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <Eigen/SparseCholesky>

namespace pinnray {

namespace {

struct TriGeom {
  double area = 0.0;
  // Shape-function gradient coefficients: dN_i/dx = b[i]/(2A),
  // dN_i/dy = c[i]/(2A).
  double b[3], c[3];
};

TriGeom tri_geom(const Vec2& p1, const Vec2& p2, const Vec2& p3) {
  TriGeom g;
  g.b[0] = p2.y() - p3.y();
  g.b[1] = p3.y() - p1.y();
  g.b[2] = p1.y() - p2.y();
  g.c[0] = p3.x() - p2.x();
  g.c[1] = p1.x() - p3.x();
  g.c[2] = p2.x() - p1.x();
  g.area = 0.5 * ((p2.x() - p1.x()) * (p3.y() - p1.y()) -
                  (p3.x() - p1.x()) * (p2.y() - p1.y()));
  return g;
}

Eigen::Matrix<double, 3, 6> cst_b_matrix(const TriGeom& g) {
  Eigen::Matrix<double, 3, 6> bm;
  bm.setZero();
  const double inv2a = 1.0 / (2.0 * g.area);
  for (int i = 0; i < 3; ++i) {
    bm(0, 2 * i) = g.b[i] * inv2a;
    bm(1, 2 * i + 1) = g.c[i] * inv2a;
    bm(2, 2 * i) = g.c[i] * inv2a;
    bm(2, 2 * i + 1) = g.b[i] * inv2a;
  }
  return bm;
}

}  // namespace

void FemProblem::fix_edge(const std::string& edge_name, const Vec2& value) {
  bool found = false;
  for (const auto& be : mesh.boundary) {
    if (be.name != edge_name) continue;
    dirichlet[be.a] = value;
    dirichlet[be.b] = value;
    found = true;
  }
  if (!found)
    throw FemError("fix_edge: no boundary edges tagged '" + edge_name + "'");
}

Eigen::Matrix<double, 6, 6> cst_stiffness(const Vec2& a, const Vec2& b,
                                          const Vec2& c,
                                          const MaterialModel& mat) {
  const TriGeom g = tri_geom(a, b, c);
  if (std::abs(g.area) < 1e-12)
    throw FemError("cst_stiffness: degenerate triangle");
  const Eigen::Matrix<double, 3, 6> bm = cst_b_matrix(g);
  const Eigen::Matrix3d d = constitutive_matrix(mat);
  return g.area * bm.transpose() * d * bm;
}

Eigen::SparseMatrix<double> assemble(const FemProblem& problem) {
  const auto& mesh = problem.mesh;
  const Eigen::Index ndof = 2 * static_cast<Eigen::Index>(mesh.nodes.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.triangles.size() * 36);
  const Eigen::Matrix3d d = constitutive_matrix(problem.material);

  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const auto& t = mesh.triangles[e];
    const TriGeom g =
        tri_geom(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
    if (std::abs(g.area) < 1e-12)
      throw FemError("assemble: degenerate triangle (element " +
                     std::to_string(e) + ")");
    const Eigen::Matrix<double, 3, 6> bm = cst_b_matrix(g);
    const Eigen::Matrix<double, 6, 6> ke =
        g.area * bm.transpose() * d * bm;
    const int dofs[6] = {2 * t[0], 2 * t[0] + 1, 2 * t[1],
                         2 * t[1] + 1, 2 * t[2], 2 * t[2] + 1};
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        trips.emplace_back(dofs[i], dofs[j], ke(i, j));
  }
  Eigen::SparseMatrix<double> k(ndof, ndof);
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

FemSolution solve(const FemProblem& problem) {
  const auto& mesh = problem.mesh;
  const Eigen::Index n_nodes = static_cast<Eigen::Index>(mesh.nodes.size());
  const Eigen::Index ndof = 2 * n_nodes;

  for (const auto& [node, value] : problem.dirichlet)
    if (node < 0 || node >= n_nodes)
      throw FemError("solve: Dirichlet node index out of range: " +
                     std::to_string(node));
  if (2 * problem.dirichlet.size() < 3)
    throw FemError(
        "solve: fewer than 3 constrained degrees of freedom; rigid modes "
        "(2 translations + 1 rotation) are unconstrained");

  // Partition DOFs into free and constrained.
  std::vector<int> dof_kind(ndof, -1);  // >= 0: free index
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ndof);
  for (const auto& [node, value] : problem.dirichlet) {
    dof_kind[2 * node] = -2;
    dof_kind[2 * node + 1] = -2;
    u[2 * node] = value.x();
    u[2 * node + 1] = value.y();
  }
  Eigen::Index n_free = 0;
  for (Eigen::Index i = 0; i < ndof; ++i)
    if (dof_kind[i] == -1) dof_kind[i] = static_cast<int>(n_free++);

  Eigen::VectorXd f = Eigen::VectorXd::Zero(ndof);
  for (const auto& [node, force] : problem.loads) {
    if (node < 0 || node >= n_nodes)
      throw FemError("solve: load node index out of range: " +
                     std::to_string(node));
    f[2 * node] += force.x();
    f[2 * node + 1] += force.y();
  }

  const Eigen::SparseMatrix<double> k = assemble(problem);

  // K_ff and the coupling contribution K_fc * u_c folded into the rhs.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(k.nonZeros());
  Eigen::VectorXd rhs(n_free);
  for (Eigen::Index i = 0; i < ndof; ++i)
    if (dof_kind[i] >= 0) rhs[dof_kind[i]] = f[i];
  for (int col = 0; col < k.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(k, col); it; ++it) {
      const int ri = dof_kind[it.row()];
      const int ci = dof_kind[it.col()];
      if (ri >= 0 && ci >= 0) {
        trips.emplace_back(ri, ci, it.value());
      } else if (ri >= 0 && ci == -2) {
        rhs[ri] -= it.value() * u[it.col()];
      }
    }
  }
  Eigen::SparseMatrix<double> kff(n_free, n_free);
  kff.setFromTriplets(trips.begin(), trips.end());

  if (n_free > 0) {
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(kff);
    if (ldlt.info() != Eigen::Success)
      throw FemError("solve: factorization failed (singular system)");
    const Eigen::VectorXd uf = ldlt.solve(rhs);
    const double rhs_norm = std::max(rhs.norm(), 1e-30);
    const double resid = (kff * uf - rhs).norm() / rhs_norm;
    if (!uf.allFinite() || resid > 1e-8)
      throw FemError(
          "solve: singular or ill-conditioned system (residual " +
          std::to_string(resid) +
          "); check that the Dirichlet set removes all rigid modes");
    for (Eigen::Index i = 0; i < ndof; ++i)
      if (dof_kind[i] >= 0) u[i] = uf[dof_kind[i]];
  }

  FemSolution sol;
  sol.mesh = mesh;
  sol.displacements = std::move(u);
  sol.element_strain.reserve(mesh.triangles.size());
  sol.element_stress.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const TriGeom g =
        tri_geom(mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]);
    const double inv2a = 1.0 / (2.0 * g.area);
    double exx = 0.0, eyy = 0.0, gxy = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double ui = sol.displacements[2 * t[i]];
      const double vi = sol.displacements[2 * t[i] + 1];
      exx += g.b[i] * inv2a * ui;
      eyy += g.c[i] * inv2a * vi;
      gxy += g.c[i] * inv2a * ui + g.b[i] * inv2a * vi;
    }
    const Strain2 eps{exx, eyy, 0.5 * gxy};
    sol.element_strain.push_back(eps);
    sol.element_stress.push_back(stress_from_strain(eps, problem.material));
  }
  return sol;
}

double strain_energy(const FemProblem& problem, const FemSolution& solution) {
  const Eigen::SparseMatrix<double> k = assemble(problem);
  return 0.5 * solution.displacements.dot(k * solution.displacements);
}

int find_triangle(const TriangleMesh& mesh, const Vec2& point, double tol) {
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const auto& t = mesh.triangles[e];
    const Vec2& a = mesh.nodes[t[0]];
    const Vec2& b = mesh.nodes[t[1]];
    const Vec2& c = mesh.nodes[t[2]];
    const double det = (b.x() - a.x()) * (c.y() - a.y()) -
                       (c.x() - a.x()) * (b.y() - a.y());
    const double l1 = ((b.x() - point.x()) * (c.y() - point.y()) -
                       (c.x() - point.x()) * (b.y() - point.y())) /
                      det;
    const double l2 = ((c.x() - point.x()) * (a.y() - point.y()) -
                       (a.x() - point.x()) * (c.y() - point.y())) /
                      det;
    const double l3 = 1.0 - l1 - l2;
    if (l1 >= -tol && l2 >= -tol && l3 >= -tol) return static_cast<int>(e);
  }
  return -1;
}

namespace {

Eigen::Vector3d barycentric(const TriangleMesh& mesh, int element,
                            const Vec2& p) {
  const auto& t = mesh.triangles[element];
  const Vec2& a = mesh.nodes[t[0]];
  const Vec2& b = mesh.nodes[t[1]];
  const Vec2& c = mesh.nodes[t[2]];
  const double det =
      (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
  Eigen::Vector3d l;
  l[0] = ((b.x() - p.x()) * (c.y() - p.y()) -
          (c.x() - p.x()) * (b.y() - p.y())) /
         det;
  l[1] = ((c.x() - p.x()) * (a.y() - p.y()) -
          (a.x() - p.x()) * (c.y() - p.y())) /
         det;
  l[2] = 1.0 - l[0] - l[1];
  return l;
}

int nearest_triangle(const TriangleMesh& mesh, const Vec2& p) {
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < mesh.triangles.size(); ++e) {
    const auto& t = mesh.triangles[e];
    const Vec2 centroid =
        (mesh.nodes[t[0]] + mesh.nodes[t[1]] + mesh.nodes[t[2]]) / 3.0;
    const double d = (centroid - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(e);
    }
  }
  return best;
}

}  // namespace

Vec2 interpolate(const FemSolution& solution, const Vec2& point) {
  const int e = find_triangle(solution.mesh, point);
  if (e < 0) {
    const int near = nearest_triangle(solution.mesh, point);
    throw FemError("interpolate: point (" + std::to_string(point.x()) + ", " +
                   std::to_string(point.y()) +
                   ") lies outside the mesh; nearest element is " +
                   std::to_string(near));
  }
  const Eigen::Vector3d l = barycentric(solution.mesh, e, point);
  const auto& t = solution.mesh.triangles[e];
  Vec2 out = Vec2::Zero();
  for (int i = 0; i < 3; ++i)
    out += l[i] * solution.displacement_at_node(t[i]);
  return out;
}

ElementState element_state_at(const FemSolution& solution, const Vec2& point) {
  const int e = find_triangle(solution.mesh, point);
  if (e < 0)
    throw FemError("element_state_at: point outside the mesh");
  return {e, solution.element_strain[e], solution.element_stress[e]};
}

void write_nodal_csv(const FemSolution& solution, std::ostream& out) {
  out << "x,y,u,v\n";
  char buf[160];
  for (std::size_t i = 0; i < solution.mesh.nodes.size(); ++i) {
    const Vec2 d = solution.displacement_at_node(static_cast<int>(i));
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n",
                  solution.mesh.nodes[i].x(), solution.mesh.nodes[i].y(),
                  d.x(), d.y());
    out << buf;
  }
}

void write_element_csv(const FemSolution& solution, std::ostream& out) {
  out << "xc,yc,eps_xx,eps_yy,eps_xy,sig_xx,sig_yy,sig_xy\n";
  char buf[320];
  for (std::size_t e = 0; e < solution.mesh.triangles.size(); ++e) {
    const auto& t = solution.mesh.triangles[e];
    const Vec2 c = (solution.mesh.nodes[t[0]] + solution.mesh.nodes[t[1]] +
                    solution.mesh.nodes[t[2]]) /
                   3.0;
    const Strain2& eps = solution.element_strain[e];
    const Stress2& sig = solution.element_stress[e];
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", c.x(),
                  c.y(), eps.xx, eps.yy, eps.xy, sig.xx, sig.yy, sig.xy);
    out << buf;
  }
}

void write_solution_files(const FemSolution& solution,
                          const std::string& nodal_path,
                          const std::string& element_path) {
  std::ofstream nodal(nodal_path);
  if (!nodal) throw IoError("cannot write " + nodal_path);
  write_nodal_csv(solution, nodal);
  std::ofstream elems(element_path);
  if (!elems) throw IoError("cannot write " + element_path);
  write_element_csv(solution, elems);
}

}  // namespace pinnray
