#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "pinnray/common.hpp"
#include "pinnray/elasticity.hpp"
#include "pinnray/geometry.hpp"

namespace pinnray {

// Linear-triangle (constant strain) plane elasticity problem. Displacement
// DOFs are interleaved (u0, v0, u1, v1, ...). Dirichlet constraints are
// enforced by exact row/column elimination.
struct FemProblem {
  TriangleMesh mesh;
  MaterialModel material;
  std::map<int, Vec2> dirichlet;                 // node -> prescribed (u, v)
  std::vector<std::pair<int, Vec2>> loads;       // node -> force, N/mm

  // Pins every node on boundary edges tagged `edge_name` to `value`.
  void fix_edge(const std::string& edge_name, const Vec2& value = Vec2::Zero());
};

struct FemSolution {
  TriangleMesh mesh;
  Eigen::VectorXd displacements;  // 2 * n_nodes, interleaved
  std::vector<Strain2> element_strain;
  std::vector<Stress2> element_stress;

  Vec2 displacement_at_node(int node) const {
    return {displacements[2 * node], displacements[2 * node + 1]};
  }
};

// Global stiffness from CST element matrices; symmetric positive
// semi-definite before constraints.
Eigen::SparseMatrix<double> assemble(const FemProblem& problem);

// 6x6 element stiffness of one constant-strain triangle (unit thickness).
Eigen::Matrix<double, 6, 6> cst_stiffness(const Vec2& a, const Vec2& b,
                                          const Vec2& c,
                                          const MaterialModel& mat);

FemSolution solve(const FemProblem& problem);

// Total strain energy 1/2 u^T K u of a solution.
double strain_energy(const FemProblem& problem, const FemSolution& solution);

// Barycentric interpolation of the displacement field at `point`; throws
// FemError with a nearest-triangle diagnostic when the point lies outside
// the mesh.
Vec2 interpolate(const FemSolution& solution, const Vec2& point);

// Locates the triangle containing `point`, or -1. `tol` loosens the
// barycentric inside test to absorb roundoff on element borders.
int find_triangle(const TriangleMesh& mesh, const Vec2& point,
                  double tol = 1e-10);

// Strain/stress of the element containing `point`.
struct ElementState {
  int element = -1;
  Strain2 strain;
  Stress2 stress;
};
ElementState element_state_at(const FemSolution& solution, const Vec2& point);

// Solution export: nodal x,y,u,v rows and per-element centroid rows with
// strain and stress components.
void write_nodal_csv(const FemSolution& solution, std::ostream& out);
void write_element_csv(const FemSolution& solution, std::ostream& out);
void write_solution_files(const FemSolution& solution,
                          const std::string& nodal_path,
                          const std::string& element_path);

}  // namespace pinnray
