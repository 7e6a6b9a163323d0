#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pinnray/common.hpp"
#include "pinnray/elasticity.hpp"
#include "pinnray/evaluation.hpp"
#include "pinnray/geometry.hpp"
#include "pinnray/network.hpp"
#include "pinnray/training.hpp"

namespace pinnray {

// Domain source: a parametric finger (optionally rotated into the experiment
// frame, finger along +x) or an explicit polygon with named edges.
struct DomainSpec {
  enum class Kind { finray, polygon };
  Kind kind = Kind::finray;
  FinRayParams finray;
  bool experiment_frame = true;  // finray only
  Domain2D polygon;
};

struct ForcedEdgeSpec {
  std::string edge;
  int n = 2;
  Vec2 displacement = Vec2::Zero();
};

struct PointSpec {
  int n_collocation = 5000;
  std::string collocation_source = "rejection";  // "rejection" | "mesh"
  std::uint64_t collocation_seed = 0;
  int n_fixed = 1000;
  std::string fixed_edge = "base";
  std::vector<TargetPoint> forced;
  std::optional<ForcedEdgeSpec> forced_edge;
  std::vector<Vec2> marker_locations;
  std::string markers_path;  // measured marker displacements (mm CSV)
};

struct ExperimentSpec {
  DomainSpec domain;
  std::optional<std::string> mesh_path;
  MaterialModel material;
  PointSpec points;
  NetworkConfig network;
  TrainConfig train;
  std::string output_dir = "out";
};

// Parses the experiment JSON; file paths inside the config resolve relative
// to the config file's directory.
ExperimentSpec load_experiment_file(const std::string& path);
ExperimentSpec experiment_from_json(const std::string& text,
                                    const std::string& base_dir);

Domain2D make_domain(const DomainSpec& spec);
PointSets make_point_sets(const ExperimentSpec& spec, const Domain2D& domain,
                          const TriangleMesh* mesh, bool with_markers);

enum class Variant { std_, asm_ };

// --- CLI commands; return process exit codes (0 ok, 2 missing input file,
// --- 1 other failure) and report errors on stderr.

int cmd_geometry(const std::string& params_path, const std::string& out_path,
                 bool experiment_frame, int sample_n, std::uint64_t sample_seed,
                 const std::string& points_out);
int cmd_fem(const ExperimentSpec& spec);
int cmd_train(const ExperimentSpec& spec, Variant variant);
int cmd_evaluate(const std::string& measured_path,
                 const std::vector<std::pair<std::string, std::string>>&
                     method_estimates,
                 const std::string& out_dir);
int cmd_export(const std::string& checkpoint_path,
               const std::string& domain_path, const MaterialModel& material,
               const GridSpec& grid, const std::string& out_path);

int run_cli(int argc, char** argv);

}  // namespace pinnray
