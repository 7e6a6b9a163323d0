#include "pinnray/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pinnray/fem.hpp"

namespace pinnray {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).string();
}

PlaneFormulation formulation_from_string(const std::string& s) {
  if (s == "as_paper") return PlaneFormulation::as_paper;
  if (s == "plane_strain") return PlaneFormulation::plane_strain;
  if (s == "plane_stress") return PlaneFormulation::plane_stress;
  throw ConfigError("unknown material formulation: " + s);
}

MaterialModel material_from_json(const json& j) {
  MaterialModel m;
  m.youngs_modulus = j.at("E").get<double>();
  m.poisson_ratio = j.at("mu").get<double>();
  if (j.contains("formulation"))
    m.formulation = formulation_from_string(j["formulation"].get<std::string>());
  m.validate();
  return m;
}

int guarded(const char* what, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const IoError& e) {
    std::cerr << what << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << what << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

ExperimentSpec experiment_from_json(const std::string& text,
                                    const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed experiment JSON: ") + e.what());
  }

  ExperimentSpec spec;

  const json& dj = j.at("domain");
  const std::string kind = dj.at("type").get<std::string>();
  if (kind == "finray") {
    spec.domain.kind = DomainSpec::Kind::finray;
    spec.domain.finray = finray_params_from_json(dj.at("params").dump());
    spec.domain.experiment_frame =
        dj.value("frame", std::string("experiment")) == "experiment";
  } else if (kind == "polygon") {
    spec.domain.kind = DomainSpec::Kind::polygon;
    spec.domain.polygon = domain_from_json(dj.dump());
  } else {
    throw ConfigError("unknown domain type: " + kind);
  }

  if (j.contains("mesh") && !j["mesh"].is_null())
    spec.mesh_path = resolve(base_dir, j["mesh"].get<std::string>());

  spec.material = material_from_json(j.at("material"));

  if (j.contains("points")) {
    const json& p = j["points"];
    spec.points.n_collocation = p.value("n_collocation", 5000);
    spec.points.collocation_source =
        p.value("collocation_source", std::string("rejection"));
    spec.points.collocation_seed = p.value("collocation_seed", 0ull);
    spec.points.n_fixed = p.value("n_fixed", 1000);
    spec.points.fixed_edge = p.value("fixed_edge", std::string("base"));
    if (p.contains("forced"))
      for (const auto& f : p["forced"])
        spec.points.forced.push_back(
            {Vec2(f.at("x").get<double>(), f.at("y").get<double>()),
             Vec2(f.at("u").get<double>(), f.at("v").get<double>())});
    if (p.contains("forced_edge")) {
      ForcedEdgeSpec fe;
      fe.edge = p["forced_edge"].at("edge").get<std::string>();
      fe.n = p["forced_edge"].value("n", 2);
      fe.displacement = Vec2(p["forced_edge"].at("u").get<double>(),
                             p["forced_edge"].at("v").get<double>());
      spec.points.forced_edge = fe;
    }
    if (p.contains("marker_locations"))
      for (const auto& m : p["marker_locations"])
        spec.points.marker_locations.emplace_back(m[0].get<double>(),
                                                  m[1].get<double>());
    if (p.contains("markers"))
      spec.points.markers_path = resolve(base_dir, p["markers"].get<std::string>());
  }

  if (j.contains("network")) {
    const json& n = j["network"];
    spec.network.layers = n.value("layers", 4);
    spec.network.width = n.value("width", 64);
    spec.network.seed = n.value("seed", 0ull);
    spec.network.validate();
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    spec.train.epochs = t.value("epochs", 60000);
    spec.train.learning_rate = t.value("learning_rate", 1e-3);
    spec.train.weights.lambda_bc = t.value("lambda_bc", 1000.0);
    spec.train.weights.lambda_asm = t.value("lambda_asm", 1000.0);
    spec.train.seed = t.value("seed", 0ull);
    spec.train.beta1 = t.value("beta1", 0.9);
    spec.train.beta2 = t.value("beta2", 0.999);
    spec.train.epsilon = t.value("epsilon", 1e-8);
    spec.train.log_every = t.value("log_every", 100);
    spec.train.deterministic = t.value("deterministic", true);
    spec.train.threads = t.value("threads", 1);
    spec.train.chunk_size = t.value("chunk_size", 1024);
    spec.train.area_scaling = t.value("area_scaling", false);
    spec.train.validate();
  }

  spec.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
  return spec;
}

ExperimentSpec load_experiment_file(const std::string& path) {
  const std::string text = read_text_file(path);
  return experiment_from_json(text, fs::path(path).parent_path().string());
}

Domain2D make_domain(const DomainSpec& spec) {
  if (spec.kind == DomainSpec::Kind::polygon) return spec.polygon;
  Domain2D d = build_finray(spec.finray);
  if (spec.experiment_frame) d = rotate_to_experiment_frame(d);
  return d;
}

PointSets make_point_sets(const ExperimentSpec& spec, const Domain2D& domain,
                          const TriangleMesh* mesh, bool with_markers) {
  PointSets sets;
  if (spec.points.collocation_source == "mesh") {
    if (!mesh)
      throw ConfigError("collocation_source 'mesh' requires a mesh file");
    sets.collocation = sample_collocation(*mesh);
  } else if (spec.points.collocation_source == "rejection") {
    sets.collocation = sample_collocation(domain, spec.points.n_collocation,
                                          spec.points.collocation_seed);
  } else {
    throw ConfigError("unknown collocation_source: " +
                      spec.points.collocation_source);
  }

  if (spec.points.n_fixed > 0)
    sets.fixed = sample_boundary(domain, spec.points.fixed_edge,
                                 spec.points.n_fixed);

  sets.forced = spec.points.forced;
  if (spec.points.forced_edge) {
    const auto& fe = *spec.points.forced_edge;
    for (const Vec2& p : sample_boundary(domain, fe.edge, fe.n))
      sets.forced.push_back({p, fe.displacement});
  }

  if (with_markers) {
    if (spec.points.markers_path.empty())
      throw ConfigError(
          "assimilation requested but the experiment has no markers file");
    for (const MarkerDisplacement& m :
         read_marker_displacements_file(spec.points.markers_path))
      sets.assimilation.push_back({m.position, m.displacement});
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_geometry(const std::string& params_path, const std::string& out_path,
                 bool experiment_frame, int sample_n, std::uint64_t sample_seed,
                 const std::string& points_out) {
  return guarded("geometry", [&] {
    const FinRayParams params =
        finray_params_from_json(read_text_file(params_path));
    Domain2D domain = build_finray(params);
    if (experiment_frame) domain = rotate_to_experiment_frame(domain);
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write domain: " + out_path);
    out << domain_to_json(domain) << "\n";
    std::cout << "geometry: outer vertices " << domain.outer.size()
              << ", holes " << domain.holes.size() << ", material area "
              << material_area(domain) << " mm^2\n";
    if (sample_n > 0) {
      if (points_out.empty())
        throw ConfigError("--sample requires --points-out");
      const auto pts = sample_collocation(domain, sample_n, sample_seed);
      std::ofstream pout(points_out);
      if (!pout) throw IoError("cannot write points: " + points_out);
      pout << "x,y\n";
      char buf[80];
      for (const Vec2& p : pts) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.x(), p.y());
        pout << buf;
      }
    }
  });
}

namespace {

// FEM problem for an experiment: fixed edge pinned to zero, each forced point
// prescribed at its nearest mesh node.
FemProblem make_fem_problem(const ExperimentSpec& spec, const Domain2D& domain,
                            TriangleMesh mesh) {
  FemProblem problem;
  problem.mesh = std::move(mesh);
  problem.material = spec.material;
  problem.fix_edge(spec.points.fixed_edge, Vec2::Zero());
  PointSets sets;
  sets.forced = spec.points.forced;
  if (spec.points.forced_edge) {
    const auto& fe = *spec.points.forced_edge;
    for (const Vec2& p : sample_boundary(domain, fe.edge, fe.n))
      sets.forced.push_back({p, fe.displacement});
  }
  for (const TargetPoint& t : sets.forced)
    problem.dirichlet[nearest_node(problem.mesh, t.position)] = t.displacement;
  return problem;
}

}  // namespace

int cmd_fem(const ExperimentSpec& spec) {
  return guarded("fem", [&] {
    if (!spec.mesh_path)
      throw ConfigError("fem requires a mesh file in the experiment config");
    const Domain2D domain = make_domain(spec.domain);
    TriangleMesh mesh = parse_mesh_file(*spec.mesh_path);
    const FemProblem problem = make_fem_problem(spec, domain, std::move(mesh));
    const FemSolution solution = solve(problem);

    fs::create_directories(spec.output_dir);
    write_solution_files(solution,
                         (fs::path(spec.output_dir) / "fem_nodes.csv").string(),
                         (fs::path(spec.output_dir) / "fem_elements.csv").string());

    double max_v = 0.0;
    for (Eigen::Index i = 1; i < solution.displacements.size(); i += 2)
      max_v = std::max(max_v, std::abs(solution.displacements[i]));
    std::cout << "fem: " << problem.mesh.nodes.size() << " nodes, "
              << problem.mesh.triangles.size() << " elements, max |v| "
              << max_v << " mm\n";

    if (!spec.points.marker_locations.empty()) {
      std::vector<MarkerDisplacement> markers;
      int id = 1;
      for (const Vec2& p : spec.points.marker_locations)
        markers.push_back({id++, p, interpolate(solution, p)});
      const std::string path =
          (fs::path(spec.output_dir) / "fem_markers.csv").string();
      write_marker_displacements_file(markers, path);
      std::cout << "fem: wrote " << markers.size() << " marker estimates to "
                << path << "\n";
    }
  });
}

int cmd_train(const ExperimentSpec& spec, Variant variant) {
  return guarded("train", [&] {
    const Domain2D domain = make_domain(spec.domain);
    std::optional<TriangleMesh> mesh;
    if (spec.mesh_path && spec.points.collocation_source == "mesh")
      mesh = parse_mesh_file(*spec.mesh_path);

    const bool with_markers = variant == Variant::asm_;
    const PointSets sets =
        make_point_sets(spec, domain, mesh ? &*mesh : nullptr, with_markers);

    const Bounds b = domain_bounds(domain);
    DisplacementNet net = DisplacementNet::init(
        spec.network, BoundingBox{b.xmin, b.xmax, b.ymin, b.ymax});

    TrainConfig cfg = spec.train;
    cfg.assimilation_enabled = with_markers;

    fs::create_directories(spec.output_dir);
    const std::string tag = with_markers ? "asm" : "std";
    const std::string loss_path =
        (fs::path(spec.output_dir) / ("loss_" + tag + ".csv")).string();

    TrainResult result;
    try {
      result = train(net, sets, spec.material, cfg);
    } catch (const TrainingDivergence& e) {
      write_loss_history_file(e.history, loss_path);
      throw;
    }
    write_loss_history_file(result.history, loss_path);
    save_checkpoint(
        net, (fs::path(spec.output_dir) / ("checkpoint_" + tag + ".json"))
                 .string());

    const LossRecord& last = result.history.back();
    std::cout << "train[" << tag << "]: epoch " << last.epoch << " l_pde "
              << last.l_pde << " l_bc " << last.l_bc << " l_asm " << last.l_asm
              << " l_total " << last.l_total << "\n";
  });
}

int cmd_evaluate(const std::string& measured_path,
                 const std::vector<std::pair<std::string, std::string>>&
                     method_estimates,
                 const std::string& out_dir) {
  return guarded("evaluate", [&] {
    const auto measured = read_marker_displacements_file(measured_path);
    if (measured.size() != 9)
      std::cerr << "evaluate: warning: " << measured.size()
                << " markers (expected 9); computing metrics anyway\n";

    std::vector<MethodMetrics> all;
    for (const auto& [name, path] : method_estimates) {
      const auto estimates = read_marker_displacements_file(path);
      if (estimates.size() != measured.size())
        throw ConfigError("evaluate: marker count mismatch for method " +
                          name);
      std::vector<Vec2> est, meas;
      for (const MarkerDisplacement& m : measured) {
        meas.push_back(m.displacement);
        bool found = false;
        for (const MarkerDisplacement& e : estimates)
          if (e.marker_id == m.marker_id) {
            est.push_back(e.displacement);
            found = true;
            break;
          }
        if (!found)
          throw ConfigError("evaluate: method " + name + " misses marker " +
                            std::to_string(m.marker_id));
      }
      all.push_back(compute_metrics(name, est, meas));
    }

    fs::create_directories(out_dir);
    const std::string metrics_path =
        (fs::path(out_dir) / "metrics.json").string();
    std::ofstream out(metrics_path);
    if (!out) throw IoError("cannot write " + metrics_path);
    out << metrics_to_json(all) << "\n";
    std::cout << metrics_table(all);
  });
}

int cmd_export(const std::string& checkpoint_path,
               const std::string& domain_path, const MaterialModel& material,
               const GridSpec& grid, const std::string& out_path) {
  return guarded("export", [&] {
    const DisplacementNet net = load_checkpoint(checkpoint_path);
    const Domain2D domain = domain_from_json(read_text_file(domain_path));
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    export_fields(net, material, domain, grid, out);
  });
}

}  // namespace pinnray
