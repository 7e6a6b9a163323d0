#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pinnray/experiment.hpp"

namespace pinnray {

namespace {

// Flag overrides applied on top of the experiment JSON.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<bool> deterministic;
  std::optional<std::string> out;

  void apply(ExperimentSpec& spec) const {
    if (seed) {
      spec.train.seed = *seed;
      spec.network.seed = *seed;
      spec.points.collocation_seed = *seed;
    }
    if (threads) spec.train.threads = *threads;
    if (deterministic) spec.train.deterministic = *deterministic;
    if (out) spec.output_dir = *out;
  }
};

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Energy-minimizing neural solver for 2D soft-finger elasticity"};
  app.require_subcommand(1);

  // --- geometry ---
  auto* geo = app.add_subcommand(
      "geometry", "Build the parametric finger outline and emit domain JSON");
  std::string geo_config, geo_out = "domain.json", geo_points_out;
  bool geo_design_frame = false;
  int geo_sample = 0;
  std::uint64_t geo_seed = 0;
  geo->add_option("--config", geo_config, "Finger parameter JSON")->required();
  geo->add_option("--out", geo_out, "Output domain JSON path");
  geo->add_flag("--design-frame", geo_design_frame,
                "Keep the upright design frame (base along y=0)");
  geo->add_option("--sample", geo_sample, "Also sample N collocation points");
  geo->add_option("--seed", geo_seed, "Sampling seed")
      ->envname("PINNRAY_SEED");
  geo->add_option("--points-out", geo_points_out, "Sampled points CSV path");

  // --- shared experiment options ---
  std::string config_path;
  Overrides ov;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Experiment JSON")->required();
    cmd->add_option("--seed", [&](const std::vector<std::string>& v) {
         ov.seed = std::stoull(v[0]);
         return true;
       }, "Override all seeds")
        ->envname("PINNRAY_SEED");
    cmd->add_option("--threads", [&](const std::vector<std::string>& v) {
         ov.threads = std::stoi(v[0]);
         return true;
       }, "Worker threads for the loss evaluation")
        ->envname("PINNRAY_THREADS");
    cmd->add_flag("--deterministic,!--no-deterministic",
                  [&](std::int64_t count) { ov.deterministic = count > 0; },
                  "Fixed-order reductions (always on in this build)");
    cmd->add_option("--out", [&](const std::vector<std::string>& v) {
         ov.out = v[0];
         return true;
       }, "Override the output directory")
        ->envname("PINNRAY_OUT");
  };

  auto* fem = app.add_subcommand(
      "fem", "Solve the finite-element baseline on the experiment mesh");
  add_common(fem);

  auto* tr = app.add_subcommand("train", "Train the displacement networks");
  add_common(tr);
  std::string variant = "std";
  tr->add_option("--variant", variant, "std (physics only) or asm (markers)")
      ->check(CLI::IsMember({"std", "asm"}))
      ->envname("PINNRAY_VARIANT");

  auto* ev = app.add_subcommand(
      "evaluate", "Score marker estimates against measured displacements");
  std::string measured_path, ev_out = "out";
  std::vector<std::string> estimate_args;
  ev->add_option("--measured", measured_path,
                 "Measured marker displacements CSV")
      ->required();
  ev->add_option("--estimate", estimate_args,
                 "name=path marker estimate CSV (repeatable)")
      ->required();
  ev->add_option("--out", ev_out, "Output directory");

  auto* ex = app.add_subcommand("export",
                                "Sample a checkpoint's fields on a grid");
  std::string ckpt_path, domain_path, fields_out = "fields.csv";
  double mat_e = 11.4, mat_mu = 0.45;
  std::string mat_form = "as_paper";
  std::vector<double> grid_vals;
  int grid_nx = 100, grid_ny = 100;
  ex->add_option("--checkpoint", ckpt_path, "Checkpoint JSON")->required();
  ex->add_option("--domain", domain_path, "Domain JSON")->required();
  ex->add_option("--out", fields_out, "Output CSV");
  ex->add_option("--E", mat_e, "Young's modulus, MPa");
  ex->add_option("--mu", mat_mu, "Poisson ratio");
  ex->add_option("--formulation", mat_form,
                 "as_paper | plane_strain | plane_stress");
  ex->add_option("--grid", grid_vals, "x0 x1 y0 y1")->expected(4);
  ex->add_option("--nx", grid_nx, "Grid columns");
  ex->add_option("--ny", grid_ny, "Grid rows");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (geo->parsed())
      return cmd_geometry(geo_config, geo_out, !geo_design_frame, geo_sample,
                          geo_seed, geo_points_out);

    if (fem->parsed() || tr->parsed()) {
      ExperimentSpec spec = load_experiment_file(config_path);
      ov.apply(spec);
      if (fem->parsed()) return cmd_fem(spec);
      return cmd_train(spec,
                       variant == "asm" ? Variant::asm_ : Variant::std_);
    }

    if (ev->parsed()) {
      std::vector<std::pair<std::string, std::string>> estimates;
      for (const std::string& arg : estimate_args) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) {
          std::cerr << "evaluate: --estimate expects name=path, got " << arg
                    << "\n";
          return 1;
        }
        estimates.emplace_back(arg.substr(0, eq), arg.substr(eq + 1));
      }
      return cmd_evaluate(measured_path, estimates, ev_out);
    }

    if (ex->parsed()) {
      MaterialModel mat;
      mat.youngs_modulus = mat_e;
      mat.poisson_ratio = mat_mu;
      if (mat_form == "plane_strain")
        mat.formulation = PlaneFormulation::plane_strain;
      else if (mat_form == "plane_stress")
        mat.formulation = PlaneFormulation::plane_stress;
      mat.validate();
      GridSpec grid;
      if (grid_vals.size() == 4) {
        grid.x0 = grid_vals[0];
        grid.x1 = grid_vals[1];
        grid.y0 = grid_vals[2];
        grid.y1 = grid_vals[3];
      }
      grid.nx = grid_nx;
      grid.ny = grid_ny;
      return cmd_export(ckpt_path, domain_path, mat, grid, fields_out);
    }
  } catch (const IoError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace pinnray

int main(int argc, char** argv) { return pinnray::run_cli(argc, argv); }
