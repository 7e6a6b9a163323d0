#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pinnray/autodiff.hpp"
#include "pinnray/common.hpp"
#include "pinnray/elasticity.hpp"
#include "pinnray/network.hpp"

namespace pinnray {

struct LossWeights {
  double lambda_bc = 1000.0;
  double lambda_asm = 1000.0;

  void validate() const {
    if (!(lambda_bc >= 0.0) || !std::isfinite(lambda_bc) ||
        !(lambda_asm >= 0.0) || !std::isfinite(lambda_asm))
      throw ConfigError("loss weights must be finite and non-negative");
  }
};

struct TrainConfig {
  int epochs = 60000;
  double learning_rate = 1e-3;
  LossWeights weights;
  std::uint64_t seed = 0;
  bool assimilation_enabled = false;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int log_every = 100;
  bool deterministic = true;
  int threads = 1;
  int chunk_size = 1024;  // collocation batch rows per tape
  // Optional |Omega| factor on the energy mean; off reproduces the plain
  // mean, which is how the PDE loss is defined.
  bool area_scaling = false;
  double domain_area = 1.0;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
    if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
    if (threads < 1) throw ConfigError("train: threads must be >= 1");
    if (chunk_size < 1) throw ConfigError("train: chunk_size must be >= 1");
    weights.validate();
  }
};

struct TargetPoint {
  Vec2 position;
  Vec2 displacement;
};

struct PointSets {
  std::vector<Vec2> collocation;        // N_C
  std::vector<Vec2> fixed;              // N_BC, zero-displacement boundary
  std::vector<TargetPoint> forced;      // N_F
  std::vector<TargetPoint> assimilation;  // N_ASM
};

struct LossRecord {
  int epoch = 0;
  double l_pde = 0.0;
  double l_bc = 0.0;
  double l_asm = 0.0;
  double l_total = 0.0;
};

// --- single-point (scalar-path) loss evaluations ---------------------------

double loss_pde(const DisplacementNet& net, std::span<const Vec2> collocation,
                const MaterialModel& mat);
double loss_bc(const DisplacementNet& net, std::span<const Vec2> fixed,
               std::span<const TargetPoint> forced);
double loss_asm(const DisplacementNet& net,
                std::span<const TargetPoint> assimilation);
LossRecord total_loss(const DisplacementNet& net, const PointSets& sets,
                      const MaterialModel& mat, const LossWeights& weights,
                      bool assimilation_enabled);

// --- batched loss + gradient ------------------------------------------------

struct LossAndGrad {
  LossRecord record;        // epoch left at 0
  Eigen::VectorXd grad;     // layout of net.params
};

// Full-batch loss and parameter gradient via the reverse tape. Collocation is
// processed in fixed-size chunks on separate tapes; chunk results are reduced
// in chunk order, so the result is bit-identical for any thread count.
LossAndGrad loss_parts_and_grad(const DisplacementNet& net,
                                const PointSets& sets, const MaterialModel& mat,
                                const TrainConfig& cfg);

// --- Adam --------------------------------------------------------------------

class AdamState {
 public:
  explicit AdamState(Eigen::Index n)
      : m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr,
            double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  long steps() const { return t_; }

 private:
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

// --- training loop -----------------------------------------------------------

struct TrainResult {
  std::vector<LossRecord> history;
};

// Thrown when the loss or gradient turns non-finite; carries the history up
// to the last finite epoch.
struct TrainingDivergence : Error {
  TrainingDivergence(const std::string& msg, std::vector<LossRecord> h)
      : Error(msg), history(std::move(h)) {}
  std::vector<LossRecord> history;
};

TrainResult train(DisplacementNet& net, const PointSets& sets,
                  const MaterialModel& mat, const TrainConfig& cfg);

// --- hyperparameter grid -------------------------------------------------------

struct GridCell {
  double learning_rate = 0.0;
  double weight = 0.0;  // applied to both lambda_bc and lambda_asm
  bool failed = false;
  std::string error;
  LossRecord terminal;
  double mae_disp = std::numeric_limits<double>::quiet_NaN();
};

// Trains one model per (learning rate, weight) cell from the same seed and
// initial network. MAE is computed against the assimilation targets when
// present. A failed cell is recorded, not fatal.
std::vector<GridCell> grid_search(const DisplacementNet& initial,
                                  const PointSets& sets,
                                  const MaterialModel& mat,
                                  const TrainConfig& base_config,
                                  std::span<const int> lr_exponents,
                                  std::span<const int> weight_exponents);

// --- loss history CSV ----------------------------------------------------------

void write_loss_history(const std::vector<LossRecord>& history,
                        std::ostream& out);
void write_loss_history_file(const std::vector<LossRecord>& history,
                             const std::string& path);
std::vector<LossRecord> read_loss_history_file(const std::string& path);

}  // namespace pinnray
