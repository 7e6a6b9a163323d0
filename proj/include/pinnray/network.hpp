#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pinnray/autodiff.hpp"
#include "pinnray/common.hpp"

namespace pinnray {

enum class Activation { tanh };

struct NetworkConfig {
  int layers = 4;
  int width = 64;
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;

  void validate() const {
    if (layers < 1) throw ConfigError("network: layers must be >= 1");
    if (width < 1) throw ConfigError("network: width must be >= 1");
  }
};

struct BoundingBox {
  double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
};

// Affine map taking physical coordinates into the [-1, 1] box the networks
// are evaluated on: xn = (x - x_offset) * x_scale. Stored with the model so
// outputs stay in physical millimetres.
struct Normalization {
  double x_offset = 0.0, x_scale = 1.0;
  double y_offset = 0.0, y_scale = 1.0;

  static Normalization from_bbox(const BoundingBox& b);
};

enum class Half { u, v };

inline const char* prefix(Half h) { return h == Half::u ? "u." : "v."; }

// A pair of gated networks sharing one flat parameter vector; entries are
// prefixed "u." and "v." so the two halves stay independent while the
// optimizer sees a single vector.
struct DisplacementNet {
  NetworkConfig config;
  Normalization norm;
  ParamVector params;

  static std::shared_ptr<const ParamLayout> make_layout(
      const NetworkConfig& cfg);

  // Glorot-uniform weights, zero biases, reproducible from config.seed.
  static DisplacementNet init(const NetworkConfig& cfg,
                              const BoundingBox& bbox = BoundingBox{});

  double forward(Half half, double x, double y) const;
  std::pair<double, double> displacement(double x, double y) const;
};

// Number of scalar parameters in one half for the given config.
Eigen::Index half_param_count(const NetworkConfig& cfg);

struct ScalarEval {
  double value = 0.0;
  double d_dx = 0.0;
  double d_dy = 0.0;
};

// Value and both first spatial partials of one network half, computed with
// forward-mode duals (one pass per coordinate). Exact to floating precision.
ScalarEval eval_with_input_derivs(const DisplacementNet& net, Half half,
                                  double x, double y);

// Per-layer gate activations at a point, for inspection and tests.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> gates;  // Z^(k), k = 1..layers
  double output = 0.0;
};
ForwardTrace forward_trace(const DisplacementNet& net, Half half, double x,
                           double y);

// ---------------------------------------------------------------------------
// Batched tape evaluation.
//
// Evaluates one half on all rows of `points` (physical coordinates) at once,
// recording the computation on `tape`. When `lanes` is set the forward-mode
// tangents with respect to x and y are carried along as extra array nodes, so
// parameter gradients of expressions in psi_dx / psi_dy come out of the same
// reverse sweep.
// ---------------------------------------------------------------------------

struct TapeNetOut {
  Var psi;     // N x 1
  Var psi_dx;  // N x 1 (only when lanes were requested)
  Var psi_dy;  // N x 1
};

TapeNetOut tape_forward(Tape& tape, const ParamLeaves& leaves,
                        const DisplacementNet& net, Half half,
                        const Eigen::ArrayXXd& points, bool lanes);

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON container with config, normalization and both
// parameter vectors. save -> load -> evaluate is bit-exact.
// ---------------------------------------------------------------------------

void save_checkpoint(const DisplacementNet& net, const std::string& path);
DisplacementNet load_checkpoint(const std::string& path);

}  // namespace pinnray
