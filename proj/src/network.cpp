#include "pinnray/network.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <type_traits>

#include <nlohmann/json.hpp>

namespace pinnray {

namespace {

using json = nlohmann::ordered_json;

double uniform01(std::mt19937_64& rng) {
  // 53-bit mantissa draw; bit-stable across standard library versions.
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

bool finite(double v) { return std::isfinite(v); }
bool finite(const DualScalar& v) {
  return std::isfinite(v.value) && std::isfinite(v.tangent);
}

template <class S>
void check_layer(const std::vector<S>& vals, Half half, const char* what,
                 int layer) {
  for (const S& v : vals)
    if (!finite(v))
      throw EvalError(std::string("non-finite value in ") + what +
                      (layer > 0 ? " " + std::to_string(layer) : "") +
                      " of psi_" + (half == Half::u ? "u" : "v"));
}

// Scalar-path evaluation shared by plain, dual and traced forward passes.
template <class S>
S eval_half(const DisplacementNet& net, Half half, S x, S y,
            ForwardTrace* trace) {
  using std::tanh;
  const std::string p = prefix(half);
  const auto& cfg = net.config;
  const auto& nm = net.norm;
  const int w = cfg.width;

  const S xn = (x - S(nm.x_offset)) * S(nm.x_scale);
  const S yn = (y - S(nm.y_offset)) * S(nm.y_scale);

  const auto w1 = net.params.matrix(p + "W1");
  const auto b1 = net.params.matrix(p + "b1");
  const auto w2 = net.params.matrix(p + "W2");
  const auto b2 = net.params.matrix(p + "b2");
  const auto wz = net.params.matrix(p + "Wz");
  const auto bz = net.params.matrix(p + "bz");

  std::vector<S> a(w), b(w), h(w), hn(w);
  for (int j = 0; j < w; ++j) {
    a[j] = tanh(xn * S(w1(0, j)) + yn * S(w1(1, j)) + S(b1(0, j)));
    b[j] = tanh(xn * S(w2(0, j)) + yn * S(w2(1, j)) + S(b2(0, j)));
    h[j] = tanh(xn * S(wz(0, j)) + yn * S(wz(1, j)) + S(bz(0, j)));
  }
  check_layer(a, half, "input layer", 0);
  check_layer(b, half, "input layer", 0);
  check_layer(h, half, "input layer", 0);

  std::vector<S> z(w);
  for (int k = 1; k <= cfg.layers; ++k) {
    const auto wg = net.params.matrix(p + "gate" + std::to_string(k) + ".W");
    const auto bg = net.params.matrix(p + "gate" + std::to_string(k) + ".b");
    for (int j = 0; j < w; ++j) {
      S acc = S(bg(0, j));
      for (int i = 0; i < w; ++i) acc += h[i] * S(wg(i, j));
      z[j] = tanh(acc);
    }
    check_layer(z, half, "gate layer", k);
    for (int j = 0; j < w; ++j) hn[j] = a[j] + z[j] * (b[j] - a[j]);
    std::swap(h, hn);
    if (trace) {
      Eigen::VectorXd zv(w);
      for (int j = 0; j < w; ++j) {
        if constexpr (std::is_same_v<S, double>)
          zv[j] = z[j];
        else
          zv[j] = z[j].value;
      }
      trace->gates.push_back(std::move(zv));
    }
  }

  const auto wo = net.params.matrix(p + "out.W");
  const auto bo = net.params.matrix(p + "out.b");
  S out = S(bo(0, 0));
  for (int i = 0; i < w; ++i) out += h[i] * S(wo(i, 0));
  if (!finite(out))
    throw EvalError(std::string("non-finite value in output layer of psi_") +
                    (half == Half::u ? "u" : "v"));
  return out;
}

}  // namespace

Normalization Normalization::from_bbox(const BoundingBox& b) {
  Normalization n;
  n.x_offset = 0.5 * (b.xmin + b.xmax);
  n.y_offset = 0.5 * (b.ymin + b.ymax);
  n.x_scale = (b.xmax > b.xmin) ? 2.0 / (b.xmax - b.xmin) : 1.0;
  n.y_scale = (b.ymax > b.ymin) ? 2.0 / (b.ymax - b.ymin) : 1.0;
  return n;
}

std::shared_ptr<const ParamLayout> DisplacementNet::make_layout(
    const NetworkConfig& cfg) {
  cfg.validate();
  auto layout = std::make_shared<ParamLayout>();
  for (const char* p : {"u.", "v."}) {
    const std::string pre(p);
    layout->add(pre + "W1", 2, cfg.width);
    layout->add(pre + "b1", 1, cfg.width);
    layout->add(pre + "W2", 2, cfg.width);
    layout->add(pre + "b2", 1, cfg.width);
    layout->add(pre + "Wz", 2, cfg.width);
    layout->add(pre + "bz", 1, cfg.width);
    for (int k = 1; k <= cfg.layers; ++k) {
      layout->add(pre + "gate" + std::to_string(k) + ".W", cfg.width,
                  cfg.width);
      layout->add(pre + "gate" + std::to_string(k) + ".b", 1, cfg.width);
    }
    layout->add(pre + "out.W", cfg.width, 1);
    layout->add(pre + "out.b", 1, 1);
  }
  return layout;
}

Eigen::Index half_param_count(const NetworkConfig& cfg) {
  const Eigen::Index w = cfg.width;
  return 3 * (2 * w + w) + cfg.layers * (w * w + w) + w + 1;
}

DisplacementNet DisplacementNet::init(const NetworkConfig& cfg,
                                      const BoundingBox& bbox) {
  cfg.validate();
  DisplacementNet net;
  net.config = cfg;
  net.norm = Normalization::from_bbox(bbox);
  net.params = ParamVector::zeros(make_layout(cfg));

  std::mt19937_64 rng(cfg.seed);
  for (const auto& e : net.params.layout->entries()) {
    auto m = net.params.matrix(e.name);
    if (e.name.find(".b") != std::string::npos &&
        e.name.find(".W") == std::string::npos) {
      m.setZero();
      continue;
    }
    const double limit =
        std::sqrt(6.0 / static_cast<double>(e.rows + e.cols));
    for (Eigen::Index c = 0; c < e.cols; ++c)
      for (Eigen::Index r = 0; r < e.rows; ++r)
        m(r, c) = limit * (2.0 * uniform01(rng) - 1.0);
  }
  return net;
}

double DisplacementNet::forward(Half half, double x, double y) const {
  return eval_half<double>(*this, half, x, y, nullptr);
}

std::pair<double, double> DisplacementNet::displacement(double x,
                                                        double y) const {
  return {forward(Half::u, x, y), forward(Half::v, x, y)};
}

ScalarEval eval_with_input_derivs(const DisplacementNet& net, Half half,
                                  double x, double y) {
  const DualScalar fx =
      eval_half<DualScalar>(net, half, DualScalar::variable(x), DualScalar(y),
                            nullptr);
  const DualScalar fy =
      eval_half<DualScalar>(net, half, DualScalar(x), DualScalar::variable(y),
                            nullptr);
  return {fx.value, fx.tangent, fy.tangent};
}

ForwardTrace forward_trace(const DisplacementNet& net, Half half, double x,
                           double y) {
  ForwardTrace t;
  t.output = eval_half<double>(net, half, x, y, &t);
  return t;
}

TapeNetOut tape_forward(Tape& tape, const ParamLeaves& leaves,
                        const DisplacementNet& net, Half half,
                        const Eigen::ArrayXXd& points, bool lanes) {
  const std::string p = prefix(half);
  const auto& cfg = net.config;
  const auto& nm = net.norm;
  const Eigen::Index n = points.rows();
  if (points.cols() != 2) throw TapeError("tape_forward: points must be Nx2");

  Array xn(n, 2);
  xn.col(0) = (points.col(0) - nm.x_offset) * nm.x_scale;
  xn.col(1) = (points.col(1) - nm.y_offset) * nm.y_scale;
  const Var x = tape.constant(std::move(xn));

  auto param = [&](const std::string& name) { return leaves.at(p + name); };

  const Var a = tape.tanh(tape.affine(x, param("W1"), param("b1")));
  const Var b = tape.tanh(tape.affine(x, param("W2"), param("b2")));
  Var h = tape.tanh(tape.affine(x, param("Wz"), param("bz")));

  Var lx, ly, ax, ay, bx, by, hx, hy, bma;
  if (lanes) {
    // Tangent seeds with respect to the physical coordinates; the chain rule
    // through the normalization map contributes the scale factors.
    Array sx = Array::Zero(n, 2), sy = Array::Zero(n, 2);
    sx.col(0).setConstant(nm.x_scale);
    sy.col(1).setConstant(nm.y_scale);
    lx = tape.constant(std::move(sx));
    ly = tape.constant(std::move(sy));
    ax = tape.tanh_lane(a, tape.matmul(lx, param("W1")));
    ay = tape.tanh_lane(a, tape.matmul(ly, param("W1")));
    bx = tape.tanh_lane(b, tape.matmul(lx, param("W2")));
    by = tape.tanh_lane(b, tape.matmul(ly, param("W2")));
    hx = tape.tanh_lane(h, tape.matmul(lx, param("Wz")));
    hy = tape.tanh_lane(h, tape.matmul(ly, param("Wz")));
    bma = tape.sub(b, a);
  }

  for (int k = 1; k <= cfg.layers; ++k) {
    const std::string g = "gate" + std::to_string(k) + ".";
    const Var wg = param(g + "W");
    const Var z = tape.tanh(tape.affine(h, wg, param(g + "b")));
    if (lanes) {
      const Var zx = tape.tanh_lane(z, tape.matmul(hx, wg));
      const Var zy = tape.tanh_lane(z, tape.matmul(hy, wg));
      hx = tape.blend_lane(ax, bx, z, zx, bma);
      hy = tape.blend_lane(ay, by, z, zy, bma);
    }
    h = tape.blend(a, b, z);
  }

  TapeNetOut out;
  out.psi = tape.affine(h, param("out.W"), param("out.b"));
  if (lanes) {
    out.psi_dx = tape.matmul(hx, param("out.W"));
    out.psi_dy = tape.matmul(hy, param("out.W"));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

json params_to_json(const ParamVector& p) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < p.data.size(); ++i) arr.push_back(p.data[i]);
  return arr;
}

}  // namespace

void save_checkpoint(const DisplacementNet& net, const std::string& path) {
  json j;
  j["format"] = "pinnray.checkpoint";
  j["version"] = 1;
  j["config"] = {{"layers", net.config.layers},
                 {"width", net.config.width},
                 {"activation", "tanh"},
                 {"seed", net.config.seed}};
  j["normalization"] = {{"x_offset", net.norm.x_offset},
                        {"x_scale", net.norm.x_scale},
                        {"y_offset", net.norm.y_offset},
                        {"y_scale", net.norm.y_scale}};
  const Eigen::Index half = half_param_count(net.config);
  json pu = json::array(), pv = json::array();
  for (Eigen::Index i = 0; i < half; ++i) pu.push_back(net.params.data[i]);
  for (Eigen::Index i = half; i < 2 * half; ++i)
    pv.push_back(net.params.data[i]);
  j["params_u"] = std::move(pu);
  j["params_v"] = std::move(pv);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << j.dump(1) << "\n";
}

DisplacementNet load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("malformed checkpoint " + path + ": " + e.what());
  }
  if (j.value("format", "") != "pinnray.checkpoint")
    throw ConfigError("not a checkpoint file: " + path);
  if (j.value("version", 0) != 1)
    throw ConfigError("unsupported checkpoint version in " + path);

  NetworkConfig cfg;
  cfg.layers = j["config"]["layers"].get<int>();
  cfg.width = j["config"]["width"].get<int>();
  cfg.seed = j["config"]["seed"].get<std::uint64_t>();

  DisplacementNet net;
  net.config = cfg;
  net.norm.x_offset = j["normalization"]["x_offset"].get<double>();
  net.norm.x_scale = j["normalization"]["x_scale"].get<double>();
  net.norm.y_offset = j["normalization"]["y_offset"].get<double>();
  net.norm.y_scale = j["normalization"]["y_scale"].get<double>();
  net.params = ParamVector::zeros(DisplacementNet::make_layout(cfg));

  const Eigen::Index half = half_param_count(cfg);
  const auto& pu = j["params_u"];
  const auto& pv = j["params_v"];
  if (static_cast<Eigen::Index>(pu.size()) != half ||
      static_cast<Eigen::Index>(pv.size()) != half)
    throw ConfigError("checkpoint parameter count mismatch in " + path);
  for (Eigen::Index i = 0; i < half; ++i)
    net.params.data[i] = pu[i].get<double>();
  for (Eigen::Index i = 0; i < half; ++i)
    net.params.data[half + i] = pv[i].get<double>();
  return net;
}

}  // namespace pinnray
