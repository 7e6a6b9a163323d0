#include "pinnray/training.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace pinnray {

namespace {

Eigen::ArrayXXd to_array(std::span<const Vec2> pts) {
  Eigen::ArrayXXd a(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = pts[i].x();
    a(static_cast<Eigen::Index>(i), 1) = pts[i].y();
  }
  return a;
}

Eigen::ArrayXXd to_array(const std::vector<TargetPoint>& pts) {
  Eigen::ArrayXXd a(static_cast<Eigen::Index>(pts.size()), 2);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = pts[i].position.x();
    a(static_cast<Eigen::Index>(i), 1) = pts[i].position.y();
  }
  return a;
}

Eigen::ArrayXXd target_column(const std::vector<TargetPoint>& pts, int comp) {
  Eigen::ArrayXXd a(static_cast<Eigen::Index>(pts.size()), 1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    a(static_cast<Eigen::Index>(i), 0) = pts[i].displacement[comp];
  return a;
}

// Records the strain energy density of both network halves over one
// collocation chunk and returns the sum node.
Var chunk_energy_sum(Tape& tape, const ParamLeaves& leaves,
                     const DisplacementNet& net, const Eigen::ArrayXXd& pts,
                     const MaterialModel& mat) {
  const TapeNetOut u = tape_forward(tape, leaves, net, Half::u, pts, true);
  const TapeNetOut v = tape_forward(tape, leaves, net, Half::v, pts, true);
  const auto [c, d] = constitutive_factors(mat);
  const Var exx = u.psi_dx;
  const Var eyy = v.psi_dy;
  const Var exy = tape.scale(tape.add(u.psi_dy, v.psi_dx), 0.5);
  const Var tr = tape.add(exx, eyy);
  const Var sxx = tape.add(tape.scale(tr, c), tape.scale(exx, d));
  const Var syy = tape.add(tape.scale(tr, c), tape.scale(eyy, d));
  const Var sxy = tape.scale(exy, d);
  const Var energy = tape.scale(
      tape.add(tape.add(tape.mul(sxx, exx), tape.mul(syy, eyy)),
               tape.scale(tape.mul(sxy, exy), 2.0)),
      0.5);
  return tape.sum(energy);
}

// Mean squared displacement residual of one batch: mean over rows of
// (u_target - psi_u)^2 + (v_target - psi_v)^2. Zero targets give the fixed
// boundary term.
Var batch_mse(Tape& tape, const ParamLeaves& leaves, const DisplacementNet& net,
              const Eigen::ArrayXXd& pts, const Eigen::ArrayXXd* u_target,
              const Eigen::ArrayXXd* v_target) {
  const Var pu = tape_forward(tape, leaves, net, Half::u, pts, false).psi;
  const Var pv = tape_forward(tape, leaves, net, Half::v, pts, false).psi;
  Var ru = pu, rv = pv;
  if (u_target) ru = tape.sub(tape.constant(*u_target), pu);
  if (v_target) rv = tape.sub(tape.constant(*v_target), pv);
  return tape.mean(tape.add(tape.square(ru), tape.square(rv)));
}

struct JobResult {
  double pde_sum = 0.0;
  double l_bc = 0.0;
  double l_asm = 0.0;
  Eigen::VectorXd grad;
};

double total_of(const LossRecord& r, const LossWeights& w, bool asm_enabled) {
  double t = r.l_pde + w.lambda_bc * r.l_bc;
  if (asm_enabled) t += w.lambda_asm * r.l_asm;
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scalar-path losses
// ---------------------------------------------------------------------------

double loss_pde(const DisplacementNet& net, std::span<const Vec2> collocation,
                const MaterialModel& mat) {
  if (collocation.empty())
    throw ConfigError("loss_pde: collocation set is empty");
  double acc = 0.0;
  for (const Vec2& p : collocation) {
    const ScalarEval u = eval_with_input_derivs(net, Half::u, p.x(), p.y());
    const ScalarEval v = eval_with_input_derivs(net, Half::v, p.x(), p.y());
    const Strain2 eps = strain_from_jacobian(u.d_dx, u.d_dy, v.d_dx, v.d_dy);
    acc += energy_density(stress_from_strain(eps, mat), eps);
  }
  return acc / static_cast<double>(collocation.size());
}

double loss_bc(const DisplacementNet& net, std::span<const Vec2> fixed,
               std::span<const TargetPoint> forced) {
  if (fixed.empty() && forced.empty())
    throw ConfigError("loss_bc: fixed and forced sets are both empty");
  double total = 0.0;
  if (!fixed.empty()) {
    double acc = 0.0;
    for (const Vec2& p : fixed) {
      const auto [u, v] = net.displacement(p.x(), p.y());
      acc += u * u + v * v;
    }
    total += acc / static_cast<double>(fixed.size());
  }
  if (!forced.empty()) {
    double acc = 0.0;
    for (const TargetPoint& t : forced) {
      const auto [u, v] = net.displacement(t.position.x(), t.position.y());
      const double du = t.displacement.x() - u;
      const double dv = t.displacement.y() - v;
      acc += du * du + dv * dv;
    }
    total += acc / static_cast<double>(forced.size());
  }
  return total;
}

double loss_asm(const DisplacementNet& net,
                std::span<const TargetPoint> assimilation) {
  if (assimilation.empty())
    throw ConfigError("loss_asm: assimilation set is empty");
  double acc = 0.0;
  for (const TargetPoint& t : assimilation) {
    const auto [u, v] = net.displacement(t.position.x(), t.position.y());
    const double du = t.displacement.x() - u;
    const double dv = t.displacement.y() - v;
    acc += du * du + dv * dv;
  }
  return acc / static_cast<double>(assimilation.size());
}

LossRecord total_loss(const DisplacementNet& net, const PointSets& sets,
                      const MaterialModel& mat, const LossWeights& weights,
                      bool assimilation_enabled) {
  weights.validate();
  LossRecord r;
  r.l_pde = loss_pde(net, sets.collocation, mat);
  r.l_bc = loss_bc(net, sets.fixed, sets.forced);
  r.l_asm = assimilation_enabled ? loss_asm(net, sets.assimilation) : 0.0;
  r.l_total = total_of(r, weights, assimilation_enabled);
  return r;
}

// ---------------------------------------------------------------------------
// Batched loss + gradient
// ---------------------------------------------------------------------------

LossAndGrad loss_parts_and_grad(const DisplacementNet& net,
                                const PointSets& sets, const MaterialModel& mat,
                                const TrainConfig& cfg) {
  cfg.validate();
  if (sets.collocation.empty())
    throw ConfigError("training: collocation set is empty");
  if (sets.fixed.empty() && sets.forced.empty())
    throw ConfigError("training: fixed and forced sets are both empty");
  if (cfg.assimilation_enabled && sets.assimilation.empty())
    throw ConfigError("training: assimilation enabled but no markers given");

  const Eigen::Index n_colloc = static_cast<Eigen::Index>(sets.collocation.size());
  const Eigen::ArrayXXd colloc = to_array(sets.collocation);
  const double pde_scale =
      (cfg.area_scaling ? cfg.domain_area : 1.0) / static_cast<double>(n_colloc);

  // Fixed-size chunks over collocation points plus one job for the boundary
  // and assimilation terms. Chunking is independent of the thread count, and
  // results are reduced in job order, so any thread count gives identical
  // bits.
  const Eigen::Index chunk = cfg.chunk_size;
  const int n_chunks = static_cast<int>((n_colloc + chunk - 1) / chunk);
  const int n_jobs = n_chunks + 1;

  std::vector<JobResult> results(n_jobs);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_msg;
  std::mutex error_mutex;

  auto run_job = [&](int job) {
    JobResult& out = results[job];
    out.grad = Eigen::VectorXd::Zero(net.params.data.size());
    Tape tape;
    const ParamLeaves leaves = make_param_leaves(tape, net.params);
    if (job < n_chunks) {
      const Eigen::Index lo = job * chunk;
      const Eigen::Index rows = std::min(chunk, n_colloc - lo);
      const Eigen::ArrayXXd pts = colloc.middleRows(lo, rows);
      const Var s = chunk_energy_sum(tape, leaves, net, pts, mat);
      out.pde_sum = tape.scalar_value(s);
      tape.backward(s, pde_scale);
      accumulate_param_grads(tape, leaves, net.params, out.grad);
    } else {
      Var total{};
      bool have = false;
      auto push_term = [&](Var term, double weight) {
        const Var w = tape.scale(term, weight);
        total = have ? tape.add(total, w) : w;
        have = true;
      };
      Var lbc{};
      bool have_bc = false;
      if (!sets.fixed.empty()) {
        const Eigen::ArrayXXd pts = to_array(std::span<const Vec2>(sets.fixed));
        lbc = batch_mse(tape, leaves, net, pts, nullptr, nullptr);
        have_bc = true;
      }
      if (!sets.forced.empty()) {
        const Eigen::ArrayXXd pts = to_array(sets.forced);
        const Eigen::ArrayXXd tu = target_column(sets.forced, 0);
        const Eigen::ArrayXXd tv = target_column(sets.forced, 1);
        const Var term = batch_mse(tape, leaves, net, pts, &tu, &tv);
        lbc = have_bc ? tape.add(lbc, term) : term;
        have_bc = true;
      }
      out.l_bc = tape.scalar_value(lbc);
      push_term(lbc, cfg.weights.lambda_bc);
      if (cfg.assimilation_enabled) {
        const Eigen::ArrayXXd pts = to_array(sets.assimilation);
        const Eigen::ArrayXXd tu = target_column(sets.assimilation, 0);
        const Eigen::ArrayXXd tv = target_column(sets.assimilation, 1);
        const Var lasm = batch_mse(tape, leaves, net, pts, &tu, &tv);
        out.l_asm = tape.scalar_value(lasm);
        push_term(lasm, cfg.weights.lambda_asm);
      }
      tape.backward(total, 1.0);
      accumulate_param_grads(tape, leaves, net.params, out.grad);
    }
  };

  auto worker = [&] {
    for (;;) {
      const int job = next.fetch_add(1);
      if (job >= n_jobs || failed.load()) return;
      try {
        run_job(job);
      } catch (const std::exception& e) {
        failed.store(true);
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error_msg.empty()) error_msg = e.what();
      }
    }
  };

  const int n_threads = std::min(cfg.threads, n_jobs);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw EvalError(error_msg);

  LossAndGrad out;
  out.grad = Eigen::VectorXd::Zero(net.params.data.size());
  double pde_sum = 0.0;
  for (int j = 0; j < n_jobs; ++j) {
    pde_sum += results[j].pde_sum;
    out.grad += results[j].grad;
  }
  out.record.l_pde = pde_sum * pde_scale;
  out.record.l_bc = results[n_chunks].l_bc;
  out.record.l_asm = results[n_chunks].l_asm;
  out.record.l_total =
      total_of(out.record, cfg.weights, cfg.assimilation_enabled);
  return out;
}

// ---------------------------------------------------------------------------

void AdamState::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                     double lr, double beta1, double beta2, double epsilon) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ConfigError("adam: dimension mismatch");
  if (!grad.allFinite()) throw EvalError("adam: non-finite gradient");
  ++t_;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  params.array() -=
      lr * (m_.array() / bc1) /
      ((v_.array() / bc2).sqrt() + epsilon);
}

TrainResult train(DisplacementNet& net, const PointSets& sets,
                  const MaterialModel& mat, const TrainConfig& cfg) {
  cfg.validate();
  mat.validate();
  TrainResult result;
  AdamState adam(net.params.data.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    LossAndGrad lg;
    try {
      lg = loss_parts_and_grad(net, sets, mat, cfg);
    } catch (const EvalError& e) {
      throw TrainingDivergence(
          "training aborted at epoch " + std::to_string(epoch) + ": " +
              e.what() + " (last finite epoch " +
              std::to_string(result.history.empty()
                                 ? 0
                                 : result.history.back().epoch) +
              ")",
          result.history);
    }
    lg.record.epoch = epoch;
    if (!std::isfinite(lg.record.l_total))
      throw TrainingDivergence(
          "training aborted: non-finite loss at epoch " +
              std::to_string(epoch) + " (last finite epoch " +
              std::to_string(result.history.empty()
                                 ? 0
                                 : result.history.back().epoch) +
              ")",
          result.history);

    if (epoch == 1 || epoch % cfg.log_every == 0 || epoch == cfg.epochs) {
      if (result.history.empty() || result.history.back().epoch != epoch)
        result.history.push_back(lg.record);
    }
    adam.step(net.params.data, lg.grad, cfg.learning_rate, cfg.beta1,
              cfg.beta2, cfg.epsilon);
  }
  return result;
}

std::vector<GridCell> grid_search(const DisplacementNet& initial,
                                  const PointSets& sets,
                                  const MaterialModel& mat,
                                  const TrainConfig& base_config,
                                  std::span<const int> lr_exponents,
                                  std::span<const int> weight_exponents) {
  if (lr_exponents.empty() || weight_exponents.empty())
    throw ConfigError("grid_search: exponent lists must be non-empty");
  std::vector<GridCell> cells;
  for (const int le : lr_exponents) {
    for (const int we : weight_exponents) {
      GridCell cell;
      cell.learning_rate = std::pow(10.0, le);
      cell.weight = std::pow(10.0, we);
      TrainConfig cfg = base_config;
      cfg.learning_rate = cell.learning_rate;
      cfg.weights.lambda_bc = cell.weight;
      cfg.weights.lambda_asm = cell.weight;
      DisplacementNet net = initial;
      try {
        const TrainResult res = train(net, sets, mat, cfg);
        cell.terminal = res.history.back();
        if (!sets.assimilation.empty()) {
          double acc = 0.0;
          for (const TargetPoint& t : sets.assimilation) {
            const auto [u, v] =
                net.displacement(t.position.x(), t.position.y());
            acc += std::abs(t.displacement.x() - u) +
                   std::abs(t.displacement.y() - v);
          }
          cell.mae_disp = acc / static_cast<double>(sets.assimilation.size());
        }
      } catch (const Error& e) {
        cell.failed = true;
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------

void write_loss_history(const std::vector<LossRecord>& history,
                        std::ostream& out) {
  out << "epoch,l_pde,l_bc,l_asm,l_total\n";
  char buf[160];
  for (const LossRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                  r.l_pde, r.l_bc, r.l_asm, r.l_total);
    out << buf;
  }
}

void write_loss_history_file(const std::vector<LossRecord>& history,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss history: " + path);
  write_loss_history(history, out);
}

std::vector<LossRecord> read_loss_history_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read loss history: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "epoch,l_pde,l_bc,l_asm,l_total")
    throw IoError("bad loss history header in " + path);
  std::vector<LossRecord> history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LossRecord r;
    if (std::sscanf(line.c_str(), "%d,%lg,%lg,%lg,%lg", &r.epoch, &r.l_pde,
                    &r.l_bc, &r.l_asm, &r.l_total) != 5)
      throw IoError("bad loss history row in " + path + ": " + line);
    history.push_back(r);
  }
  return history;
}

}  // namespace pinnray
