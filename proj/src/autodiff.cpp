#include "pinnray/autodiff.hpp"

#include <sstream>

namespace pinnray {

namespace {

std::string shape_str(const Array& a) {
  std::ostringstream os;
  os << a.rows() << "x" << a.cols();
  return os.str();
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw TapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                    " vs " + shape_str(b));
}

}  // namespace

int Tape::check(Var v) const {
  if (v.tape != this)
    throw TapeError("variable does not belong to this tape");
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw TapeError("variable index out of range");
  return v.id;
}

Var Tape::push(Node n, Array value) {
  if (swept_) throw TapeError("tape already swept; build a fresh tape");
  n.requires_grad = n.requires_grad || rg(n.a) || rg(n.b) || rg(n.c) ||
                    rg(n.d) || rg(n.e);
  nodes_.push_back(n);
  values_.push_back(std::move(value));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Array value, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.requires_grad = requires_grad;
  return push(n, std::move(value));
}

Var Tape::constant(double value) {
  Array a(1, 1);
  a(0, 0) = value;
  return leaf(std::move(a), false);
}

Var Tape::affine(Var x, Var w, Var b) {
  const Array& xv = value(x);
  const Array& wv = value(w);
  const Array& bv = value(b);
  if (xv.cols() != wv.rows())
    throw TapeError("affine: inner dimensions " + shape_str(xv) + " * " +
                    shape_str(wv));
  Array out = (xv.matrix() * wv.matrix()).array();
  if (bv.rows() == 1 && bv.cols() == out.cols()) {
    out.rowwise() += bv.row(0);
  } else if (bv.rows() == 1 && bv.cols() == 1) {
    out += bv(0, 0);
  } else {
    throw TapeError("affine: bias must be 1x" + std::to_string(out.cols()) +
                    " or 1x1, got " + shape_str(bv));
  }
  Node n;
  n.op = Op::affine;
  n.a = check(x);
  n.b = check(w);
  n.c = check(b);
  return push(n, std::move(out));
}

Var Tape::matmul(Var a, Var b) {
  const Array& av = value(a);
  const Array& bv = value(b);
  if (av.cols() != bv.rows())
    throw TapeError("matmul: inner dimensions " + shape_str(av) + " * " +
                    shape_str(bv));
  Node n;
  n.op = Op::matmul;
  n.a = check(a);
  n.b = check(b);
  return push(n, (av.matrix() * bv.matrix()).array());
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::tanh_op;
  n.a = check(a);
  return push(n, tanh_fast(value(a)));
}

Var Tape::tanh_lane(Var t, Var p) {
  const Array& tv = value(t);
  const Array& pv = value(p);
  require_same_shape(tv, pv, "tanh_lane");
  Node n;
  n.op = Op::tanh_lane;
  n.a = check(t);
  n.b = check(p);
  return push(n, (1.0 - tv.square()) * pv);
}

Var Tape::blend(Var a, Var b, Var z) {
  const Array& av = value(a);
  const Array& bv = value(b);
  const Array& zv = value(z);
  require_same_shape(av, bv, "blend");
  require_same_shape(av, zv, "blend");
  Node n;
  n.op = Op::blend;
  n.a = check(a);
  n.b = check(b);
  n.c = check(z);
  return push(n, av + zv * (bv - av));
}

Var Tape::blend_lane(Var ax, Var bx, Var z, Var zx, Var b_minus_a) {
  Node n;
  n.op = Op::blend_lane;
  n.a = check(ax);
  n.b = check(bx);
  n.c = check(z);
  n.d = check(zx);
  n.e = check(b_minus_a);
  const Array& axv = value(ax);
  require_same_shape(axv, value(bx), "blend_lane");
  require_same_shape(axv, value(z), "blend_lane");
  require_same_shape(axv, value(zx), "blend_lane");
  require_same_shape(axv, value(b_minus_a), "blend_lane");
  return push(n,
              axv + value(z) * (value(bx) - axv) + value(zx) * value(b_minus_a));
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  Node n;
  n.op = Op::add;
  n.a = check(a);
  n.b = check(b);
  return push(n, value(a) + value(b));
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  Node n;
  n.op = Op::sub;
  n.a = check(a);
  n.b = check(b);
  return push(n, value(a) - value(b));
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  Node n;
  n.op = Op::mul;
  n.a = check(a);
  n.b = check(b);
  return push(n, value(a) * value(b));
}

Var Tape::divide(Var a, Var b) {
  require_same_shape(value(a), value(b), "divide");
  Node n;
  n.op = Op::divide;
  n.a = check(a);
  n.b = check(b);
  return push(n, value(a) / value(b));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::scale;
  n.a = check(a);
  n.s = s;
  return push(n, s * value(a));
}

Var Tape::square(Var a) {
  Node n;
  n.op = Op::square_op;
  n.a = check(a);
  return push(n, value(a).square());
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::reduce_sum;
  n.a = check(a);
  Array out(1, 1);
  out(0, 0) = value(a).sum();
  return push(n, std::move(out));
}

Var Tape::mean(Var a) {
  const Array& av = value(a);
  if (av.size() == 0) throw TapeError("mean of empty array");
  Node n;
  n.op = Op::reduce_mean;
  n.a = check(a);
  Array out(1, 1);
  out(0, 0) = av.sum() / static_cast<double>(av.size());
  return push(n, std::move(out));
}

double Tape::scalar_value(Var v) const {
  const Array& a = value(v);
  if (a.rows() != 1 || a.cols() != 1)
    throw TapeError("scalar_value on non-scalar node (" + shape_str(a) + ")");
  return a(0, 0);
}

void Tape::accumulate(int id, const Array& contribution) {
  Array& adj = adjoints_[id];
  if (adj.size() == 0)
    adj = contribution;
  else
    adj += contribution;
}

void Tape::backward(Var root, double seed) {
  const int r = check(root);
  if (values_[r].rows() != 1 || values_[r].cols() != 1)
    throw TapeError("backward root must be a 1x1 scalar node");
  if (swept_) throw TapeError("tape already swept");
  swept_ = true;

  adjoints_.assign(nodes_.size(), Array());
  Array s(1, 1);
  s(0, 0) = seed;
  adjoints_[r] = std::move(s);

  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    if (!nodes_[i].requires_grad) continue;
    Array& adj = adjoints_[i];
    if (adj.size() == 0) continue;  // node not on any path to the root
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::affine: {
        if (rg(n.a))
          accumulate(n.a, (adj.matrix() * values_[n.b].matrix().transpose())
                              .array());
        if (rg(n.b))
          accumulate(n.b, (values_[n.a].matrix().transpose() * adj.matrix())
                              .array());
        if (rg(n.c)) {
          const Array& bv = values_[n.c];
          if (bv.cols() == 1 && bv.rows() == 1) {
            Array g(1, 1);
            g(0, 0) = adj.sum();
            accumulate(n.c, g);
          } else {
            accumulate(n.c, adj.colwise().sum());
          }
        }
        break;
      }
      case Op::matmul: {
        if (rg(n.a))
          accumulate(n.a, (adj.matrix() * values_[n.b].matrix().transpose())
                              .array());
        if (rg(n.b))
          accumulate(n.b, (values_[n.a].matrix().transpose() * adj.matrix())
                              .array());
        break;
      }
      case Op::tanh_op: {
        if (rg(n.a)) accumulate(n.a, (1.0 - values_[i].square()) * adj);
        break;
      }
      case Op::tanh_lane: {
        // out = (1 - t^2) .* p
        const Array& t = values_[n.a];
        const Array& p = values_[n.b];
        if (rg(n.a)) accumulate(n.a, -2.0 * t * p * adj);
        if (rg(n.b)) accumulate(n.b, (1.0 - t.square()) * adj);
        break;
      }
      case Op::blend: {
        // out = a + z .* (b - a)
        const Array& a = values_[n.a];
        const Array& b = values_[n.b];
        const Array& z = values_[n.c];
        if (rg(n.a)) accumulate(n.a, (1.0 - z) * adj);
        if (rg(n.b)) accumulate(n.b, z * adj);
        if (rg(n.c)) accumulate(n.c, (b - a) * adj);
        break;
      }
      case Op::blend_lane: {
        // out = ax + z .* (bx - ax) + zx .* bma
        const Array& ax = values_[n.a];
        const Array& bx = values_[n.b];
        const Array& z = values_[n.c];
        const Array& zx = values_[n.d];
        const Array& bma = values_[n.e];
        if (rg(n.a)) accumulate(n.a, (1.0 - z) * adj);
        if (rg(n.b)) accumulate(n.b, z * adj);
        if (rg(n.c)) accumulate(n.c, (bx - ax) * adj);
        if (rg(n.d)) accumulate(n.d, bma * adj);
        if (rg(n.e)) accumulate(n.e, zx * adj);
        break;
      }
      case Op::add: {
        if (rg(n.a)) accumulate(n.a, adj);
        if (rg(n.b)) accumulate(n.b, adj);
        break;
      }
      case Op::sub: {
        if (rg(n.a)) accumulate(n.a, adj);
        if (rg(n.b)) accumulate(n.b, -adj);
        break;
      }
      case Op::mul: {
        if (rg(n.a)) accumulate(n.a, values_[n.b] * adj);
        if (rg(n.b)) accumulate(n.b, values_[n.a] * adj);
        break;
      }
      case Op::divide: {
        const Array& b = values_[n.b];
        if (rg(n.a)) accumulate(n.a, adj / b);
        if (rg(n.b)) accumulate(n.b, -(values_[i] / b) * adj);
        break;
      }
      case Op::scale: {
        if (rg(n.a)) accumulate(n.a, n.s * adj);
        break;
      }
      case Op::square_op: {
        if (rg(n.a)) accumulate(n.a, 2.0 * values_[n.a] * adj);
        break;
      }
      case Op::reduce_sum: {
        if (rg(n.a))
          accumulate(n.a, Array::Constant(values_[n.a].rows(),
                                          values_[n.a].cols(), adj(0, 0)));
        break;
      }
      case Op::reduce_mean: {
        if (rg(n.a)) {
          const double g = adj(0, 0) / static_cast<double>(values_[n.a].size());
          accumulate(n.a, Array::Constant(values_[n.a].rows(),
                                          values_[n.a].cols(), g));
        }
        break;
      }
      default:
        throw TapeError("unsupported primitive on tape (op=" +
                        std::to_string(static_cast<int>(n.op)) + ")");
    }
    if (n.op != Op::leaf) adj.resize(0, 0);  // interior adjoints are spent
  }
}

bool Tape::has_grad(Var v) const {
  const int i = check(v);
  return swept_ && i < static_cast<int>(adjoints_.size()) &&
         adjoints_[i].size() > 0;
}

const Array& Tape::grad(Var v) const {
  const int i = check(v);
  if (!swept_) throw TapeError("grad() before backward()");
  if (adjoints_[i].size() == 0)
    throw TapeError("node has no adjoint (not on the path to the root)");
  return adjoints_[i];
}

Var operator+(Var a, Var b) { return a.tape->add(a, b); }
Var operator-(Var a, Var b) { return a.tape->sub(a, b); }
Var operator*(Var a, Var b) { return a.tape->mul(a, b); }
Var operator/(Var a, Var b) { return a.tape->divide(a, b); }
Var tanh(Var a) { return a.tape->tanh(a); }
Var square(Var a) { return a.tape->square(a); }
Var sum(Var a) { return a.tape->sum(a); }
Var mean(Var a) { return a.tape->mean(a); }

// ---------------------------------------------------------------------------

void ParamLayout::add(const std::string& name, Eigen::Index rows,
                      Eigen::Index cols) {
  if (index_.count(name)) throw ConfigError("duplicate parameter: " + name);
  index_[name] = entries_.size();
  entries_.push_back({name, rows, cols, total_});
  total_ += rows * cols;
}

const ParamShape& ParamLayout::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
  return entries_[it->second];
}

std::string ParamLayout::name_of_index(Eigen::Index i) const {
  for (const auto& e : entries_) {
    if (i >= e.offset && i < e.offset + e.count()) {
      const Eigen::Index local = i - e.offset;
      return e.name + "[" + std::to_string(local % e.rows) + "," +
             std::to_string(local / e.rows) + "]";
    }
  }
  return "<index " + std::to_string(i) + ">";
}

ParamVector ParamVector::zeros(std::shared_ptr<const ParamLayout> layout) {
  ParamVector p;
  p.data = Eigen::VectorXd::Zero(layout->total());
  p.layout = std::move(layout);
  return p;
}

Eigen::Map<const Eigen::MatrixXd> ParamVector::matrix(
    const std::string& name) const {
  const ParamShape& s = layout->at(name);
  return {data.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamVector::matrix(const std::string& name) {
  const ParamShape& s = layout->at(name);
  return {data.data() + s.offset, s.rows, s.cols};
}

std::unordered_map<std::string, Eigen::MatrixXd> ParamVector::unflatten()
    const {
  std::unordered_map<std::string, Eigen::MatrixXd> out;
  for (const auto& e : layout->entries()) out[e.name] = matrix(e.name);
  return out;
}

ParamVector ParamVector::flatten(
    std::shared_ptr<const ParamLayout> layout,
    const std::unordered_map<std::string, Eigen::MatrixXd>& named) {
  ParamVector p = zeros(layout);
  for (const auto& e : p.layout->entries()) {
    auto it = named.find(e.name);
    if (it == named.end()) throw ConfigError("missing parameter: " + e.name);
    if (it->second.rows() != e.rows || it->second.cols() != e.cols)
      throw ConfigError("shape mismatch for parameter: " + e.name);
    p.matrix(e.name) = it->second;
  }
  return p;
}

ParamLeaves make_param_leaves(Tape& tape, const ParamVector& params) {
  ParamLeaves leaves;
  for (const auto& e : params.layout->entries())
    leaves[e.name] = tape.leaf(params.matrix(e.name).array(), true);
  return leaves;
}

void accumulate_param_grads(const Tape& tape, const ParamLeaves& leaves,
                            const ParamVector& params, Eigen::VectorXd& out) {
  if (out.size() != params.data.size())
    throw TapeError("gradient buffer size mismatch");
  for (const auto& e : params.layout->entries()) {
    const Var v = leaves.at(e.name);
    if (!tape.has_grad(v)) continue;
    const Array& g = tape.grad(v);
    Eigen::Map<Eigen::MatrixXd>(out.data() + e.offset, e.rows, e.cols) +=
        g.matrix();
  }
}

std::pair<double, Eigen::VectorXd> grad_params(const LossBuilder& loss_fn,
                                               const ParamVector& params) {
  Tape tape;
  ParamLeaves leaves = make_param_leaves(tape, params);
  Var loss = loss_fn(tape, leaves);
  const double value = tape.scalar_value(loss);
  tape.backward(loss);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.data.size());
  accumulate_param_grads(tape, leaves, params, grad);
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw EvalError("non-finite gradient for parameter " +
                      params.layout->name_of_index(i));
  }
  return {value, std::move(grad)};
}

}  // namespace pinnray
