#include "radmamba/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "RMT serialization assumes a little-endian host");

namespace radmamba {

void fail(const std::string& msg) { throw Error(msg); }

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) {
    if (e < 0) fail("negative extent in shape " + shape_str(s));
    n *= e;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Tensor

namespace {

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, Precision prec) {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->prec = prec;
  int64_t n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<size_t>(n), 0.0);
  return impl;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, Precision prec) {
  return Tensor(make_impl(std::move(shape), prec));
}

Tensor Tensor::full(Shape shape, double value, Precision prec) {
  auto impl = make_impl(std::move(shape), prec);
  double v = detail::round_to(prec, value);
  std::fill(impl->data.begin(), impl->data.end(), v);
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, Precision prec) {
  int64_t n = shape_numel(shape);
  if (n != static_cast<int64_t>(values.size()))
    fail("from_data: shape " + shape_str(shape) + " wants " + std::to_string(n) +
         " values, got " + std::to_string(values.size()));
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->prec = prec;
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  for (double& v : impl->data) v = detail::round_to(prec, v);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, Precision prec) {
  return from_data({}, {value}, prec);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return impl_->numel(); }

int64_t Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) fail("dim: axis out of range");
  return impl_->shape[axis];
}

int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
Precision Tensor::precision() const { return impl_->prec; }

const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::mutable_data() { return impl_->data; }

void Tensor::round_to_precision() {
  for (double& v : impl_->data) v = detail::round_to(impl_->prec, v);
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) fail("grad: tensor has no gradient buffer");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) fail("item: tensor has " + std::to_string(numel()) + " elements");
  return impl_->data[0];
}

double Tensor::at(const std::vector<int64_t>& idx) const {
  if (static_cast<int>(idx.size()) != rank()) fail("at: index rank mismatch");
  int64_t off = 0;
  for (int i = 0; i < rank(); ++i) {
    if (idx[i] < 0 || idx[i] >= impl_->shape[i]) fail("at: index out of range");
    off = off * impl_->shape[i] + idx[i];
  }
  return impl_->data[static_cast<size_t>(off)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor Tensor::detach() const {
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = impl_->shape;
  impl->data = impl_->data;
  impl->prec = impl_->prec;
  return Tensor(std::move(impl));
}

Tensor Tensor::clone() const { return detach(); }

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& t) : prev_(g_active_tape) { g_active_tape = &t; }
Tape::Scope::~Scope() { g_active_tape = prev_; }

Tape* Tape::current() { return g_active_tape; }

void Tape::clear() { nodes_.clear(); }

int64_t Tape::record(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int64_t>(nodes_.size()) - 1;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1)
    fail("backward: loss must be a one-element tensor");
  const auto& impl = loss.impl();
  if (impl->tape != this || impl->producer < 0)
    fail("backward: loss is detached from this tape");

  // Reverse reachability from the loss node; each node runs at most once.
  std::vector<char> marked(nodes_.size(), 0);
  std::vector<int64_t> stack{impl->producer};
  marked[static_cast<size_t>(impl->producer)] = 1;
  while (!stack.empty()) {
    int64_t idx = stack.back();
    stack.pop_back();
    for (const auto& in : nodes_[static_cast<size_t>(idx)].ins) {
      if (in->tape == this && in->producer >= 0 && !marked[static_cast<size_t>(in->producer)]) {
        marked[static_cast<size_t>(in->producer)] = 1;
        stack.push_back(in->producer);
      }
    }
  }

  detail::grad_buf(impl)[0] += 1.0;
  for (int64_t i = impl->producer; i >= 0; --i) {
    if (marked[static_cast<size_t>(i)]) nodes_[static_cast<size_t>(i)].back();
  }
}

namespace detail {

std::vector<double>& grad_buf(const std::shared_ptr<TensorImpl>& impl) {
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad;
}

void finish_op(Tensor& out, const std::vector<Tensor>& ins, std::function<void()> back) {
  auto& impl = out.impl();
  for (double& v : impl->data) v = round_to(impl->prec, v);

  Tape* tape = Tape::current();
  if (!tape) return;
  bool any = false;
  for (const auto& in : ins) any = any || in.requires_grad();
  if (!any) return;

  Tape::Node node;
  node.out = impl;
  node.ins.reserve(ins.size());
  for (const auto& in : ins) node.ins.push_back(in.impl());
  node.back = std::move(back);
  impl->tape = tape;
  impl->requires_grad = true;
  impl->producer = tape->record(std::move(node));
}

void check_same_precision(const Tensor& a, const Tensor& b, const char* op) {
  if (a.precision() != b.precision())
    fail(std::string(op) + ": mixed precisions in one graph");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops

namespace ops {

namespace {

// Leading-1 broadcast: after stripping leading 1s, the smaller shape must be
// a suffix of the larger. Returns true if b broadcasts over a (a is larger
// or equal).
Shape strip_leading_ones(const Shape& s) {
  size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<long>(i), s.end());
}

bool suffix_of(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

struct BroadcastPlan {
  Shape out_shape;
  bool swap = false;  // true if `a` is the smaller operand
};

BroadcastPlan broadcast_plan(const Tensor& a, const Tensor& b, const char* op) {
  Shape sa = strip_leading_ones(a.shape());
  Shape sb = strip_leading_ones(b.shape());
  if (sa == sb) return {a.numel() >= b.numel() ? a.shape() : b.shape(), false};
  if (suffix_of(sb, sa)) return {a.shape(), false};
  if (suffix_of(sa, sb)) return {b.shape(), true};
  fail(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
       shape_str(b.shape()) + " are not broadcast-compatible");
}

using BinFwd = double (*)(double, double);

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, BinFwd fwd,
                 // accumulate input grads given (va, vb, vout, gout)
                 void (*bwd)(double, double, double, double, double&, double&)) {
  detail::check_same_precision(a, b, name);
  BroadcastPlan plan = broadcast_plan(a, b, name);
  const Tensor& big = plan.swap ? b : a;
  const Tensor& small = plan.swap ? a : b;
  const int64_t n = big.numel();
  const int64_t m = std::max<int64_t>(small.numel(), 1);

  Tensor out = Tensor::zeros(plan.out_shape, a.precision());
  auto& od = out.mutable_data();
  const auto& bd = big.data();
  const auto& sd = small.data();
  for (int64_t i = 0; i < n; ++i) {
    double vb = bd[static_cast<size_t>(i)];
    double vs = sd[static_cast<size_t>(i % m)];
    od[static_cast<size_t>(i)] = plan.swap ? fwd(vs, vb) : fwd(vb, vs);
  }

  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  bool swap = plan.swap;
  detail::finish_op(out, {a, b}, [ai, bi, oi, swap, bwd, n, m]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    auto& big_i = swap ? bi : ai;
    auto& small_i = swap ? ai : bi;
    bool wb = detail::wants_grad(big_i);
    bool ws = detail::wants_grad(small_i);
    if (!wb && !ws) return;
    std::vector<double> gb_local(wb ? static_cast<size_t>(n) : 0, 0.0);
    std::vector<double> gs_local(ws ? static_cast<size_t>(m) : 0, 0.0);
    for (int64_t i = 0; i < n; ++i) {
      double vbig = big_i->data[static_cast<size_t>(i)];
      double vsml = small_i->data[static_cast<size_t>(i % m)];
      double va = swap ? vsml : vbig;
      double vb = swap ? vbig : vsml;
      double ga = 0.0, gbv = 0.0;
      bwd(va, vb, oi->data[static_cast<size_t>(i)], (*g)[static_cast<size_t>(i)], ga, gbv);
      double gbig = swap ? gbv : ga;
      double gsml = swap ? ga : gbv;
      if (wb) gb_local[static_cast<size_t>(i)] += gbig;
      if (ws) gs_local[static_cast<size_t>(i % m)] += gsml;
    }
    if (wb) {
      auto& gb = detail::grad_buf(big_i);
      for (int64_t i = 0; i < n; ++i) gb[static_cast<size_t>(i)] += gb_local[static_cast<size_t>(i)];
    }
    if (ws) {
      auto& gs = detail::grad_buf(small_i);
      for (int64_t i = 0; i < m; ++i) gs[static_cast<size_t>(i)] += gs_local[static_cast<size_t>(i)];
    }
  });
  return out;
}

Tensor unary_op(const Tensor& x, const char* /*name*/, double (*fwd)(double),
                double (*dfdx)(double, double) /* (x, y) -> dy/dx */) {
  Tensor out = Tensor::zeros(x.shape(), x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = fwd(xd[i]);

  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, dfdx]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i)
      gx[i] += (*g)[i] * dfdx(xi->data[i], oi->data[i]);
  });
  return out;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add", [](double x, double y) { return x + y; },
                   [](double, double, double, double g, double& ga, double& gb) {
                     ga = g;
                     gb = g;
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub", [](double x, double y) { return x - y; },
                   [](double, double, double, double g, double& ga, double& gb) {
                     ga = g;
                     gb = -g;
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul", [](double x, double y) { return x * y; },
                   [](double x, double y, double, double g, double& ga, double& gb) {
                     ga = g * y;
                     gb = g * x;
                   });
}

Tensor max(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "max", [](double x, double y) { return x >= y ? x : y; },
                   [](double x, double y, double, double g, double& ga, double& gb) {
                     if (x >= y) {
                       ga = g;
                       gb = 0.0;
                     } else {
                       ga = 0.0;
                       gb = g;
                     }
                   });
}

Tensor neg(const Tensor& x) {
  return unary_op(x, "neg", [](double v) { return -v; },
                  [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& x) {
  return unary_op(x, "exp", [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary_op(x, "log", [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor silu(const Tensor& x) {
  return unary_op(x, "silu", [](double v) { return v * sigmoid(v); },
                  [](double v, double) {
                    double s = sigmoid(v);
                    return s * (1.0 + v * (1.0 - s));
                  });
}

Tensor softplus(const Tensor& x) {
  // exp overflows around x ~ 700; above 30 the correction is < 1e-13.
  return unary_op(x, "softplus",
                  [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); },
                  [](double v, double) { return sigmoid(v); });
}

Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape(), x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] * c;
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, c]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*g)[i] * c;
  });
  return out;
}

Tensor add_scalar(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape(), x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  for (size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] + c;
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*g)[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor out = Tensor::from_data({}, {acc}, x.precision());
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*g)[0];
  });
  return out;
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) fail("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  Tensor out = Tensor::from_data({}, {acc * inv}, x.precision());
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, inv]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*g)[0] * inv;
  });
  return out;
}

Tensor mean_axis0(const Tensor& x) {
  if (x.rank() < 1) fail("mean_axis0: rank-0 tensor");
  int64_t n = x.dim(0);
  if (n == 0) fail("mean_axis0: empty axis");
  Shape out_shape(x.shape().begin() + 1, x.shape().end());
  int64_t inner = shape_numel(out_shape);
  Tensor out = Tensor::zeros(out_shape, x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  double inv = 1.0 / static_cast<double>(n);
  for (int64_t r = 0; r < n; ++r)
    for (int64_t j = 0; j < inner; ++j)
      od[static_cast<size_t>(j)] += xd[static_cast<size_t>(r * inner + j)];
  for (int64_t j = 0; j < inner; ++j) od[static_cast<size_t>(j)] *= inv;

  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, n, inner, inv]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (int64_t r = 0; r < n; ++r)
      for (int64_t j = 0; j < inner; ++j)
        gx[static_cast<size_t>(r * inner + j)] += (*g)[static_cast<size_t>(j)] * inv;
  });
  return out;
}

// ---------------------------------------------------------------------------
// Matmul

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_same_precision(a, b, "matmul");
  if (a.rank() != 2 || b.rank() != 2)
    fail("matmul: expects rank-2 operands, got " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    fail("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
         shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n}, a.precision());
  auto& od = out.mutable_data();
  const auto& ad = a.data();
  const auto& bd = b.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t p = 0; p < k; ++p) {
      double av = ad[static_cast<size_t>(i * k + p)];
      if (av == 0.0) continue;
      const size_t bo = static_cast<size_t>(p * n);
      const size_t oo = static_cast<size_t>(i * n);
      for (int64_t j = 0; j < n; ++j) od[oo + static_cast<size_t>(j)] += av * bd[bo + static_cast<size_t>(j)];
    }
  }

  auto ai = a.impl(), bi = b.impl(), oi = out.impl();
  detail::finish_op(out, {a, b}, [ai, bi, oi, m, k, n]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    if (detail::wants_grad(ai)) {
      auto& ga = detail::grad_buf(ai);
      for (int64_t i = 0; i < m; ++i)
        for (int64_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int64_t j = 0; j < n; ++j)
            acc += (*g)[static_cast<size_t>(i * n + j)] * bi->data[static_cast<size_t>(p * n + j)];
          ga[static_cast<size_t>(i * k + p)] += acc;
        }
    }
    if (detail::wants_grad(bi)) {
      auto& gb = detail::grad_buf(bi);
      for (int64_t p = 0; p < k; ++p)
        for (int64_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int64_t i = 0; i < m; ++i)
            acc += ai->data[static_cast<size_t>(i * k + p)] * (*g)[static_cast<size_t>(i * n + j)];
          gb[static_cast<size_t>(p * n + j)] += acc;
        }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Convolutions

namespace {

void check_conv2d_shapes(const Tensor& x, const Tensor& w, const Tensor& bias,
                         int stride_h, int stride_w, int pad_h, int pad_w) {
  if (x.rank() != 3) fail("conv2d: input must be [C,H,W], got " + shape_str(x.shape()));
  if (w.rank() != 4) fail("conv2d: weight must be [Cout,C,kh,kw], got " + shape_str(w.shape()));
  if (x.dim(0) != w.dim(1))
    fail("conv2d: channel mismatch, input " + shape_str(x.shape()) + " vs weight " +
         shape_str(w.shape()));
  if (stride_h < 1 || stride_w < 1) fail("conv2d: stride must be >= 1");
  if (pad_h < 0 || pad_w < 0) fail("conv2d: negative padding");
  if (w.dim(2) > x.dim(1) + 2 * pad_h || w.dim(3) > x.dim(2) + 2 * pad_w)
    fail("conv2d: kernel " + shape_str(w.shape()) + " larger than padded input " +
         shape_str(x.shape()) + " with pad (" + std::to_string(pad_h) + "," +
         std::to_string(pad_w) + ")");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    fail("conv2d: bias shape " + shape_str(bias.shape()) + " does not match Cout");
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride_h,
              int stride_w, int pad_h, int pad_w, ConvAlgo algo) {
  check_conv2d_shapes(x, w, bias, stride_h, stride_w, pad_h, pad_w);
  detail::check_same_precision(x, w, "conv2d");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int64_t Ho = (H + 2 * pad_h - kh) / stride_h + 1;
  const int64_t Wo = (W + 2 * pad_w - kw) / stride_w + 1;

  Tensor out = Tensor::zeros({Cout, Ho, Wo}, x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  const auto& wd = w.data();

  if (algo == ConvAlgo::Im2col) {
    // im2col + matmul fast path; proven equal to the direct loops in tests.
    const int64_t K = C * kh * kw;
    std::vector<double> col(static_cast<size_t>(K * Ho * Wo), 0.0);
    for (int64_t c = 0; c < C; ++c)
      for (int64_t i = 0; i < kh; ++i)
        for (int64_t j = 0; j < kw; ++j) {
          const int64_t krow = (c * kh + i) * kw + j;
          for (int64_t oy = 0; oy < Ho; ++oy) {
            const int64_t iy = oy * stride_h + i - pad_h;
            if (iy < 0 || iy >= H) continue;
            for (int64_t ox = 0; ox < Wo; ++ox) {
              const int64_t ix = ox * stride_w + j - pad_w;
              if (ix < 0 || ix >= W) continue;
              col[static_cast<size_t>(krow * Ho * Wo + oy * Wo + ox)] =
                  xd[static_cast<size_t>((c * H + iy) * W + ix)];
            }
          }
        }
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t k = 0; k < K; ++k) {
        const double wv = wd[static_cast<size_t>(co * K + k)];
        if (wv == 0.0) continue;
        const size_t cb = static_cast<size_t>(k * Ho * Wo);
        const size_t ob = static_cast<size_t>(co * Ho * Wo);
        for (int64_t p = 0; p < Ho * Wo; ++p)
          od[ob + static_cast<size_t>(p)] += wv * col[cb + static_cast<size_t>(p)];
      }
  } else {
    for (int64_t co = 0; co < Cout; ++co)
      for (int64_t oy = 0; oy < Ho; ++oy)
        for (int64_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int64_t c = 0; c < C; ++c)
            for (int64_t i = 0; i < kh; ++i) {
              const int64_t iy = oy * stride_h + i - pad_h;
              if (iy < 0 || iy >= H) continue;
              for (int64_t j = 0; j < kw; ++j) {
                const int64_t ix = ox * stride_w + j - pad_w;
                if (ix < 0 || ix >= W) continue;
                acc += wd[static_cast<size_t>(((co * C + c) * kh + i) * kw + j)] *
                       xd[static_cast<size_t>((c * H + iy) * W + ix)];
              }
            }
          od[static_cast<size_t>((co * Ho + oy) * Wo + ox)] = acc;
        }
  }

  if (bias.defined()) {
    const auto& bd = bias.data();
    for (int64_t co = 0; co < Cout; ++co) {
      const size_t ob = static_cast<size_t>(co * Ho * Wo);
      for (int64_t p = 0; p < Ho * Wo; ++p) od[ob + static_cast<size_t>(p)] += bd[static_cast<size_t>(co)];
    }
  }

  auto xi = x.impl(), wi = w.impl(), oi = out.impl();
  auto biasi = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> ins{x, w};
  if (bias.defined()) ins.push_back(bias);
  detail::finish_op(out, ins, [xi, wi, biasi, oi, C, H, W, Cout, kh, kw, Ho, Wo,
                               stride_h, stride_w, pad_h, pad_w]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    const bool wx = detail::wants_grad(xi);
    const bool ww = detail::wants_grad(wi);
    if (wx || ww) {
      auto* gx = wx ? &detail::grad_buf(xi) : nullptr;
      auto* gw = ww ? &detail::grad_buf(wi) : nullptr;
      for (int64_t co = 0; co < Cout; ++co)
        for (int64_t oy = 0; oy < Ho; ++oy)
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const double go = (*g)[static_cast<size_t>((co * Ho + oy) * Wo + ox)];
            if (go == 0.0) continue;
            for (int64_t c = 0; c < C; ++c)
              for (int64_t i = 0; i < kh; ++i) {
                const int64_t iy = oy * stride_h + i - pad_h;
                if (iy < 0 || iy >= H) continue;
                for (int64_t j = 0; j < kw; ++j) {
                  const int64_t ix = ox * stride_w + j - pad_w;
                  if (ix < 0 || ix >= W) continue;
                  const size_t wo = static_cast<size_t>(((co * C + c) * kh + i) * kw + j);
                  const size_t xo = static_cast<size_t>((c * H + iy) * W + ix);
                  if (gx) (*gx)[xo] += go * wi->data[wo];
                  if (gw) (*gw)[wo] += go * xi->data[xo];
                }
              }
          }
    }
    if (biasi && detail::wants_grad(biasi)) {
      auto& gb = detail::grad_buf(biasi);
      for (int64_t co = 0; co < Cout; ++co) {
        double acc = 0.0;
        for (int64_t p = 0; p < Ho * Wo; ++p)
          acc += (*g)[static_cast<size_t>(co * Ho * Wo + p)];
        gb[static_cast<size_t>(co)] += acc;
      }
    }
  });
  return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad) {
  if (x.rank() != 2) fail("conv1d: input must be [D,N], got " + shape_str(x.shape()));
  if (w.rank() != 3) fail("conv1d: weight must be [Dout,D,k], got " + shape_str(w.shape()));
  if (x.dim(0) != w.dim(1))
    fail("conv1d: channel mismatch, input " + shape_str(x.shape()) + " vs weight " +
         shape_str(w.shape()));
  if (pad < 0) fail("conv1d: negative padding");
  if (w.dim(2) > x.dim(1) + 2 * pad)
    fail("conv1d: kernel " + shape_str(w.shape()) + " larger than padded input " +
         shape_str(x.shape()));
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != w.dim(0)))
    fail("conv1d: bias shape " + shape_str(bias.shape()) + " does not match Dout");
  detail::check_same_precision(x, w, "conv1d");

  const int64_t D = x.dim(0), N = x.dim(1);
  const int64_t Dout = w.dim(0), k = w.dim(2);
  const int64_t No = N + 2 * pad - k + 1;

  Tensor out = Tensor::zeros({Dout, No}, x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  const auto& wd = w.data();
  for (int64_t dout = 0; dout < Dout; ++dout)
    for (int64_t n = 0; n < No; ++n) {
      double acc = bias.defined() ? bias.data()[static_cast<size_t>(dout)] : 0.0;
      for (int64_t d = 0; d < D; ++d)
        for (int64_t j = 0; j < k; ++j) {
          const int64_t ix = n + j - pad;
          if (ix < 0 || ix >= N) continue;
          acc += wd[static_cast<size_t>((dout * D + d) * k + j)] *
                 xd[static_cast<size_t>(d * N + ix)];
        }
      od[static_cast<size_t>(dout * No + n)] = acc;
    }

  auto xi = x.impl(), wi = w.impl(), oi = out.impl();
  auto biasi = bias.defined() ? bias.impl() : nullptr;
  std::vector<Tensor> ins{x, w};
  if (bias.defined()) ins.push_back(bias);
  detail::finish_op(out, ins, [xi, wi, biasi, oi, D, N, Dout, k, No, pad]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    const bool wx = detail::wants_grad(xi);
    const bool ww = detail::wants_grad(wi);
    auto* gx = wx ? &detail::grad_buf(xi) : nullptr;
    auto* gw = ww ? &detail::grad_buf(wi) : nullptr;
    for (int64_t dout = 0; dout < Dout; ++dout)
      for (int64_t n = 0; n < No; ++n) {
        const double go = (*g)[static_cast<size_t>(dout * No + n)];
        if (go == 0.0) continue;
        for (int64_t d = 0; d < D; ++d)
          for (int64_t j = 0; j < k; ++j) {
            const int64_t ix = n + j - pad;
            if (ix < 0 || ix >= N) continue;
            const size_t wo = static_cast<size_t>((dout * D + d) * k + j);
            const size_t xo = static_cast<size_t>(d * N + ix);
            if (gx) (*gx)[xo] += go * wi->data[wo];
            if (gw) (*gw)[wo] += go * xi->data[xo];
          }
      }
    if (biasi && detail::wants_grad(biasi)) {
      auto& gb = detail::grad_buf(biasi);
      for (int64_t dout = 0; dout < Dout; ++dout) {
        double acc = 0.0;
        for (int64_t n = 0; n < No; ++n) acc += (*g)[static_cast<size_t>(dout * No + n)];
        gb[static_cast<size_t>(dout)] += acc;
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Pooling

namespace {

Tensor pool3d(const Tensor& x, int64_t kc_h, int64_t kc_w, bool is_max, const char* name) {
  if (x.rank() != 3) fail(std::string(name) + ": input must be [C,H,W]");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  if (kc_h < 1 || kc_w < 1) fail(std::string(name) + ": kernel must be >= 1");
  if (H % kc_h != 0 || W % kc_w != 0)
    fail(std::string(name) + ": kernel (" + std::to_string(kc_h) + "," +
         std::to_string(kc_w) + ") does not divide input " + shape_str(x.shape()));
  const int64_t Ho = H / kc_h, Wo = W / kc_w;

  Tensor out = Tensor::zeros({C, Ho, Wo}, x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  auto argmax = std::make_shared<std::vector<int64_t>>(
      is_max ? static_cast<size_t>(C * Ho * Wo) : 0);
  const double inv = 1.0 / static_cast<double>(kc_h * kc_w);

  for (int64_t c = 0; c < C; ++c)
    for (int64_t oy = 0; oy < Ho; ++oy)
      for (int64_t ox = 0; ox < Wo; ++ox) {
        const size_t oidx = static_cast<size_t>((c * Ho + oy) * Wo + ox);
        if (is_max) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t best_idx = -1;
          for (int64_t i = 0; i < kc_h; ++i)
            for (int64_t j = 0; j < kc_w; ++j) {
              const int64_t xo = (c * H + oy * kc_h + i) * W + ox * kc_w + j;
              const double v = xd[static_cast<size_t>(xo)];
              if (v > best) {
                best = v;
                best_idx = xo;
              }
            }
          od[oidx] = best;
          (*argmax)[oidx] = best_idx;
        } else {
          double acc = 0.0;
          for (int64_t i = 0; i < kc_h; ++i)
            for (int64_t j = 0; j < kc_w; ++j)
              acc += xd[static_cast<size_t>((c * H + oy * kc_h + i) * W + ox * kc_w + j)];
          od[oidx] = acc * inv;
        }
      }

  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, argmax, is_max, inv, C, H, W, Ho, Wo, kc_h, kc_w]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    if (is_max) {
      for (size_t i = 0; i < argmax->size(); ++i)
        gx[static_cast<size_t>((*argmax)[i])] += (*g)[i];
    } else {
      for (int64_t c = 0; c < C; ++c)
        for (int64_t oy = 0; oy < Ho; ++oy)
          for (int64_t ox = 0; ox < Wo; ++ox) {
            const double go = (*g)[static_cast<size_t>((c * Ho + oy) * Wo + ox)] * inv;
            for (int64_t i = 0; i < kc_h; ++i)
              for (int64_t j = 0; j < kc_w; ++j)
                gx[static_cast<size_t>((c * H + oy * kc_h + i) * W + ox * kc_w + j)] += go;
          }
    }
  });
  return out;
}

}  // namespace

Tensor maxpool2d(const Tensor& x, int kh, int kw) { return pool3d(x, kh, kw, true, "maxpool2d"); }
Tensor maxpool1d_h(const Tensor& x, int k) { return pool3d(x, k, 1, true, "maxpool1d_h"); }
Tensor maxpool1d_w(const Tensor& x, int k) { return pool3d(x, 1, k, true, "maxpool1d_w"); }
Tensor avgpool1d_w(const Tensor& x, int k) { return pool3d(x, 1, k, false, "avgpool1d_w"); }

// ---------------------------------------------------------------------------
// Normalization

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() < 1) fail("layer_norm: rank-0 input");
  const int64_t D = x.shape().back();
  if (gamma.rank() != 1 || gamma.dim(0) != D || beta.rank() != 1 || beta.dim(0) != D)
    fail("layer_norm: affine shapes must be [" + std::to_string(D) + "]");
  const int64_t rows = x.numel() / D;

  Tensor out = Tensor::zeros(x.shape(), x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  const auto& gd = gamma.data();
  const auto& bd = beta.data();
  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(rows * 2));
  for (int64_t r = 0; r < rows; ++r) {
    const size_t base = static_cast<size_t>(r * D);
    double mu = 0.0;
    for (int64_t j = 0; j < D; ++j) mu += xd[base + static_cast<size_t>(j)];
    mu /= static_cast<double>(D);
    double var = 0.0;
    for (int64_t j = 0; j < D; ++j) {
      const double d = xd[base + static_cast<size_t>(j)] - mu;
      var += d * d;
    }
    var /= static_cast<double>(D);
    const double inv_std = 1.0 / std::sqrt(var + eps);
    (*stats)[static_cast<size_t>(2 * r)] = mu;
    (*stats)[static_cast<size_t>(2 * r + 1)] = inv_std;
    for (int64_t j = 0; j < D; ++j) {
      const double xh = (xd[base + static_cast<size_t>(j)] - mu) * inv_std;
      od[base + static_cast<size_t>(j)] = xh * gd[static_cast<size_t>(j)] + bd[static_cast<size_t>(j)];
    }
  }

  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
  detail::finish_op(out, {x, gamma, beta}, [xi, gi, bi, oi, stats, rows, D]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    const bool wx = detail::wants_grad(xi);
    const bool wg = detail::wants_grad(gi);
    const bool wb = detail::wants_grad(bi);
    auto* gx = wx ? &detail::grad_buf(xi) : nullptr;
    auto* gg = wg ? &detail::grad_buf(gi) : nullptr;
    auto* gb = wb ? &detail::grad_buf(bi) : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
      const size_t base = static_cast<size_t>(r * D);
      const double mu = (*stats)[static_cast<size_t>(2 * r)];
      const double inv_std = (*stats)[static_cast<size_t>(2 * r + 1)];
      double sum_gy_g = 0.0, sum_gy_g_xh = 0.0;
      for (int64_t j = 0; j < D; ++j) {
        const double xh = (xi->data[base + static_cast<size_t>(j)] - mu) * inv_std;
        const double gy = (*g)[base + static_cast<size_t>(j)];
        const double gyg = gy * gi->data[static_cast<size_t>(j)];
        sum_gy_g += gyg;
        sum_gy_g_xh += gyg * xh;
        if (gg) (*gg)[static_cast<size_t>(j)] += gy * xh;
        if (gb) (*gb)[static_cast<size_t>(j)] += gy;
      }
      if (gx) {
        const double invD = 1.0 / static_cast<double>(D);
        for (int64_t j = 0; j < D; ++j) {
          const double xh = (xi->data[base + static_cast<size_t>(j)] - mu) * inv_std;
          const double gyg = (*g)[base + static_cast<size_t>(j)] * gi->data[static_cast<size_t>(j)];
          (*gx)[base + static_cast<size_t>(j)] +=
              inv_std * (gyg - invD * sum_gy_g - xh * invD * sum_gy_g_xh);
        }
      }
    }
  });
  return out;
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, double momentum,
                    double eps, bool training) {
  if (x.rank() != 3) fail("batch_norm2d: input must be [C,H,W]");
  const int64_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const int64_t hw = H * W;
  if (gamma.dim(0) != C || beta.dim(0) != C || running_mean.dim(0) != C ||
      running_var.dim(0) != C)
    fail("batch_norm2d: per-channel parameter shapes must be [" + std::to_string(C) + "]");

  auto stats = std::make_shared<std::vector<double>>(static_cast<size_t>(2 * C));
  const auto& xd = x.data();
  for (int64_t c = 0; c < C; ++c) {
    double mu, var;
    if (training) {
      mu = 0.0;
      for (int64_t p = 0; p < hw; ++p) mu += xd[static_cast<size_t>(c * hw + p)];
      mu /= static_cast<double>(hw);
      var = 0.0;
      for (int64_t p = 0; p < hw; ++p) {
        const double d = xd[static_cast<size_t>(c * hw + p)] - mu;
        var += d * d;
      }
      var /= static_cast<double>(hw);
      auto& rm = running_mean.mutable_data();
      auto& rv = running_var.mutable_data();
      rm[static_cast<size_t>(c)] = (1.0 - momentum) * rm[static_cast<size_t>(c)] + momentum * mu;
      rv[static_cast<size_t>(c)] = (1.0 - momentum) * rv[static_cast<size_t>(c)] + momentum * var;
    } else {
      mu = running_mean.data()[static_cast<size_t>(c)];
      var = running_var.data()[static_cast<size_t>(c)];
    }
    (*stats)[static_cast<size_t>(2 * c)] = mu;
    (*stats)[static_cast<size_t>(2 * c + 1)] = 1.0 / std::sqrt(var + eps);
  }

  Tensor out = Tensor::zeros(x.shape(), x.precision());
  auto& od = out.mutable_data();
  const auto& gd = gamma.data();
  const auto& bd = beta.data();
  for (int64_t c = 0; c < C; ++c) {
    const double mu = (*stats)[static_cast<size_t>(2 * c)];
    const double inv_std = (*stats)[static_cast<size_t>(2 * c + 1)];
    for (int64_t p = 0; p < hw; ++p) {
      const size_t i = static_cast<size_t>(c * hw + p);
      od[i] = (xd[i] - mu) * inv_std * gd[static_cast<size_t>(c)] + bd[static_cast<size_t>(c)];
    }
  }

  auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
  detail::finish_op(out, {x, gamma, beta}, [xi, gi, bi, oi, stats, C, hw, training]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    const bool wx = detail::wants_grad(xi);
    const bool wg = detail::wants_grad(gi);
    const bool wb = detail::wants_grad(bi);
    auto* gx = wx ? &detail::grad_buf(xi) : nullptr;
    auto* gg = wg ? &detail::grad_buf(gi) : nullptr;
    auto* gb = wb ? &detail::grad_buf(bi) : nullptr;
    for (int64_t c = 0; c < C; ++c) {
      const double mu = (*stats)[static_cast<size_t>(2 * c)];
      const double inv_std = (*stats)[static_cast<size_t>(2 * c + 1)];
      double sum_gy = 0.0, sum_gy_xh = 0.0;
      for (int64_t p = 0; p < hw; ++p) {
        const size_t i = static_cast<size_t>(c * hw + p);
        const double xh = (xi->data[i] - mu) * inv_std;
        sum_gy += (*g)[i];
        sum_gy_xh += (*g)[i] * xh;
        if (gg) (*gg)[static_cast<size_t>(c)] += (*g)[i] * xh;
        if (gb) (*gb)[static_cast<size_t>(c)] += (*g)[i];
      }
      if (gx) {
        const double gc = gi->data[static_cast<size_t>(c)];
        const double inv_n = 1.0 / static_cast<double>(hw);
        for (int64_t p = 0; p < hw; ++p) {
          const size_t i = static_cast<size_t>(c * hw + p);
          const double xh = (xi->data[i] - mu) * inv_std;
          if (training) {
            (*gx)[i] += gc * inv_std * ((*g)[i] - inv_n * sum_gy - xh * inv_n * sum_gy_xh);
          } else {
            (*gx)[i] += gc * inv_std * (*g)[i];
          }
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Rearrangement

Tensor reshape(const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel())
    fail("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(new_shape));
  Tensor out = Tensor::zeros(new_shape, x.precision());
  out.mutable_data() = x.data();
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += (*g)[i];
  });
  return out;
}

Tensor reindex(const Tensor& x, std::shared_ptr<const std::vector<int64_t>> map,
               Shape out_shape) {
  if (shape_numel(out_shape) != static_cast<int64_t>(map->size()))
    fail("reindex: map size does not match output shape");
  Tensor out = Tensor::zeros(out_shape, x.precision());
  auto& od = out.mutable_data();
  const auto& xd = x.data();
  const int64_t n = x.numel();
  for (size_t i = 0; i < map->size(); ++i) {
    const int64_t src = (*map)[i];
    if (src < 0 || src >= n) fail("reindex: map entry out of range");
    od[i] = xd[static_cast<size_t>(src)];
  }
  auto xi = x.impl(), oi = out.impl();
  detail::finish_op(out, {x}, [xi, oi, map]() {
    const auto* g = detail::out_grad(oi);
    if (!g || !detail::wants_grad(xi)) return;
    auto& gx = detail::grad_buf(xi);
    for (size_t i = 0; i < map->size(); ++i)
      gx[static_cast<size_t>((*map)[i])] += (*g)[i];
  });
  return out;
}

Tensor flip_axis0(const Tensor& x) {
  if (x.rank() < 1) fail("flip_axis0: rank-0 tensor");
  const int64_t n = x.dim(0);
  const int64_t inner = x.numel() / std::max<int64_t>(n, 1);
  auto map = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(x.numel()));
  for (int64_t r = 0; r < n; ++r)
    for (int64_t j = 0; j < inner; ++j)
      (*map)[static_cast<size_t>(r * inner + j)] = (n - 1 - r) * inner + j;
  return reindex(x, map, x.shape());
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) fail("stack_rows: empty input");
  const Shape& inner = rows[0].shape();
  for (const auto& r : rows)
    if (r.shape() != inner) fail("stack_rows: mismatched row shapes");
  const int64_t B = static_cast<int64_t>(rows.size());
  const int64_t D = rows[0].numel();
  Shape out_shape{B};
  out_shape.insert(out_shape.end(), inner.begin(), inner.end());

  Tensor out = Tensor::zeros(out_shape, rows[0].precision());
  auto& od = out.mutable_data();
  for (int64_t b = 0; b < B; ++b) {
    const auto& rd = rows[static_cast<size_t>(b)].data();
    std::copy(rd.begin(), rd.end(), od.begin() + static_cast<long>(b * D));
  }

  std::vector<std::shared_ptr<detail::TensorImpl>> impls;
  impls.reserve(rows.size());
  for (const auto& r : rows) impls.push_back(r.impl());
  auto oi = out.impl();
  detail::finish_op(out, rows, [impls, oi, D]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    for (size_t b = 0; b < impls.size(); ++b) {
      if (!detail::wants_grad(impls[b])) continue;
      auto& gx = detail::grad_buf(impls[b]);
      const size_t base = b * static_cast<size_t>(D);
      for (int64_t j = 0; j < D; ++j) gx[static_cast<size_t>(j)] += (*g)[base + static_cast<size_t>(j)];
    }
  });
  return out;
}

}  // namespace ops

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void write_raw(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) fail("tensor read: truncated stream");
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  os.write("RMT1", 4);
  write_raw<uint8_t>(os, static_cast<uint8_t>(t.precision()));
  write_raw<uint8_t>(os, static_cast<uint8_t>(t.rank()));
  for (int64_t e : t.shape()) {
    if (e > std::numeric_limits<uint32_t>::max()) fail("tensor write: extent too large");
    write_raw<uint32_t>(os, static_cast<uint32_t>(e));
  }
  if (t.precision() == Precision::F32) {
    for (double v : t.data()) write_raw<float>(os, static_cast<float>(v));
  } else {
    for (double v : t.data()) write_raw<double>(os, v);
  }
  if (!os) fail("tensor write: stream failure");
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "RMT1", 4) != 0) fail("tensor read: bad magic");
  const uint8_t prec_byte = read_raw<uint8_t>(is);
  if (prec_byte > 1) fail("tensor read: unknown precision tag");
  const Precision prec = static_cast<Precision>(prec_byte);
  const uint8_t rank = read_raw<uint8_t>(is);
  Shape shape(rank);
  for (auto& e : shape) e = read_raw<uint32_t>(is);
  const int64_t n = shape_numel(shape);
  std::vector<double> values(static_cast<size_t>(n));
  if (prec == Precision::F32) {
    for (auto& v : values) v = read_raw<float>(is);
  } else {
    for (auto& v : values) v = read_raw<double>(is);
  }
  return Tensor::from_data(std::move(shape), std::move(values), prec);
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open for write: " + path);
  write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open for read: " + path);
  return read_tensor(is);
}

}  // namespace radmamba
