#pragma once
// Dense tensor core with reverse-mode differentiation.
//
// Tensors are immutable after construction except through their gradient
// buffers. Scalars are stored as double regardless of the tensor precision;
// F32 tensors round every kernel result to binary32 so that values are always
// exactly representable in the 32-bit serialization format (accumulation
// inside a kernel happens at double precision).
//
// Differentiation is tape-based: ops record a node into the thread's active
// Tape whenever an input participates in differentiation. One tape holds one
// graph and must stay on one thread; independent graphs on separate threads
// need no synchronization.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace radmamba {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] void fail(const std::string& msg);

enum class Precision : uint8_t { F32 = 0, F64 = 1 };

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

class Tape;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  Precision prec = Precision::F32;
  Tape* tape = nullptr;    // tape that recorded the producing op
  int64_t producer = -1;   // node index in `tape`, -1 for leaves
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
};

inline double round_to(Precision p, double v) {
  return p == Precision::F32 ? static_cast<double>(static_cast<float>(v)) : v;
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor zeros(Shape shape, Precision prec = Precision::F32);
  static Tensor full(Shape shape, double value, Precision prec = Precision::F32);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          Precision prec = Precision::F32);
  static Tensor scalar(double value, Precision prec = Precision::F32);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const;
  int64_t dim(int axis) const;
  int rank() const;
  Precision precision() const;

  const std::vector<double>& data() const;
  std::vector<double>& mutable_data();  // for initialization and loading only
  void round_to_precision();            // re-establish F32 storage after a manual fill

  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;  // value of a one-element tensor
  double at(const std::vector<int64_t>& idx) const;

  Tensor& set_requires_grad(bool on = true);
  bool requires_grad() const;

  Tensor detach() const;  // same values, no tape participation
  Tensor clone() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Makes this tape the recording target for the current thread.
  class Scope {
   public:
    explicit Scope(Tape& t);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* current();

  int64_t size() const { return static_cast<int64_t>(nodes_.size()); }

  // Drops all recorded nodes. Leaf tensors and their gradients survive.
  void clear();

  // Accumulates d(loss)/d(leaf) into the grad buffer of every reachable
  // tensor with requires_grad set. `loss` must be a one-element tensor
  // produced on this tape. Each node is visited exactly once.
  void backward(const Tensor& loss);

  struct Node {
    std::shared_ptr<detail::TensorImpl> out;
    std::vector<std::shared_ptr<detail::TensorImpl>> ins;
    std::function<void()> back;
  };

  int64_t record(Node node);

 private:
  std::vector<Node> nodes_;
};

namespace detail {

// Finishes a freshly computed op result: applies F32 rounding, and if any
// input participates in differentiation and a tape is active, records the
// backward closure. Custom ops in other modules go through this too.
void finish_op(Tensor& out, const std::vector<Tensor>& ins, std::function<void()> back);

// Accumulation target for a backward closure; allocates zeros on first use.
std::vector<double>& grad_buf(const std::shared_ptr<TensorImpl>& impl);

// True if the closure should accumulate into this input.
inline bool wants_grad(const std::shared_ptr<TensorImpl>& impl) {
  return impl->requires_grad;
}

// Output gradient of a node, or nullptr if no gradient reached it.
inline const std::vector<double>* out_grad(const std::shared_ptr<TensorImpl>& impl) {
  return impl->grad.empty() ? nullptr : &impl->grad;
}

void check_same_precision(const Tensor& a, const Tensor& b, const char* op);

}  // namespace detail

namespace ops {

// Elementwise binary ops support leading-1 broadcast only: after stripping
// leading 1-extents, the smaller shape must equal a suffix of the larger.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor max(const Tensor& a, const Tensor& b);  // ties route gradient to `a`

Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor softplus(const Tensor& x);  // log(1+exp(x)), identity above x > 30
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);

Tensor sum(const Tensor& x);       // -> scalar
Tensor mean(const Tensor& x);      // -> scalar
Tensor mean_axis0(const Tensor& x);

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n] -> [m,n]

enum class ConvAlgo { Direct, Im2col };

// x [C,H,W], w [Cout,C,kh,kw], bias [Cout] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride_h,
              int stride_w, int pad_h, int pad_w, ConvAlgo algo = ConvAlgo::Direct);

// x [D,N], w [Dout,D,k], bias [Dout] or undefined; stride 1.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int pad);

// Non-overlapping pools on [C,H,W]; extents must divide.
Tensor maxpool2d(const Tensor& x, int kh, int kw);
Tensor maxpool1d_h(const Tensor& x, int k);
Tensor maxpool1d_w(const Tensor& x, int k);
Tensor avgpool1d_w(const Tensor& x, int k);

// y = (x - mean)/sqrt(var + eps) * gamma + beta over the last axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Per-channel batch norm on [C,H,W]. In training mode statistics come from
// the sample's spatial extent and running buffers are updated in place with
// `momentum`; in eval mode the running buffers are used.
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, double momentum,
                    double eps, bool training);

Tensor reshape(const Tensor& x, Shape new_shape);

// out[i] = x[map[i]]; map values index into x's flat data. Backward
// scatter-adds, so the map may repeat indices.
Tensor reindex(const Tensor& x, std::shared_ptr<const std::vector<int64_t>> map,
               Shape out_shape);

Tensor flip_axis0(const Tensor& x);
Tensor stack_rows(const std::vector<Tensor>& rows);  // B tensors [D] -> [B,D]

}  // namespace ops

// RMT flat binary tensor format: magic "RMT1", u8 precision, u8 rank,
// rank x u32 little-endian extents, then raw little-endian scalars
// (float for F32, double for F64).
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace radmamba
