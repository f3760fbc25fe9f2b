#include "radmamba/ssm.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace radmamba {

namespace {

// expm1(z)/z, stable near zero.
double expm1_over(double z) {
  if (std::abs(z) < 1e-12) return 1.0;
  return std::expm1(z) / z;
}

// d/dz[(exp(z)-1)/z] = (z e^z - e^z + 1)/z^2, stable near zero.
double dexpm1_over(double z) {
  if (std::abs(z) < 1e-4) return 0.5 + z / 3.0 + z * z / 8.0;
  const double ez = std::exp(z);
  return (z * ez - ez + 1.0) / (z * z);
}

void check_dims(const Tensor& a, const Tensor& b, const Tensor& delta) {
  if (a.rank() != 2) fail("discretize: A must be [dim,dim_s], got " + shape_str(a.shape()));
  if (b.rank() != 2) fail("discretize: B must be [N,dim_s], got " + shape_str(b.shape()));
  if (delta.rank() != 2)
    fail("discretize: delta must be [N,dim], got " + shape_str(delta.shape()));
  if (b.dim(1) != a.dim(1) || delta.dim(0) != b.dim(0) || delta.dim(1) != a.dim(0))
    fail("discretize: inconsistent shapes A" + shape_str(a.shape()) + " B" +
         shape_str(b.shape()) + " delta" + shape_str(delta.shape()));
  for (double v : a.data())
    if (!(v < 0.0)) fail("discretize: non-negative entry in A");
}

}  // namespace

Tensor ssm_a(const SsmWeights& w) { return ops::neg(ops::exp(w.a_log)); }

SsmParams gen_params(const Tensor& x, const SsmWeights& w) {
  if (x.rank() != 2) fail("gen_params: input must be [N,dim], got " + shape_str(x.shape()));
  const int64_t n = x.dim(0), dim = x.dim(1);
  if (w.w_b.dim(0) != dim || w.w_c.dim(0) != dim || w.dt_bias.dim(0) != dim)
    fail("gen_params: weight shapes do not match dim " + std::to_string(dim));

  SsmParams p;
  p.b = ops::matmul(x, w.w_b);
  p.c = ops::matmul(x, w.w_c);
  if (w.w_dt1.defined()) {
    Tensor low = ops::matmul(x, w.w_dt1);
    Tensor pre = ops::add(ops::matmul(low, w.w_dt2), w.dt_bias);
    p.delta = ops::softplus(pre);
  } else {
    // dt_rank == 0: learned input-independent step size
    Tensor pre = ops::add(Tensor::zeros({n, dim}, x.precision()), w.dt_bias);
    p.delta = ops::softplus(pre);
  }
  return p;
}

std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     const Tensor& delta, Discretization mode) {
  check_dims(a, b, delta);
  const int64_t n = delta.dim(0), dim = delta.dim(1), ds = a.dim(1);

  Tensor a_bar = Tensor::zeros({n, dim, ds}, a.precision());
  {
    auto& od = a_bar.mutable_data();
    const auto& ad = a.data();
    const auto& dd = delta.data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < dim; ++d) {
        const double dv = dd[static_cast<size_t>(i * dim + d)];
        for (int64_t s = 0; s < ds; ++s)
          od[static_cast<size_t>((i * dim + d) * ds + s)] =
              std::exp(dv * ad[static_cast<size_t>(d * ds + s)]);
      }
    auto ai = a.impl(), di = delta.impl(), oi = a_bar.impl();
    detail::finish_op(a_bar, {a, delta}, [ai, di, oi, n, dim, ds]() {
      const auto* g = detail::out_grad(oi);
      if (!g) return;
      const bool wa = detail::wants_grad(ai);
      const bool wd = detail::wants_grad(di);
      auto* ga = wa ? &detail::grad_buf(ai) : nullptr;
      auto* gd = wd ? &detail::grad_buf(di) : nullptr;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t d = 0; d < dim; ++d) {
          const double dv = di->data[static_cast<size_t>(i * dim + d)];
          double acc_d = 0.0;
          for (int64_t s = 0; s < ds; ++s) {
            const size_t o = static_cast<size_t>((i * dim + d) * ds + s);
            const double abar = oi->data[o];
            const double av = ai->data[static_cast<size_t>(d * ds + s)];
            if (ga) (*ga)[static_cast<size_t>(d * ds + s)] += (*g)[o] * abar * dv;
            acc_d += (*g)[o] * abar * av;
          }
          if (gd) (*gd)[static_cast<size_t>(i * dim + d)] += acc_d;
        }
    });
  }

  Tensor b_bar = Tensor::zeros({n, dim, ds}, a.precision());
  if (mode == Discretization::Euler) {
    auto& od = b_bar.mutable_data();
    const auto& bd = b.data();
    const auto& dd = delta.data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < dim; ++d) {
        const double dv = dd[static_cast<size_t>(i * dim + d)];
        for (int64_t s = 0; s < ds; ++s)
          od[static_cast<size_t>((i * dim + d) * ds + s)] =
              dv * bd[static_cast<size_t>(i * ds + s)];
      }
    auto bi = b.impl(), di = delta.impl(), oi = b_bar.impl();
    detail::finish_op(b_bar, {b, delta}, [bi, di, oi, n, dim, ds]() {
      const auto* g = detail::out_grad(oi);
      if (!g) return;
      const bool wb = detail::wants_grad(bi);
      const bool wd = detail::wants_grad(di);
      auto* gb = wb ? &detail::grad_buf(bi) : nullptr;
      auto* gd = wd ? &detail::grad_buf(di) : nullptr;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t d = 0; d < dim; ++d) {
          const double dv = di->data[static_cast<size_t>(i * dim + d)];
          double acc_d = 0.0;
          for (int64_t s = 0; s < ds; ++s) {
            const size_t o = static_cast<size_t>((i * dim + d) * ds + s);
            const double bv = bi->data[static_cast<size_t>(i * ds + s)];
            if (gb) (*gb)[static_cast<size_t>(i * ds + s)] += (*g)[o] * dv;
            acc_d += (*g)[o] * bv;
          }
          if (gd) (*gd)[static_cast<size_t>(i * dim + d)] += acc_d;
        }
    });
  } else {
    // exact ZOH: b_bar = (exp(delta a) - 1)/a * b = delta * expm1_over(delta a) * b
    auto& od = b_bar.mutable_data();
    const auto& ad = a.data();
    const auto& bd = b.data();
    const auto& dd = delta.data();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t d = 0; d < dim; ++d) {
        const double dv = dd[static_cast<size_t>(i * dim + d)];
        for (int64_t s = 0; s < ds; ++s) {
          const double av = ad[static_cast<size_t>(d * ds + s)];
          od[static_cast<size_t>((i * dim + d) * ds + s)] =
              dv * expm1_over(dv * av) * bd[static_cast<size_t>(i * ds + s)];
        }
      }
    auto ai = a.impl(), bi = b.impl(), di = delta.impl(), oi = b_bar.impl();
    detail::finish_op(b_bar, {a, b, delta}, [ai, bi, di, oi, n, dim, ds]() {
      const auto* g = detail::out_grad(oi);
      if (!g) return;
      const bool wa = detail::wants_grad(ai);
      const bool wb = detail::wants_grad(bi);
      const bool wd = detail::wants_grad(di);
      auto* ga = wa ? &detail::grad_buf(ai) : nullptr;
      auto* gb = wb ? &detail::grad_buf(bi) : nullptr;
      auto* gd = wd ? &detail::grad_buf(di) : nullptr;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t d = 0; d < dim; ++d) {
          const double dv = di->data[static_cast<size_t>(i * dim + d)];
          double acc_d = 0.0;
          for (int64_t s = 0; s < ds; ++s) {
            const size_t o = static_cast<size_t>((i * dim + d) * ds + s);
            const double av = ai->data[static_cast<size_t>(d * ds + s)];
            const double bv = bi->data[static_cast<size_t>(i * ds + s)];
            const double z = dv * av;
            const double phi = dv * expm1_over(z);
            const double go = (*g)[o];
            if (gb) (*gb)[static_cast<size_t>(i * ds + s)] += go * phi;
            if (ga) (*ga)[static_cast<size_t>(d * ds + s)] += go * dv * dv * dexpm1_over(z) * bv;
            acc_d += go * std::exp(z) * bv;  // d(phi)/d(delta) = exp(delta a)
          }
          if (gd) (*gd)[static_cast<size_t>(i * dim + d)] += acc_d;
        }
    });
  }

  return {std::move(a_bar), std::move(b_bar)};
}

// ---------------------------------------------------------------------------
// Scan

namespace {

void check_scan_shapes(const Tensor& x, const SsmParams& p, const Tensor& c,
                       const Tensor& d, const char* name) {
  if (x.rank() != 2) fail(std::string(name) + ": x must be [N,dim]");
  const int64_t n = x.dim(0), dim = x.dim(1);
  if (!p.a_bar.defined() || !p.b_bar.defined())
    fail(std::string(name) + ": params are not discretized");
  if (p.a_bar.rank() != 3 || p.a_bar.dim(0) != n || p.a_bar.dim(1) != dim)
    fail(std::string(name) + ": a_bar shape " + shape_str(p.a_bar.shape()) +
         " does not match x " + shape_str(x.shape()));
  if (p.b_bar.shape() != p.a_bar.shape())
    fail(std::string(name) + ": b_bar shape mismatch");
  const int64_t ds = p.a_bar.dim(2);
  if (c.rank() != 2 || c.dim(0) != n || c.dim(1) != ds)
    fail(std::string(name) + ": C must be [N,dim_s]");
  if (d.rank() != 1 || d.dim(0) != dim) fail(std::string(name) + ": D must be [dim]");
}

// Inclusive Blelloch scan over one lane of (a,b) pairs.
void blelloch_inclusive(std::vector<ScanPair>& lane) {
  const size_t n = lane.size();
  size_t m = 1;
  while (m < n) m <<= 1;
  std::vector<ScanPair> work(m);  // identity-padded
  std::copy(lane.begin(), lane.end(), work.begin());
  const std::vector<ScanPair> orig(lane);

  for (size_t len = 2; len <= m; len <<= 1)  // up-sweep
    for (size_t i = len - 1; i < m; i += len)
      work[i] = compose(work[i - len / 2], work[i]);
  work[m - 1] = ScanPair{};  // down-sweep -> exclusive scan
  for (size_t len = m; len >= 2; len >>= 1)
    for (size_t i = len - 1; i < m; i += len) {
      const ScanPair left = work[i - len / 2];
      work[i - len / 2] = work[i];
      // the affine monoid is noncommutative: prefix first, then the left segment
      work[i] = compose(work[i], left);
    }
  for (size_t i = 0; i < n; ++i) lane[i] = compose(work[i], orig[i]);
}

Tensor scan_impl(const Tensor& x, const SsmParams& p, const Tensor& c, const Tensor& d,
                 bool parallel, const char* name) {
  check_scan_shapes(x, p, c, d, name);
  const int64_t n = x.dim(0), dim = x.dim(1), ds = p.a_bar.dim(2);

  const auto& xd = x.data();
  const auto& ad = p.a_bar.data();
  const auto& bd = p.b_bar.data();
  const auto& cd = c.data();
  const auto& dd = d.data();

  auto h = std::make_shared<std::vector<double>>(static_cast<size_t>(n * dim * ds), 0.0);
  auto& hv = *h;

  if (parallel) {
    std::vector<ScanPair> lane(static_cast<size_t>(n));
    for (int64_t dch = 0; dch < dim; ++dch)
      for (int64_t s = 0; s < ds; ++s) {
        for (int64_t i = 0; i < n; ++i) {
          const size_t o = static_cast<size_t>((i * dim + dch) * ds + s);
          lane[static_cast<size_t>(i)] = {ad[o], bd[o] * xd[static_cast<size_t>(i * dim + dch)]};
        }
        blelloch_inclusive(lane);
        for (int64_t i = 0; i < n; ++i)
          hv[static_cast<size_t>((i * dim + dch) * ds + s)] = lane[static_cast<size_t>(i)].b;
      }
  } else {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t dch = 0; dch < dim; ++dch) {
        const double xv = xd[static_cast<size_t>(i * dim + dch)];
        for (int64_t s = 0; s < ds; ++s) {
          const size_t o = static_cast<size_t>((i * dim + dch) * ds + s);
          const double prev = i > 0 ? hv[static_cast<size_t>(((i - 1) * dim + dch) * ds + s)] : 0.0;
          hv[o] = ad[o] * prev + bd[o] * xv;
        }
      }
  }

  Tensor y = Tensor::zeros({n, dim}, x.precision());
  auto& yd = y.mutable_data();
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t dch = 0; dch < dim; ++dch) {
      double acc = dd[static_cast<size_t>(dch)] * xd[static_cast<size_t>(i * dim + dch)];
      for (int64_t s = 0; s < ds; ++s)
        acc += cd[static_cast<size_t>(i * ds + s)] * hv[static_cast<size_t>((i * dim + dch) * ds + s)];
      if (std::isnan(acc))
        fail(std::string(name) + ": NaN detected at step " + std::to_string(i));
      yd[static_cast<size_t>(i * dim + dch)] = acc;
    }
  }

  auto xi = x.impl(), ai = p.a_bar.impl(), bi = p.b_bar.impl(), ci = c.impl(),
       di = d.impl(), oi = y.impl();
  detail::finish_op(y, {x, p.a_bar, p.b_bar, c, d}, [xi, ai, bi, ci, di, oi, h, n, dim, ds]() {
    const auto* g = detail::out_grad(oi);
    if (!g) return;
    auto* gx = detail::wants_grad(xi) ? &detail::grad_buf(xi) : nullptr;
    auto* ga = detail::wants_grad(ai) ? &detail::grad_buf(ai) : nullptr;
    auto* gb = detail::wants_grad(bi) ? &detail::grad_buf(bi) : nullptr;
    auto* gc = detail::wants_grad(ci) ? &detail::grad_buf(ci) : nullptr;
    auto* gd = detail::wants_grad(di) ? &detail::grad_buf(di) : nullptr;
    const auto& hv = *h;

    // adjoint recurrence: gh[n] = C[n] gy[n] + a_bar[n+1] gh[n+1]
    std::vector<double> gh(static_cast<size_t>(dim * ds), 0.0);
    for (int64_t i = n - 1; i >= 0; --i) {
      for (int64_t dch = 0; dch < dim; ++dch) {
        const double gy = (*g)[static_cast<size_t>(i * dim + dch)];
        const double xv = xi->data[static_cast<size_t>(i * dim + dch)];
        if (gd) (*gd)[static_cast<size_t>(dch)] += gy * xv;
        double gx_acc = di->data[static_cast<size_t>(dch)] * gy;
        for (int64_t s = 0; s < ds; ++s) {
          const size_t o = static_cast<size_t>((i * dim + dch) * ds + s);
          const size_t l = static_cast<size_t>(dch * ds + s);
          double ghv = ci->data[static_cast<size_t>(i * ds + s)] * gy;
          if (i < n - 1)
            ghv += ai->data[static_cast<size_t>(((i + 1) * dim + dch) * ds + s)] * gh[l];
          gh[l] = ghv;
          if (gc) (*gc)[static_cast<size_t>(i * ds + s)] += gy * hv[o];
          if (ga && i > 0)
            (*ga)[o] += ghv * hv[static_cast<size_t>(((i - 1) * dim + dch) * ds + s)];
          if (gb) (*gb)[o] += ghv * xv;
          gx_acc += ghv * bi->data[o];
        }
        if (gx) (*gx)[static_cast<size_t>(i * dim + dch)] += gx_acc;
      }
    }
  });
  return y;
}

}  // namespace

Tensor scan_sequential(const Tensor& x, const SsmParams& p, const Tensor& c,
                       const Tensor& d) {
  return scan_impl(x, p, c, d, false, "scan_sequential");
}

Tensor scan_parallel(const Tensor& x, const SsmParams& p, const Tensor& c,
                     const Tensor& d) {
  return scan_impl(x, p, c, d, true, "scan_parallel");
}

Tensor ssm_apply(const Tensor& x, const SsmWeights& w, Discretization mode, bool parallel) {
  SsmParams p = gen_params(x, w);
  Tensor a = ssm_a(w);
  auto [a_bar, b_bar] = discretize(a, p.b, p.delta, mode);
  p.a_bar = std::move(a_bar);
  p.b_bar = std::move(b_bar);
  return parallel ? scan_parallel(x, p, p.c, w.d) : scan_sequential(x, p, p.c, w.d);
}

}  // namespace radmamba
