#pragma once
// Selective state-space core: input-dependent (delta, B, C) generation, ZOH
// discretization and the linear recurrence scan, in a sequential reference
// form and a Blelloch-style parallel form. All ops are differentiable.

#include <cstdint>
#include <utility>

#include "radmamba/tensor.hpp"

namespace radmamba {

enum class Discretization { Zoh, Euler };

// A is stored as log(-A) so it stays strictly negative; with delta > 0 that
// keeps every discretized transition inside (0,1).
struct SsmWeights {
  Tensor a_log;    // [dim, dim_s]
  Tensor d;        // [dim]
  Tensor w_b;      // [dim, dim_s]
  Tensor w_c;      // [dim, dim_s]
  Tensor w_dt1;    // [dim, dt_rank], undefined when dt_rank == 0
  Tensor w_dt2;    // [dt_rank, dim], undefined when dt_rank == 0
  Tensor dt_bias;  // [dim]
};

struct SsmParams {
  Tensor delta;  // [N, dim], > 0
  Tensor b;      // [N, dim_s]
  Tensor c;      // [N, dim_s]
  Tensor a_bar;  // [N, dim, dim_s], in (0,1) for A < 0
  Tensor b_bar;  // [N, dim, dim_s]
};

// A = -exp(a_log), elementwise.
Tensor ssm_a(const SsmWeights& w);

// B = x W_B, C = x W_C, delta = softplus(x W_dt1 W_dt2 + dt_bias); with
// dt_rank == 0 the input-dependent path vanishes and delta is
// softplus(dt_bias) broadcast over the sequence.
SsmParams gen_params(const Tensor& x, const SsmWeights& w);

// a_bar[n,d,s] = exp(delta[n,d] A[d,s]); ZOH b_bar[n,d,s] =
// (exp(delta A) - 1)/A * B[n,s], Euler b_bar = delta * B. Errors on a
// non-negative entry of A.
std::pair<Tensor, Tensor> discretize(const Tensor& a, const Tensor& b,
                                     const Tensor& delta,
                                     Discretization mode = Discretization::Zoh);

// h[n,d,s] = a_bar[n,d,s] h[n-1,d,s] + b_bar[n,d,s] x[n,d], h[-1] = 0;
// y[n,d] = sum_s c[n,s] h[n,d,s] + d[d] x[n,d].
Tensor scan_sequential(const Tensor& x, const SsmParams& p, const Tensor& c,
                       const Tensor& d);

// Same recurrence through a Blelloch associative scan over (a,b) pairs.
Tensor scan_parallel(const Tensor& x, const SsmParams& p, const Tensor& c,
                     const Tensor& d);

// The scan monoid: h -> a*h + b, composed left to right.
struct ScanPair {
  double a = 1.0;
  double b = 0.0;
};
inline ScanPair compose(const ScanPair& first, const ScanPair& then) {
  return {then.a * first.a, then.a * first.b + then.b};
}

// Full selective-SSM layer on [N,dim]: gen_params -> discretize -> scan.
Tensor ssm_apply(const Tensor& x, const SsmWeights& w, Discretization mode,
                 bool parallel = false);

}  // namespace radmamba
