#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <unsupported/Eigen/SpecialFunctions>

#include "tsonet/core/autodiff.hpp"
#include "tsonet/core/kernels.hpp"

// Autodiff ops. Tensors flow by value through nodes; elementwise ops only
// require matching element counts, structural ops interpret dim 0 as rows
// and the remainder as columns.
namespace tsonet::ag {

namespace detail {
template <class T>
std::pair<int64_t, int64_t> rows_cols(const tensor<T>& t) {
    check_contract(t.rank() >= 1, "op requires rank >= 1");
    const int64_t r = t.dim(0);
    return {r, t.numel() / r};
}

template <class T>
using earr = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <class T>
using cearr = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

template <class T>
earr<T> arr(tensor<T>& t) { return earr<T>(t.data(), t.numel()); }
template <class T>
cearr<T> arr(const tensor<T>& t) { return cearr<T>(t.data(), t.numel()); }
} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

template <class T>
var<T> add(const var<T>& a, const var<T>& b) {
    check_contract(a->value.numel() == b->value.numel(), "add: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
    return apply<T>(std::move(out), {a, b}, [](node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) n.parents[1]->accumulate(n.grad);
    });
}

template <class T>
var<T> sub(const var<T>& a, const var<T>& b) {
    check_contract(a->value.numel() == b->value.numel(), "sub: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
    return apply<T>(std::move(out), {a, b}, [](node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
        if (n.parents[1]->requires_grad) {
            auto& p = *n.parents[1];
            p.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] -= n.grad[i];
        }
    });
}

template <class T>
var<T> mul(const var<T>& a, const var<T>& b) {
    check_contract(a->value.numel() == b->value.numel(), "mul: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
    return apply<T>(std::move(out), {a, b}, [](node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i] * pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) pb.grad[i] += n.grad[i] * pa.value[i];
        }
    });
}

template <class T>
var<T> div(const var<T>& a, const var<T>& b) {
    check_contract(a->value.numel() == b->value.numel(), "div: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] / b->value[i];
    return apply<T>(std::move(out), {a, b}, [](node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) pa.grad[i] += n.grad[i] / pb.value[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i)
                pb.grad[i] -= n.grad[i] * n.value[i] / pb.value[i];
        }
    });
}

template <class T>
var<T> add_scalar(const var<T>& a, T s) {
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + s;
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    });
}

template <class T>
var<T> mul_scalar(const var<T>& a, T s) {
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
    return apply<T>(std::move(out), {a}, [s](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i] * s;
    });
}

template <class T>
var<T> neg(const var<T>& a) { return mul_scalar(a, T(-1)); }

// y = a * c with c a plain tensor (no gradient path into c).
template <class T>
var<T> mul_const(const var<T>& a, tensor<T> c) {
    check_contract(a->value.numel() == c.numel(), "mul_const: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * c[i];
    auto cc = std::make_shared<tensor<T>>(std::move(c));
    return apply<T>(std::move(out), {a}, [cc](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i] * (*cc)[i];
    });
}

// y = a - c
template <class T>
var<T> sub_const(const var<T>& a, const tensor<T>& c) {
    check_contract(a->value.numel() == c.numel(), "sub_const: size mismatch");
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - c[i];
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        if (n.parents[0]->requires_grad) n.parents[0]->accumulate(n.grad);
    });
}

// y = s - a
template <class T>
var<T> rsub_scalar(const var<T>& a, T s) {
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = s - a->value[i];
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] -= n.grad[i];
    });
}

// ---------------------------------------------------------------------------
// Unary nonlinearities
// ---------------------------------------------------------------------------

template <class T>
var<T> abs_op(const var<T>& a) {
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::abs(a->value[i]);
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < n.grad.numel(); ++i) {
            const T x = p.value[i];
            p.grad[i] += n.grad[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
        }
    });
}

template <class T>
var<T> square(const var<T>& a) {
    tensor<T> out(a->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * a->value[i];
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i] * T(2) * p.value[i];
    });
}

template <class T>
var<T> log_op(const var<T>& a) {
    tensor<T> out(a->value.shape());
    detail::arr(out) = detail::arr(a->value).log();
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        detail::arr(p.grad) += detail::arr(n.grad) / detail::arr(p.value);
    });
}

template <class T>
T sigmoid_scalar(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
var<T> sigmoid(const var<T>& a) {
    tensor<T> out(a->value.shape());
    detail::arr(out) = T(1) / (T(1) + (-detail::arr(a->value)).exp());
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        auto y = detail::arr(n.value);
        detail::arr(p.grad) += detail::arr(n.grad) * y * (T(1) - y);
    });
}

template <class T>
var<T> gelu(const var<T>& a) {
    // Exact erf form (vectorized).
    const T inv_sqrt2 = static_cast<T>(0.70710678118654752440);
    tensor<T> out(a->value.shape());
    auto x = detail::arr(a->value);
    detail::arr(out) = T(0.5) * x * (T(1) + (x * inv_sqrt2).erf());
    return apply<T>(std::move(out), {a}, [inv_sqrt2](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const T inv_sqrt2pi = static_cast<T>(0.39894228040143267794);
        auto x = detail::arr(p.value);
        detail::arr(p.grad) +=
            detail::arr(n.grad) * (T(0.5) * (T(1) + (x * inv_sqrt2).erf()) +
                                   x * inv_sqrt2pi * (T(-0.5) * x * x).exp());
    });
}

template <class T>
var<T> softplus(const var<T>& a) {
    tensor<T> out(a->value.shape());
    auto x = detail::arr(a->value);
    detail::arr(out) = x.max(T(0)) + (T(1) + (-x.abs()).exp()).log();
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        auto x = detail::arr(p.value);
        detail::arr(p.grad) += detail::arr(n.grad) / (T(1) + (-x).exp());
    });
}

// ---------------------------------------------------------------------------
// Reductions and structure
// ---------------------------------------------------------------------------

template <class T>
var<T> sum_all(const var<T>& a) {
    double acc = 0.0;
    for (int64_t i = 0; i < a->value.numel(); ++i) acc += static_cast<double>(a->value[i]);
    tensor<T> out({1});
    out[0] = static_cast<T>(acc);
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const T g = n.grad[0];
        for (int64_t i = 0; i < p.grad.numel(); ++i) p.grad[i] += g;
    });
}

template <class T>
var<T> reshape(const var<T>& a, std::vector<int64_t> shape) {
    tensor<T> out = a->value;
    out.reshape(std::move(shape));
    return apply<T>(std::move(out), {a}, [](node<T>& n) {
        if (n.parents[0]->requires_grad) {
            auto& p = *n.parents[0];
            p.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) p.grad[i] += n.grad[i];
        }
    });
}

// Concatenate along dim 0 (contiguous blocks in row-major layout).
template <class T>
var<T> concat0(const var<T>& a, const var<T>& b) {
    check_contract(a->value.rank() == b->value.rank(), "concat0: rank mismatch");
    std::vector<int64_t> shape = a->value.shape();
    shape[0] += b->value.dim(0);
    tensor<T> out(shape);
    std::copy(a->value.data(), a->value.data() + a->value.numel(), out.data());
    std::copy(b->value.data(), b->value.data() + b->value.numel(), out.data() + a->value.numel());
    return apply<T>(std::move(out), {a, b}, [](node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        const int64_t na = pa.value.numel();
        if (pa.requires_grad) {
            pa.ensure_grad();
            for (int64_t i = 0; i < na; ++i) pa.grad[i] += n.grad[i];
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            for (int64_t i = 0; i < pb.value.numel(); ++i) pb.grad[i] += n.grad[na + i];
        }
    });
}

// Rows [from, to) along dim 0.
template <class T>
var<T> slice0(const var<T>& a, int64_t from, int64_t to) {
    const int64_t stride = a->value.numel() / a->value.dim(0);
    std::vector<int64_t> shape = a->value.shape();
    shape[0] = to - from;
    tensor<T> out(shape);
    std::copy(a->value.data() + from * stride, a->value.data() + to * stride, out.data());
    return apply<T>(std::move(out), {a, nullptr}, [from, stride](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        T* dst = p.grad.data() + from * stride;
        for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += n.grad[i];
    });
}

// y[r, c] = x[r, c] + v[c]
template <class T>
var<T> add_rowvec(const var<T>& x, const var<T>& v) {
    auto [r, c] = detail::rows_cols(x->value);
    check_contract(v->value.numel() == c, "add_rowvec: vector size mismatch");
    tensor<T> out(x->value.shape());
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out[i * c + j] = x->value[i * c + j] + v->value[j];
    return apply<T>(std::move(out), {x, v}, [r = r, c = c](node<T>& n) {
        auto& px = *n.parents[0];
        auto& pv = *n.parents[1];
        if (px.requires_grad) px.accumulate(n.grad);
        if (pv.requires_grad) {
            pv.ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) pv.grad[j] += n.grad[i * c + j];
        }
    });
}

// y = x * s, s a scalar node (learnable temperature).
template <class T>
var<T> mul_scalar_node(const var<T>& x, const var<T>& s) {
    check_contract(s->value.numel() == 1, "mul_scalar_node: s must be scalar");
    const T sv = s->value[0];
    tensor<T> out(x->value.shape());
    for (int64_t i = 0; i < out.numel(); ++i) out[i] = x->value[i] * sv;
    return apply<T>(std::move(out), {x, s}, [](node<T>& n) {
        auto& px = *n.parents[0];
        auto& ps = *n.parents[1];
        const T sv = ps.value[0];
        if (px.requires_grad) {
            px.ensure_grad();
            for (int64_t i = 0; i < n.grad.numel(); ++i) px.grad[i] += n.grad[i] * sv;
        }
        if (ps.requires_grad) {
            ps.ensure_grad();
            double acc = 0.0;
            for (int64_t i = 0; i < n.grad.numel(); ++i)
                acc += static_cast<double>(n.grad[i]) * static_cast<double>(px.value[i]);
            ps.grad[0] += static_cast<T>(acc);
        }
    });
}

// y[c, i] = x[c, i] * m[i], m spatial map broadcast over channels.
template <class T>
var<T> mul_bcast_channel(const var<T>& x, const var<T>& m) {
    const int64_t c = x->value.dim(0);
    const int64_t hw = x->value.numel() / c;
    check_contract(m->value.numel() == hw, "mul_bcast_channel: map size mismatch");
    tensor<T> out(x->value.shape());
    for (int64_t ci = 0; ci < c; ++ci)
        for (int64_t i = 0; i < hw; ++i)
            out[ci * hw + i] = x->value[ci * hw + i] * m->value[i];
    return apply<T>(std::move(out), {x, m}, [c, hw](node<T>& n) {
        auto& px = *n.parents[0];
        auto& pm = *n.parents[1];
        if (px.requires_grad) {
            px.ensure_grad();
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t i = 0; i < hw; ++i)
                    px.grad[ci * hw + i] += n.grad[ci * hw + i] * pm.value[i];
        }
        if (pm.requires_grad) {
            pm.ensure_grad();
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t i = 0; i < hw; ++i)
                    pm.grad[i] += n.grad[ci * hw + i] * px.value[ci * hw + i];
        }
    });
}

// ---------------------------------------------------------------------------
// Matrix ops (dim 0 = rows, remaining dims flattened to columns)
// ---------------------------------------------------------------------------

template <class T>
var<T> matmul(const var<T>& a, const var<T>& b, bool ta = false, bool tb = false) {
    auto [ar, ac] = detail::rows_cols(a->value);
    auto [br, bc] = detail::rows_cols(b->value);
    const int64_t m = ta ? ac : ar;
    const int64_t k = ta ? ar : ac;
    const int64_t n = tb ? br : bc;
    check_contract((tb ? bc : br) == k, "matmul: inner dimension mismatch");
    tensor<T> out({m, n});
    kern::gemm<T>(false, a->value.data(), ar, ac, ta, b->value.data(), br, bc, tb, out.data());
    return apply<T>(std::move(out), {a, b},
                    [ar = ar, ac = ac, br = br, bc = bc, ta, tb, m, n](node<T>& n_) {
        auto& pa = *n_.parents[0];
        auto& pb = *n_.parents[1];
        const T* g = n_.grad.data();
        if (pa.requires_grad) {
            pa.ensure_grad();
            if (!ta)
                kern::gemm<T>(true, g, m, n, false, pb.value.data(), br, bc, !tb, pa.grad.data());
            else
                kern::gemm<T>(true, pb.value.data(), br, bc, tb, g, m, n, true, pa.grad.data());
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            if (!tb)
                kern::gemm<T>(true, pa.value.data(), ar, ac, !ta, g, m, n, false, pb.grad.data());
            else
                kern::gemm<T>(true, g, m, n, true, pa.value.data(), ar, ac, ta, pb.grad.data());
        }
    });
}

// Softmax over axis of the [rows, cols] interpretation.
// axis 1: each row sums to 1; axis 0: each column sums to 1.
template <class T>
var<T> softmax(const var<T>& x, int axis) {
    auto [r, c] = detail::rows_cols(x->value);
    tensor<T> out(x->value.shape());
    const T* xv = x->value.data();
    T* yv = out.data();
    using row_map = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
    using crow_map = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
    if (axis == 1) {
        for (int64_t i = 0; i < r; ++i) {
            crow_map row(xv + i * c, c);
            row_map orow(yv + i * c, c);
            const T mx = row.maxCoeff(); // max never reassociates rounding
            orow = (row - mx).exp();
            // fixed-order accumulation keeps results independent of buffer alignment
            double s = 0.0;
            for (int64_t j = 0; j < c; ++j) s += static_cast<double>(yv[i * c + j]);
            orow *= static_cast<T>(1.0 / s);
        }
    } else {
        // Column softmax in row-major passes with column-sized buffers.
        std::vector<T> mx(static_cast<size_t>(c));
        std::vector<T> sum(static_cast<size_t>(c), T(0));
        row_map mmx(mx.data(), c), msum(sum.data(), c);
        mmx = crow_map(xv, c);
        for (int64_t i = 1; i < r; ++i) mmx = mmx.max(crow_map(xv + i * c, c));
        for (int64_t i = 0; i < r; ++i) {
            row_map orow(yv + i * c, c);
            orow = (crow_map(xv + i * c, c) - mmx).exp();
            msum += orow;
        }
        msum = msum.inverse();
        for (int64_t i = 0; i < r; ++i) row_map(yv + i * c, c) *= msum;
    }
    return apply<T>(std::move(out), {x}, [r = r, c = c, axis](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const T* y = n.value.data();
        const T* g = n.grad.data();
        using row_map = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
        using crow_map = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;
        if (axis == 1) {
            for (int64_t i = 0; i < r; ++i) {
                crow_map yr(y + i * c, c), gr(g + i * c, c);
                double dot = 0.0;
                for (int64_t j = 0; j < c; ++j)
                    dot += static_cast<double>(y[i * c + j]) * static_cast<double>(g[i * c + j]);
                row_map(p.grad.data() + i * c, c) += yr * (gr - static_cast<T>(dot));
            }
        } else {
            std::vector<T> dot(static_cast<size_t>(c), T(0));
            row_map mdot(dot.data(), c);
            for (int64_t i = 0; i < r; ++i)
                mdot += crow_map(y + i * c, c) * crow_map(g + i * c, c);
            for (int64_t i = 0; i < r; ++i) {
                crow_map yr(y + i * c, c), gr(g + i * c, c);
                row_map(p.grad.data() + i * c, c) += yr * (gr - mdot);
            }
        }
    });
}

// Parameter-free layer normalization over each row: y = (x - mean) / std.
template <class T>
var<T> layer_norm_rows(const var<T>& x, T eps) {
    auto [r, c] = detail::rows_cols(x->value);
    tensor<T> out(x->value.shape());
    std::vector<T> rstd(static_cast<size_t>(r));
    std::vector<T> mean(static_cast<size_t>(r));
    for (int64_t i = 0; i < r; ++i) {
        const T* row = x->value.data() + i * c;
        double mu = 0;
        for (int64_t j = 0; j < c; ++j) mu += static_cast<double>(row[j]);
        mu /= static_cast<double>(c);
        double var = 0;
        for (int64_t j = 0; j < c; ++j) {
            const double d = static_cast<double>(row[j]) - mu;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const T rs = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        mean[static_cast<size_t>(i)] = static_cast<T>(mu);
        rstd[static_cast<size_t>(i)] = rs;
        T* orow = out.data() + i * c;
        for (int64_t j = 0; j < c; ++j) orow[j] = (row[j] - static_cast<T>(mu)) * rs;
    }
    return apply<T>(std::move(out), {x},
                    [r = r, c = c, mean = std::move(mean), rstd = std::move(rstd)](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            const T* g = n.grad.data() + i * c;
            const T* y = n.value.data() + i * c; // y is x-hat
            T* gx = p.grad.data() + i * c;
            double gsum = 0, gysum = 0;
            for (int64_t j = 0; j < c; ++j) {
                gsum += static_cast<double>(g[j]);
                gysum += static_cast<double>(g[j]) * static_cast<double>(y[j]);
            }
            const T gm = static_cast<T>(gsum / static_cast<double>(c));
            const T gym = static_cast<T>(gysum / static_cast<double>(c));
            const T rs = rstd[static_cast<size_t>(i)];
            for (int64_t j = 0; j < c; ++j) gx[j] += rs * (g[j] - gm - y[j] * gym);
        }
    });
}

// L2 normalization along an axis with additive epsilon in the denominator:
// y = x / (||x|| + eps). eps guards the all-zero row (zero-initialized queries).
template <class T>
var<T> l2_normalize(const var<T>& x, int axis, T eps) {
    auto [r, c] = detail::rows_cols(x->value);
    tensor<T> out(x->value.shape());
    const int64_t outer = (axis == 1) ? r : c;
    const int64_t len = (axis == 1) ? c : r;
    const int64_t ostride = (axis == 1) ? c : 1;
    const int64_t istride = (axis == 1) ? 1 : c;
    std::vector<T> norms(static_cast<size_t>(outer));
    for (int64_t o = 0; o < outer; ++o) {
        const T* src = x->value.data() + o * ostride;
        double s = 0.0;
        for (int64_t i = 0; i < len; ++i) {
            const double v = static_cast<double>(src[i * istride]);
            s += v * v;
        }
        const T nrm = static_cast<T>(std::sqrt(s));
        norms[o] = nrm;
        const T inv = T(1) / (nrm + eps);
        T* dst = out.data() + o * ostride;
        for (int64_t i = 0; i < len; ++i) dst[i * istride] = src[i * istride] * inv;
    }
    return apply<T>(std::move(out), {x},
                    [outer, len, ostride, istride, eps, norms = std::move(norms)](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (int64_t o = 0; o < outer; ++o) {
            const T* xv = p.value.data() + o * ostride;
            const T* g = n.grad.data() + o * ostride;
            T* gx = p.grad.data() + o * ostride;
            const T nrm = norms[o];
            const T d = nrm + eps;
            double gdotx = 0.0;
            for (int64_t i = 0; i < len; ++i)
                gdotx += static_cast<double>(g[i * istride]) * static_cast<double>(xv[i * istride]);
            const T coef = (nrm > T(0)) ? static_cast<T>(gdotx) / (nrm * d * d) : T(0);
            for (int64_t i = 0; i < len; ++i)
                gx[i * istride] += g[i * istride] / d - xv[i * istride] * coef;
        }
    });
}

// ---------------------------------------------------------------------------
// NN ops
// ---------------------------------------------------------------------------

// x: [C,H,W], w: [outC, inC/groups, k, k], b: [outC]. Stride 1, pad keeps size.
template <class T>
var<T> conv2d(const var<T>& x, const var<T>& w, const var<T>& b,
              int64_t k, int64_t pad, int64_t groups) {
    check_contract(x->value.rank() == 3, "conv2d: input must be [C,H,W]");
    check_contract(x->value.dim(0) == w->value.dim(1) * groups,
                   "conv2d: input channels do not match weights");
    tensor<T> out({w->value.dim(0), x->value.dim(1), x->value.dim(2)});
    kern::conv2d_fwd(x->value, w->value, b->value, k, pad, groups, out);
    return apply<T>(std::move(out), {x, w, b}, [k, pad, groups](node<T>& n) {
        auto& px = *n.parents[0];
        auto& pw = *n.parents[1];
        auto& pb = *n.parents[2];
        tensor<T>* gx = nullptr;
        tensor<T>* gw = nullptr;
        tensor<T>* gb = nullptr;
        if (px.requires_grad) { px.ensure_grad(); gx = &px.grad; }
        if (pw.requires_grad) { pw.ensure_grad(); gw = &pw.grad; }
        if (pb.requires_grad) { pb.ensure_grad(); gb = &pb.grad; }
        kern::conv2d_bwd(px.value, pw.value, n.grad, k, pad, groups, gx, gw, gb);
    });
}

template <class T>
var<T> maxpool2(const var<T>& x) {
    const int64_t c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    tensor<T> out({c, h / 2, w / 2});
    auto argmax = std::make_shared<std::vector<int32_t>>();
    kern::maxpool2_fwd(x->value, out, *argmax);
    return apply<T>(std::move(out), {x}, [argmax, h, w](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kern::maxpool2_bwd(n.grad, *argmax, h, w, p.grad);
    });
}

template <class T>
var<T> upsample_bilinear(const var<T>& x, int64_t ho, int64_t wo) {
    const int64_t c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    tensor<T> out({c, ho, wo});
    kern::upsample_bilinear_fwd(x->value.data(), c, h, w, ho, wo, out.data());
    return apply<T>(std::move(out), {x}, [c, h, w, ho, wo](node<T>& n) {
        auto& p = *n.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kern::upsample_bilinear_bwd(n.grad.data(), c, h, w, ho, wo, p.grad.data());
    });
}

template <class T>
var<T> group_norm(const var<T>& x, const var<T>& gamma, const var<T>& beta,
                  int64_t groups, T eps, bool spatial_stats = true) {
    check_contract(x->value.dim(0) % groups == 0, "group_norm: channels % groups != 0");
    tensor<T> out(x->value.shape());
    auto stats = std::make_shared<std::pair<std::vector<T>, std::vector<T>>>();
    if (spatial_stats)
        kern::group_norm_fwd(x->value, gamma->value, beta->value, groups, eps, out,
                             stats->first, stats->second);
    else
        kern::group_norm_pixelwise_fwd(x->value, gamma->value, beta->value, groups, eps, out,
                                       stats->first, stats->second);
    return apply<T>(std::move(out), {x, gamma, beta},
                    [groups, stats, spatial_stats](node<T>& n) {
        auto& px = *n.parents[0];
        auto& pg = *n.parents[1];
        auto& pb = *n.parents[2];
        tensor<T>* gx = nullptr;
        tensor<T>* gg = nullptr;
        tensor<T>* gb = nullptr;
        if (px.requires_grad) { px.ensure_grad(); gx = &px.grad; }
        if (pg.requires_grad) { pg.ensure_grad(); gg = &pg.grad; }
        if (pb.requires_grad) { pb.ensure_grad(); gb = &pb.grad; }
        if (spatial_stats)
            kern::group_norm_bwd(px.value, pg.value, stats->first, stats->second,
                                 groups, n.grad, gx, gg, gb);
        else
            kern::group_norm_pixelwise_bwd(px.value, pg.value, stats->first, stats->second,
                                           groups, n.grad, gx, gg, gb);
    });
}

} // namespace tsonet::ag
