// ops.hpp
// Autograd ops over Tensor. Every op validates shapes, checks its output for
// NaN/Inf, and registers an exact backward closure.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "mmtk/tensor.hpp"

namespace mmtk {

// Row-major boolean keep-mask (1 = attend, 0 = blocked), shape rows x cols.
using BoolMask = std::vector<std::uint8_t>;

inline BoolMask causal_mask(int n) {
    BoolMask m(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) m[static_cast<std::size_t>(i) * n + j] = 1;
    return m;
}

namespace detail {

// C += A(n x k) * B(k x m); unit-stride inner loops, no transposed copies.
inline void mm_nn(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const double a = a_row[p];
            if (a == 0.0) continue;
            const double* b_row = B + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) c_row[j] += a * b_row[j];
        }
    }
}

// C += A(n x k) * B(m x k)^T; eight B rows per pass share the A loads, and
// every dot product accumulates in plain index order.
inline void mm_nt(const double* A, const double* B, double* C, int n, int k, int m) {
    const int m8 = m & ~7;
    for (int i = 0; i < n; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * k;
        double* c_row = C + static_cast<std::size_t>(i) * m;
        int j = 0;
        for (; j < m8; j += 8) {
            const double* b0 = B + static_cast<std::size_t>(j) * k;
            const double* b1 = b0 + k;
            const double* b2 = b1 + k;
            const double* b3 = b2 + k;
            const double* b4 = b3 + k;
            const double* b5 = b4 + k;
            const double* b6 = b5 + k;
            const double* b7 = b6 + k;
            double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
            double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0;
            for (int p = 0; p < k; ++p) {
                const double a = a_row[p];
                s0 += a * b0[p];
                s1 += a * b1[p];
                s2 += a * b2[p];
                s3 += a * b3[p];
                s4 += a * b4[p];
                s5 += a * b5[p];
                s6 += a * b6[p];
                s7 += a * b7[p];
            }
            c_row[j] += s0;
            c_row[j + 1] += s1;
            c_row[j + 2] += s2;
            c_row[j + 3] += s3;
            c_row[j + 4] += s4;
            c_row[j + 5] += s5;
            c_row[j + 6] += s6;
            c_row[j + 7] += s7;
        }
        for (; j < m; ++j) {
            const double* b_row = B + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += a_row[p] * b_row[p];
            c_row[j] += s;
        }
    }
}

// C += A(k x n)^T * B(k x m)
inline void mm_tn(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < k; ++i) {
        const double* a_row = A + static_cast<std::size_t>(i) * n;
        const double* b_row = B + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < n; ++p) {
            const double a = a_row[p];
            if (a == 0.0) continue;
            double* c_row = C + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) c_row[j] += a * b_row[j];
        }
    }
}

inline void require_matrix(const Tensor& t, const char* op) {
    require(t.ndim() == 2, std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape()));
}

// One stabilized softmax row restricted to kept positions; blocked positions
// get probability exactly 0 so they cannot perturb anything downstream.
inline void softmax_row(const double* in, const std::uint8_t* keep, double* out, int m) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j)
        if (!keep || keep[j]) mx = std::max(mx, in[j]);
    double denom = 0.0;
    for (int j = 0; j < m; ++j) {
        if (!keep || keep[j]) {
            out[j] = std::exp(in[j] - mx);
            denom += out[j];
        } else {
            out[j] = 0.0;
        }
    }
    for (int j = 0; j < m; ++j)
        if (!keep || keep[j]) out[j] /= denom;
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul");
    detail::require_matrix(b, "matmul");
    require(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()));
    const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
    Tensor out = make_op_output({n, m}, {&a, &b}, [n, k, m](TensorImpl& o) {
        TensorImpl& pa = *o.node->parents[0];
        TensorImpl& pb = *o.node->parents[1];
        if (pa.requires_grad) detail::mm_nt(o.grad.data(), pb.data.data(), pa.grad.data(), n, m, k);
        if (pb.requires_grad) detail::mm_tn(pa.data.data(), o.grad.data(), pb.grad.data(), k, n, m);
    });
    detail::mm_nn(a.ptr(), b.ptr(), out.ptr(), n, k, m);
    check_finite(out, "matmul");
    return out;
}

// a(n x k) * b(m x k)^T, the score kernel of attention
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    detail::require_matrix(a, "matmul_nt");
    detail::require_matrix(b, "matmul_nt");
    require(a.dim(1) == b.dim(1), "matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                                      " x " + shape_str(b.shape()) + "^T");
    const int n = a.dim(0), k = a.dim(1), m = b.dim(0);
    Tensor out = make_op_output({n, m}, {&a, &b}, [n, k, m](TensorImpl& o) {
        TensorImpl& pa = *o.node->parents[0];
        TensorImpl& pb = *o.node->parents[1];
        if (pa.requires_grad) detail::mm_nn(o.grad.data(), pb.data.data(), pa.grad.data(), n, m, k);
        if (pb.requires_grad) detail::mm_tn(o.grad.data(), pa.data.data(), pb.grad.data(), m, n, k);
    });
    detail::mm_nt(a.ptr(), b.ptr(), out.ptr(), n, k, m);
    check_finite(out, "matmul_nt");
    return out;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(),
            "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = make_op_output(a.shape(), {&a, &b}, [](TensorImpl& o) {
        for (TensorImpl* p : {o.node->parents[0].get(), o.node->parents[1].get()}) {
            if (!p->requires_grad) continue;
            for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
        }
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] + b.ptr()[i];
    check_finite(out, "add");
    return out;
}

// x(n x m) + row vector b(m), broadcast over rows
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
    detail::require_matrix(x, "add_rowvec");
    require(b.ndim() == 1 && b.dim(0) == x.dim(1),
            "add_rowvec: bias length " + shape_str(b.shape()) + " does not match " + shape_str(x.shape()));
    const int n = x.dim(0), m = x.dim(1);
    Tensor out = make_op_output({n, m}, {&x, &b}, [n, m](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        TensorImpl& pb = *o.node->parents[1];
        if (px.requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) px.grad[i] += o.grad[i];
        if (pb.requires_grad)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < m; ++j) pb.grad[j] += o.grad[static_cast<std::size_t>(i) * m + j];
    });
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            out.ptr()[static_cast<std::size_t>(i) * m + j] = x.ptr()[static_cast<std::size_t>(i) * m + j] + b.ptr()[j];
    check_finite(out, "add_rowvec");
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(),
            "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = make_op_output(a.shape(), {&a, &b}, [](TensorImpl& o) {
        TensorImpl& pa = *o.node->parents[0];
        TensorImpl& pb = *o.node->parents[1];
        if (pa.requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += o.grad[i] * pb.data[i];
        if (pb.requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) pb.grad[i] += o.grad[i] * pa.data[i];
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
    check_finite(out, "mul");
    return out;
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out = make_op_output(a.shape(), {&a}, [c](TensorImpl& o) {
        TensorImpl& pa = *o.node->parents[0];
        if (!pa.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) pa.grad[i] += o.grad[i] * c;
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = a.ptr()[i] * c;
    check_finite(out, "scale");
    return out;
}

inline Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_rows: nothing to concatenate");
    const int m = parts.front().cols();
    int total = 0;
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) {
        detail::require_matrix(p, "concat_rows");
        require(p.dim(1) == m, "concat_rows: column mismatch");
        total += p.dim(0);
        ptrs.push_back(&p);
    }
    Tensor out = make_op_output({total, m}, ptrs, [m](TensorImpl& o) {
        std::size_t offset = 0;
        for (auto& parent : o.node->parents) {
            const std::size_t n = parent->data.size();
            if (parent->requires_grad)
                for (std::size_t i = 0; i < n; ++i) parent->grad[i] += o.grad[offset + i];
            offset += n;
        }
    });
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.numel();
    }
    return out;
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
    detail::require_matrix(x, "slice_rows");
    require(0 <= r0 && r0 < r1 && r1 <= x.dim(0), "slice_rows: bad range");
    const int m = x.dim(1);
    Tensor out = make_op_output({r1 - r0, m}, {&x}, [r0, m](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        const std::size_t base = static_cast<std::size_t>(r0) * m;
        for (std::size_t i = 0; i < o.grad.size(); ++i) px.grad[base + i] += o.grad[i];
    });
    std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(r0) * m,
              x.data().begin() + static_cast<std::ptrdiff_t>(r1) * m, out.data().begin());
    return out;
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
    detail::require_matrix(x, "slice_cols");
    require(0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_cols: bad range");
    const int n = x.dim(0), m = x.dim(1), w = c1 - c0;
    Tensor out = make_op_output({n, w}, {&x}, [c0, m, w, n](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                px.grad[static_cast<std::size_t>(i) * m + c0 + j] += o.grad[static_cast<std::size_t>(i) * w + j];
    });
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < w; ++j)
            out.ptr()[static_cast<std::size_t>(i) * w + j] = x.ptr()[static_cast<std::size_t>(i) * m + c0 + j];
    return out;
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    require(!parts.empty(), "concat_cols: nothing to concatenate");
    const int n = parts.front().rows();
    int total = 0;
    std::vector<const Tensor*> ptrs;
    std::vector<int> widths;
    for (const Tensor& p : parts) {
        detail::require_matrix(p, "concat_cols");
        require(p.dim(0) == n, "concat_cols: row mismatch");
        total += p.dim(1);
        widths.push_back(p.dim(1));
        ptrs.push_back(&p);
    }
    Tensor out = make_op_output({n, total}, ptrs, [n, total, widths](TensorImpl& o) {
        int c0 = 0;
        for (std::size_t k = 0; k < o.node->parents.size(); ++k) {
            TensorImpl& p = *o.node->parents[k];
            const int w = widths[k];
            if (p.requires_grad)
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < w; ++j)
                        p.grad[static_cast<std::size_t>(i) * w + j] +=
                            o.grad[static_cast<std::size_t>(i) * total + c0 + j];
            c0 += w;
        }
    });
    int c0 = 0;
    for (const Tensor& p : parts) {
        const int w = p.dim(1);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < w; ++j)
                out.ptr()[static_cast<std::size_t>(i) * total + c0 + j] = p.ptr()[static_cast<std::size_t>(i) * w + j];
        c0 += w;
    }
    return out;
}

inline Tensor relu(const Tensor& x) {
    Tensor out = make_op_output(x.shape(), {&x}, [](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            if (px.data[i] > 0.0) px.grad[i] += o.grad[i];
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.ptr()[i] = x.ptr()[i] > 0.0 ? x.ptr()[i] : 0.0;
    return out;
}

inline Tensor gelu(const Tensor& x) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    Tensor out = make_op_output(x.shape(), {&x}, [](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const double v = px.data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
            px.grad[i] += o.grad[i] * (cdf + v * pdf);
        }
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.ptr()[i];
        out.ptr()[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    check_finite(out, "gelu");
    return out;
}

inline Tensor sigmoid(const Tensor& x) {
    Tensor out = make_op_output(x.shape(), {&x}, [](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            const double s = o.data[i];
            px.grad[i] += o.grad[i] * s * (1.0 - s);
        }
    });
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x.ptr()[i];
        // stable in both tails
        out.ptr()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    }
    check_finite(out, "sigmoid");
    return out;
}

// Row-wise softmax of an n x m matrix; mask (if given) is an n x m keep-mask.
// Blocked positions get probability exactly 0. A fully blocked row is an error.
inline Tensor softmax_rows(const Tensor& x, const BoolMask* mask = nullptr) {
    detail::require_matrix(x, "softmax");
    const int n = x.dim(0), m = x.dim(1);
    if (mask) {
        require(mask->size() == static_cast<std::size_t>(n) * m, "softmax: mask shape mismatch");
        for (int i = 0; i < n; ++i) {
            bool any = false;
            for (int j = 0; j < m; ++j) any = any || (*mask)[static_cast<std::size_t>(i) * m + j];
            require(any, "softmax: fully masked row " + std::to_string(i));
        }
    }
    for (double v : x.data()) require(std::isfinite(v), "softmax: non-finite input");
    auto keep = mask ? std::make_shared<BoolMask>(*mask) : nullptr;
    Tensor out = make_op_output({n, m}, {&x}, [n, m, keep](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        // dS = P * (dP - sum(dP * P)) restricted to kept positions
        for (int i = 0; i < n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * m;
            double dot = 0.0;
            for (int j = 0; j < m; ++j) dot += o.grad[base + j] * o.data[base + j];
            for (int j = 0; j < m; ++j) {
                if (keep && !(*keep)[base + j]) continue;
                px.grad[base + j] += o.data[base + j] * (o.grad[base + j] - dot);
            }
        }
    });
    for (int i = 0; i < n; ++i)
        detail::softmax_row(x.ptr() + static_cast<std::size_t>(i) * m,
                            mask ? mask->data() + static_cast<std::size_t>(i) * m : nullptr,
                            out.ptr() + static_cast<std::size_t>(i) * m, m);
    check_finite(out, "softmax");
    return out;
}

// softmax over a plain vector (1-D tensor)
inline Tensor softmax(const Tensor& v) {
    require(v.ndim() == 1 && v.numel() > 0, "softmax: expected a non-empty vector");
    Tensor m = make_op_output({1, v.dim(0)}, {&v}, [](TensorImpl& o) {
        TensorImpl& p = *o.node->parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
    });
    std::copy(v.data().begin(), v.data().end(), m.data().begin());
    Tensor sm = softmax_rows(m);
    Tensor out = make_op_output({v.dim(0)}, {&sm}, [](TensorImpl& o) {
        TensorImpl& p = *o.node->parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
    });
    std::copy(sm.data().begin(), sm.data().end(), out.data().begin());
    return out;
}

// Per-row layer norm. x is a vector or an n x m matrix; gamma/beta are
// length-m vectors.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require(eps > 0.0, "layer_norm: eps must be positive");
    require(x.ndim() == 1 || x.ndim() == 2, "layer_norm: expected vector or matrix");
    const int n = x.rows(), m = x.cols();
    require(gamma.ndim() == 1 && gamma.dim(0) == m && beta.ndim() == 1 && beta.dim(0) == m,
            "layer_norm: gamma/beta length must match feature width " + std::to_string(m));

    auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * m);
    auto inv_std = std::make_shared<std::vector<double>>(n);

    Tensor out = make_op_output(x.shape(), {&x, &gamma, &beta}, [n, m, xhat, inv_std](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        TensorImpl& pg = *o.node->parents[1];
        TensorImpl& pb = *o.node->parents[2];
        for (int i = 0; i < n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * m;
            if (pg.requires_grad)
                for (int j = 0; j < m; ++j) pg.grad[j] += o.grad[base + j] * (*xhat)[base + j];
            if (pb.requires_grad)
                for (int j = 0; j < m; ++j) pb.grad[j] += o.grad[base + j];
            if (px.requires_grad) {
                double mean_dxh = 0.0, mean_dxh_xh = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double dxh = o.grad[base + j] * pg.data[j];
                    mean_dxh += dxh;
                    mean_dxh_xh += dxh * (*xhat)[base + j];
                }
                mean_dxh /= m;
                mean_dxh_xh /= m;
                const double r = (*inv_std)[i];
                for (int j = 0; j < m; ++j) {
                    const double dxh = o.grad[base + j] * pg.data[j];
                    px.grad[base + j] += r * (dxh - mean_dxh - (*xhat)[base + j] * mean_dxh_xh);
                }
            }
        }
    });

    for (int i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * m;
        double mean = 0.0;
        for (int j = 0; j < m; ++j) mean += x.ptr()[base + j];
        mean /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) {
            const double d = x.ptr()[base + j] - mean;
            var += d * d;
        }
        var /= m;
        const double r = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = r;
        for (int j = 0; j < m; ++j) {
            const double xh = (x.ptr()[base + j] - mean) * r;
            (*xhat)[base + j] = xh;
            out.ptr()[base + j] = gamma.ptr()[j] * xh + beta.ptr()[j];
        }
    }
    check_finite(out, "layer_norm");
    return out;
}

// Gather rows of an embedding table; gradient scatter-adds back into it.
inline Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
    detail::require_matrix(table, "embedding");
    require(!ids.empty(), "embedding: empty id list");
    const int rows = table.dim(0), m = table.dim(1);
    for (int id : ids)
        require(0 <= id && id < rows, "embedding: id " + std::to_string(id) + " out of range [0," +
                                          std::to_string(rows) + ")");
    const int n = static_cast<int>(ids.size());
    auto ids_copy = std::make_shared<std::vector<int>>(ids);
    Tensor out = make_op_output({n, m}, {&table}, [n, m, ids_copy](TensorImpl& o) {
        TensorImpl& pt = *o.node->parents[0];
        if (!pt.requires_grad) return;
        for (int i = 0; i < n; ++i) {
            const std::size_t src = static_cast<std::size_t>(i) * m;
            const std::size_t dst = static_cast<std::size_t>((*ids_copy)[i]) * m;
            for (int j = 0; j < m; ++j) pt.grad[dst + j] += o.grad[src + j];
        }
    });
    for (int i = 0; i < n; ++i) {
        const std::size_t src = static_cast<std::size_t>(ids[i]) * m;
        const std::size_t dst = static_cast<std::size_t>(i) * m;
        for (int j = 0; j < m; ++j) out.ptr()[dst + j] = table.ptr()[src + j];
    }
    return out;
}

// Column-wise mean over rows: (n x m) -> (1 x m)
inline Tensor mean_rows(const Tensor& x) {
    detail::require_matrix(x, "mean_rows");
    const int n = x.dim(0), m = x.dim(1);
    Tensor out = make_op_output({1, m}, {&x}, [n, m](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        const double inv = 1.0 / n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) px.grad[static_cast<std::size_t>(i) * m + j] += o.grad[j] * inv;
    });
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.ptr()[j] += x.ptr()[static_cast<std::size_t>(i) * m + j];
    for (int j = 0; j < m; ++j) out.ptr()[j] /= n;
    check_finite(out, "mean_rows");
    return out;
}

inline Tensor sum_all(const Tensor& x) {
    Tensor out = make_op_output({1}, {&x}, [](TensorImpl& o) {
        TensorImpl& px = *o.node->parents[0];
        if (!px.requires_grad) return;
        for (std::size_t i = 0; i < px.grad.size(); ++i) px.grad[i] += o.grad[0];
    });
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    out.ptr()[0] = acc;
    check_finite(out, "sum_all");
    return out;
}

// Mean cross-entropy over rows of a logit matrix (n x V) against integer
// class targets. Stable log-sum-exp; loss is always >= 0.
inline Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
    detail::require_matrix(logits, "cross_entropy");
    const int n = logits.dim(0), V = logits.dim(1);
    require(static_cast<int>(targets.size()) == n, "cross_entropy: one target per logit row required");
    for (int t : targets)
        require(0 <= t && t < V,
                "cross_entropy: target " + std::to_string(t) + " out of range [0," + std::to_string(V) + ")");
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * V);
    auto tgt = std::make_shared<std::vector<int>>(targets);
    Tensor out = make_op_output({1}, {&logits}, [n, V, probs, tgt](TensorImpl& o) {
        TensorImpl& pl = *o.node->parents[0];
        if (!pl.requires_grad) return;
        const double g = o.grad[0] / n;
        for (int i = 0; i < n; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * V;
            for (int j = 0; j < V; ++j) pl.grad[base + j] += g * (*probs)[base + j];
            pl.grad[base + (*tgt)[i]] -= g;
        }
    });
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t base = static_cast<std::size_t>(i) * V;
        const double* row = logits.ptr() + base;
        detail::softmax_row(row, nullptr, probs->data() + base, V);
        double mx = row[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < V; ++j) denom += std::exp(row[j] - mx);
        total += (mx + std::log(denom)) - row[targets[static_cast<std::size_t>(i)]];
    }
    out.ptr()[0] = total / n;
    check_finite(out, "cross_entropy");
    return out;
}

inline Tensor cross_entropy(const Tensor& logits, int target) {
    require(logits.ndim() == 1, "cross_entropy: expected a logit vector");
    Tensor m = make_op_output({1, logits.dim(0)}, {&logits}, [](TensorImpl& o) {
        TensorImpl& p = *o.node->parents[0];
        if (!p.requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
    });
    std::copy(logits.data().begin(), logits.data().end(), m.data().begin());
    return cross_entropy_rows(m, {target});
}

// Scaled dot-product attention. Q: n x dk, K: m x dk, V: m x dv,
// optional n x m keep-mask. Row i of the result is
// softmax(Q_i K^T / sqrt(dk)) V with blocked positions excluded exactly.
inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        const BoolMask* mask = nullptr) {
    detail::require_matrix(q, "attention");
    detail::require_matrix(k, "attention");
    detail::require_matrix(v, "attention");
    require(q.dim(1) == k.dim(1), "attention: query/key width mismatch");
    require(k.dim(0) == v.dim(0), "attention: key/value count mismatch");
    Tensor scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    Tensor probs = softmax_rows(scores, mask);
    return matmul(probs, v);
}

}  // namespace mmtk
