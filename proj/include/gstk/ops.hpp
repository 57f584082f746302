#pragma once

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "gstk/tensor.hpp"

namespace gs {

// Differentiable op library for the tensor tape. Heavy products go through
// Eigen maps over the row-major buffers; the elementwise ops are hand rolled.

template <class S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using EMap = Eigen::Map<EMat<S>>;
template <class S>
using ECMap = Eigen::Map<const EMat<S>>;
template <class S>
using EArr = Eigen::Array<S, Eigen::Dynamic, 1>;
template <class S>
using EArrMap = Eigen::Map<EArr<S>>;
template <class S>
using EArrCMap = Eigen::Map<const EArr<S>>;

namespace detail {

template <class S>
EMap<S> mat(TensorNode<S>& n) {
    const std::size_t r = n.shape.size() == 1 ? 1 : n.shape[0];
    return EMap<S>(n.value.data(), static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(n.shape.back()));
}

template <class S>
ECMap<S> cmat(const TensorNode<S>& n) {
    const std::size_t r = n.shape.size() == 1 ? 1 : n.shape[0];
    return ECMap<S>(n.value.data(), static_cast<Eigen::Index>(r),
                    static_cast<Eigen::Index>(n.shape.back()));
}

template <class S>
EMap<S> grad_mat(TensorNode<S>& n) {
    n.ensure_grad();
    const std::size_t r = n.shape.size() == 1 ? 1 : n.shape[0];
    return EMap<S>(n.grad.data(), static_cast<Eigen::Index>(r),
                   static_cast<Eigen::Index>(n.shape.back()));
}

template <class S>
ECMap<S> out_grad(const TensorNode<S>& n) {
    const std::size_t r = n.shape.size() == 1 ? 1 : n.shape[0];
    return ECMap<S>(n.grad.data(), static_cast<Eigen::Index>(r),
                    static_cast<Eigen::Index>(n.shape.back()));
}

template <class S>
TensorT<S> make_node(Shape shape, std::vector<NodePtr<S>> parents) {
    auto n = std::make_shared<TensorNode<S>>();
    n->value.assign(shape_numel(shape), S(0));
    n->shape = std::move(shape);
    if (grad_enabled()) {
        for (const auto& p : parents) {
            if (p->requires_grad) {
                n->requires_grad = true;
                break;
            }
        }
    }
    n->parents = std::move(parents);
    return TensorT<S>(std::move(n));
}

template <class S>
void finish(TensorT<S>& out, const char* name,
            std::function<void(TensorNode<S>&)> bwd) {
    if (checked_mode()) check_finite(*out.node(), name);
    if (out.node()->requires_grad) {
        out.node()->backward_fn = std::move(bwd);
    } else {
        out.node()->parents.clear();  // constant result, no tape to keep alive
    }
}

template <class S>
void require_rank2(const TensorT<S>& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + " expects a rank-2 tensor, got shape " +
                         shape_str(t.shape()));
    }
}

}  // namespace detail

// ---- products ----

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
    detail::require_rank2(a, "matmul");
    detail::require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    auto out = detail::make_node<S>({a.rows(), b.cols()}, {a.node(), b.node()});
    detail::mat(*out.node()).noalias() =
        detail::cmat(*a.node()) * detail::cmat(*b.node());

    auto an = a.node();
    auto bn = b.node();
    detail::finish<S>(out, "matmul", [an, bn](TensorNode<S>& o) {
        auto g = detail::out_grad(o);
        if (an->requires_grad) {
            detail::grad_mat(*an).noalias() += g * detail::cmat(*bn).transpose();
        }
        if (bn->requires_grad) {
            detail::grad_mat(*bn).noalias() += detail::cmat(*an).transpose() * g;
        }
    });
    return out;
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
    detail::require_rank2(a, "transpose");
    auto out = detail::make_node<S>({a.cols(), a.rows()}, {a.node()});
    detail::mat(*out.node()) = detail::cmat(*a.node()).transpose();
    auto an = a.node();
    detail::finish<S>(out, "transpose", [an](TensorNode<S>& o) {
        if (an->requires_grad) {
            detail::grad_mat(*an) += detail::out_grad(o).transpose();
        }
    });
    return out;
}

// ---- elementwise / broadcast ----

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = detail::make_node<S>(a.shape(), {a.node(), b.node()});
    const std::size_t n = out.numel();
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];

    auto an = a.node();
    auto bn = b.node();
    detail::finish<S>(out, "add", [an, bn](TensorNode<S>& o) {
        for (auto* p : {an.get(), bn.get()}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) p->grad[i] += o.grad[i];
        }
    });
    return out;
}

// a: (n, d), v: (d) broadcast over rows.
template <class S>
TensorT<S> add_rowvec(const TensorT<S>& a, const TensorT<S>& v) {
    detail::require_rank2(a, "add_rowvec");
    if (v.numel() != a.cols()) {
        throw ShapeError("add_rowvec: vector of " + std::to_string(v.numel()) +
                         " vs matrix " + shape_str(a.shape()));
    }
    auto out = detail::make_node<S>(a.shape(), {a.node(), v.node()});
    const std::size_t rows = a.rows(), cols = a.cols();
    const S* pa = a.data();
    const S* pv = v.data();
    S* po = out.data();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) po[r * cols + c] = pa[r * cols + c] + pv[c];
    }

    auto an = a.node();
    auto vn = v.node();
    detail::finish<S>(out, "add_rowvec", [an, vn, rows, cols](TensorNode<S>& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        }
        if (vn->requires_grad) {
            vn->ensure_grad();
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < cols; ++c) {
                    vn->grad[c] += o.grad[r * cols + c];
                }
            }
        }
    });
    return out;
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shapes differ, " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    auto out = detail::make_node<S>(a.shape(), {a.node(), b.node()});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];

    auto an = a.node();
    auto bn = b.node();
    detail::finish<S>(out, "mul", [an, bn](TensorNode<S>& o) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                an->grad[i] += o.grad[i] * bn->value[i];
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) {
                bn->grad[i] += o.grad[i] * an->value[i];
            }
        }
    });
    return out;
}

template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
    auto out = detail::make_node<S>(a.shape(), {a.node()});
    const std::size_t n = out.numel();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * c;
    auto an = a.node();
    detail::finish<S>(out, "scale", [an, c](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i] * c;
    });
    return out;
}

template <class S>
TensorT<S> sum(const TensorT<S>& a) {
    auto out = detail::make_node<S>({1}, {a.node()});
    S acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += a.data()[i];
    out.data()[0] = acc;
    auto an = a.node();
    detail::finish<S>(out, "sum", [an](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        const S g = o.grad[0];
        for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
    });
    return out;
}

template <class S>
TensorT<S> reshape(const TensorT<S>& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape) +
                         " changes the element count");
    }
    auto out = detail::make_node<S>(std::move(shape), {a.node()});
    out.values() = a.values();
    auto an = a.node();
    detail::finish<S>(out, "reshape", [an](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    });
    return out;
}

// Row-major flatten to a single row.
template <class S>
TensorT<S> flatten_row(const TensorT<S>& a) {
    return reshape(a, Shape{1, a.numel()});
}

template <class S>
TensorT<S> slice_cols(const TensorT<S>& a, std::size_t first, std::size_t width) {
    detail::require_rank2(a, "slice_cols");
    if (first + width > a.cols()) {
        throw ShapeError("slice_cols: [" + std::to_string(first) + ", " +
                         std::to_string(first + width) + ") out of " +
                         shape_str(a.shape()));
    }
    auto out = detail::make_node<S>({a.rows(), width}, {a.node()});
    const std::size_t rows = a.rows(), cols = a.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        const S* src = a.data() + r * cols + first;
        std::copy(src, src + width, out.data() + r * width);
    }
    auto an = a.node();
    detail::finish<S>(out, "slice_cols", [an, first, width, rows, cols](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            S* dst = an->grad.data() + r * cols + first;
            const S* src = o.grad.data() + r * width;
            for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
        }
    });
    return out;
}

template <class S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t rows = parts[0].rows();
    std::size_t total = 0;
    std::vector<NodePtr<S>> parents;
    for (const auto& p : parts) {
        detail::require_rank2(p, "concat_cols");
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row counts differ, " +
                             shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
        }
        total += p.cols();
        parents.push_back(p.node());
    }
    auto out = detail::make_node<S>({rows, total}, parents);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t r = 0; r < rows; ++r) {
            std::copy(p.data() + r * w, p.data() + (r + 1) * w,
                      out.data() + r * total + off);
        }
        off += w;
    }
    detail::finish<S>(out, "concat_cols", [parents, rows, total](TensorNode<S>& o) {
        std::size_t off = 0;
        for (const auto& p : parents) {
            const std::size_t w = p->shape.back();
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t r = 0; r < rows; ++r) {
                    const S* src = o.grad.data() + r * total + off;
                    S* dst = p->grad.data() + r * w;
                    for (std::size_t c = 0; c < w; ++c) dst[c] += src[c];
                }
            }
            off += w;
        }
    });
    return out;
}

// ---- nonlinearities ----

template <class S>
TensorT<S> softmax_rows(const TensorT<S>& a) {
    detail::require_rank2(a, "softmax_rows");
    auto out = detail::make_node<S>(a.shape(), {a.node()});
    const std::size_t rows = a.rows(), cols = a.cols();
    for (std::size_t r = 0; r < rows; ++r) {
        EArrCMap<S> x(a.data() + r * cols, static_cast<Eigen::Index>(cols));
        EArrMap<S> y(out.data() + r * cols, static_cast<Eigen::Index>(cols));
        y = (x - x.maxCoeff()).exp();
        // scalar sum: vectorized reductions round differently per alignment
        S total = 0;
        const S* py = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) total += py[c];
        y /= total;
    }
    auto an = a.node();
    detail::finish<S>(out, "softmax_rows", [an, rows, cols](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const S* y = o.value.data() + r * cols;
            const S* g = o.grad.data() + r * cols;
            S dot = 0;
            for (std::size_t c = 0; c < cols; ++c) dot += y[c] * g[c];
            S* gx = an->grad.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) gx[c] += y[c] * (g[c] - dot);
        }
    });
    return out;
}

// Per-row normalization over the feature axis, then affine gain/bias.
template <class S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gain, const TensorT<S>& bias,
                      S eps = S(1e-5)) {
    detail::require_rank2(x, "layer_norm");
    if (gain.numel() != x.cols() || bias.numel() != x.cols()) {
        throw ShapeError("layer_norm: gain/bias of " + std::to_string(gain.numel()) + "/" +
                         std::to_string(bias.numel()) + " vs features " +
                         std::to_string(x.cols()));
    }
    const std::size_t rows = x.rows(), cols = x.cols();
    auto out = detail::make_node<S>(x.shape(), {x.node(), gain.node(), bias.node()});

    // xhat and 1/sigma are cached for the backward pass.
    auto xhat = std::make_shared<std::vector<S>>(rows * cols);
    auto inv_sd = std::make_shared<std::vector<S>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const S* px = x.data() + r * cols;
        S mean = 0;
        for (std::size_t c = 0; c < cols; ++c) mean += px[c];
        mean /= static_cast<S>(cols);
        S var = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            const S d = px[c] - mean;
            var += d * d;
        }
        var /= static_cast<S>(cols);
        const S inv = S(1) / std::sqrt(var + eps);
        (*inv_sd)[r] = inv;
        S* ph = xhat->data() + r * cols;
        S* po = out.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) {
            ph[c] = (px[c] - mean) * inv;
            po[c] = gain.data()[c] * ph[c] + bias.data()[c];
        }
    }

    auto xn = x.node();
    auto gn = gain.node();
    auto bn = bias.node();
    detail::finish<S>(out, "layer_norm",
                      [xn, gn, bn, xhat, inv_sd, rows, cols](TensorNode<S>& o) {
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        if (xn->requires_grad) xn->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const S* g = o.grad.data() + r * cols;
            const S* h = xhat->data() + r * cols;
            if (gn->requires_grad || bn->requires_grad) {
                for (std::size_t c = 0; c < cols; ++c) {
                    if (gn->requires_grad) gn->grad[c] += g[c] * h[c];
                    if (bn->requires_grad) bn->grad[c] += g[c];
                }
            }
            if (xn->requires_grad) {
                S mean_gh = 0, mean_ghh = 0;
                for (std::size_t c = 0; c < cols; ++c) {
                    const S gh = g[c] * gn->value[c];
                    mean_gh += gh;
                    mean_ghh += gh * h[c];
                }
                mean_gh /= static_cast<S>(cols);
                mean_ghh /= static_cast<S>(cols);
                S* gx = xn->grad.data() + r * cols;
                const S inv = (*inv_sd)[r];
                for (std::size_t c = 0; c < cols; ++c) {
                    const S gh = g[c] * gn->value[c];
                    gx[c] += inv * (gh - mean_gh - h[c] * mean_ghh);
                }
            }
        }
    });
    return out;
}

template <class S>
TensorT<S> relu(const TensorT<S>& a) {
    auto out = detail::make_node<S>(a.shape(), {a.node()});
    for (std::size_t i = 0; i < a.numel(); ++i) {
        out.data()[i] = a.data()[i] > S(0) ? a.data()[i] : S(0);
    }
    auto an = a.node();
    detail::finish<S>(out, "relu", [an](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) {
            if (an->value[i] > S(0)) an->grad[i] += o.grad[i];
        }
    });
    return out;
}

// Exact GELU, x * Phi(x).
template <class S>
TensorT<S> gelu(const TensorT<S>& a) {
    auto out = detail::make_node<S>(a.shape(), {a.node()});
    const auto n = static_cast<Eigen::Index>(a.numel());
    EArrCMap<S> x(a.data(), n);
    EArrMap<S> y(out.data(), n);
    constexpr S inv_sqrt2 = S(0.7071067811865475244);
    y = x * (S(0.5) * ((x * inv_sqrt2).erf() + S(1)));
    auto an = a.node();
    detail::finish<S>(out, "gelu", [an, n](TensorNode<S>& o) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        constexpr S inv_sqrt2 = S(0.7071067811865475244);
        constexpr S inv_sqrt2pi = S(0.3989422804014326779);
        EArrCMap<S> x(an->value.data(), n);
        EArrCMap<S> g(o.grad.data(), n);
        EArrMap<S> gx(an->grad.data(), n);
        gx += g * (S(0.5) * ((x * inv_sqrt2).erf() + S(1)) +
                   x * inv_sqrt2pi * (-S(0.5) * x * x).exp());
    });
    return out;
}

// ---- lookup ----

// Row gather: out[i] = table[ids[i]]. VocabError on an id outside the table.
template <class S>
TensorT<S> embedding(const TensorT<S>& table, std::span<const std::int32_t> ids) {
    detail::require_rank2(table, "embedding");
    const std::size_t vocab = table.rows(), width = table.cols();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
            throw VocabError("token id " + std::to_string(ids[i]) + " at position " +
                             std::to_string(i) + " outside vocabulary of " +
                             std::to_string(vocab));
        }
    }
    auto out = detail::make_node<S>({ids.size(), width}, {table.node()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const S* src = table.data() + static_cast<std::size_t>(ids[i]) * width;
        std::copy(src, src + width, out.data() + i * width);
    }
    auto tn = table.node();
    std::vector<std::int32_t> idv(ids.begin(), ids.end());
    detail::finish<S>(out, "embedding", [tn, idv = std::move(idv), width](TensorNode<S>& o) {
        if (!tn->requires_grad) return;
        tn->ensure_grad();
        for (std::size_t i = 0; i < idv.size(); ++i) {
            S* dst = tn->grad.data() + static_cast<std::size_t>(idv[i]) * width;
            const S* src = o.grad.data() + i * width;
            for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
        }
    });
    return out;
}

// ---- losses ----

// Mean over rows of -log softmax(logits)[label]. Fused log-sum-exp form.
template <class S>
TensorT<S> cross_entropy_with_logits(const TensorT<S>& logits,
                                     std::span<const int> labels) {
    detail::require_rank2(logits, "cross_entropy");
    const std::size_t rows = logits.rows(), cols = logits.cols();
    if (labels.size() != rows) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= cols) {
            throw LabelError("label " + std::to_string(y) + " outside [0, " +
                             std::to_string(cols) + ")");
        }
    }
    auto out = detail::make_node<S>({1}, {logits.node()});
    auto probs = std::make_shared<std::vector<S>>(rows * cols);
    S total = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        const S* z = logits.data() + r * cols;
        S m = z[0];
        for (std::size_t c = 1; c < cols; ++c) m = std::max(m, z[c]);
        S lse = 0;
        for (std::size_t c = 0; c < cols; ++c) lse += std::exp(z[c] - m);
        lse = std::log(lse) + m;
        total += lse - z[labels[r]];
        S* p = probs->data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) p[c] = std::exp(z[c] - lse);
    }
    out.data()[0] = total / static_cast<S>(rows);

    auto ln = logits.node();
    std::vector<int> lab(labels.begin(), labels.end());
    detail::finish<S>(out, "cross_entropy",
                      [ln, probs, lab = std::move(lab), rows, cols](TensorNode<S>& o) {
        if (!ln->requires_grad) return;
        ln->ensure_grad();
        const S g = o.grad[0] / static_cast<S>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const S* p = probs->data() + r * cols;
            S* gz = ln->grad.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) {
                gz[c] += g * (p[c] - (static_cast<std::size_t>(lab[r]) == c ? S(1) : S(0)));
            }
        }
    });
    return out;
}

// Mean of squared differences against a constant target batch.
template <class S>
TensorT<S> mse(const TensorT<S>& pred, std::span<const S> target) {
    if (pred.numel() != target.size()) {
        throw ShapeError("mse: " + std::to_string(pred.numel()) + " predictions vs " +
                         std::to_string(target.size()) + " targets");
    }
    auto out = detail::make_node<S>({1}, {pred.node()});
    const std::size_t n = pred.numel();
    S acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const S d = pred.data()[i] - target[i];
        acc += d * d;
    }
    out.data()[0] = acc / static_cast<S>(n);

    auto pn = pred.node();
    std::vector<S> tgt(target.begin(), target.end());
    detail::finish<S>(out, "mse", [pn, tgt = std::move(tgt), n](TensorNode<S>& o) {
        if (!pn->requires_grad) return;
        pn->ensure_grad();
        const S g = o.grad[0] * S(2) / static_cast<S>(n);
        for (std::size_t i = 0; i < n; ++i) {
            pn->grad[i] += g * (pn->value[i] - tgt[i]);
        }
    });
    return out;
}

}  // namespace gs
