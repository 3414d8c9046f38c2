#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_set>
#include <vector>

#include "dsnet/tensor.hpp"

namespace dsnet {

/// Static description of one convolution layer. Stride is fixed at 1;
/// kernels are square.
struct Conv2dSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel = 3;
    std::int64_t dilation = 1;
    std::int64_t padding = 0;
    bool has_relu = true;

    /// Same-size convention: padding = dilation*(kernel-1)/2, odd kernels only.
    static Conv2dSpec same_padded(std::int64_t in_ch, std::int64_t out_ch, std::int64_t kernel,
                                  std::int64_t dilation = 1, bool has_relu = true) {
        if (kernel % 2 == 0) {
            throw ConfigError("Conv2dSpec: even kernel " + std::to_string(kernel) +
                              " cannot be same-size padded");
        }
        Conv2dSpec s;
        s.in_channels = in_ch;
        s.out_channels = out_ch;
        s.kernel = kernel;
        s.dilation = dilation;
        s.padding = dilation * (kernel - 1) / 2;
        s.has_relu = has_relu;
        return s;
    }
};

namespace detail {

// Valid output range [lo, hi) so that the sampled input index
// o - padding + tap*dilation stays within [0, extent).
inline void tap_range(std::int64_t out_extent, std::int64_t in_extent, std::int64_t padding,
                      std::int64_t tap, std::int64_t dilation, std::int64_t& lo, std::int64_t& hi) {
    const std::int64_t shift = padding - tap * dilation;
    lo = std::max<std::int64_t>(0, shift);
    hi = std::min(out_extent, in_extent + shift);
}

}  // namespace detail

/// Dilated 2-D convolution (cross-correlation), stride 1.
/// weights: (out_channels, in_channels, kernel, kernel); bias: (1, out_channels, 1, 1).
inline Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     const Conv2dSpec& spec) {
    const Shape4 in = input.shape();
    const Shape4 ws = weights.shape();
    if (ws.n != spec.out_channels || ws.c != spec.in_channels || ws.h != spec.kernel ||
        ws.w != spec.kernel) {
        throw ContractError("conv2d: weight shape " + ws.str() + " does not match spec (" +
                            std::to_string(spec.out_channels) + "," +
                            std::to_string(spec.in_channels) + "," + std::to_string(spec.kernel) +
                            "," + std::to_string(spec.kernel) + ")");
    }
    if (in.c != spec.in_channels) {
        throw ContractError("conv2d: input has " + std::to_string(in.c) +
                            " channels, spec expects " + std::to_string(spec.in_channels));
    }
    if (bias.numel() != spec.out_channels) {
        throw ContractError("conv2d: bias has " + std::to_string(bias.numel()) +
                            " entries, spec expects " + std::to_string(spec.out_channels));
    }
    const std::int64_t k = spec.kernel, d = spec.dilation, p = spec.padding;
    const std::int64_t span = d * (k - 1);
    const std::int64_t oh = in.h + 2 * p - span;
    const std::int64_t ow = in.w + 2 * p - span;
    if (oh <= 0 || ow <= 0) {
        throw ContractError("conv2d: receptive span exceeds padded input, output would be " +
                            std::to_string(oh) + "x" + std::to_string(ow));
    }

    Tensor out = Tensor::zeros({in.n, spec.out_channels, oh, ow});
    const double* x = input.data();
    const double* wgt = weights.data();
    const double* b = bias.data();
    double* y = out.data();

    for (std::int64_t ni = 0; ni < in.n; ++ni) {
        for (std::int64_t oc = 0; oc < spec.out_channels; ++oc) {
            double* plane = y + ((ni * spec.out_channels + oc) * oh) * ow;
            std::fill(plane, plane + oh * ow, b[oc]);
            for (std::int64_t ic = 0; ic < in.c; ++ic) {
                const double* xplane = x + ((ni * in.c + ic) * in.h) * in.w;
                const double* wk = wgt + ((oc * in.c + ic) * k) * k;
                for (std::int64_t kh = 0; kh < k; ++kh) {
                    std::int64_t r_lo, r_hi;
                    detail::tap_range(oh, in.h, p, kh, d, r_lo, r_hi);
                    for (std::int64_t kw = 0; kw < k; ++kw) {
                        const double wv = wk[kh * k + kw];
                        if (wv == 0.0) continue;
                        std::int64_t c_lo, c_hi;
                        detail::tap_range(ow, in.w, p, kw, d, c_lo, c_hi);
                        for (std::int64_t r = r_lo; r < r_hi; ++r) {
                            const double* xrow = xplane + (r - p + kh * d) * in.w + (c_lo - p + kw * d);
                            double* yrow = plane + r * ow + c_lo;
                            for (std::int64_t cc = 0; cc < c_hi - c_lo; ++cc) {
                                yrow[cc] += wv * xrow[cc];
                            }
                        }
                    }
                }
            }
        }
    }

    detail::record(out, {input, weights, bias}, [=]() {
        auto xin = input.node();
        auto wn = weights.node();
        auto bn = bias.node();
        return [xin, wn, bn, spec, in, oh, ow, k, d, p](detail::TensorNode& self) {
            const double* gy = self.grad.data();
            const bool need_x = xin->requires_grad;
            const bool need_w = wn->requires_grad;
            const bool need_b = bn->requires_grad;
            if (need_x) xin->ensure_grad();
            if (need_w) wn->ensure_grad();
            if (need_b) bn->ensure_grad();
            for (std::int64_t ni = 0; ni < in.n; ++ni) {
                for (std::int64_t oc = 0; oc < spec.out_channels; ++oc) {
                    const double* gplane = gy + ((ni * spec.out_channels + oc) * oh) * ow;
                    if (need_b) {
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < oh * ow; ++i) acc += gplane[i];
                        bn->grad[static_cast<std::size_t>(oc)] += acc;
                    }
                    for (std::int64_t ic = 0; ic < in.c; ++ic) {
                        const double* xplane = xin->data.data() + ((ni * in.c + ic) * in.h) * in.w;
                        double* gxplane =
                            need_x ? xin->grad.data() + ((ni * in.c + ic) * in.h) * in.w : nullptr;
                        const std::size_t wbase = static_cast<std::size_t>(((oc * in.c + ic) * k) * k);
                        for (std::int64_t kh = 0; kh < k; ++kh) {
                            std::int64_t r_lo, r_hi;
                            detail::tap_range(oh, in.h, p, kh, d, r_lo, r_hi);
                            for (std::int64_t kw = 0; kw < k; ++kw) {
                                std::int64_t c_lo, c_hi;
                                detail::tap_range(ow, in.w, p, kw, d, c_lo, c_hi);
                                const double wv = wn->data[wbase + static_cast<std::size_t>(kh * k + kw)];
                                double wacc = 0.0;
                                for (std::int64_t r = r_lo; r < r_hi; ++r) {
                                    const std::int64_t xoff = (r - p + kh * d) * in.w + (c_lo - p + kw * d);
                                    const double* xrow = xplane + xoff;
                                    const double* grow = gplane + r * ow + c_lo;
                                    const std::int64_t len = c_hi - c_lo;
                                    if (need_w) {
                                        for (std::int64_t cc = 0; cc < len; ++cc) wacc += xrow[cc] * grow[cc];
                                    }
                                    if (need_x) {
                                        double* gxrow = gxplane + xoff;
                                        for (std::int64_t cc = 0; cc < len; ++cc) gxrow[cc] += wv * grow[cc];
                                    }
                                }
                                if (need_w) wn->grad[wbase + static_cast<std::size_t>(kh * k + kw)] += wacc;
                            }
                        }
                    }
                }
            }
        };
    });
    return out;
}

/// 2x2 max pooling over disjoint windows. Gradient routes to the first
/// (row-major) occurrence of the maximum within each window.
inline Tensor max_pool_2x2(const Tensor& input) {
    const Shape4 in = input.shape();
    if (in.h % 2 != 0 || in.w % 2 != 0) {
        throw ConfigError("max_pool_2x2: spatial dims " + std::to_string(in.h) + "x" +
                          std::to_string(in.w) + " must be even");
    }
    const std::int64_t oh = in.h / 2, ow = in.w / 2;
    Tensor out = Tensor::zeros({in.n, in.c, oh, ow});
    std::vector<std::int64_t> argmax(static_cast<std::size_t>(out.numel()));
    const double* x = input.data();
    double* y = out.data();
    std::int64_t oi = 0;
    for (std::int64_t ni = 0; ni < in.n; ++ni) {
        for (std::int64_t ci = 0; ci < in.c; ++ci) {
            const double* xplane = x + ((ni * in.c + ci) * in.h) * in.w;
            for (std::int64_t r = 0; r < oh; ++r) {
                for (std::int64_t cc = 0; cc < ow; ++cc, ++oi) {
                    const std::int64_t base = 2 * r * in.w + 2 * cc;
                    // Row-major scan; strict > keeps the first occurrence on ties.
                    std::int64_t best = base;
                    double bv = xplane[base];
                    const std::int64_t cand[3] = {base + 1, base + in.w, base + in.w + 1};
                    for (std::int64_t idx : cand) {
                        if (xplane[idx] > bv) {
                            bv = xplane[idx];
                            best = idx;
                        }
                    }
                    y[oi] = bv;
                    argmax[static_cast<std::size_t>(oi)] = ((ni * in.c + ci) * in.h) * in.w + best;
                }
            }
        }
    }

    detail::record(out, {input}, [&]() {
        auto xin = input.node();
        auto idx = std::make_shared<std::vector<std::int64_t>>(std::move(argmax));
        return [xin, idx](detail::TensorNode& self) {
            if (!xin->requires_grad) return;
            xin->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                xin->grad[static_cast<std::size_t>((*idx)[i])] += self.grad[i];
            }
        };
    });
    return out;
}

/// Adaptive average pooling to a k x k output. Bin i covers input rows
/// [floor(i*h/k), floor((i+1)*h/k)), likewise for columns; the bins
/// partition the input exactly.
inline Tensor adaptive_avg_pool(const Tensor& input, std::int64_t out_size) {
    const Shape4 in = input.shape();
    if (out_size <= 0 || out_size > in.h || out_size > in.w) {
        throw ConfigError("adaptive_avg_pool: output size " + std::to_string(out_size) +
                          " exceeds input " + std::to_string(in.h) + "x" + std::to_string(in.w));
    }
    const std::int64_t k = out_size;
    Tensor out = Tensor::zeros({in.n, in.c, k, k});
    const double* x = input.data();
    double* y = out.data();
    for (std::int64_t ni = 0; ni < in.n; ++ni) {
        for (std::int64_t ci = 0; ci < in.c; ++ci) {
            const double* xplane = x + ((ni * in.c + ci) * in.h) * in.w;
            double* yplane = y + ((ni * in.c + ci) * k) * k;
            for (std::int64_t bi = 0; bi < k; ++bi) {
                const std::int64_t r0 = bi * in.h / k, r1 = (bi + 1) * in.h / k;
                for (std::int64_t bj = 0; bj < k; ++bj) {
                    const std::int64_t c0 = bj * in.w / k, c1 = (bj + 1) * in.w / k;
                    double acc = 0.0;
                    for (std::int64_t r = r0; r < r1; ++r) {
                        for (std::int64_t cc = c0; cc < c1; ++cc) acc += xplane[r * in.w + cc];
                    }
                    yplane[bi * k + bj] = acc / static_cast<double>((r1 - r0) * (c1 - c0));
                }
            }
        }
    }

    detail::record(out, {input}, [&]() {
        auto xin = input.node();
        return [xin, in, k](detail::TensorNode& self) {
            if (!xin->requires_grad) return;
            xin->ensure_grad();
            const double* gy = self.grad.data();
            for (std::int64_t ni = 0; ni < in.n; ++ni) {
                for (std::int64_t ci = 0; ci < in.c; ++ci) {
                    double* gxplane = xin->grad.data() + ((ni * in.c + ci) * in.h) * in.w;
                    const double* gyplane = gy + ((ni * in.c + ci) * k) * k;
                    for (std::int64_t bi = 0; bi < k; ++bi) {
                        const std::int64_t r0 = bi * in.h / k, r1 = (bi + 1) * in.h / k;
                        for (std::int64_t bj = 0; bj < k; ++bj) {
                            const std::int64_t c0 = bj * in.w / k, c1 = (bj + 1) * in.w / k;
                            const double g =
                                gyplane[bi * k + bj] / static_cast<double>((r1 - r0) * (c1 - c0));
                            for (std::int64_t r = r0; r < r1; ++r) {
                                for (std::int64_t cc = c0; cc < c1; ++cc) gxplane[r * in.w + cc] += g;
                            }
                        }
                    }
                }
            }
        };
    });
    return out;
}

/// Elementwise max(0, x); subgradient 0 at x = 0.
inline Tensor relu(const Tensor& input) {
    Tensor out = Tensor::zeros(input.shape());
    const double* x = input.data();
    double* y = out.data();
    const std::int64_t n = input.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;

    detail::record(out, {input}, [&]() {
        auto xin = input.node();
        return [xin](detail::TensorNode& self) {
            if (!xin->requires_grad) return;
            xin->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                if (xin->data[i] > 0.0) xin->grad[i] += self.grad[i];
            }
        };
    });
    return out;
}

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!(a.shape() == b.shape())) {
        throw ContractError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                            b.shape().str());
    }
}

}  // namespace detail

/// Elementwise sum.
inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* y = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = pa[i] + pb[i];

    detail::record(out, {a, b}, [&]() {
        auto an = a.node();
        auto bn = b.node();
        return [an, bn](detail::TensorNode& self) {
            for (auto& node : {an, bn}) {
                if (!node->requires_grad) continue;
                node->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) node->grad[i] += self.grad[i];
            }
        };
    });
    return out;
}

/// Elementwise difference a - b.
inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* y = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = pa[i] - pb[i];

    detail::record(out, {a, b}, [&]() {
        auto an = a.node();
        auto bn = b.node();
        return [an, bn](detail::TensorNode& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
            }
        };
    });
    return out;
}

/// Elementwise product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* y = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = pa[i] * pb[i];

    detail::record(out, {a, b}, [&]() {
        auto an = a.node();
        auto bn = b.node();
        return [an, bn](detail::TensorNode& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    an->grad[i] += self.grad[i] * bn->data[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    bn->grad[i] += self.grad[i] * an->data[i];
            }
        };
    });
    return out;
}

/// Multiply every entry by a constant.
inline Tensor scale(const Tensor& a, double factor) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* y = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = pa[i] * factor;

    detail::record(out, {a}, [&]() {
        auto an = a.node();
        return [an, factor](detail::TensorNode& self) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += factor * self.grad[i];
        };
    });
    return out;
}

/// Elementwise |x|; subgradient 0 at x = 0.
inline Tensor abs_val(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* y = out.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) y[i] = std::abs(pa[i]);

    detail::record(out, {a}, [&]() {
        auto an = a.node();
        return [an](detail::TensorNode& self) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double x = an->data[i];
                if (x > 0.0) {
                    an->grad[i] += self.grad[i];
                } else if (x < 0.0) {
                    an->grad[i] -= self.grad[i];
                }
            }
        };
    });
    return out;
}

/// Sum of all entries as a scalar tensor (fixed left-to-right reduction).
inline Tensor sum_all(const Tensor& a) {
    double acc = 0.0;
    const double* pa = a.data();
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += pa[i];
    Tensor out = Tensor::scalar(acc);

    detail::record(out, {a}, [&]() {
        auto an = a.node();
        return [an](detail::TensorNode& self) {
            if (!an->requires_grad) return;
            an->ensure_grad();
            const double g = self.grad[0];
            for (std::size_t i = 0; i < an->grad.size(); ++i) an->grad[i] += g;
        };
    });
    return out;
}

/// Channel-axis concatenation preserving argument order.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ContractError("concat_channels: empty input list");
    const Shape4 first = parts.front().shape();
    std::int64_t channels = 0;
    for (const Tensor& t : parts) {
        const Shape4 s = t.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ContractError("concat_channels: shape mismatch " + s.str() + " vs " + first.str());
        }
        channels += s.c;
    }
    Tensor out = Tensor::zeros({first.n, channels, first.h, first.w});
    double* y = out.data();
    const std::int64_t plane = first.h * first.w;
    for (std::int64_t ni = 0; ni < first.n; ++ni) {
        std::int64_t coff = 0;
        for (const Tensor& t : parts) {
            const std::int64_t tc = t.shape().c;
            const double* src = t.data() + ni * tc * plane;
            std::copy(src, src + tc * plane, y + (ni * channels + coff) * plane);
            coff += tc;
        }
    }

    detail::record(out, parts, [&]() {
        std::vector<detail::NodePtr> nodes;
        nodes.reserve(parts.size());
        for (const Tensor& t : parts) nodes.push_back(t.node());
        return [nodes, first, channels, plane](detail::TensorNode& self) {
            std::int64_t coff = 0;
            for (const auto& node : nodes) {
                const std::int64_t tc = node->shape.c;
                if (node->requires_grad) {
                    node->ensure_grad();
                    for (std::int64_t ni = 0; ni < first.n; ++ni) {
                        const double* g = self.grad.data() + (ni * channels + coff) * plane;
                        double* dst = node->grad.data() + ni * tc * plane;
                        for (std::int64_t i = 0; i < tc * plane; ++i) dst[i] += g[i];
                    }
                }
                coff += tc;
            }
        };
    });
    return out;
}

/// Channel slice [c_begin, c_end), the inverse of concat_channels.
inline Tensor slice_channels(const Tensor& input, std::int64_t c_begin, std::int64_t c_end) {
    const Shape4 in = input.shape();
    if (c_begin < 0 || c_end > in.c || c_begin >= c_end) {
        throw ContractError("slice_channels: range [" + std::to_string(c_begin) + "," +
                            std::to_string(c_end) + ") invalid for " + std::to_string(in.c) +
                            " channels");
    }
    const std::int64_t tc = c_end - c_begin;
    const std::int64_t plane = in.h * in.w;
    Tensor out = Tensor::zeros({in.n, tc, in.h, in.w});
    double* y = out.data();
    for (std::int64_t ni = 0; ni < in.n; ++ni) {
        const double* src = input.data() + (ni * in.c + c_begin) * plane;
        std::copy(src, src + tc * plane, y + ni * tc * plane);
    }

    detail::record(out, {input}, [&]() {
        auto xin = input.node();
        return [xin, in, c_begin, tc, plane](detail::TensorNode& self) {
            if (!xin->requires_grad) return;
            xin->ensure_grad();
            for (std::int64_t ni = 0; ni < in.n; ++ni) {
                const double* g = self.grad.data() + ni * tc * plane;
                double* dst = xin->grad.data() + (ni * in.c + c_begin) * plane;
                for (std::int64_t i = 0; i < tc * plane; ++i) dst[i] += g[i];
            }
        };
    });
    return out;
}

/// Reverse-mode sweep from a scalar loss. Gradients accumulate across all
/// uses of a tensor; buffers of reachable nodes are reset first, so each
/// call yields exactly the gradients of this loss.
inline void backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
        throw ContractError("backward: loss has shape " + loss.shape().str() + ", expected scalar");
    }
    // Reachable set under parent links.
    std::vector<detail::NodePtr> nodes;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<detail::NodePtr> stack{loss.node()};
    while (!stack.empty()) {
        detail::NodePtr n = std::move(stack.back());
        stack.pop_back();
        if (!seen.insert(n.get()).second) continue;
        for (const auto& p : n->parents) stack.push_back(p);
        nodes.push_back(std::move(n));
    }
    for (auto& n : nodes) n->grad.assign(n->data.size(), 0.0);
    // Creation order is a topological order for a define-by-run tape.
    std::sort(nodes.begin(), nodes.end(),
              [](const detail::NodePtr& a, const detail::NodePtr& b) { return a->seq > b->seq; });
    loss.node()->grad[0] = 1.0;
    for (auto& n : nodes) {
        if (n->backprop) n->backprop(*n);
    }
}

}  // namespace dsnet
