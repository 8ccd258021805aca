#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "cgt/params.hpp"
#include "cgt/tensor.hpp"

namespace cgt {

// Reverse-mode tape over whole tensors. Ops append nodes whose backward
// closures run in reverse creation order, which is a valid reverse
// topological order because an op can only reference already-created refs
// (this also makes graph cycles unrepresentable).
//
// Parameters never live on the tape: ops that consume a Parameter accumulate
// straight into parameter.tensor.grad, so large weight matrices are not
// copied per step. param() exists for small parameters (attention vectors,
// layer-norm gains) that are easier to manipulate as tape nodes.
//
// With recording=false the tape computes values only (inference mode).
template <typename T>
class Tape {
public:
    using Ref = int;

    explicit Tape(bool record = true) : recording(record) {}

    bool recording = true;

    std::size_t size() const { return nodes_.size(); }

    const Tensor<T>& value(Ref r) const { return nodes_[static_cast<std::size_t>(r)].value; }
    Tensor<T>& grad(Ref r) { return nodes_[static_cast<std::size_t>(r)].grad; }
    bool requires_grad(Ref r) const { return nodes_[static_cast<std::size_t>(r)].requires_grad; }

    // ---- leaves ----

    Ref constant(Tensor<T> v) { return push(std::move(v), false); }

    Ref param(Parameter<T>& p) {
        Tensor<T> v = p.tensor;
        v.grad.clear();
        const bool rq = recording && p.trainable;
        Ref out = push(std::move(v), rq);
        if (rq) {
            p.tensor.ensure_grad();
            Parameter<T>* pp = &p;
            set_backward(out, [out, pp](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                kernels::axpy(T(1), g.data.data(), pp->tensor.grad.data(), g.numel());
            });
        }
        return out;
    }

    // ---- parameter-direct ops ----

    Ref embedding_rows(Parameter<T>& emb, const std::vector<int>& ids) {
        const std::size_t d = emb.tensor.cols();
        for (int id : ids)
            if (id < 0 || static_cast<std::size_t>(id) >= emb.tensor.rows())
                throw DataError("embedding_rows: id out of range");
        Tensor<T> v = Tensor<T>::zeros({ids.size(), d});
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const T* src = emb.tensor.row_ptr(static_cast<std::size_t>(ids[i]));
            std::copy(src, src + d, v.row_ptr(i));
        }
        const bool rq = recording && emb.trainable;
        Ref out = push(std::move(v), rq);
        if (rq) {
            emb.tensor.ensure_grad();
            Parameter<T>* pp = &emb;
            auto ids_copy = std::make_shared<std::vector<int>>(ids);
            set_backward(out, [out, pp, ids_copy, d](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                for (std::size_t i = 0; i < ids_copy->size(); ++i) {
                    T* dst = pp->tensor.grad.data() +
                             static_cast<std::size_t>((*ids_copy)[i]) * d;
                    kernels::axpy(T(1), g.row_ptr(i), dst, d);
                }
            });
        }
        return out;
    }

    // y[n,out] = x[n,in] * w[out,in]^T
    Ref linear(Ref x, Parameter<T>& w) {
        const Tensor<T>& xv = value(x);
        if (xv.cols() != w.tensor.cols()) throw DataError("linear: input width mismatch for " + w.name);
        const std::size_t n = xv.rows(), in = xv.cols(), outd = w.tensor.rows();
        Tensor<T> v = Tensor<T>::zeros({n, outd});
        kernels::gemm_nt(xv.data.data(), w.tensor.data.data(), v.data.data(), n, in, outd, false);
        const bool rq = recording && (requires_grad(x) || w.trainable);
        Ref out = push(std::move(v), rq);
        if (rq) {
            if (w.trainable) w.tensor.ensure_grad();
            Parameter<T>* pp = &w;
            set_backward(out, [out, x, pp, n, in, outd](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(x)) {
                    kernels::gemm_nn(g.data.data(), pp->tensor.data.data(),
                                     t.grad(x).data.data(), n, outd, in, true);
                }
                if (pp->trainable) {
                    kernels::gemm_tn(g.data.data(), t.value(x).data.data(),
                                     pp->tensor.grad.data(), outd, n, in, true);
                }
            });
        }
        return out;
    }

    Ref add_bias_rows(Ref x, Parameter<T>& b) {
        const Tensor<T>& xv = value(x);
        if (xv.cols() != b.tensor.numel()) throw DataError("add_bias_rows: width mismatch");
        const std::size_t n = xv.rows(), d = xv.cols();
        Tensor<T> v = Tensor<T>::zeros(xv.shape);
        for (std::size_t i = 0; i < n; ++i)
            kernels::add(xv.row_ptr(i), b.tensor.data.data(), v.row_ptr(i), d);
        const bool rq = recording && (requires_grad(x) || b.trainable);
        Ref out = push(std::move(v), rq);
        if (rq) {
            if (b.trainable) b.tensor.ensure_grad();
            Parameter<T>* pp = &b;
            set_backward(out, [out, x, pp, n, d](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(x))
                    kernels::axpy(T(1), g.data.data(), t.grad(x).data.data(), n * d);
                if (pp->trainable)
                    for (std::size_t i = 0; i < n; ++i)
                        kernels::axpy(T(1), g.row_ptr(i), pp->tensor.grad.data(), d);
            });
        }
        return out;
    }

    // Row-wise layer norm with learned gain/bias (population variance).
    Ref layer_norm_rows(Ref x, Parameter<T>& gain, Parameter<T>& bias, T eps) {
        const Tensor<T>& xv = value(x);
        const std::size_t n = xv.rows(), d = xv.cols();
        Tensor<T> v = Tensor<T>::zeros(xv.shape);
        auto xhat = std::make_shared<Tensor<T>>(Tensor<T>::zeros(xv.shape));
        auto inv_std = std::make_shared<std::vector<T>>(n, T(0));
        for (std::size_t i = 0; i < n; ++i) {
            const T* xr = xv.row_ptr(i);
            T mean = kernels::reduce_sum(xr, d) / static_cast<T>(d);
            T var = T(0);
            for (std::size_t j = 0; j < d; ++j) {
                const T c = xr[j] - mean;
                var += c * c;
            }
            var /= static_cast<T>(d);
            const T inv = T(1) / std::sqrt(var + eps);
            (*inv_std)[i] = inv;
            T* hr = xhat->row_ptr(i);
            T* yr = v.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) {
                hr[j] = (xr[j] - mean) * inv;
                yr[j] = gain.tensor.data[j] * hr[j] + bias.tensor.data[j];
            }
        }
        const bool rq = recording && (requires_grad(x) || gain.trainable || bias.trainable);
        Ref out = push(std::move(v), rq);
        if (rq) {
            if (gain.trainable) gain.tensor.ensure_grad();
            if (bias.trainable) bias.tensor.ensure_grad();
            Parameter<T>* pg = &gain;
            Parameter<T>* pb = &bias;
            set_backward(out, [out, x, pg, pb, xhat, inv_std, n, d](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                for (std::size_t i = 0; i < n; ++i) {
                    const T* gr = g.row_ptr(i);
                    const T* hr = xhat->row_ptr(i);
                    if (pg->trainable)
                        for (std::size_t j = 0; j < d; ++j)
                            pg->tensor.grad[j] += gr[j] * hr[j];
                    if (pb->trainable)
                        kernels::axpy(T(1), gr, pb->tensor.grad.data(), d);
                    if (t.requires_grad(x)) {
                        // dxhat = g .* gain; dx = (dxhat - mean(dxhat) - xhat*mean(dxhat.*xhat)) * inv_std
                        T sum_dh = T(0), sum_dh_h = T(0);
                        for (std::size_t j = 0; j < d; ++j) {
                            const T dh = gr[j] * pg->tensor.data[j];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[j];
                        }
                        const T m1 = sum_dh / static_cast<T>(d);
                        const T m2 = sum_dh_h / static_cast<T>(d);
                        T* dx = t.grad(x).row_ptr(i);
                        for (std::size_t j = 0; j < d; ++j) {
                            const T dh = gr[j] * pg->tensor.data[j];
                            dx[j] += ((dh - m1) - hr[j] * m2) * (*inv_std)[i];
                        }
                    }
                }
            });
        }
        return out;
    }

    // ---- tensor ops ----

    // [n,k] * [k,m]
    Ref matmul(Ref a, Ref b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.cols() != bv.rows()) throw DataError("matmul: inner dimension mismatch");
        const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
        Tensor<T> v = Tensor<T>::zeros({n, m});
        kernels::gemm_nn(av.data.data(), bv.data.data(), v.data.data(), n, k, m, false);
        Ref out = push(std::move(v), needs(a, b));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, b, n, k, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(a))
                    kernels::gemm_nt(g.data.data(), t.value(b).data.data(),
                                     t.grad(a).data.data(), n, m, k, true);
                if (t.requires_grad(b))
                    kernels::gemm_tn(t.value(a).data.data(), g.data.data(),
                                     t.grad(b).data.data(), k, n, m, true);
            });
        }
        return out;
    }

    // [n,k] * [m,k]^T
    Ref matmul_nt(Ref a, Ref b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.cols() != bv.cols()) throw DataError("matmul_nt: inner dimension mismatch");
        const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
        Tensor<T> v = Tensor<T>::zeros({n, m});
        kernels::gemm_nt(av.data.data(), bv.data.data(), v.data.data(), n, k, m, false);
        Ref out = push(std::move(v), needs(a, b));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, b, n, k, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(a))
                    kernels::gemm_nn(g.data.data(), t.value(b).data.data(),
                                     t.grad(a).data.data(), n, m, k, true);
                if (t.requires_grad(b))
                    kernels::gemm_tn(g.data.data(), t.value(a).data.data(),
                                     t.grad(b).data.data(), m, n, k, true);
            });
        }
        return out;
    }

    Ref add(Ref a, Ref b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.shape != bv.shape) throw DataError("add: shape mismatch");
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::add(av.data.data(), bv.data.data(), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a, b));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, b](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(a))
                    kernels::axpy(T(1), g.data.data(), t.grad(a).data.data(), g.numel());
                if (t.requires_grad(b))
                    kernels::axpy(T(1), g.data.data(), t.grad(b).data.data(), g.numel());
            });
        }
        return out;
    }

    Ref sub(Ref a, Ref b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.shape != bv.shape) throw DataError("sub: shape mismatch");
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::sub(av.data.data(), bv.data.data(), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a, b));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, b](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(a))
                    kernels::axpy(T(1), g.data.data(), t.grad(a).data.data(), g.numel());
                if (t.requires_grad(b))
                    kernels::axpy(T(-1), g.data.data(), t.grad(b).data.data(), g.numel());
            });
        }
        return out;
    }

    Ref mul(Ref a, Ref b) {
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        if (av.shape != bv.shape) throw DataError("mul: shape mismatch");
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::mul(av.data.data(), bv.data.data(), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a, b));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, b](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                const std::size_t n = g.numel();
                if (t.requires_grad(a)) {
                    const T* bd = t.value(b).data.data();
                    T* da = t.grad(a).data.data();
                    const T* gd = g.data.data();
                    for (std::size_t i = 0; i < n; ++i) da[i] += gd[i] * bd[i];
                }
                if (t.requires_grad(b)) {
                    const T* ad = t.value(a).data.data();
                    T* db = t.grad(b).data.data();
                    const T* gd = g.data.data();
                    for (std::size_t i = 0; i < n; ++i) db[i] += gd[i] * ad[i];
                }
            });
        }
        return out;
    }

    Ref scale(Ref a, double c) {
        const Tensor<T>& av = value(a);
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::scale(av.data.data(), static_cast<T>(c), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, c](Tape& t) {
                kernels::axpy(static_cast<T>(c), t.grad(out).data.data(),
                              t.grad(a).data.data(), t.grad(out).numel());
            });
        }
        return out;
    }

    Ref add_const(Ref a, const Tensor<T>& c) {
        const Tensor<T>& av = value(a);
        if (av.numel() != c.numel()) throw DataError("add_const: shape mismatch");
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::add(av.data.data(), c.data.data(), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a](Tape& t) {
                kernels::axpy(T(1), t.grad(out).data.data(), t.grad(a).data.data(),
                              t.grad(out).numel());
            });
        }
        return out;
    }

    Ref relu(Ref a) {
        const Tensor<T>& av = value(a);
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::relu(av.data.data(), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a](Tape& t) {
                kernels::relu_grad_acc(t.value(a).data.data(), t.grad(out).data.data(),
                                       t.grad(a).data.data(), t.grad(out).numel());
            });
        }
        return out;
    }

    Ref leaky_relu(Ref a, double slope) {
        const Tensor<T>& av = value(a);
        Tensor<T> v = Tensor<T>::zeros(av.shape);
        kernels::leaky_relu(av.data.data(), static_cast<T>(slope), v.data.data(), av.numel());
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, slope](Tape& t) {
                kernels::leaky_relu_grad_acc(t.value(a).data.data(), static_cast<T>(slope),
                                             t.grad(out).data.data(),
                                             t.grad(a).data.data(), t.grad(out).numel());
            });
        }
        return out;
    }

    Ref transpose(Ref a) {
        const Tensor<T>& av = value(a);
        const std::size_t n = av.rows(), m = av.cols();
        Tensor<T> v = Tensor<T>::zeros({m, n});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) v.at(j, i) = av.at(i, j);
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, n, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                Tensor<T>& da = t.grad(a);
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < m; ++j) da.at(i, j) += g.at(j, i);
            });
        }
        return out;
    }

    Ref slice_rows(Ref a, std::size_t r0, std::size_t r1) {
        const Tensor<T>& av = value(a);
        const std::size_t m = av.cols();
        Tensor<T> v = Tensor<T>::zeros({r1 - r0, m});
        std::copy(av.row_ptr(r0), av.row_ptr(r0) + (r1 - r0) * m, v.data.begin());
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, r0, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                kernels::axpy(T(1), g.data.data(), t.grad(a).data.data() + r0 * m, g.numel());
            });
        }
        return out;
    }

    Ref slice_cols(Ref a, std::size_t c0, std::size_t c1) {
        const Tensor<T>& av = value(a);
        const std::size_t n = av.rows(), m = av.cols(), w = c1 - c0;
        Tensor<T> v = Tensor<T>::zeros({n, w});
        for (std::size_t i = 0; i < n; ++i)
            std::copy(av.row_ptr(i) + c0, av.row_ptr(i) + c1, v.row_ptr(i));
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, c0, m, w](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                Tensor<T>& da = t.grad(a);
                for (std::size_t i = 0; i < g.rows(); ++i)
                    kernels::axpy(T(1), g.row_ptr(i), da.data.data() + i * m + c0, w);
            });
        }
        return out;
    }

    Ref concat_cols(const std::vector<Ref>& parts) {
        const std::size_t n = value(parts[0]).rows();
        std::size_t total = 0;
        bool rq = false;
        for (Ref p : parts) {
            total += value(p).cols();
            rq = rq || requires_grad(p);
        }
        Tensor<T> v = Tensor<T>::zeros({n, total});
        std::size_t off = 0;
        for (Ref p : parts) {
            const Tensor<T>& pv = value(p);
            for (std::size_t i = 0; i < n; ++i)
                std::copy(pv.row_ptr(i), pv.row_ptr(i) + pv.cols(), v.row_ptr(i) + off);
            off += pv.cols();
        }
        Ref out = push(std::move(v), recording && rq);
        if (nodes_.back().requires_grad) {
            auto parts_copy = std::make_shared<std::vector<Ref>>(parts);
            set_backward(out, [out, parts_copy, n, total](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                std::size_t off2 = 0;
                for (Ref p : *parts_copy) {
                    const std::size_t w = t.value(p).cols();
                    if (t.requires_grad(p)) {
                        Tensor<T>& dp = t.grad(p);
                        for (std::size_t i = 0; i < n; ++i)
                            kernels::axpy(T(1), g.row_ptr(i) + off2, dp.row_ptr(i), w);
                    }
                    off2 += w;
                }
            });
        }
        return out;
    }

    // u[n,1], v[m,1] -> S[n,m], S_ij = u_i + v_j
    Ref outer_sum(Ref u, Ref v) {
        const Tensor<T>& uv = value(u);
        const Tensor<T>& vv = value(v);
        const std::size_t n = uv.numel(), m = vv.numel();
        Tensor<T> s = Tensor<T>::zeros({n, m});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) s.at(i, j) = uv.data[i] + vv.data[j];
        Ref out = push(std::move(s), needs(u, v));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, u, v, n, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                if (t.requires_grad(u)) {
                    T* du = t.grad(u).data.data();
                    for (std::size_t i = 0; i < n; ++i)
                        du[i] += kernels::reduce_sum(g.row_ptr(i), m);
                }
                if (t.requires_grad(v)) {
                    T* dv = t.grad(v).data.data();
                    for (std::size_t i = 0; i < n; ++i)
                        kernels::axpy(T(1), g.row_ptr(i), dv, m);
                }
            });
        }
        return out;
    }

    // Row softmax over positions where mask!=0; masked entries are exactly 0.
    // Every row must have at least one unmasked entry.
    Ref masked_softmax_rows(Ref a, std::shared_ptr<const std::vector<std::uint8_t>> mask) {
        const Tensor<T>& av = value(a);
        const std::size_t n = av.rows(), m = av.cols();
        if (mask->size() != n * m) throw DataError("masked_softmax_rows: mask size mismatch");
        Tensor<T> v = Tensor<T>::zeros({n, m});
        for (std::size_t i = 0; i < n; ++i) {
            const T* x = av.row_ptr(i);
            const std::uint8_t* mk = mask->data() + i * m;
            T mx = T(0);
            bool any = false;
            for (std::size_t j = 0; j < m; ++j)
                if (mk[j] && (!any || x[j] > mx)) { mx = x[j]; any = true; }
            if (!any) throw NumericError("masked_softmax_rows: fully masked row");
            T sum = T(0);
            T* y = v.row_ptr(i);
            for (std::size_t j = 0; j < m; ++j) {
                if (mk[j]) {
                    y[j] = std::exp(x[j] - mx);
                    sum += y[j];
                }
            }
            const T inv = T(1) / sum;
            for (std::size_t j = 0; j < m; ++j) y[j] *= inv;
        }
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, mask, n, m](Tape& t) {
                const Tensor<T>& g = t.grad(out);
                const Tensor<T>& p = t.value(out);
                Tensor<T>& da = t.grad(a);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint8_t* mk = mask->data() + i * m;
                    const T* gr = g.row_ptr(i);
                    const T* pr = p.row_ptr(i);
                    T dotv = T(0);
                    for (std::size_t j = 0; j < m; ++j)
                        if (mk[j]) dotv += gr[j] * pr[j];
                    T* dr = da.row_ptr(i);
                    for (std::size_t j = 0; j < m; ++j)
                        if (mk[j]) dr[j] += pr[j] * (gr[j] - dotv);
                }
            });
        }
        return out;
    }

    Ref softmax_rows(Ref a) {
        const Tensor<T>& av = value(a);
        auto mask = std::make_shared<std::vector<std::uint8_t>>(av.numel(), std::uint8_t{1});
        return masked_softmax_rows(a, mask);
    }

    Ref sum(Ref a) {
        const Tensor<T>& av = value(a);
        Tensor<T> v = Tensor<T>::scalar(kernels::reduce_sum(av.data.data(), av.numel()));
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a](Tape& t) {
                const T g = t.grad(out).data[0];
                T* da = t.grad(a).data.data();
                const std::size_t n = t.grad(a).numel();
                for (std::size_t i = 0; i < n; ++i) da[i] += g;
            });
        }
        return out;
    }

    Ref sum_squares(Ref a) {
        const Tensor<T>& av = value(a);
        Tensor<T> v = Tensor<T>::scalar(kernels::dot(av.data.data(), av.data.data(), av.numel()));
        Ref out = push(std::move(v), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a](Tape& t) {
                const T g = t.grad(out).data[0];
                kernels::axpy(T(2) * g, t.value(a).data.data(), t.grad(a).data.data(),
                              t.value(a).numel());
            });
        }
        return out;
    }

    // Mean over rows of the Shannon entropy (natural log) of each row,
    // restricted to unmasked entries; 0*log 0 counts as 0.
    Ref mean_row_entropy(Ref probs, std::shared_ptr<const std::vector<std::uint8_t>> mask) {
        const Tensor<T>& pv = value(probs);
        const std::size_t n = pv.rows(), m = pv.cols();
        T h = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            const T* pr = pv.row_ptr(i);
            const std::uint8_t* mk = mask->data() + i * m;
            for (std::size_t j = 0; j < m; ++j)
                if (mk[j] && pr[j] > T(0)) h -= pr[j] * std::log(pr[j]);
        }
        h /= static_cast<T>(n);
        Ref out = push(Tensor<T>::scalar(h), needs(probs));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, probs, mask, n, m](Tape& t) {
                const T g = t.grad(out).data[0] / static_cast<T>(n);
                const Tensor<T>& p = t.value(probs);
                Tensor<T>& dp = t.grad(probs);
                for (std::size_t i = 0; i < n; ++i) {
                    const T* pr = p.row_ptr(i);
                    const std::uint8_t* mk = mask->data() + i * m;
                    T* dr = dp.row_ptr(i);
                    for (std::size_t j = 0; j < m; ++j)
                        if (mk[j] && pr[j] > T(0)) dr[j] -= g * (std::log(pr[j]) + T(1));
                }
            });
        }
        return out;
    }

    // -sum over (i,j) pairs of log a[i,j]
    Ref neg_log_sum_entries(Ref a, std::shared_ptr<const std::vector<std::pair<int, int>>> pairs) {
        const Tensor<T>& av = value(a);
        T s = T(0);
        for (const auto& [i, j] : *pairs) {
            const T p = av.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
            if (!(p > T(0))) throw NumericError("neg_log_sum_entries: non-positive attention on edge");
            s -= std::log(p);
        }
        Ref out = push(Tensor<T>::scalar(s), needs(a));
        if (nodes_.back().requires_grad) {
            set_backward(out, [out, a, pairs](Tape& t) {
                const T g = t.grad(out).data[0];
                const Tensor<T>& av2 = t.value(a);
                Tensor<T>& da = t.grad(a);
                for (const auto& [i, j] : *pairs) {
                    const std::size_t ii = static_cast<std::size_t>(i);
                    const std::size_t jj = static_cast<std::size_t>(j);
                    da.at(ii, jj) -= g / av2.at(ii, jj);
                }
            });
        }
        return out;
    }

    // Mean token-level cross entropy over unmasked rows of logits[n,V].
    Ref cross_entropy_mean(Ref logits, const std::vector<int>& targets,
                           const std::vector<std::uint8_t>& row_mask) {
        const Tensor<T>& lv = value(logits);
        const std::size_t n = lv.rows(), vsz = lv.cols();
        if (targets.size() != n || row_mask.size() != n)
            throw DataError("cross_entropy_mean: target/mask length mismatch");
        for (std::size_t i = 0; i < n; ++i)
            if (row_mask[i] && (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vsz))
                throw DataError("cross_entropy_mean: target id out of range");
        std::size_t count = 0;
        for (std::uint8_t m : row_mask) count += m ? 1 : 0;
        if (count == 0) throw DataError("cross_entropy_mean: all positions masked");
        auto probs = std::make_shared<Tensor<T>>(Tensor<T>::zeros(lv.shape));
        T total = T(0);
        for (std::size_t i = 0; i < n; ++i) {
            if (!row_mask[i]) continue;
            const T* x = lv.row_ptr(i);
            const T mx = kernels::reduce_max(x, vsz);
            T sum = T(0);
            T* pr = probs->row_ptr(i);
            for (std::size_t j = 0; j < vsz; ++j) {
                pr[j] = std::exp(x[j] - mx);
                sum += pr[j];
            }
            kernels::scale(pr, T(1) / sum, pr, vsz);
            total += std::log(sum) + mx - x[static_cast<std::size_t>(targets[i])];
        }
        total /= static_cast<T>(count);
        Ref out = push(Tensor<T>::scalar(total), needs(logits));
        if (nodes_.back().requires_grad) {
            auto tg = std::make_shared<std::vector<int>>(targets);
            auto mk = std::make_shared<std::vector<std::uint8_t>>(row_mask);
            set_backward(out, [out, logits, probs, tg, mk, n, vsz, count](Tape& t) {
                const T g = t.grad(out).data[0] / static_cast<T>(count);
                Tensor<T>& dl = t.grad(logits);
                for (std::size_t i = 0; i < n; ++i) {
                    if (!(*mk)[i]) continue;
                    kernels::axpy(g, probs->row_ptr(i), dl.row_ptr(i), vsz);
                    dl.at(i, static_cast<std::size_t>((*tg)[i])) -= g;
                }
            });
        }
        return out;
    }

    // ---- backward ----

    void backward(Ref loss, double seed = 1.0) {
        Node& ln = nodes_[static_cast<std::size_t>(loss)];
        if (!ln.value.is_scalar()) throw DataError("backward: loss must be scalar");
        if (!recording) throw DataError("backward: tape is not recording");
        if (!std::isfinite(static_cast<double>(ln.value.data[0])))
            throw NumericError("backward: non-finite loss");
        if (ln.requires_grad) ln.grad.data[0] += static_cast<T>(seed);
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            Node& nd = nodes_[i];
            if (nd.requires_grad && nd.backward) nd.backward(*this);
        }
    }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void(Tape&)> backward;
        bool requires_grad = false;
    };

    bool needs(Ref a) const { return recording && requires_grad(a); }
    bool needs(Ref a, Ref b) const { return recording && (requires_grad(a) || requires_grad(b)); }

    Ref push(Tensor<T> v, bool requires_grad) {
        Node nd;
        nd.value = std::move(v);
        nd.requires_grad = requires_grad;
        if (requires_grad) nd.grad = Tensor<T>::zeros(nd.value.shape);
        nodes_.push_back(std::move(nd));
        return static_cast<Ref>(nodes_.size() - 1);
    }

    void set_backward(Ref r, std::function<void(Tape&)> fn) {
        nodes_[static_cast<std::size_t>(r)].backward = std::move(fn);
    }

    std::vector<Node> nodes_;
};

} // namespace cgt
