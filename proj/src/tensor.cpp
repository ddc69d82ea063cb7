// SPDX-License-Identifier: Apache-2.0

#include "neutex/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace neutex {

namespace {

thread_local Tape* g_active_tape = nullptr;

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<long> strides_of(const Shape& s) {
    std::vector<long> st(s.size());
    long acc = 1;
    for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
        st[static_cast<size_t>(i)] = acc;
        acc *= s[static_cast<size_t>(i)];
    }
    return st;
}

// Effective strides of `in` viewed through broadcast shape `out`
// (right-aligned; broadcast dimensions get stride 0).
std::vector<long> broadcast_strides(const Shape& in, const Shape& out) {
    std::vector<long> st_in = strides_of(in);
    std::vector<long> eff(out.size(), 0);
    size_t off = out.size() - in.size();
    for (size_t i = 0; i < in.size(); ++i) {
        eff[off + i] = (in[i] == 1) ? 0 : st_in[i];
    }
    return eff;
}

// Iterates the full index space of `out`, reporting linear offsets into two
// broadcast inputs. f(out_lin, a_lin, b_lin).
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<long>& sa,
                        const std::vector<long>& sb, F&& f) {
    const long n = shape_numel(out);
    const size_t rank = out.size();
    if (rank == 0) {
        f(0, 0, 0);
        return;
    }
    if (rank == 1) {
        for (long i = 0; i < n; ++i) f(i, i * sa[0], i * sb[0]);
        return;
    }
    if (rank == 2) {
        const long rows = out[0], cols = out[1];
        long lin = 0;
        for (long r = 0; r < rows; ++r) {
            const long ar = r * sa[0], br = r * sb[0];
            for (long c = 0; c < cols; ++c, ++lin) {
                f(lin, ar + c * sa[1], br + c * sb[1]);
            }
        }
        return;
    }
    std::vector<long> idx(rank, 0);
    long ai = 0, bi = 0;
    for (long lin = 0; lin < n; ++lin) {
        f(lin, ai, bi);
        for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
            auto du = static_cast<size_t>(d);
            ++idx[du];
            ai += sa[du];
            bi += sb[du];
            if (idx[du] < out[du]) break;
            ai -= sa[du] * out[du];
            bi -= sb[du] * out[du];
            idx[du] = 0;
        }
    }
}

bool grads_active(std::initializer_list<const Tensor*> inputs) {
    if (g_active_tape == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

}  // namespace

long shape_numel(const Shape& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor make_result(Shape shape, std::vector<double> values, bool requires_grad) {
    auto p = std::make_shared<detail::TensorData>();
    p->shape = std::move(shape);
    p->values = std::move(values);
    p->requires_grad = requires_grad;
    if (requires_grad) p->tape = g_active_tape;
    if (shape_numel(p->shape) != static_cast<long>(p->values.size())) {
        fail("tensor: shape " + shape_str(p->shape) + " does not match " +
             std::to_string(p->values.size()) + " values");
    }
    return Tensor(std::move(p));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    long n = shape_numel(shape);
    return make_result(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0),
                       requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    long n = shape_numel(shape);
    return make_result(std::move(shape),
                       std::vector<double>(static_cast<size_t>(n), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return make_result({1}, {value}, requires_grad);
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values,
                           bool requires_grad) {
    return make_result(std::move(shape), std::move(values), requires_grad);
}

double Tensor::value() const {
    if (numel() != 1) fail("Tensor::value: tensor is not scalar, shape " + shape_str(shape()));
    return p_->values[0];
}

std::span<double> Tensor::grad() {
    if (p_->grad.empty()) p_->grad.assign(p_->values.size(), 0.0);
    return p_->grad;
}

std::span<const double> Tensor::grad() const {
    if (p_->grad.empty()) fail("Tensor::grad: no gradient populated");
    return p_->grad;
}

void Tensor::zero_grad() { p_->grad.assign(p_->values.size(), 0.0); }

void Tensor::check_finite(const std::string& what) const {
    for (double v : p_->values) {
        if (!std::isfinite(v)) fail("non-finite value in " + what);
    }
}

void Tape::record(std::function<void()> backward_fn) {
    ops_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& root) {
    if (consumed_) fail("Tape::backward called twice without reset");
    if (root.numel() != 1) {
        fail("Tape::backward: root must be scalar, got shape " + shape_str(root.shape()));
    }
    if (root.tape() != this) fail("Tape::backward: root was not produced on this tape");
    consumed_ = true;
    const_cast<Tensor&>(root).grad()[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void Tape::reset() {
    ops_.clear();
    consumed_ = false;
}

Tape* Tape::current() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

// ---------------------------------------------------------------------------
// elementwise binary
// ---------------------------------------------------------------------------

Shape broadcast_shapes(const Shape& a, const Shape& b) {
    Shape out(std::max(a.size(), b.size()));
    for (size_t i = 0; i < out.size(); ++i) {
        long da = (i < out.size() - a.size()) ? 1 : a[i - (out.size() - a.size())];
        long db = (i < out.size() - b.size()) ? 1 : b[i - (out.size() - b.size())];
        if (da != db && da != 1 && db != 1) {
            fail("broadcast: incompatible shapes " + shape_str(a) + " and " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

namespace {

template <class FwdF, class DaF, class DbF>
Tensor binary_op(const char* kind, const Tensor& a, const Tensor& b, FwdF fwd,
                 DaF da, DbF db) {
    Shape out_shape;
    try {
        out_shape = broadcast_shapes(a.shape(), b.shape());
    } catch (const std::exception&) {
        fail(std::string(kind) + ": incompatible shapes " + shape_str(a.shape()) +
             " and " + shape_str(b.shape()));
    }
    const long n = shape_numel(out_shape);
    std::vector<double> vals(static_cast<size_t>(n));
    auto av = a.data();
    auto bv = b.data();
    if (a.shape() == b.shape()) {
        for (long i = 0; i < n; ++i) {
            auto u = static_cast<size_t>(i);
            vals[u] = fwd(av[u], bv[u]);
        }
    } else {
        auto sa = broadcast_strides(a.shape(), out_shape);
        auto sb = broadcast_strides(b.shape(), out_shape);
        for_each_broadcast(out_shape, sa, sb, [&](long lin, long ai, long bi) {
            vals[static_cast<size_t>(lin)] =
                fwd(av[static_cast<size_t>(ai)], bv[static_cast<size_t>(bi)]);
        });
    }
    bool rg = grads_active({&a, &b});
    Tensor out = make_result(out_shape, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, bc = b, oc = out;
        g_active_tape->record([ac, bc, oc, da, db]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            const Shape& os = oc.shape();
            auto av2 = ac.data();
            auto bv2 = bc.data();
            if (ac.shape() == os && bc.shape() == os) {
                if (ac.requires_grad()) {
                    auto ga = ac.grad();
                    for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * da(av2[i], bv2[i]);
                }
                if (bc.requires_grad()) {
                    auto gb = bc.grad();
                    for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * db(av2[i], bv2[i]);
                }
                return;
            }
            auto sa = broadcast_strides(ac.shape(), os);
            auto sb = broadcast_strides(bc.shape(), os);
            if (ac.requires_grad()) {
                auto ga = ac.grad();
                for_each_broadcast(os, sa, sb, [&](long lin, long ai, long bi) {
                    ga[static_cast<size_t>(ai)] +=
                        g[static_cast<size_t>(lin)] *
                        da(av2[static_cast<size_t>(ai)], bv2[static_cast<size_t>(bi)]);
                });
            }
            if (bc.requires_grad()) {
                auto gb = bc.grad();
                for_each_broadcast(os, sa, sb, [&](long lin, long ai, long bi) {
                    gb[static_cast<size_t>(bi)] +=
                        g[static_cast<size_t>(lin)] *
                        db(av2[static_cast<size_t>(ai)], bv2[static_cast<size_t>(bi)]);
                });
            }
        });
    }
    return out;
}

template <class FwdF, class DF>
Tensor unary_op(const Tensor& a, FwdF fwd, DF dfd) {
    const long n = a.numel();
    std::vector<double> vals(static_cast<size_t>(n));
    auto av = a.data();
    for (long i = 0; i < n; ++i) {
        auto u = static_cast<size_t>(i);
        vals[u] = fwd(av[u]);
    }
    bool rg = grads_active({&a});
    Tensor out = make_result(a.shape(), std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, dfd]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto av2 = ac.data();
            auto ov2 = oc.data();
            auto ga = ac.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfd(av2[i], ov2[i]);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        "div", a, b, [](double x, double y) { return x / y; },
        [](double, double y) { return 1.0 / y; },
        [](double x, double y) { return -x / (y * y); });
}

Tensor neg(const Tensor& a) {
    return unary_op(a, [](double x) { return -x; },
                    [](double, double) { return -1.0; });
}

Tensor exp(const Tensor& a) {
    return unary_op(a, [](double x) { return std::exp(x); },
                    [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary_op(a, [](double x) { return std::log(x); },
                    [](double x, double) { return 1.0 / x; });
}

Tensor sin(const Tensor& a) {
    return unary_op(a, [](double x) { return std::sin(x); },
                    [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
    return unary_op(a, [](double x) { return std::cos(x); },
                    [](double x, double) { return -std::sin(x); });
}

Tensor relu(const Tensor& a) {
    return unary_op(a, [](double x) { return x > 0.0 ? x : 0.0; },
                    [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softplus(const Tensor& a) {
    return unary_op(a,
                    [](double x) {
                        return x > 0.0 ? x + std::log1p(std::exp(-x))
                                       : std::log1p(std::exp(x));
                    },
                    [](double x, double) {
                        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                        : std::exp(x) / (1.0 + std::exp(x));
                    });
}

Tensor sigmoid(const Tensor& a) {
    return unary_op(a,
                    [](double x) {
                        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                        : std::exp(x) / (1.0 + std::exp(x));
                    },
                    [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary_op(a, [](double x) { return std::tanh(x); },
                    [](double, double y) { return 1.0 - y * y; });
}

Tensor square(const Tensor& a) {
    return unary_op(a, [](double x) { return x * x; },
                    [](double x, double) { return 2.0 * x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary_op(a, [factor](double x) { return factor * x; },
                    [factor](double, double) { return factor; });
}

Tensor add_const(const Tensor& a, double constant) {
    return unary_op(a, [constant](double x) { return x + constant; },
                    [](double, double) { return 1.0; });
}

Tensor clamp_max(const Tensor& a, double limit) {
    // written so NaN falls through instead of snapping to the limit
    return unary_op(a, [limit](double x) { return x >= limit ? limit : x; },
                    [limit](double x, double) { return x <= limit ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// linear algebra / structure
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        fail("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
             shape_str(b.shape()));
    }
    const long m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> vals(static_cast<size_t>(m * n));
    {
        ConstMatMap am(a.data().data(), m, k);
        ConstMatMap bm(b.data().data(), k, n);
        MatMap om(vals.data(), m, n);
        om.noalias() = am * bm;
    }
    bool rg = grads_active({&a, &b});
    Tensor out = make_result({m, n}, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, bc = b, oc = out;
        g_active_tape->record([ac, bc, oc, m, k, n]() mutable {
            if (!oc.has_grad()) return;
            ConstMatMap go(oc.grad().data(), m, n);
            if (ac.requires_grad()) {
                ConstMatMap bm(bc.data().data(), k, n);
                MatMap ga(ac.grad().data(), m, k);
                ga.noalias() += go * bm.transpose();
            }
            if (bc.requires_grad()) {
                ConstMatMap am(ac.data().data(), m, k);
                MatMap gb(bc.grad().data(), k, n);
                gb.noalias() += am.transpose() * go;
            }
        });
    }
    return out;
}

namespace {

Tensor reduce_all(const Tensor& a, bool take_mean) {
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    const double factor = take_mean ? 1.0 / static_cast<double>(a.numel()) : 1.0;
    bool rg = grads_active({&a});
    Tensor out = make_result({1}, {acc * factor}, rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, factor]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            double g = oc.grad()[0] * factor;
            auto ga = ac.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor reduce_axis(const Tensor& a, int axis, bool keepdim, bool take_mean) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) fail("sum/mean: axis out of range");
    Shape out_shape = a.shape();
    const long extent = out_shape[static_cast<size_t>(axis)];
    out_shape[static_cast<size_t>(axis)] = 1;
    auto st = strides_of(a.shape());
    const long axis_stride = st[static_cast<size_t>(axis)];
    const long outer = shape_numel(Shape(a.shape().begin(), a.shape().begin() + axis));
    const long inner = axis_stride;
    std::vector<double> vals(static_cast<size_t>(outer * inner), 0.0);
    auto av = a.data();
    for (long o = 0; o < outer; ++o) {
        for (long e = 0; e < extent; ++e) {
            const long base = o * extent * inner + e * inner;
            for (long i = 0; i < inner; ++i) {
                vals[static_cast<size_t>(o * inner + i)] += av[static_cast<size_t>(base + i)];
            }
        }
    }
    const double factor = take_mean ? 1.0 / static_cast<double>(extent) : 1.0;
    if (take_mean) {
        for (double& v : vals) v *= factor;
    }
    Shape final_shape = out_shape;
    if (!keepdim) final_shape.erase(final_shape.begin() + axis);
    if (final_shape.empty()) final_shape = {1};
    bool rg = grads_active({&a});
    Tensor out = make_result(final_shape, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, outer, extent, inner, factor]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ga = ac.grad();
            for (long o = 0; o < outer; ++o) {
                for (long e = 0; e < extent; ++e) {
                    const long base = o * extent * inner + e * inner;
                    for (long i = 0; i < inner; ++i) {
                        ga[static_cast<size_t>(base + i)] +=
                            g[static_cast<size_t>(o * inner + i)] * factor;
                    }
                }
            }
        });
    }
    return out;
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce_all(a, false); }
Tensor sum(const Tensor& a, int axis, bool keepdim) {
    return reduce_axis(a, axis, keepdim, false);
}
Tensor mean(const Tensor& a) { return reduce_all(a, true); }
Tensor mean(const Tensor& a, int axis, bool keepdim) {
    return reduce_axis(a, axis, keepdim, true);
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) fail("concat: no inputs");
    const int rank = parts[0].rank();
    if (axis < 0) axis += rank;
    Shape out_shape = parts[0].shape();
    long total = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) fail("concat: rank mismatch");
        for (int d = 0; d < rank; ++d) {
            if (d != axis && p.dim(d) != out_shape[static_cast<size_t>(d)]) {
                fail("concat: incompatible shapes " + shape_str(out_shape) + " and " +
                     shape_str(p.shape()));
            }
        }
        total += p.dim(axis);
    }
    out_shape[static_cast<size_t>(axis)] = total;
    const long outer =
        shape_numel(Shape(out_shape.begin(), out_shape.begin() + axis));
    const long inner =
        shape_numel(Shape(out_shape.begin() + axis + 1, out_shape.end()));
    std::vector<double> vals(static_cast<size_t>(shape_numel(out_shape)));
    long offset = 0;  // in axis units
    for (const Tensor& p : parts) {
        const long ext = p.dim(axis);
        auto pv = p.data();
        for (long o = 0; o < outer; ++o) {
            std::copy_n(pv.data() + o * ext * inner, ext * inner,
                        vals.data() + (o * total + offset) * inner);
        }
        offset += ext;
    }
    bool rg = g_active_tape != nullptr &&
              std::any_of(parts.begin(), parts.end(),
                          [](const Tensor& t) { return t.requires_grad(); });
    Tensor out = make_result(out_shape, std::move(vals), rg);
    if (rg) {
        std::vector<Tensor> pc = parts;
        Tensor oc = out;
        g_active_tape->record([pc, oc, outer, inner, total]() mutable {
            if (!oc.has_grad()) return;
            auto g = oc.grad();
            long off = 0;
            for (Tensor& p : pc) {
                const long ext_axis = p.numel() / (outer * inner);
                if (p.requires_grad()) {
                    auto gp = p.grad();
                    for (long o = 0; o < outer; ++o) {
                        for (long j = 0; j < ext_axis * inner; ++j) {
                            gp[static_cast<size_t>(o * ext_axis * inner + j)] +=
                                g[static_cast<size_t>((o * total + off) * inner + j)];
                        }
                    }
                }
                off += ext_axis;
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& a, int axis, long start, long stop) {
    const int rank = a.rank();
    if (axis < 0) axis += rank;
    if (axis < 0 || axis >= rank) fail("slice: axis out of range");
    const long ext = a.dim(axis);
    if (start < 0 || stop > ext || start >= stop) {
        fail("slice: range [" + std::to_string(start) + "," + std::to_string(stop) +
             ") invalid for extent " + std::to_string(ext));
    }
    Shape out_shape = a.shape();
    out_shape[static_cast<size_t>(axis)] = stop - start;
    const long outer = shape_numel(Shape(a.shape().begin(), a.shape().begin() + axis));
    const long inner = shape_numel(Shape(a.shape().begin() + axis + 1, a.shape().end()));
    const long width = stop - start;
    std::vector<double> vals(static_cast<size_t>(outer * width * inner));
    auto av = a.data();
    for (long o = 0; o < outer; ++o) {
        std::copy_n(av.data() + (o * ext + start) * inner, width * inner,
                    vals.data() + o * width * inner);
    }
    bool rg = grads_active({&a});
    Tensor out = make_result(out_shape, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, outer, inner, width, ext, start]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ga = ac.grad();
            for (long o = 0; o < outer; ++o) {
                for (long j = 0; j < width * inner; ++j) {
                    ga[static_cast<size_t>((o * ext + start) * inner + j)] +=
                        g[static_cast<size_t>(o * width * inner + j)];
                }
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        fail("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> vals(a.data().begin(), a.data().end());
    bool rg = grads_active({&a});
    Tensor out = make_result(std::move(shape), std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ga = ac.grad();
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
    Shape check = broadcast_shapes(a.shape(), shape);
    if (check != shape) {
        fail("broadcast: cannot broadcast " + shape_str(a.shape()) + " to " +
             shape_str(shape));
    }
    auto sa = broadcast_strides(a.shape(), shape);
    std::vector<double> vals(static_cast<size_t>(shape_numel(shape)));
    auto av = a.data();
    for_each_broadcast(shape, sa, sa, [&](long lin, long ai, long) {
        vals[static_cast<size_t>(lin)] = av[static_cast<size_t>(ai)];
    });
    bool rg = grads_active({&a});
    Tensor out = make_result(shape, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto sa2 = broadcast_strides(ac.shape(), oc.shape());
            auto g = oc.grad();
            auto ga = ac.grad();
            for_each_broadcast(oc.shape(), sa2, sa2, [&](long lin, long ai, long) {
                ga[static_cast<size_t>(ai)] += g[static_cast<size_t>(lin)];
            });
        });
    }
    return out;
}

Tensor l2norm(const Tensor& a, double degenerate_eps) {
    const int rank = a.rank();
    const long inner = a.dim(rank - 1);
    const long outer = a.numel() / inner;
    Shape out_shape = a.shape();
    out_shape.back() = 1;
    std::vector<double> vals(static_cast<size_t>(outer));
    auto av = a.data();
    for (long o = 0; o < outer; ++o) {
        double acc = 0.0;
        for (long i = 0; i < inner; ++i) {
            double v = av[static_cast<size_t>(o * inner + i)];
            acc += v * v;
        }
        double norm = std::sqrt(acc);
        if (norm < degenerate_eps) {
            fail("l2norm: degenerate direction (norm " + std::to_string(norm) +
                 " below " + std::to_string(degenerate_eps) + ")");
        }
        vals[static_cast<size_t>(o)] = norm;
    }
    bool rg = grads_active({&a});
    Tensor out = make_result(out_shape, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, outer, inner]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ov = oc.data();
            auto av2 = ac.data();
            auto ga = ac.grad();
            for (long o = 0; o < outer; ++o) {
                double norm = ov[static_cast<size_t>(o)];
                if (norm == 0.0) continue;
                double go = g[static_cast<size_t>(o)];
                for (long i = 0; i < inner; ++i) {
                    auto u = static_cast<size_t>(o * inner + i);
                    ga[u] += go * av2[u] / norm;
                }
            }
        });
    }
    return out;
}

Tensor index_select(const Tensor& a, const std::vector<long>& rows) {
    if (a.rank() != 2) fail("index_select: rank-2 tensor required");
    const long cols = a.dim(1);
    std::vector<double> vals(rows.size() * static_cast<size_t>(cols));
    auto av = a.data();
    for (size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= a.dim(0)) fail("index_select: row out of range");
        std::copy_n(av.data() + rows[r] * cols, cols, vals.data() + static_cast<long>(r) * cols);
    }
    bool rg = grads_active({&a});
    Tensor out = make_result({static_cast<long>(rows.size()), cols}, std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        std::vector<long> rc = rows;
        g_active_tape->record([ac, oc, rc, cols]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ga = ac.grad();
            for (size_t r = 0; r < rc.size(); ++r) {
                for (long c = 0; c < cols; ++c) {
                    ga[static_cast<size_t>(rc[r] * cols + c)] +=
                        g[r * static_cast<size_t>(cols) + static_cast<size_t>(c)];
                }
            }
        });
    }
    return out;
}

Tensor cumsum_exclusive(const Tensor& a) {
    const long inner = a.dim(a.rank() - 1);
    const long outer = a.numel() / inner;
    std::vector<double> vals(static_cast<size_t>(a.numel()));
    auto av = a.data();
    for (long o = 0; o < outer; ++o) {
        double acc = 0.0;
        for (long i = 0; i < inner; ++i) {
            vals[static_cast<size_t>(o * inner + i)] = acc;
            acc += av[static_cast<size_t>(o * inner + i)];
        }
    }
    bool rg = grads_active({&a});
    Tensor out = make_result(a.shape(), std::move(vals), rg);
    if (rg) {
        Tensor ac = a, oc = out;
        g_active_tape->record([ac, oc, outer, inner]() mutable {
            if (!oc.has_grad() || !ac.requires_grad()) return;
            auto g = oc.grad();
            auto ga = ac.grad();
            for (long o = 0; o < outer; ++o) {
                double acc = 0.0;
                for (long i = inner - 1; i >= 0; --i) {
                    ga[static_cast<size_t>(o * inner + i)] += acc;
                    acc += g[static_cast<size_t>(o * inner + i)];
                }
            }
        });
    }
    return out;
}

Tensor tensor_op(const std::string& kind, const std::vector<Tensor>& inputs) {
    auto need = [&](size_t n) {
        if (inputs.size() != n) {
            fail("tensor_op " + kind + ": expected " + std::to_string(n) +
                 " inputs, got " + std::to_string(inputs.size()));
        }
    };
    if (kind == "add") { need(2); return add(inputs[0], inputs[1]); }
    if (kind == "sub") { need(2); return sub(inputs[0], inputs[1]); }
    if (kind == "mul") { need(2); return mul(inputs[0], inputs[1]); }
    if (kind == "matmul") { need(2); return matmul(inputs[0], inputs[1]); }
    if (kind == "sum") { need(1); return sum(inputs[0]); }
    if (kind == "mean") { need(1); return mean(inputs[0]); }
    if (kind == "exp") { need(1); return exp(inputs[0]); }
    if (kind == "log") { need(1); return log(inputs[0]); }
    if (kind == "sin") { need(1); return sin(inputs[0]); }
    if (kind == "cos") { need(1); return cos(inputs[0]); }
    if (kind == "relu") { need(1); return relu(inputs[0]); }
    if (kind == "softplus") { need(1); return softplus(inputs[0]); }
    if (kind == "sigmoid") { need(1); return sigmoid(inputs[0]); }
    if (kind == "tanh") { need(1); return tanh(inputs[0]); }
    if (kind == "square") { need(1); return square(inputs[0]); }
    if (kind == "concat") { return concat(inputs, -1); }
    if (kind == "slice") {
        need(2);
        auto p = inputs[1].data();
        return slice(inputs[0], static_cast<int>(p[0]), static_cast<long>(p[1]),
                     static_cast<long>(p[2]));
    }
    if (kind == "broadcast") { need(2); return broadcast_to(inputs[0], inputs[1].shape()); }
    if (kind == "l2norm") { need(1); return l2norm(inputs[0]); }
    fail("tensor_op: unknown kind '" + kind + "'");
}

}  // namespace neutex
