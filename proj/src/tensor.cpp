// Copyright 2026 The slotllm Authors
// SPDX-License-Identifier: Apache-2.0

#include "slotllm/tensor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace slotllm::inline SLOTLLM_ABI {

const Matrix& Var::value() const { return tape_->node(id_).val(); }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::constant(Matrix value) { return push(std::move(value), false); }

Var Tape::param(Parameter& p) {
    Node n;
    n.external = &p.value;
    n.requires_grad = recording_ && p.trainable;
    if (n.requires_grad) {
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
        n.param_grad = &p.grad;
    }
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::push(Matrix value, bool requires_grad, std::function<void()> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

int Tape::reserve(Matrix value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = recording_ && requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::set_backward(int id, std::function<void()> fn) {
    if (node(id).requires_grad) node(id).backward = std::move(fn);
}

const Matrix& Tape::grad(int id) { return node(id).grad; }

void Tape::backward(Var loss) {
    if (loss.tape() != this) throw std::invalid_argument("backward: variable belongs to another tape");
    if (!recording_) throw std::logic_error("backward: tape was not recording");
    Node& root = node(loss.id());
    if (root.val().size() != 1) throw std::invalid_argument("backward: loss must be 1x1");
    if (!root.requires_grad) return;
    root.grad = Matrix::Ones(1, 1);
    for (int i = loss.id(); i >= 0; --i) {
        Node& n = node(i);
        if (n.backward && n.grad.size() > 0) n.backward();
    }
}

namespace {

bool any_grad(std::initializer_list<Var> vars) {
    for (const Var& v : vars) {
        if (v.valid() && v.requires_grad()) return true;
    }
    return false;
}

Matrix* grad_buffer(Tape& t, int id) {
    Tape::Node& n = t.node(id);
    if (!n.requires_grad) return nullptr;
    Matrix& target = n.param_grad ? *n.param_grad : n.grad;
    if (target.size() == 0) target.setZero(n.val().rows(), n.val().cols());
    return &target;
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()));
    }
}

constexpr Scalar kGeluC = static_cast<Scalar>(0.7978845608028654);  // sqrt(2/pi)

Scalar sigmoid(Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); }

// Rotary embedding table: cos/sin for every (position, pair) combination.
struct RopeTable {
    Matrix cos, sin;
};

RopeTable make_rope(Index rows, Index head_dim, Index offset) {
    const Index half = head_dim / 2;
    RopeTable t{Matrix(rows, half), Matrix(rows, half)};
    for (Index p = 0; p < rows; ++p) {
        for (Index i = 0; i < half; ++i) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
            const double angle = static_cast<double>(p + offset) * freq;
            t.cos(p, i) = static_cast<Scalar>(std::cos(angle));
            t.sin(p, i) = static_cast<Scalar>(std::sin(angle));
        }
    }
    return t;
}

// Rotates (or, with inverse, un-rotates) each head's consecutive pairs in place.
void rotate(Matrix& x, const RopeTable& t, int n_heads, bool inverse) {
    const Index head_dim = x.cols() / n_heads;
    const Index half = head_dim / 2;
    for (Index p = 0; p < x.rows(); ++p) {
        for (int h = 0; h < n_heads; ++h) {
            Scalar* row = x.row(p).data() + h * head_dim;
            for (Index i = 0; i < half; ++i) {
                const Scalar c = t.cos(p, i);
                const Scalar s = inverse ? -t.sin(p, i) : t.sin(p, i);
                const Scalar x0 = row[2 * i];
                const Scalar x1 = row[2 * i + 1];
                row[2 * i] = x0 * c - x1 * s;
                row[2 * i + 1] = x0 * s + x1 * c;
            }
        }
    }
}

}  // namespace

void apply_rotary(Matrix& x, int n_heads, Index position_offset) {
    rotate(x, make_rope(x.rows(), x.cols() / n_heads, position_offset), n_heads, false);
}

Matrix log_softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const Scalar m = logits.row(r).maxCoeff();
        const Scalar lse = m + std::log((logits.row(r).array() - m).exp().sum());
        out.row(r) = logits.row(r).array() - lse;
    }
    return out;
}

namespace ops {

Var add(Var a, Var b) {
    check_same_shape(a, b, "add");
    Tape& t = *a.tape();
    const int id = t.reserve(a.value() + b.value(), any_grad({a, b}));
    t.set_backward(id, [&t, id, a, b] {
        const Matrix& g = t.grad(id);
        t.accumulate(a.id(), g);
        t.accumulate(b.id(), g);
    });
    return Var(&t, id);
}

Var sub(Var a, Var b) {
    check_same_shape(a, b, "sub");
    Tape& t = *a.tape();
    const int id = t.reserve(a.value() - b.value(), any_grad({a, b}));
    t.set_backward(id, [&t, id, a, b] {
        const Matrix& g = t.grad(id);
        t.accumulate(a.id(), g);
        t.accumulate(b.id(), -g);
    });
    return Var(&t, id);
}

Var mul(Var a, Var b) {
    check_same_shape(a, b, "mul");
    Tape& t = *a.tape();
    const int id = t.reserve(a.value().cwiseProduct(b.value()), any_grad({a, b}));
    t.set_backward(id, [&t, id, a, b] {
        const Matrix& g = t.grad(id);
        if (a.requires_grad()) t.accumulate(a.id(), g.cwiseProduct(b.value()));
        if (b.requires_grad()) t.accumulate(b.id(), g.cwiseProduct(a.value()));
    });
    return Var(&t, id);
}

Var scale(Var a, Scalar s) {
    Tape& t = *a.tape();
    const int id = t.reserve(a.value() * s, any_grad({a}));
    t.set_backward(id, [&t, id, a, s] { t.accumulate(a.id(), t.grad(id) * s); });
    return Var(&t, id);
}

Var add_row(Var a, Var row) {
    if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: expected 1 x cols row");
    Tape& t = *a.tape();
    Matrix out = a.value();
    out.rowwise() += row.value().row(0);
    const int id = t.reserve(std::move(out), any_grad({a, row}));
    t.set_backward(id, [&t, id, a, row] {
        const Matrix& g = t.grad(id);
        t.accumulate(a.id(), g);
        if (row.requires_grad()) t.accumulate(row.id(), g.colwise().sum());
    });
    return Var(&t, id);
}

Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimension mismatch " + std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()));
    }
    Tape& t = *a.tape();
    Matrix out(a.rows(), b.cols());
    out.noalias() = a.value() * b.value();
    const int id = t.reserve(std::move(out), any_grad({a, b}));
    t.set_backward(id, [&t, id, a, b] {
        const Matrix& g = t.grad(id);
        if (Matrix* da = grad_buffer(t, a.id())) da->noalias() += g * b.value().transpose();
        if (Matrix* db = grad_buffer(t, b.id())) db->noalias() += a.value().transpose() * g;
    });
    return Var(&t, id);
}

Var affine(Var x, Var w, Var bias) {
    if (x.cols() != w.rows()) {
        throw std::invalid_argument("affine: input width " + std::to_string(x.cols()) + " != weight rows " +
                                    std::to_string(w.rows()));
    }
    Tape& t = *x.tape();
    Matrix out(x.rows(), w.cols());
    out.noalias() = x.value() * w.value();
    const bool has_bias = bias.valid();
    if (has_bias) out.rowwise() += bias.value().row(0);
    const int id = t.reserve(std::move(out), any_grad({x, w}) || (has_bias && bias.requires_grad()));
    t.set_backward(id, [&t, id, x, w, bias, has_bias] {
        const Matrix& g = t.grad(id);
        if (Matrix* dx = grad_buffer(t, x.id())) dx->noalias() += g * w.value().transpose();
        if (Matrix* dw = grad_buffer(t, w.id())) dw->noalias() += x.value().transpose() * g;
        if (has_bias) {
            if (Matrix* db = grad_buffer(t, bias.id())) *db += g.colwise().sum();
        }
    });
    return Var(&t, id);
}

Var silu(Var a) {
    Tape& t = *a.tape();
    const Matrix& x = a.value();
    Matrix out = x.unaryExpr([](Scalar v) { return v * sigmoid(v); });
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a] {
        const Matrix& x = a.value();
        Matrix d = x.unaryExpr([](Scalar v) {
            const Scalar s = sigmoid(v);
            return s * (Scalar(1) + v * (Scalar(1) - s));
        });
        t.accumulate(a.id(), t.grad(id).cwiseProduct(d));
    });
    return Var(&t, id);
}

Var gelu(Var a) {
    Tape& t = *a.tape();
    Matrix out = a.value().unaryExpr([](Scalar v) {
        return Scalar(0.5) * v * (Scalar(1) + std::tanh(kGeluC * (v + Scalar(0.044715) * v * v * v)));
    });
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a] {
        Matrix d = a.value().unaryExpr([](Scalar v) {
            const Scalar th = std::tanh(kGeluC * (v + Scalar(0.044715) * v * v * v));
            return Scalar(0.5) * (Scalar(1) + th) +
                   Scalar(0.5) * v * (Scalar(1) - th * th) * kGeluC * (Scalar(1) + Scalar(3 * 0.044715) * v * v);
        });
        t.accumulate(a.id(), t.grad(id).cwiseProduct(d));
    });
    return Var(&t, id);
}

Var relu(Var a) {
    Tape& t = *a.tape();
    const int id = t.reserve(a.value().cwiseMax(Scalar(0)), any_grad({a}));
    t.set_backward(id, [&t, id, a] {
        Matrix mask = (a.value().array() > Scalar(0)).cast<Scalar>();
        t.accumulate(a.id(), t.grad(id).cwiseProduct(mask));
    });
    return Var(&t, id);
}

Var rms_norm(Var x, Var gain, Scalar eps) {
    if (gain.rows() != 1 || gain.cols() != x.cols()) throw std::invalid_argument("rms_norm: gain shape");
    Tape& t = *x.tape();
    const Matrix& xv = x.value();
    const Index d = xv.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_rms(xv.rows());
    for (Index r = 0; r < xv.rows(); ++r) {
        inv_rms(r) = Scalar(1) / std::sqrt(xv.row(r).squaredNorm() / static_cast<Scalar>(d) + eps);
    }
    Matrix xhat = inv_rms.asDiagonal() * xv;
    Matrix out = xhat.array().rowwise() * gain.value().row(0).array();
    const int id = t.reserve(std::move(out), any_grad({x, gain}));
    t.set_backward(id, [&t, id, x, gain, xhat = std::move(xhat), inv_rms = std::move(inv_rms), d] {
        const Matrix& g = t.grad(id);
        if (Matrix* dg = grad_buffer(t, gain.id())) *dg += g.cwiseProduct(xhat).colwise().sum();
        if (Matrix* dx = grad_buffer(t, x.id())) {
            Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
            for (Index r = 0; r < dxhat.rows(); ++r) {
                const Scalar m = dxhat.row(r).dot(xhat.row(r)) / static_cast<Scalar>(d);
                dx->row(r) += inv_rms(r) * (dxhat.row(r) - m * xhat.row(r));
            }
        }
    });
    return Var(&t, id);
}

Var layer_norm(Var x, Var gamma, Var beta, Scalar eps) {
    if (gamma.cols() != x.cols() || beta.cols() != x.cols()) throw std::invalid_argument("layer_norm: param shape");
    Tape& t = *x.tape();
    const Matrix& xv = x.value();
    const Index d = xv.cols();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
    Matrix xhat(xv.rows(), d);
    for (Index r = 0; r < xv.rows(); ++r) {
        const Scalar mu = xv.row(r).mean();
        const Scalar var = (xv.row(r).array() - mu).square().mean();
        inv_std(r) = Scalar(1) / std::sqrt(var + eps);
        xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
    }
    Matrix out = xhat.array().rowwise() * gamma.value().row(0).array();
    out.rowwise() += beta.value().row(0);
    const int id = t.reserve(std::move(out), any_grad({x, gamma, beta}));
    t.set_backward(id, [&t, id, x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), d] {
        const Matrix& g = t.grad(id);
        if (Matrix* dg = grad_buffer(t, gamma.id())) *dg += g.cwiseProduct(xhat).colwise().sum();
        if (Matrix* db = grad_buffer(t, beta.id())) *db += g.colwise().sum();
        if (Matrix* dx = grad_buffer(t, x.id())) {
            Matrix dxhat = g.array().rowwise() * gamma.value().row(0).array();
            for (Index r = 0; r < dxhat.rows(); ++r) {
                const Scalar m1 = dxhat.row(r).mean();
                const Scalar m2 = dxhat.row(r).dot(xhat.row(r)) / static_cast<Scalar>(d);
                dx->row(r).array() += inv_std(r) * (dxhat.row(r).array() - m1 - m2 * xhat.row(r).array());
            }
        }
    });
    return Var(&t, id);
}

Var gather_rows(Var table, std::span<const int> indices) {
    Tape& t = *table.tape();
    const Matrix& tv = table.value();
    Matrix out(static_cast<Index>(indices.size()), tv.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= tv.rows()) {
            throw std::out_of_range("gather_rows: index " + std::to_string(r) + " outside [0, " +
                                    std::to_string(tv.rows()) + ")");
        }
        out.row(static_cast<Index>(i)) = tv.row(r);
    }
    const int id = t.reserve(std::move(out), any_grad({table}));
    t.set_backward(id, [&t, id, table, idx = std::vector<int>(indices.begin(), indices.end())] {
        const Matrix& g = t.grad(id);
        if (Matrix* dt = grad_buffer(t, table.id())) {
            for (std::size_t i = 0; i < idx.size(); ++i) dt->row(idx[i]) += g.row(static_cast<Index>(i));
        }
    });
    return Var(&t, id);
}

Var concat_rows(std::span<const Var> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    Tape& t = *parts.front().tape();
    const Index cols = parts.front().cols();
    Index rows = 0;
    bool needs_grad = false;
    for (const Var& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        rows += p.rows();
        needs_grad = needs_grad || p.requires_grad();
    }
    Matrix out(rows, cols);
    Index offset = 0;
    for (const Var& p : parts) {
        out.middleRows(offset, p.rows()) = p.value();
        offset += p.rows();
    }
    const int id = t.reserve(std::move(out), needs_grad);
    t.set_backward(id, [&t, id, vars = std::vector<Var>(parts.begin(), parts.end())] {
        const Matrix& g = t.grad(id);
        Index off = 0;
        for (const Var& p : vars) {
            if (p.requires_grad()) t.accumulate(p.id(), g.middleRows(off, p.rows()));
            off += p.rows();
        }
    });
    return Var(&t, id);
}

Var slice_rows(Var a, Index begin, Index count) {
    if (begin < 0 || count < 0 || begin + count > a.rows()) throw std::out_of_range("slice_rows: range outside input");
    Tape& t = *a.tape();
    const int id = t.reserve(a.value().middleRows(begin, count), any_grad({a}));
    t.set_backward(id, [&t, id, a, begin, count] {
        if (Matrix* da = grad_buffer(t, a.id())) da->middleRows(begin, count) += t.grad(id);
    });
    return Var(&t, id);
}

Var stack_frames(Var a, Index factor) {
    if (factor < 1) throw std::invalid_argument("stack_frames: factor must be >= 1");
    Tape& t = *a.tape();
    const Index n = a.rows();
    const Index d = a.cols();
    const Index groups = (n + factor - 1) / factor;
    Matrix padded = Matrix::Zero(groups * factor, d);
    padded.topRows(n) = a.value();
    Matrix out = Eigen::Map<const Matrix>(padded.data(), groups, factor * d);
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a, n, d, groups, factor] {
        const Matrix& g = t.grad(id);
        if (Matrix* da = grad_buffer(t, a.id())) {
            Eigen::Map<const Matrix> unstacked(g.data(), groups * factor, d);
            *da += unstacked.topRows(n);
        }
    });
    return Var(&t, id);
}

Var unfold_time(Var a, Index kernel, Index stride, Index pad_left) {
    if (kernel < 1 || stride < 1 || pad_left < 0) throw std::invalid_argument("unfold_time: bad geometry");
    Tape& t = *a.tape();
    const Index n = a.rows();
    const Index d = a.cols();
    const Index out_rows = (n + stride - 1) / stride;
    const Matrix& in = a.value();
    Matrix out = Matrix::Zero(out_rows, kernel * d);
    for (Index r = 0; r < out_rows; ++r) {
        for (Index j = 0; j < kernel; ++j) {
            const Index src = r * stride - pad_left + j;
            if (src >= 0 && src < n) out.block(r, j * d, 1, d) = in.row(src);
        }
    }
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a, n, d, kernel, stride, pad_left, out_rows] {
        const Matrix& g = t.grad(id);
        if (Matrix* da = grad_buffer(t, a.id())) {
            for (Index r = 0; r < out_rows; ++r) {
                for (Index j = 0; j < kernel; ++j) {
                    const Index src = r * stride - pad_left + j;
                    if (src >= 0 && src < n) da->row(src) += g.block(r, j * d, 1, d);
                }
            }
        }
    });
    return Var(&t, id);
}

Var dropout(Var a, Scalar p, std::mt19937_64& rng) {
    if (p <= Scalar(0)) return a;
    if (p >= Scalar(1)) throw std::invalid_argument("dropout: p must be < 1");
    Tape& t = *a.tape();
    std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
    const Scalar inv = Scalar(1) / (Scalar(1) - p);
    Matrix mask(a.rows(), a.cols());
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : Scalar(0);
    const int id = t.reserve(a.value().cwiseProduct(mask), any_grad({a}));
    t.set_backward(id, [&t, id, a, mask = std::move(mask)] { t.accumulate(a.id(), t.grad(id).cwiseProduct(mask)); });
    return Var(&t, id);
}

Var attention(Var q, Var k, Var v, int n_heads, bool causal, bool rotary, Index position_offset) {
    check_same_shape(q, k, "attention(q,k)");
    check_same_shape(q, v, "attention(q,v)");
    const Index d = q.cols();
    if (n_heads < 1 || d % n_heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
    const Index head_dim = d / n_heads;
    if (rotary && head_dim % 2 != 0) throw std::invalid_argument("attention: rotary needs even head width");
    Tape& t = *q.tape();
    const Index len = q.rows();
    const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(head_dim));

    auto rope = std::make_shared<RopeTable>();
    Matrix qr = q.value();
    Matrix kr = k.value();
    if (rotary) {
        *rope = make_rope(len, head_dim, position_offset);
        rotate(qr, *rope, n_heads, false);
        rotate(kr, *rope, n_heads, false);
    }

    std::vector<Matrix> probs(static_cast<std::size_t>(n_heads));
    Matrix out(len, d);
    for (int h = 0; h < n_heads; ++h) {
        Matrix s(len, len);
        s.noalias() = qr.middleCols(h * head_dim, head_dim) * kr.middleCols(h * head_dim, head_dim).transpose();
        s *= inv_sqrt;
        for (Index i = 0; i < len; ++i) {
            const Index visible = causal ? i + 1 : len;
            auto row = s.row(i).head(visible);
            const Scalar m = row.maxCoeff();
            row = (row.array() - m).exp();
            row /= row.sum();
            if (visible < len) s.row(i).tail(len - visible).setZero();
        }
        out.middleCols(h * head_dim, head_dim).noalias() = s * v.value().middleCols(h * head_dim, head_dim);
        probs[static_cast<std::size_t>(h)] = std::move(s);
    }

    const int id = t.reserve(std::move(out), any_grad({q, k, v}));
    t.set_backward(id, [&t, id, q, k, v, n_heads, head_dim, inv_sqrt, rotary, rope, qr = std::move(qr),
                        kr = std::move(kr), probs = std::move(probs)] {
        const Matrix& g = t.grad(id);
        const Index len = g.rows();
        Matrix dqr = Matrix::Zero(len, g.cols());
        Matrix dkr = Matrix::Zero(len, g.cols());
        Matrix* dv = grad_buffer(t, v.id());
        for (int h = 0; h < n_heads; ++h) {
            const Matrix& p = probs[static_cast<std::size_t>(h)];
            const auto g_h = g.middleCols(h * head_dim, head_dim);
            if (dv) dv->middleCols(h * head_dim, head_dim).noalias() += p.transpose() * g_h;
            Matrix dp(len, len);
            dp.noalias() = g_h * v.value().middleCols(h * head_dim, head_dim).transpose();
            Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rowdot = dp.cwiseProduct(p).rowwise().sum();
            Matrix ds = p.cwiseProduct(dp.colwise() - rowdot);
            ds *= inv_sqrt;
            dqr.middleCols(h * head_dim, head_dim).noalias() += ds * kr.middleCols(h * head_dim, head_dim);
            dkr.middleCols(h * head_dim, head_dim).noalias() += ds.transpose() * qr.middleCols(h * head_dim, head_dim);
        }
        if (rotary) {
            rotate(dqr, *rope, n_heads, true);
            rotate(dkr, *rope, n_heads, true);
        }
        if (q.requires_grad()) t.accumulate(q.id(), dqr);
        if (k.requires_grad()) t.accumulate(k.id(), dkr);
    });
    return Var(&t, id);
}

Var cross_entropy(Var logits, std::span<const int> targets, Scalar weight) {
    if (static_cast<Index>(targets.size()) != logits.rows()) {
        throw std::invalid_argument("cross_entropy: target count != logit rows");
    }
    Tape& t = *logits.tape();
    Matrix logp = log_softmax_rows(logits.value());
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const int y = targets[i];
        if (y < 0) continue;
        if (y >= logp.cols()) throw std::out_of_range("cross_entropy: target outside vocabulary");
        total -= static_cast<double>(logp(static_cast<Index>(i), y));
    }
    Matrix out(1, 1);
    out(0, 0) = static_cast<Scalar>(total) * weight;
    const int id = t.reserve(std::move(out), any_grad({logits}));
    t.set_backward(id, [&t, id, logits, weight, logp = std::move(logp),
                        ys = std::vector<int>(targets.begin(), targets.end())] {
        const Scalar g = t.grad(id)(0, 0) * weight;
        Matrix d = logp.array().exp();
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const auto r = static_cast<Index>(i);
            if (ys[i] < 0) {
                d.row(r).setZero();
            } else {
                d(r, ys[i]) -= Scalar(1);
            }
        }
        t.accumulate(logits.id(), d * g);
    });
    return Var(&t, id);
}

Var squared_error(Var a, const Matrix& target, Scalar weight) {
    if (a.rows() != target.rows() || a.cols() != target.cols()) throw std::invalid_argument("squared_error: shape");
    Tape& t = *a.tape();
    Matrix diff = a.value() - target;
    Matrix out(1, 1);
    out(0, 0) = Scalar(0.5) * weight * diff.squaredNorm();
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a, weight, diff = std::move(diff)] {
        t.accumulate(a.id(), diff * (t.grad(id)(0, 0) * weight));
    });
    return Var(&t, id);
}

Var sum(Var a) {
    Tape& t = *a.tape();
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    const int id = t.reserve(std::move(out), any_grad({a}));
    t.set_backward(id, [&t, id, a] {
        t.accumulate(a.id(), Matrix::Constant(a.rows(), a.cols(), t.grad(id)(0, 0)));
    });
    return Var(&t, id);
}

}  // namespace ops
}  // namespace slotllm
