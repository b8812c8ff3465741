// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "prodsearch/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prodsearch/error.hpp"

namespace prodsearch {

template <typename T>
std::size_t ParameterSet<T>::add(std::string name, Eigen::Index rows, Eigen::Index cols, bool no_decay)
{
    m_params.push_back({std::move(name), Matrix<T>::Zero(rows, cols), no_decay});
    return m_params.size() - 1;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const
{
    std::size_t n = 0;
    for (const auto& p : m_params) {
        n += static_cast<std::size_t>(p.value.size());
    }
    return n;
}

template <typename T>
GradientSet<T>::GradientSet(const ParameterSet<T>& params)
{
    m_grads.reserve(params.size());
    for (const auto& p : params) {
        m_grads.push_back(Matrix<T>::Zero(p.value.rows(), p.value.cols()));
    }
}

template <typename T>
void GradientSet<T>::zero()
{
    for (auto& g : m_grads) {
        g.setZero();
    }
}

template <typename T>
GradientSet<T>& GradientSet<T>::operator+=(const GradientSet& other)
{
    for (std::size_t i = 0; i < m_grads.size(); ++i) {
        m_grads[i] += other.m_grads[i];
    }
    return *this;
}

template <typename T>
void GradientSet<T>::scale(T factor)
{
    for (auto& g : m_grads) {
        g *= factor;
    }
}

// ---------------------------------------------------------------------------

template <typename T>
Tape<T>::Tape(const ParameterSet<T>& params, GradientSet<T>* grads)
    : m_params(params), m_grads(grads), m_param_nodes(params.size(), -1)
{
    m_nodes.reserve(256);
}

template <typename T>
void Tape<T>::check(Var v) const
{
    if (v.id < 0 || static_cast<std::size_t>(v.id) >= m_nodes.size()) {
        throw StateError("variable does not belong to this tape");
    }
}

template <typename T>
const typename Tape<T>::Mat& Tape<T>::val(int id) const
{
    const auto& n = m_nodes[static_cast<std::size_t>(id)];
    return n.ref != nullptr ? *n.ref : n.value;
}

template <typename T>
const typename Tape<T>::Mat& Tape<T>::value(Var v) const
{
    check(v);
    return val(v.id);
}

template <typename T>
typename Tape<T>::Mat& Tape<T>::grad(int id)
{
    auto& n = m_nodes[static_cast<std::size_t>(id)];
    if (!n.has_grad) {
        const auto& v = val(id);
        n.grad = Mat::Zero(v.rows(), v.cols());
        n.has_grad = true;
    }
    return n.grad;
}

template <typename T>
Var Tape<T>::push(Mat value, std::function<void(Tape&, int)> back)
{
    Node n;
    n.value = std::move(value);
    n.back = std::move(back);
    m_nodes.push_back(std::move(n));
    return Var{static_cast<int>(m_nodes.size() - 1)};
}

template <typename T>
Var Tape<T>::param(std::size_t index)
{
    if (index >= m_params.size()) {
        throw StateError("parameter index out of range");
    }
    if (m_param_nodes[index] >= 0) {
        return Var{m_param_nodes[index]};
    }
    Node n;
    n.ref = &m_params[index].value;
    n.param_index = index;
    m_nodes.push_back(std::move(n));
    m_param_nodes[index] = static_cast<int>(m_nodes.size() - 1);
    return Var{m_param_nodes[index]};
}

template <typename T>
Var Tape<T>::constant(Mat value)
{
    return push(std::move(value), nullptr);
}

template <typename T>
Var Tape<T>::matmul(Var a, Var b)
{
    check(a);
    check(b);
    if (val(a.id).cols() != val(b.id).rows()) {
        throw StateError("matmul shape mismatch");
    }
    Mat out = val(a.id) * val(b.id);
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id).noalias() += g * t.val(b.id).transpose();
        t.grad(b.id).noalias() += t.val(a.id).transpose() * g;
    });
}

template <typename T>
Var Tape<T>::matmul_nt(Var a, Var b)
{
    check(a);
    check(b);
    if (val(a.id).cols() != val(b.id).cols()) {
        throw StateError("matmul_nt shape mismatch");
    }
    Mat out = val(a.id) * val(b.id).transpose();
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id).noalias() += g * t.val(b.id);
        t.grad(b.id).noalias() += g.transpose() * t.val(a.id);
    });
}

template <typename T>
Var Tape<T>::add(Var a, Var b)
{
    check(a);
    check(b);
    Mat out = val(a.id) + val(b.id);
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id) += g;
        t.grad(b.id) += g;
    });
}

template <typename T>
Var Tape<T>::sub(Var a, Var b)
{
    check(a);
    check(b);
    Mat out = val(a.id) - val(b.id);
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id) += g;
        t.grad(b.id) -= g;
    });
}

template <typename T>
Var Tape<T>::add_row(Var a, Var row)
{
    check(a);
    check(row);
    if (val(row.id).rows() != 1 || val(row.id).cols() != val(a.id).cols()) {
        throw StateError("add_row shape mismatch");
    }
    Mat out = val(a.id).rowwise() + val(row.id).row(0);
    return push(std::move(out), [a, row](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id) += g;
        t.grad(row.id) += g.colwise().sum();
    });
}

template <typename T>
Var Tape<T>::scale(Var a, T factor)
{
    check(a);
    Mat out = val(a.id) * factor;
    return push(std::move(out), [a, factor](Tape& t, int self) { t.grad(a.id) += t.grad(self) * factor; });
}

template <typename T>
Var Tape<T>::relu(Var a)
{
    check(a);
    Mat out = val(a.id).cwiseMax(T(0));
    return push(std::move(out), [a](Tape& t, int self) {
        const Mat& x = t.val(a.id);
        t.grad(a.id) += (x.array() > T(0)).select(t.grad(self), T(0)).matrix();
    });
}

template <typename T>
Var Tape<T>::sigmoid(Var a)
{
    check(a);
    Mat out = val(a.id).unaryExpr([](T x) {
        // Split by sign so exp never overflows.
        if (x >= T(0)) {
            return T(1) / (T(1) + std::exp(-x));
        }
        T e = std::exp(x);
        return e / (T(1) + e);
    });
    return push(std::move(out), [a](Tape& t, int self) {
        const Mat& y = t.val(self);
        t.grad(a.id) += (t.grad(self).array() * y.array() * (T(1) - y.array())).matrix();
    });
}

template <typename T>
Var Tape<T>::abs(Var a)
{
    check(a);
    Mat out = val(a.id).cwiseAbs();
    return push(std::move(out), [a](Tape& t, int self) {
        const Mat& x = t.val(a.id);
        auto sign = x.unaryExpr([](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
        t.grad(a.id) += (t.grad(self).array() * sign.array()).matrix();
    });
}

template <typename T>
Var Tape<T>::hadamard(Var a, Var b)
{
    check(a);
    check(b);
    Mat out = val(a.id).cwiseProduct(val(b.id));
    return push(std::move(out), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(a.id) += g.cwiseProduct(t.val(b.id));
        t.grad(b.id) += g.cwiseProduct(t.val(a.id));
    });
}

template <typename T>
Var Tape<T>::layer_norm(Var x, Var gamma, Var beta, T eps)
{
    check(x);
    check(gamma);
    check(beta);
    const Mat& in = val(x.id);
    const auto cols = in.cols();
    Mat normed(in.rows(), cols);
    Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(in.rows());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        T mean = in.row(r).mean();
        auto centered = (in.row(r).array() - mean).matrix();
        T var = centered.squaredNorm() / static_cast<T>(cols);
        inv_std(r) = T(1) / std::sqrt(var + eps);
        normed.row(r) = centered * inv_std(r);
    }
    Mat out = (normed.array().rowwise() * val(gamma.id).row(0).array()).matrix();
    out.rowwise() += val(beta.id).row(0);
    return push(std::move(out), [x, gamma, beta, normed = std::move(normed), inv_std](Tape& t, int self) {
        const Mat& g = t.grad(self);
        t.grad(gamma.id) += (g.array() * normed.array()).matrix().colwise().sum();
        t.grad(beta.id) += g.colwise().sum();
        Mat dn = (g.array().rowwise() * t.val(gamma.id).row(0).array()).matrix();
        auto& gx = t.grad(x.id);
        const T n = static_cast<T>(normed.cols());
        for (Eigen::Index r = 0; r < dn.rows(); ++r) {
            T mean_dn = dn.row(r).sum() / n;
            T mean_dn_x = dn.row(r).dot(normed.row(r)) / n;
            gx.row(r) += ((dn.row(r).array() - mean_dn - normed.row(r).array() * mean_dn_x) * inv_std(r)).matrix();
        }
    });
}

template <typename T>
Var Tape<T>::masked_softmax(Var logits, std::span<const std::uint8_t> key_mask)
{
    check(logits);
    const Mat& z = val(logits.id);
    if (static_cast<Eigen::Index>(key_mask.size()) != z.cols()) {
        throw StateError("softmax mask length mismatch");
    }
    Mat out = Mat::Zero(z.rows(), z.cols());
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        T mx = -std::numeric_limits<T>::infinity();
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            if (key_mask[static_cast<std::size_t>(c)] != 0) {
                mx = std::max(mx, z(r, c));
            }
        }
        if (mx == -std::numeric_limits<T>::infinity()) {
            continue;
        }
        T sum = T(0);
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
            if (key_mask[static_cast<std::size_t>(c)] != 0) {
                out(r, c) = std::exp(z(r, c) - mx);
                sum += out(r, c);
            }
        }
        out.row(r) /= sum;
    }
    return push(std::move(out), [logits](Tape& t, int self) {
        const Mat& y = t.val(self);
        const Mat& g = t.grad(self);
        auto& gz = t.grad(logits.id);
        for (Eigen::Index r = 0; r < y.rows(); ++r) {
            T dot = g.row(r).dot(y.row(r));
            gz.row(r) += (y.row(r).array() * (g.row(r).array() - dot)).matrix();
        }
    });
}

template <typename T>
Var Tape<T>::dropout(Var x, T rate, Rng& rng)
{
    check(x);
    if (rate <= T(0)) {
        return x;
    }
    const Mat& in = val(x.id);
    Mat keep(in.rows(), in.cols());
    const T scale = T(1) / (T(1) - rate);
    for (Eigen::Index i = 0; i < keep.size(); ++i) {
        keep.data()[i] = rng.uniform() >= static_cast<double>(rate) ? scale : T(0);
    }
    Mat out = in.cwiseProduct(keep);
    return push(std::move(out), [x, keep = std::move(keep)](Tape& t, int self) {
        t.grad(x.id) += t.grad(self).cwiseProduct(keep);
    });
}

template <typename T>
Var Tape<T>::slice_cols(Var x, Eigen::Index start, Eigen::Index count)
{
    check(x);
    if (start < 0 || count < 0 || start + count > val(x.id).cols()) {
        throw StateError("slice_cols out of range");
    }
    Mat out = val(x.id).middleCols(start, count);
    return push(std::move(out), [x, start, count](Tape& t, int self) {
        t.grad(x.id).middleCols(start, count) += t.grad(self);
    });
}

template <typename T>
Var Tape<T>::concat_cols(std::span<const Var> parts)
{
    if (parts.empty()) {
        throw StateError("concat_cols needs at least one part");
    }
    Eigen::Index rows = val(parts[0].id).rows();
    Eigen::Index cols = 0;
    for (auto p : parts) {
        check(p);
        if (val(p.id).rows() != rows) {
            throw StateError("concat_cols row mismatch");
        }
        cols += val(p.id).cols();
    }
    Mat out(rows, cols);
    Eigen::Index at = 0;
    for (auto p : parts) {
        out.middleCols(at, val(p.id).cols()) = val(p.id);
        at += val(p.id).cols();
    }
    std::vector<Var> ids(parts.begin(), parts.end());
    return push(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
        Eigen::Index off = 0;
        for (auto p : ids) {
            auto w = t.val(p.id).cols();
            t.grad(p.id) += t.grad(self).middleCols(off, w);
            off += w;
        }
    });
}

template <typename T>
Var Tape<T>::stack_rows(std::span<const Var> rows)
{
    if (rows.empty()) {
        throw StateError("stack_rows needs at least one row");
    }
    Eigen::Index cols = val(rows[0].id).cols();
    Mat out(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        check(rows[i]);
        if (val(rows[i].id).rows() != 1 || val(rows[i].id).cols() != cols) {
            throw StateError("stack_rows expects 1 x c rows of equal width");
        }
        out.row(static_cast<Eigen::Index>(i)) = val(rows[i].id).row(0);
    }
    std::vector<Var> ids(rows.begin(), rows.end());
    return push(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            t.grad(ids[i].id) += t.grad(self).row(static_cast<Eigen::Index>(i));
        }
    });
}

template <typename T>
Var Tape<T>::broadcast_rows(Var row, Eigen::Index n)
{
    check(row);
    if (val(row.id).rows() != 1) {
        throw StateError("broadcast_rows expects a 1 x c row");
    }
    Mat out = val(row.id).replicate(n, 1);
    return push(std::move(out), [row](Tape& t, int self) { t.grad(row.id) += t.grad(self).colwise().sum(); });
}

template <typename T>
Var Tape<T>::concat_flat(std::span<const Var> parts)
{
    Eigen::Index total = 0;
    for (auto p : parts) {
        check(p);
        total += val(p.id).size();
    }
    Mat out(1, total);
    Eigen::Index at = 0;
    for (auto p : parts) {
        const Mat& v = val(p.id);
        std::copy(v.data(), v.data() + v.size(), out.data() + at);
        at += v.size();
    }
    std::vector<Var> ids(parts.begin(), parts.end());
    return push(std::move(out), [ids = std::move(ids)](Tape& t, int self) {
        const Mat& g = t.grad(self);
        Eigen::Index off = 0;
        for (auto p : ids) {
            auto& gp = t.grad(p.id);
            for (Eigen::Index i = 0; i < gp.size(); ++i) {
                gp.data()[i] += g.data()[off + i];
            }
            off += gp.size();
        }
    });
}

template <typename T>
Var Tape<T>::masked_mean_rows(Var x, std::span<const std::uint8_t> mask)
{
    check(x);
    const Mat& in = val(x.id);
    if (static_cast<Eigen::Index>(mask.size()) != in.rows()) {
        throw StateError("mean mask length mismatch");
    }
    Mat out = Mat::Zero(1, in.cols());
    std::size_t count = 0;
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        if (mask[static_cast<std::size_t>(r)] != 0) {
            out += in.row(r);
            ++count;
        }
    }
    const T inv = T(1) / static_cast<T>(std::max<std::size_t>(1, count));
    out *= inv;
    std::vector<std::uint8_t> m(mask.begin(), mask.end());
    return push(std::move(out), [x, m = std::move(m), inv](Tape& t, int self) {
        const Mat& g = t.grad(self);
        auto& gx = t.grad(x.id);
        for (std::size_t r = 0; r < m.size(); ++r) {
            if (m[r] != 0) {
                gx.row(static_cast<Eigen::Index>(r)) += g.row(0) * inv;
            }
        }
    });
}

template <typename T>
Var Tape<T>::gather_rows(std::size_t table, std::span<const std::int32_t> ids)
{
    if (table >= m_params.size()) {
        throw StateError("parameter index out of range");
    }
    const Mat& tab = m_params[table].value;
    Mat out(static_cast<Eigen::Index>(ids.size()), tab.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tab.rows()) {
            throw InputError("row id " + std::to_string(ids[i]) + " out of range for " + m_params[table].name);
        }
        out.row(static_cast<Eigen::Index>(i)) = tab.row(ids[i]);
    }
    std::vector<std::int32_t> rows(ids.begin(), ids.end());
    return push(std::move(out), [table, rows = std::move(rows)](Tape& t, int self) {
        if (t.m_grads == nullptr) {
            return;
        }
        auto& gt = (*t.m_grads)[table];
        const Mat& g = t.grad(self);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            gt.row(rows[i]) += g.row(static_cast<Eigen::Index>(i));
        }
    });
}

template <typename T>
Var Tape<T>::bce(Var prob, T label)
{
    check(prob);
    if (val(prob.id).size() != 1) {
        throw StateError("bce expects a 1 x 1 probability");
    }
    constexpr T lo = T(1e-7);
    constexpr T hi = T(1) - T(1e-7);
    T s = val(prob.id)(0, 0);
    T clamped = std::clamp(s, lo, hi);
    Mat out(1, 1);
    out(0, 0) = -(label * std::log(clamped) + (T(1) - label) * std::log(T(1) - clamped));
    bool inside = s > lo && s < hi;
    return push(std::move(out), [prob, label, clamped, inside](Tape& t, int self) {
        if (!inside) {
            return;
        }
        T d = -label / clamped + (T(1) - label) / (T(1) - clamped);
        t.grad(prob.id)(0, 0) += t.grad(self)(0, 0) * d;
    });
}

template <typename T>
void Tape<T>::backward(Var output)
{
    check(output);
    if (val(output.id).size() != 1) {
        throw StateError("backward without an explicit gradient needs a scalar output");
    }
    backward(output, Mat::Ones(1, 1));
}

template <typename T>
void Tape<T>::backward(Var output, const Mat& output_grad)
{
    if (m_nodes.empty()) {
        throw StateError("backward called before any forward pass was recorded");
    }
    check(output);
    if (m_grads == nullptr) {
        throw StateError("tape was created without a gradient sink");
    }
    const Mat& v = val(output.id);
    if (output_grad.rows() != v.rows() || output_grad.cols() != v.cols()) {
        throw StateError("output gradient shape mismatch");
    }
    grad(output.id) += output_grad;
    for (int i = output.id; i >= 0; --i) {
        auto& n = m_nodes[static_cast<std::size_t>(i)];
        if (!n.has_grad) {
            continue;
        }
        if (n.back) {
            n.back(*this, i);
        } else if (n.param_index != static_cast<std::size_t>(-1)) {
            (*m_grads)[n.param_index] += n.grad;
        }
    }
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class GradientSet<float>;
template class GradientSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace prodsearch
