// Copyright 2026 The prodsearch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over dense row-major matrices.
// Parameters live in a ParameterSet; a Tape records one forward pass and
// accumulates parameter gradients into a caller-owned GradientSet.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace prodsearch {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
struct Parameter {
    std::string name;
    Matrix<T> value;
    /// Excluded from decoupled weight decay (biases, norms).
    bool no_decay = false;
};

template <typename T>
class ParameterSet {
  public:
    std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, bool no_decay = false);

    std::size_t size() const noexcept { return m_params.size(); }
    Parameter<T>& operator[](std::size_t i) { return m_params[i]; }
    const Parameter<T>& operator[](std::size_t i) const { return m_params[i]; }
    auto begin() const { return m_params.begin(); }
    auto end() const { return m_params.end(); }
    auto begin() { return m_params.begin(); }
    auto end() { return m_params.end(); }

    std::size_t scalar_count() const;

    template <typename U>
    ParameterSet<U> cast() const
    {
        ParameterSet<U> out;
        for (const auto& p : m_params) {
            auto i = out.add(p.name, p.value.rows(), p.value.cols(), p.no_decay);
            out[i].value = p.value.template cast<U>();
        }
        return out;
    }

  private:
    std::vector<Parameter<T>> m_params;
};

/// Gradient buffers shaped like a ParameterSet.
template <typename T>
class GradientSet {
  public:
    GradientSet() = default;
    explicit GradientSet(const ParameterSet<T>& params);

    Matrix<T>& operator[](std::size_t i) { return m_grads[i]; }
    const Matrix<T>& operator[](std::size_t i) const { return m_grads[i]; }
    std::size_t size() const noexcept { return m_grads.size(); }

    void zero();
    GradientSet& operator+=(const GradientSet& other);
    void scale(T factor);

  private:
    std::vector<Matrix<T>> m_grads;
};

/// Deterministic uniform source shared by dropout masks; avoids relying on
/// implementation-defined standard distributions.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : m_engine(seed) {}
    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(m_engine() >> 11) * 0x1.0p-53; }
    std::uint64_t next() { return m_engine(); }

  private:
    std::mt19937_64 m_engine;
};

struct Var {
    int id = -1;
    bool valid() const noexcept { return id >= 0; }
};

template <typename T>
class Tape {
  public:
    using Mat = Matrix<T>;

    /// `grads` may be null for inference-only passes.
    Tape(const ParameterSet<T>& params, GradientSet<T>* grads);

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Mat& value(Var v) const;
    std::size_t node_count() const noexcept { return m_nodes.size(); }

    Var param(std::size_t index);
    Var constant(Mat value);

    Var matmul(Var a, Var b);
    /// a * b^T
    Var matmul_nt(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    /// Adds a 1 x c row to every row of a.
    Var add_row(Var a, Var row);
    Var scale(Var a, T factor);
    Var relu(Var a);
    Var sigmoid(Var a);
    Var abs(Var a);
    Var hadamard(Var a, Var b);
    /// Row-wise normalization followed by gamma * x + beta (both 1 x c).
    Var layer_norm(Var x, Var gamma, Var beta, T eps = T(1e-5));
    /// Row-wise softmax over columns whose key_mask entry is 1. A row with no
    /// unmasked column yields zeros.
    Var masked_softmax(Var logits, std::span<const std::uint8_t> key_mask);
    /// Inverted dropout; identity when rate == 0.
    Var dropout(Var x, T rate, Rng& rng);
    Var slice_cols(Var x, Eigen::Index start, Eigen::Index count);
    Var concat_cols(std::span<const Var> parts);
    /// Stacks 1 x c rows into an n x c matrix.
    Var stack_rows(std::span<const Var> rows);
    Var broadcast_rows(Var row, Eigen::Index n);
    /// Concatenates the row-major flattening of every part into 1 x N.
    Var concat_flat(std::span<const Var> parts);
    /// Mean over rows with mask 1; zero row when none.
    Var masked_mean_rows(Var x, std::span<const std::uint8_t> mask);
    /// Rows of parameter `table` selected by ids. Gradients scatter into the table.
    Var gather_rows(std::size_t table, std::span<const std::int32_t> ids);
    /// Binary cross-entropy of a 1 x 1 probability; probability clamped to
    /// [1e-7, 1 - 1e-7].
    Var bce(Var prob, T label);

    /// Reverse sweep from a scalar output (seed gradient 1).
    void backward(Var output);
    /// Reverse sweep with an explicit output gradient.
    void backward(Var output, const Mat& output_grad);

  private:
    struct Node {
        Mat value;
        const Mat* ref = nullptr;
        Mat grad;
        bool has_grad = false;
        std::size_t param_index = static_cast<std::size_t>(-1);
        std::function<void(Tape&, int)> back;
    };

    const Mat& val(int id) const;
    Mat& grad(int id);
    Var push(Mat value, std::function<void(Tape&, int)> back);
    void check(Var v) const;

    const ParameterSet<T>& m_params;
    GradientSet<T>* m_grads;
    std::vector<Node> m_nodes;
    std::vector<int> m_param_nodes;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class GradientSet<float>;
extern template class GradientSet<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace prodsearch
