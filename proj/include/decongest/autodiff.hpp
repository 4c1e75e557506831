#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape records a
// static graph of matrix-valued nodes; backward() sweeps it once in reverse.

#include "decongest/types.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace decongest::ad {

class Tape;

class Var {
public:
    Var() = default;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    const Matrix& grad() const;
    double scalar() const { return value()(0, 0); }
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    std::size_t id() const { return id_; }
    Tape* tape() const { return tape_; }

private:
    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    using Backward = std::function<void(Tape&, std::size_t)>;

    Var constant(Matrix value) { return push(std::move(value), false, nullptr); }
    Var parameter(Matrix value) { return push(std::move(value), true, nullptr); }

    const Matrix& value(std::size_t id) const { return nodes_[id].value; }
    const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Adds g into the gradient of node id (no-op for constants).
    void accumulate(std::size_t id, const Matrix& g)
    {
        Node& node = nodes_[id];
        if (!node.requires_grad) return;
        if (node.grad.size() == 0) {
            node.grad = g;
        } else {
            node.grad += g;
        }
    }

    /// Seeds d(root)/d(root) = 1 and propagates to every parameter.
    void backward(const Var& root)
    {
        require(root.tape() == this, "backward: variable belongs to another tape");
        require(root.rows() == 1 && root.cols() == 1, "backward: root must be a scalar");
        for (Node& n : nodes_) n.grad.resize(0, 0);
        nodes_[root.id()].grad = Matrix::Ones(1, 1);
        for (std::size_t id = root.id() + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
            n.backward(*this, id);
        }
    }

    Var push(Matrix value, bool requires_grad, Backward backward)
    {
        nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(backward)});
        return Var(this, nodes_.size() - 1);
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        Backward backward;
    };
    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

namespace detail {

inline bool any_grad(const Var& a) { return a.tape()->requires_grad(a.id()); }
inline bool any_grad(const Var& a, const Var& b) { return any_grad(a) || any_grad(b); }

inline Matrix row_softmax(const Matrix& a, double tau)
{
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double mx = a.row(i).maxCoeff();
        out.row(i) = ((a.row(i).array() - mx) / tau).exp().matrix();
        out.row(i) /= out.row(i).sum();
    }
    return out;
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b)
{
    require(a.cols() == b.rows(), "matmul: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(a.value() * b.value(), detail::any_grad(a, b), [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
        if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
    });
}

inline Var operator+(const Var& a, const Var& b)
{
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(a.value() + b.value(), detail::any_grad(a, b), [ia, ib](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self));
        tp.accumulate(ib, tp.grad(self));
    });
}

inline Var operator-(const Var& a, const Var& b)
{
    require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(a.value() - b.value(), detail::any_grad(a, b), [ia, ib](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self));
        if (tp.requires_grad(ib)) tp.accumulate(ib, -tp.grad(self));
    });
}

inline Var operator*(double s, const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push(s * a.value(), detail::any_grad(a), [ia, s](Tape& tp, std::size_t self) {
        tp.accumulate(ia, s * tp.grad(self));
    });
}

inline Var operator+(const Var& a, double s)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push((a.value().array() + s).matrix(), detail::any_grad(a), [ia](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self));
    });
}

inline Var operator-(const Var& a, double s) { return a + (-s); }

/// Elementwise product of equal-shaped operands.
inline Var hadamard(const Var& a, const Var& b)
{
    require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ib = b.id();
    return t.push(a.value().cwiseProduct(b.value()), detail::any_grad(a, b), [ia, ib](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
    });
}

/// a (r x c) times a broadcast row vector (1 x c), column by column.
inline Var scale_columns(const Var& a, const Var& row)
{
    require(row.rows() == 1 && row.cols() == a.cols(), "scale_columns: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ir = row.id();
    Matrix out = a.value() * row.value().row(0).asDiagonal();
    return t.push(std::move(out), detail::any_grad(a, row), [ia, ir](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ir).row(0).asDiagonal());
        if (tp.requires_grad(ir)) tp.accumulate(ir, g.cwiseProduct(tp.value(ia)).colwise().sum());
    });
}

/// a (r x c) minus a broadcast row vector (1 x c).
inline Var sub_row(const Var& a, const Var& row)
{
    require(row.rows() == 1 && row.cols() == a.cols(), "sub_row: shape mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ir = row.id();
    Matrix out = a.value().rowwise() - row.value().row(0);
    return t.push(std::move(out), detail::any_grad(a, row), [ia, ir](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        tp.accumulate(ia, g);
        if (tp.requires_grad(ir)) tp.accumulate(ir, -g.colwise().sum());
    });
}

/// Horizontal concatenation [a b].
inline Var hcat(const Var& a, const Var& b)
{
    require(a.rows() == b.rows(), "hcat: row mismatch");
    Tape& t = *a.tape();
    const std::size_t ia = a.id(), ib = b.id();
    const Eigen::Index ca = a.cols(), cb = b.cols();
    Matrix out(a.rows(), ca + cb);
    out << a.value(), b.value();
    return t.push(std::move(out), detail::any_grad(a, b), [ia, ib, ca, cb](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        if (tp.requires_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
        if (tp.requires_grad(ib)) tp.accumulate(ib, g.rightCols(cb));
    });
}

inline Var columns(const Var& a, Eigen::Index start, Eigen::Index count)
{
    require(start >= 0 && start + count <= a.cols(), "columns: range out of bounds");
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Eigen::Index rows = a.rows(), cols = a.cols();
    return t.push(a.value().middleCols(start, count), detail::any_grad(a),
                  [ia, start, count, rows, cols](Tape& tp, std::size_t self) {
                      Matrix g = Matrix::Zero(rows, cols);
                      g.middleCols(start, count) = tp.grad(self);
                      tp.accumulate(ia, g);
                  });
}

/// Row-wise softmax of a / tau.
inline Var softmax_rows(const Var& a, double tau = 1.0)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push(detail::row_softmax(a.value(), tau), detail::any_grad(a), [ia, tau](Tape& tp, std::size_t self) {
        const Matrix& s = tp.value(self);
        const Matrix& g = tp.grad(self);
        const Vector inner = g.cwiseProduct(s).rowwise().sum();
        Matrix ga = s.cwiseProduct(g.colwise() - inner) / tau;
        tp.accumulate(ia, ga);
    });
}

/// Row-wise log-softmax of a / tau.
inline Var log_softmax_rows(const Var& a, double tau = 1.0)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    Matrix out(a.rows(), a.cols());
    const Matrix& x = a.value();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mx = x.row(i).maxCoeff();
        const auto shifted = ((x.row(i).array() - mx) / tau).eval();
        out.row(i) = (shifted - std::log(shifted.exp().sum())).matrix();
    }
    return t.push(std::move(out), detail::any_grad(a), [ia, tau](Tape& tp, std::size_t self) {
        const Matrix& g = tp.grad(self);
        const Matrix s = tp.value(self).array().exp().matrix();
        const Vector gsum = g.rowwise().sum();
        Matrix ga = (g - s.cwiseProduct(gsum.replicate(1, s.cols()))) / tau;
        tp.accumulate(ia, ga);
    });
}

/// log(1 - min(a, upper)); the clamp keeps the result finite.
inline Var log1m(const Var& a, double upper = 1.0 - 1e-12)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Matrix clamped = a.value().cwiseMin(upper);
    Matrix out = (1.0 - clamped.array()).log().matrix();
    return t.push(std::move(out), detail::any_grad(a), [ia, upper](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        const Matrix& g = tp.grad(self);
        Matrix ga(x.rows(), x.cols());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            ga(k) = x(k) < upper ? -g(k) / (1.0 - x(k)) : 0.0;
        }
        tp.accumulate(ia, ga);
    });
}

inline Var log(const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push(a.value().array().log().matrix(), detail::any_grad(a), [ia](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self).cwiseQuotient(tp.value(ia)));
    });
}

/// max(0, a), with zero subgradient at the kink.
inline Var relu(const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push(a.value().cwiseMax(0.0), detail::any_grad(a), [ia](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        tp.accumulate(ia, (x.array() > 0.0).cast<double>().matrix().cwiseProduct(tp.grad(self)));
    });
}

inline Var clamp(const Var& a, double lo, double hi)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    return t.push(a.value().cwiseMax(lo).cwiseMin(hi), detail::any_grad(a), [ia, lo, hi](Tape& tp, std::size_t self) {
        const Matrix& x = tp.value(ia);
        const auto inside = ((x.array() >= lo) && (x.array() <= hi)).cast<double>().matrix();
        tp.accumulate(ia, inside.cwiseProduct(tp.grad(self)));
    });
}

inline Var sum(const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Eigen::Index r = a.rows(), c = a.cols();
    Matrix out(1, 1);
    out(0, 0) = a.value().sum();
    return t.push(std::move(out), detail::any_grad(a), [ia, r, c](Tape& tp, std::size_t self) {
        tp.accumulate(ia, Matrix::Constant(r, c, tp.grad(self)(0, 0)));
    });
}

inline Var mean(const Var& a) { return (1.0 / static_cast<double>(a.value().size())) * sum(a); }

/// Column sums as a 1 x c row.
inline Var col_sum(const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Eigen::Index r = a.rows();
    return t.push(a.value().colwise().sum(), detail::any_grad(a), [ia, r](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self).replicate(r, 1));
    });
}

/// Row sums as an r x 1 column.
inline Var row_sum(const Var& a)
{
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Eigen::Index c = a.cols();
    return t.push(a.value().rowwise().sum(), detail::any_grad(a), [ia, c](Tape& tp, std::size_t self) {
        tp.accumulate(ia, tp.grad(self).replicate(1, c));
    });
}

/// out_i = a(i, index[i]).
inline Var pick(const Var& a, const std::vector<int>& index)
{
    require(static_cast<Eigen::Index>(index.size()) == a.rows(), "pick: one index per row required");
    Tape& t = *a.tape();
    const std::size_t ia = a.id();
    const Eigen::Index r = a.rows(), c = a.cols();
    Matrix out(r, 1);
    for (Eigen::Index i = 0; i < r; ++i) out(i, 0) = a.value()(i, index[i]);
    return t.push(std::move(out), detail::any_grad(a), [ia, index, r, c](Tape& tp, std::size_t self) {
        Matrix g = Matrix::Zero(r, c);
        for (Eigen::Index i = 0; i < r; ++i) g(i, index[i]) = tp.grad(self)(i, 0);
        tp.accumulate(ia, g);
    });
}

}  // namespace decongest::ad
