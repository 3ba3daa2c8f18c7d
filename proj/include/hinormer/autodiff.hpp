#pragma once

#include "hinormer/numeric.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hinormer::ad {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// A named learnable tensor with its accumulated gradient.
struct Parameter {
    Parameter() = default;
    Parameter(std::string name, Matrix value);

    std::string name;
    Matrix value;
    Matrix grad;
    bool trainable = true;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
    Eigen::Index size() const { return value.size(); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
public:
    Var() = default;

    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const;

    Tape* tape() const { return tape_; }
    int id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    int id_ = -1;
};

/// Records operations in execution order and replays their adjoint rules in
/// reverse. One tape per forward pass; not thread-safe.
class Tape {
public:
    /// Adjoint rule: reads grad(self) and accumulates into its inputs.
    using Backward = std::function<void(Tape&, int self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);

    /// Binds a parameter. Repeated binds of the same parameter return the same
    /// node. Frozen parameters are recorded as constants.
    Var param(Parameter& p);

    /// Records a node. `backward` may be empty for nodes that need no adjoint.
    Var record(Matrix value, std::span<const Var> inputs, Backward backward);

    /// Seeds d(loss)/d(loss) = 1 and accumulates into bound parameters.
    void backward(const Var& loss);

    const Matrix& value(int id) const { return nodes_[id].value; }
    Matrix& grad(int id);
    bool requires_grad(int id) const { return nodes_[id].requires_grad; }
    bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, int> bound_;
    bool backward_done_ = false;
};

// Differentiable operations. All inputs must live on the same tape.

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var hadamard(const Var& a, const Var& b);
/// Elementwise product with a constant matrix (dropout masks).
Var mul_constant(const Var& a, Matrix m);
/// a + row broadcast over every row of a; `row` is 1 x cols(a).
Var add_row(const Var& a, const Var& row);
Var leaky_relu(const Var& a, double slope);
Var masked_softmax(const Var& a, std::vector<std::uint8_t> mask);
Var layer_norm(const Var& x, const Var& scale, const Var& shift, double eps);
Var l2_normalize_rows(const Var& a);
Var hconcat(std::span<const Var> parts);
Var vstack(std::span<const Var> parts);
/// Row i of the result is row idx[i] of a, or a zero row when idx[i] < 0.
Var gather_rows(const Var& a, std::vector<int> idx);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// Places part k's rows at rows[k] of an n_rows x cols result.
Var assemble_rows(std::span<const Var> parts, std::vector<std::vector<int>> rows, Eigen::Index n_rows);
/// Constant sparse matrix times a.
Var spmm(std::shared_ptr<const SparseMatrix> s, const Var& a);
/// out[u,:] = w(0, group[u]) * x[u,:].
Var scale_rows_by_group(const Var& x, const Var& w, std::vector<int> group);
/// out[i,j] = left(i,0) + right(j,0).
Var pairwise_sum(const Var& left, const Var& right);
/// out[i,j] = sum_k a(0,k) * leaky(p(i,k) + q(j,k)).
Var pairwise_leaky_score(const Var& p, const Var& q, const Var& a, double slope);
Var sum(const Var& a);
/// Sum over rows of softmax cross-entropy against integer labels.
Var softmax_cross_entropy(const Var& logits, std::vector<int> labels);
/// Sum over all entries of sigmoid binary cross-entropy against 0/1 targets.
Var sigmoid_bce(const Var& logits, Matrix targets);

} // namespace hinormer::ad
