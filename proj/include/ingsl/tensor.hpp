#pragma once

#include "ingsl/errors.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ingsl {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

std::string shape_string(Index rows, Index cols);

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Tensor {
public:
    Tensor() = default;

    const Matrix& value() const;
    /// Accumulated gradient. Zero-filled when the tensor was not reached by backward.
    const Matrix& grad() const;
    bool requires_grad() const;

    Index rows() const { return value().rows(); }
    Index cols() const { return value().cols(); }
    Index size() const { return value().size(); }
    bool is_scalar() const { return rows() == 1 && cols() == 1; }
    double item() const;

    bool valid() const { return tape_ != nullptr; }
    Tape& tape() const;
    std::size_t id() const { return id_; }

private:
    friend class Tape;
    Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Define-by-run record of executed operations.
///
/// Nodes are appended in execution order, so operands always precede the node
/// that consumes them. Storage is a deque: references returned by
/// Tensor::value() stay valid while further operations are recorded.
class Tape {
public:
    /// Receives the gradient of the output and pushes contributions to operands
    /// through Tape::accumulate.
    using BackwardFn = std::function<void(Tape&, const Matrix& grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Tensor leaf(Matrix value, bool requires_grad = true);
    Tensor constant(Matrix value) { return leaf(std::move(value), false); }

    /// Appends an operation result. requires_grad is inherited from the operands.
    Tensor record(Matrix value, std::initializer_list<Tensor> operands, BackwardFn backward);
    Tensor record(Matrix value, std::span<const Tensor> operands, BackwardFn backward);

    /// Adds `contribution` to the gradient of `t`; no-op for tensors without requires_grad.
    void accumulate(const Tensor& t, const Eigen::Ref<const Matrix>& contribution);
    /// Same, for the grad of a single coordinate.
    void accumulate_at(const Tensor& t, Index row, Index col, double contribution);

    void backward(const Tensor& loss);
    void zero_grad();

    std::size_t size() const { return nodes_.size(); }
    /// Number of nodes whose backward rule ran in the last backward() call.
    std::size_t backward_visits() const { return backward_visits_; }

private:
    friend class Tensor;

    struct Node {
        Matrix value;
        Matrix grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Node& node(const Tensor& t);
    const Node& node(const Tensor& t) const;
    void ensure_grad(Node& n);

    std::deque<Node> nodes_;
    bool backward_done_ = false;
    std::size_t backward_visits_ = 0;
};

// ---------------------------------------------------------------------------
// Dense operations. All operands must live on the same tape.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double factor, const Tensor& a) { return scale(a, factor); }

enum class Elementwise { kRelu, kSigmoid, kExp, kLog };

Tensor elementwise(Elementwise op, const Tensor& x);
inline Tensor relu(const Tensor& x) { return elementwise(Elementwise::kRelu, x); }
inline Tensor sigmoid(const Tensor& x) { return elementwise(Elementwise::kSigmoid, x); }
inline Tensor exp(const Tensor& x) { return elementwise(Elementwise::kExp, x); }
inline Tensor log(const Tensor& x) { return elementwise(Elementwise::kLog, x); }

double sigmoid(double x);

enum class DegenerateRow {
    kThrow,     ///< rows with norm below 1e-12 are an error
    kPassZero,  ///< such rows map to zero and receive no gradient
};

Tensor row_l2_normalize(const Tensor& x, DegenerateRow policy = DegenerateRow::kThrow);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// out.row(r) = x.row(indices[r]). Gradients scatter-add back.
Tensor gather_rows(const Tensor& x, std::span<const Index> indices);
Tensor concat_cols(const Tensor& a, const Tensor& b);
/// Per-row inner product; [n x d] . [n x d] -> [n x 1].
Tensor row_dot(const Tensor& a, const Tensor& b);
/// Per-row log-sum-exp -> [n x 1]. Entries where `include` is false are left out.
Tensor row_logsumexp(const Tensor& x, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& include);
Tensor row_logsumexp(const Tensor& x);

// ---------------------------------------------------------------------------
// Finite-difference verification.

using ScalarFunction = std::function<Tensor(Tape&, std::span<const Tensor>)>;

/// Max over all input coordinates of |analytic - numeric| / max(1, |numeric|)
/// with central differences of the given step.
double gradient_check(const ScalarFunction& f, std::span<const Matrix> inputs, double step = 1e-5);

}  // namespace ingsl
