#include "ingsl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ingsl {

std::string shape_string(Index rows, Index cols) {
    return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

namespace {

void require_same_tape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.valid() || !b.valid()) throw StateError(std::string(op) + ": undefined tensor");
    if (&a.tape() != &b.tape()) throw StateError(std::string(op) + ": operands recorded on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
    }
}

constexpr double kMinRowNorm = 1e-12;

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tape& Tensor::tape() const {
    if (tape_ == nullptr) throw StateError("tensor is not bound to a tape");
    return *tape_;
}

const Matrix& Tensor::value() const { return tape().node(*this).value; }

const Matrix& Tensor::grad() const {
    const auto& n = tape().node(*this);
    if (!n.requires_grad) throw StateError("tensor does not require grad");
    if (n.grad.size() != n.value.size()) throw StateError("gradient not available; call backward() first");
    return n.grad;
}

bool Tensor::requires_grad() const { return tape().node(*this).requires_grad; }

double Tensor::item() const {
    if (!is_scalar()) throw ShapeError("item() on non-scalar tensor " + shape_string(rows(), cols()));
    return value()(0, 0);
}

// ---------------------------------------------------------------------------
// Tape

Tape::Node& Tape::node(const Tensor& t) {
    if (t.tape_ != this || t.id_ >= nodes_.size()) throw StateError("tensor does not belong to this tape");
    return nodes_[t.id_];
}

const Tape::Node& Tape::node(const Tensor& t) const {
    if (t.tape_ != this || t.id_ >= nodes_.size()) throw StateError("tensor does not belong to this tape");
    return nodes_[t.id_];
}

void Tape::ensure_grad(Node& n) {
    if (n.grad.rows() != n.value.rows() || n.grad.cols() != n.value.cols()) {
        n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
}

Tensor Tape::leaf(Matrix value, bool requires_grad) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, nullptr});
    return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::record(Matrix value, std::initializer_list<Tensor> operands, BackwardFn backward) {
    return record(std::move(value), std::span<const Tensor>(operands.begin(), operands.size()), std::move(backward));
}

Tensor Tape::record(Matrix value, std::span<const Tensor> operands, BackwardFn backward) {
    bool needs = false;
    for (const auto& op : operands) {
        if (op.tape_ != this) throw StateError("operand recorded on a different tape");
        needs = needs || nodes_[op.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : nullptr});
    return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(const Tensor& t, const Eigen::Ref<const Matrix>& contribution) {
    auto& n = node(t);
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad += contribution;
}

void Tape::accumulate_at(const Tensor& t, Index row, Index col, double contribution) {
    auto& n = node(t);
    if (!n.requires_grad) return;
    ensure_grad(n);
    n.grad(row, col) += contribution;
}

void Tape::backward(const Tensor& loss) {
    auto& root = node(loss);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw ShapeError("backward: loss must be scalar, got " + shape_string(root.value.rows(), root.value.cols()));
    }
    if (backward_done_) throw StateError("backward: gradients already populated; call zero_grad() first");
    backward_done_ = true;
    backward_visits_ = 0;

    for (auto& n : nodes_) {
        if (n.requires_grad) ensure_grad(n);
    }
    if (!root.requires_grad) return;
    root.grad(0, 0) += 1.0;

    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        ++backward_visits_;
        auto& n = nodes_[i];
        if (n.backward && n.requires_grad) n.backward(*this, n.grad);
    }
}

void Tape::zero_grad() {
    for (auto& n : nodes_) {
        if (n.requires_grad) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    }
    backward_done_ = false;
}

// ---------------------------------------------------------------------------
// Dense operations

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
    }
    Matrix out = a.value() * b.value();
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        if (a.requires_grad()) tape.accumulate(a, g * b.value().transpose());
        if (b.requires_grad()) tape.accumulate(b, a.value().transpose() * g);
    });
}

Tensor transpose(const Tensor& a) {
    Matrix out = a.value().transpose();
    return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g.transpose());
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "add");
    require_same_shape(a, b, "add");
    Matrix out = a.value() + b.value();
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, g);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "sub");
    require_same_shape(a, b, "sub");
    Matrix out = a.value() - b.value();
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g);
        tape.accumulate(b, -g);
    });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "hadamard");
    require_same_shape(a, b, "hadamard");
    Matrix out = a.value().cwiseProduct(b.value());
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        if (a.requires_grad()) tape.accumulate(a, g.cwiseProduct(b.value()));
        if (b.requires_grad()) tape.accumulate(b, g.cwiseProduct(a.value()));
    });
}

Tensor scale(const Tensor& a, double factor) {
    Matrix out = factor * a.value();
    return a.tape().record(std::move(out), {a}, [a, factor](Tape& tape, const Matrix& g) {
        tape.accumulate(a, factor * g);
    });
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor elementwise(Elementwise op, const Tensor& x) {
    const Matrix& v = x.value();
    Matrix out(v.rows(), v.cols());
    switch (op) {
        case Elementwise::kRelu:
            out = v.cwiseMax(0.0);
            break;
        case Elementwise::kSigmoid:
            out = v.unaryExpr([](double t) { return sigmoid(t); });
            break;
        case Elementwise::kExp:
            out = v.array().exp().matrix();
            break;
        case Elementwise::kLog:
            for (Index i = 0; i < v.size(); ++i) {
                if (!(v.data()[i] > 0.0)) {
                    throw DomainError("log: non-positive input " + std::to_string(v.data()[i]) + " at flat index " +
                                      std::to_string(i));
                }
            }
            out = v.array().log().matrix();
            break;
    }
    Matrix yv = (op == Elementwise::kSigmoid || op == Elementwise::kExp) ? out : Matrix();
    return x.tape().record(std::move(out), {x}, [x, op, yv = std::move(yv)](Tape& t, const Matrix& g) {
        const Matrix& xv = x.value();
        switch (op) {
            case Elementwise::kRelu:
                // derivative at exactly 0 is taken as 0
                t.accumulate(x, g.cwiseProduct((xv.array() > 0.0).cast<double>().matrix()));
                break;
            case Elementwise::kSigmoid:
                t.accumulate(x, g.cwiseProduct((yv.array() * (1.0 - yv.array())).matrix()));
                break;
            case Elementwise::kExp:
                t.accumulate(x, g.cwiseProduct(yv));
                break;
            case Elementwise::kLog:
                t.accumulate(x, g.cwiseQuotient(xv));
                break;
        }
    });
}

Tensor row_l2_normalize(const Tensor& x, DegenerateRow policy) {
    const Matrix& v = x.value();
    Vector norms = v.rowwise().norm();
    Matrix out(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) {
        if (norms(i) < kMinRowNorm) {
            if (policy == DegenerateRow::kThrow) {
                throw DomainError("row_l2_normalize: degenerate row " + std::to_string(i) + " (norm " +
                                  std::to_string(norms(i)) + ")");
            }
            out.row(i).setZero();
        } else {
            out.row(i) = v.row(i) / norms(i);
        }
    }
    Matrix unit = out;
    return x.tape().record(std::move(out), {x}, [x, norms, unit = std::move(unit)](Tape& tape, const Matrix& g) {
        Matrix dx = Matrix::Zero(g.rows(), g.cols());
        for (Index i = 0; i < g.rows(); ++i) {
            if (norms(i) < kMinRowNorm) continue;
            // d(x/|x|) = (I - u u^T) / |x|
            const double proj = g.row(i).dot(unit.row(i));
            dx.row(i) = (g.row(i) - proj * unit.row(i)) / norms(i);
        }
        tape.accumulate(x, dx);
    });
}

Tensor sum(const Tensor& x) {
    Matrix out(1, 1);
    out(0, 0) = x.value().sum();
    return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Matrix& g) {
        tape.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(x.size());
    Matrix out(1, 1);
    out(0, 0) = x.value().sum() * inv;
    return x.tape().record(std::move(out), {x}, [x, inv](Tape& tape, const Matrix& g) {
        tape.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0) * inv));
    });
}

Tensor gather_rows(const Tensor& x, std::span<const Index> indices) {
    const Matrix& v = x.value();
    Matrix out(static_cast<Index>(indices.size()), v.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const Index src = indices[r];
        if (src < 0 || src >= v.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(src) + " out of range for " +
                             shape_string(v.rows(), v.cols()));
        }
        out.row(static_cast<Index>(r)) = v.row(src);
    }
    std::vector<Index> idx(indices.begin(), indices.end());
    return x.tape().record(std::move(out), {x}, [x, idx = std::move(idx)](Tape& tape, const Matrix& g) {
        Matrix dx = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) dx.row(idx[r]) += g.row(static_cast<Index>(r));
        tape.accumulate(x, dx);
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "concat_cols");
    if (a.rows() != b.rows()) {
        throw ShapeError("concat_cols: row counts differ " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
    }
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    const Index split = a.cols();
    return a.tape().record(std::move(out), {a, b}, [a, b, split](Tape& tape, const Matrix& g) {
        tape.accumulate(a, g.leftCols(split));
        tape.accumulate(b, g.rightCols(g.cols() - split));
    });
}

Tensor row_dot(const Tensor& a, const Tensor& b) {
    require_same_tape(a, b, "row_dot");
    require_same_shape(a, b, "row_dot");
    Matrix out = a.value().cwiseProduct(b.value()).rowwise().sum();
    return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Matrix& g) {
        const Vector col = Eigen::Map<const Vector>(g.data(), g.rows());
        if (a.requires_grad()) tape.accumulate(a, col.asDiagonal() * b.value());
        if (b.requires_grad()) tape.accumulate(b, col.asDiagonal() * a.value());
    });
}

Tensor row_logsumexp(const Tensor& x,
                     const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& include) {
    const Matrix& v = x.value();
    if (include.rows() != v.rows() || include.cols() != v.cols()) {
        throw ShapeError("row_logsumexp: mask " + shape_string(include.rows(), include.cols()) +
                         " does not match input " + shape_string(v.rows(), v.cols()));
    }
    Matrix out(v.rows(), 1);
    Matrix weights = Matrix::Zero(v.rows(), v.cols());
    for (Index i = 0; i < v.rows(); ++i) {
        double peak = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < v.cols(); ++j) {
            if (include(i, j)) peak = std::max(peak, v(i, j));
        }
        if (!std::isfinite(peak)) throw DomainError("row_logsumexp: row " + std::to_string(i) + " has no entries");
        double total = 0.0;
        for (Index j = 0; j < v.cols(); ++j) {
            if (include(i, j)) {
                weights(i, j) = std::exp(v(i, j) - peak);
                total += weights(i, j);
            }
        }
        weights.row(i) /= total;
        out(i, 0) = peak + std::log(total);
    }
    return x.tape().record(std::move(out), {x}, [x, weights = std::move(weights)](Tape& tape, const Matrix& g) {
        const Vector col = Eigen::Map<const Vector>(g.data(), g.rows());
        tape.accumulate(x, col.asDiagonal() * weights);
    });
}

Tensor row_logsumexp(const Tensor& x) {
    return row_logsumexp(x, Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(
                                x.rows(), x.cols(), true));
}

// ---------------------------------------------------------------------------

double gradient_check(const ScalarFunction& f, std::span<const Matrix> inputs, double step) {
    if (!(step > 1e-8 && step < 1e-3)) throw DomainError("gradient_check: step must lie in (1e-8, 1e-3)");

    auto evaluate = [&](std::span<const Matrix> values) {
        Tape tape;
        std::vector<Tensor> leaves;
        leaves.reserve(values.size());
        for (const auto& v : values) leaves.push_back(tape.leaf(v, false));
        Tensor out = f(tape, leaves);
        if (!out.is_scalar()) {
            throw ShapeError("gradient_check: function output must be scalar, got " +
                             shape_string(out.rows(), out.cols()));
        }
        return out.item();
    };

    Tape tape;
    std::vector<Tensor> leaves;
    leaves.reserve(inputs.size());
    for (const auto& v : inputs) leaves.push_back(tape.leaf(v, true));
    Tensor out = f(tape, leaves);
    if (!out.is_scalar()) {
        throw ShapeError("gradient_check: function output must be scalar, got " + shape_string(out.rows(), out.cols()));
    }
    tape.backward(out);

    std::vector<Matrix> probe(inputs.begin(), inputs.end());
    double worst = 0.0;
    for (std::size_t k = 0; k < probe.size(); ++k) {
        const Matrix analytic = leaves[k].grad();
        for (Index i = 0; i < probe[k].size(); ++i) {
            const double saved = probe[k].data()[i];
            probe[k].data()[i] = saved + step;
            const double up = evaluate(probe);
            probe[k].data()[i] = saved - step;
            const double down = evaluate(probe);
            probe[k].data()[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = std::abs(analytic.data()[i] - numeric) / std::max(1.0, std::abs(numeric));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace ingsl
