#include "ingsl/sparse.hpp"

#include <algorithm>
#include <cmath>

namespace ingsl {

CsrMatrix SparseAdjacency::materialize() const {
    CsrMatrix m = *structure;
    const Matrix& v = values.value();
    for (Index k = 0; k < m.nonZeros(); ++k) m.valuePtr()[k] = v(k, 0);
    return m;
}

CsrMatrix csr_from_triplets(Index rows, Index cols, const std::vector<Eigen::Triplet<double, int>>& triplets) {
    CsrMatrix m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

std::vector<Index> entry_rows(const CsrMatrix& m) {
    std::vector<Index> out(static_cast<std::size_t>(m.nonZeros()));
    for (Index r = 0; r < m.outerSize(); ++r) {
        for (Index k = m.outerIndexPtr()[r]; k < m.outerIndexPtr()[r + 1]; ++k) out[static_cast<std::size_t>(k)] = r;
    }
    return out;
}

std::vector<Index> entry_cols(const CsrMatrix& m) {
    return std::vector<Index>(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
}

Index find_entry(const CsrMatrix& m, Index row, Index col) {
    const int* begin = m.innerIndexPtr() + m.outerIndexPtr()[row];
    const int* end = m.innerIndexPtr() + m.outerIndexPtr()[row + 1];
    const int* it = std::lower_bound(begin, end, static_cast<int>(col));
    if (it == end || *it != col) return -1;
    return static_cast<Index>(it - m.innerIndexPtr());
}

SparseAdjacency lift(Tape& tape, const CsrMatrix& m, bool requires_grad) {
    auto structure = std::make_shared<CsrMatrix>(m);
    structure->makeCompressed();
    Matrix v = Eigen::Map<const Matrix>(structure->valuePtr(), structure->nonZeros(), 1);
    return SparseAdjacency{std::move(structure), tape.leaf(std::move(v), requires_grad)};
}

Tensor spmm(const SparseAdjacency& a, const Tensor& x) {
    const CsrMatrix& s = *a.structure;
    if (s.cols() != x.rows()) {
        throw ShapeError("spmm: adjacency " + shape_string(s.rows(), s.cols()) + " does not match features " +
                         shape_string(x.rows(), x.cols()));
    }
    if (a.values.rows() != s.nonZeros() || a.values.cols() != 1) {
        throw ShapeError("spmm: edge values " + shape_string(a.values.rows(), a.values.cols()) + " for " +
                         std::to_string(s.nonZeros()) + " stored entries");
    }
    const Matrix& xv = x.value();
    const Matrix& ev = a.values.value();
    Matrix out = Matrix::Zero(s.rows(), xv.cols());
    for (Index r = 0; r < s.rows(); ++r) {
        for (Index k = s.outerIndexPtr()[r]; k < s.outerIndexPtr()[r + 1]; ++k) {
            out.row(r) += ev(k, 0) * xv.row(s.innerIndexPtr()[k]);
        }
    }
    auto structure = a.structure;
    Tensor values = a.values;
    return x.tape().record(std::move(out), {values, x}, [structure, values, x](Tape& tape, const Matrix& g) {
        const CsrMatrix& s = *structure;
        const Matrix& ev = values.value();
        const Matrix& xv = x.value();
        if (values.requires_grad()) {
            Matrix dv(s.nonZeros(), 1);
            for (Index r = 0; r < s.rows(); ++r) {
                for (Index k = s.outerIndexPtr()[r]; k < s.outerIndexPtr()[r + 1]; ++k) {
                    dv(k, 0) = g.row(r).dot(xv.row(s.innerIndexPtr()[k]));
                }
            }
            tape.accumulate(values, dv);
        }
        if (x.requires_grad()) {
            Matrix dx = Matrix::Zero(xv.rows(), xv.cols());
            for (Index r = 0; r < s.rows(); ++r) {
                for (Index k = s.outerIndexPtr()[r]; k < s.outerIndexPtr()[r + 1]; ++k) {
                    dx.row(s.innerIndexPtr()[k]) += ev(k, 0) * g.row(r);
                }
            }
            tape.accumulate(x, dx);
        }
    });
}

Tensor degree_normalize(const CsrMatrix& structure, const Tensor& values) {
    if (values.rows() != structure.nonZeros() || values.cols() != 1) {
        throw ShapeError("degree_normalize: values " + shape_string(values.rows(), values.cols()) + " for " +
                         std::to_string(structure.nonZeros()) + " stored entries");
    }
    if (structure.rows() != structure.cols()) throw ShapeError("degree_normalize: adjacency must be square");
    const Matrix& v = values.value();
    const Index n = structure.rows();
    const auto rows = entry_rows(structure);
    Vector degree = Vector::Zero(n);
    for (Index k = 0; k < structure.nonZeros(); ++k) degree(rows[k]) += v(k, 0);
    for (Index i = 0; i < n; ++i) {
        if (!(degree(i) > 0.0)) {
            throw DomainError("degree_normalize: non-positive degree at node " + std::to_string(i));
        }
    }
    const Vector inv_sqrt = degree.cwiseSqrt().cwiseInverse();
    Matrix out(structure.nonZeros(), 1);
    for (Index k = 0; k < structure.nonZeros(); ++k) {
        out(k, 0) = v(k, 0) * inv_sqrt(rows[k]) * inv_sqrt(structure.innerIndexPtr()[k]);
    }
    auto shared = std::make_shared<const CsrMatrix>(structure);
    return values.tape().record(
        std::move(out), {values}, [shared, rows, inv_sqrt, degree, values](Tape& tape, const Matrix& g) {
            const CsrMatrix& s = *shared;
            const Matrix& v = values.value();
            const Index n = s.rows();
            // out_k depends on v_k directly and on every value in rows row(k) and col(k) through D.
            Vector via_degree = Vector::Zero(n);
            Matrix dv(s.nonZeros(), 1);
            for (Index k = 0; k < s.nonZeros(); ++k) {
                const Index i = rows[k];
                const Index j = s.innerIndexPtr()[k];
                const double o = v(k, 0) * inv_sqrt(i) * inv_sqrt(j);
                dv(k, 0) = g(k, 0) * inv_sqrt(i) * inv_sqrt(j);
                via_degree(i) += -0.5 * g(k, 0) * o / degree(i);
                via_degree(j) += -0.5 * g(k, 0) * o / degree(j);
            }
            for (Index k = 0; k < s.nonZeros(); ++k) dv(k, 0) += via_degree(rows[k]);
            tape.accumulate(values, dv);
        });
}

Tensor scatter_add(const Vector& base, std::span<const Index> positions, const Tensor& src, double factor) {
    if (src.cols() != 1 || src.rows() != static_cast<Index>(positions.size())) {
        throw ShapeError("scatter_add: source " + shape_string(src.rows(), src.cols()) + " for " +
                         std::to_string(positions.size()) + " positions");
    }
    Matrix out = base;
    const Matrix& sv = src.value();
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const Index p = positions[k];
        if (p < 0 || p >= base.size()) throw ShapeError("scatter_add: position out of range");
        out(p, 0) += factor * sv(static_cast<Index>(k), 0);
    }
    std::vector<Index> pos(positions.begin(), positions.end());
    return src.tape().record(std::move(out), {src}, [src, pos = std::move(pos), factor](Tape& tape, const Matrix& g) {
        Matrix ds(static_cast<Index>(pos.size()), 1);
        for (std::size_t k = 0; k < pos.size(); ++k) ds(static_cast<Index>(k), 0) = factor * g(pos[k], 0);
        tape.accumulate(src, ds);
    });
}

}  // namespace ingsl
