#include "helpers.hpp"
#include "ingsl/sparse.hpp"

#include <doctest.h>

using namespace ingsl;
using ingsl::test::random_matrix;

namespace {

CsrMatrix random_sparse(Index n, double density, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::Triplet<double, int>> trip;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            if (u(rng) < density) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), u(rng) + 0.1);
    return csr_from_triplets(n, n, trip);
}

}  // namespace

TEST_CASE("spmm matches dense product") {
    std::mt19937_64 rng(1);
    const CsrMatrix s = random_sparse(12, 0.3, rng);
    const Matrix x = random_matrix(12, 4, rng);
    Tape t;
    const Matrix got = spmm(lift(t, s), t.constant(x)).value();
    CHECK((got - Matrix(s.toDense()) * x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("entry helpers follow storage order") {
    std::vector<Eigen::Triplet<double, int>> trip{{0, 2, 1.0}, {0, 1, 2.0}, {2, 0, 3.0}, {0, 1, 0.5}};
    const CsrMatrix m = csr_from_triplets(3, 3, trip);
    CHECK(m.nonZeros() == 3);
    CHECK(entry_rows(m) == std::vector<Index>{0, 0, 2});
    CHECK(entry_cols(m) == std::vector<Index>{1, 2, 0});
    CHECK(m.valuePtr()[0] == 2.5);
    CHECK(find_entry(m, 2, 0) == 2);
    CHECK(find_entry(m, 1, 1) == -1);
}

TEST_CASE("degree_normalize matches dense formula") {
    std::mt19937_64 rng(2);
    CsrMatrix s = random_sparse(8, 0.4, rng);
    for (Index i = 0; i < 8; ++i) s.coeffRef(i, i) += 1.0;
    s.makeCompressed();
    Tape t;
    const Matrix out = degree_normalize(s, t.constant(Eigen::Map<const Matrix>(s.valuePtr(), s.nonZeros(), 1))).value();
    const Matrix d = s.toDense();
    const Vector deg = d.rowwise().sum();
    const auto rows = entry_rows(s);
    const auto cols = entry_cols(s);
    for (Index k = 0; k < s.nonZeros(); ++k) {
        const double expect = d(rows[k], cols[k]) / std::sqrt(deg(rows[k]) * deg(cols[k]));
        CHECK(std::abs(out(k, 0) - expect) < 1e-12);
    }
}

TEST_CASE("scatter_add") {
    Vector base(4);
    base << 1, 2, 3, 4;
    Tape t;
    Matrix src(2, 1);
    src << 10, 20;
    const std::vector<Index> pos{3, 1};
    const Matrix out = scatter_add(base, pos, t.constant(src), 0.5).value();
    CHECK(out(0, 0) == 1.0);
    CHECK(out(1, 0) == 12.0);
    CHECK(out(3, 0) == 9.0);
    const std::vector<Index> bad{4, 0};
    CHECK_THROWS_AS(scatter_add(base, bad, t.constant(src), 1.0), ShapeError);
}
