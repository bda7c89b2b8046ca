#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace chirascope::detail {

/// rows x dim matrix of doubles, row-major.
struct RowMatrix {
    std::size_t rows = 0;
    std::size_t dim = 0;
    std::vector<double> values;

    std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

/// G[i][j] = <a_i, b_j> for all i <= j. Only valid when the full product is
/// symmetric (b = a, or b = P a with P a symmetric permutation); the lower
/// triangle of the result mirrors the upper one. Each entry is accumulated
/// over k = 0..dim-1 in order, so values do not depend on the blocking.
std::vector<double> symmetric_gram(const RowMatrix& a, const RowMatrix& b);

}  // namespace chirascope::detail
