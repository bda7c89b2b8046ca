#include "core/gram.hpp"

#include <algorithm>
#include <cstring>

namespace chirascope::detail {

namespace {

constexpr std::size_t kRowsPerPanel = 4;
constexpr std::size_t kColsPerPanel = 8;
constexpr std::size_t kDepthBlock = 128;

using v4d = double __attribute__((vector_size(32)));

inline v4d load4(const double* p) {
    v4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

inline void store4(double* p, v4d v) { std::memcpy(p, &v, sizeof v); }

// panel p holds rows [p*width, p*width + width) laid out k-major, zero-padded.
std::vector<double> pack_panels(const RowMatrix& m, std::size_t width, std::size_t panels) {
    std::vector<double> packed(panels * m.dim * width, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const std::size_t p = r / width;
        const std::size_t lane = r % width;
        double* base = packed.data() + p * m.dim * width + lane;
        const double* src = m.values.data() + r * m.dim;
        for (std::size_t k = 0; k < m.dim; ++k) base[k * width] = src[k];
    }
    return packed;
}

// acc tile (4 x 8) stored row-major in `tile`; continues the running sums.
void micro_kernel(const double* a_panel, const double* b_panel, std::size_t depth, double* tile) {
    v4d acc[kRowsPerPanel][2];
    for (std::size_t r = 0; r < kRowsPerPanel; ++r) {
        acc[r][0] = load4(tile + r * kColsPerPanel);
        acc[r][1] = load4(tile + r * kColsPerPanel + 4);
    }
    for (std::size_t k = 0; k < depth; ++k) {
        const double* a = a_panel + k * kRowsPerPanel;
        const v4d b0 = load4(b_panel + k * kColsPerPanel);
        const v4d b1 = load4(b_panel + k * kColsPerPanel + 4);
        for (std::size_t r = 0; r < kRowsPerPanel; ++r) {
            const v4d ar = {a[r], a[r], a[r], a[r]};
            acc[r][0] += ar * b0;
            acc[r][1] += ar * b1;
        }
    }
    for (std::size_t r = 0; r < kRowsPerPanel; ++r) {
        store4(tile + r * kColsPerPanel, acc[r][0]);
        store4(tile + r * kColsPerPanel + 4, acc[r][1]);
    }
}

}  // namespace

std::vector<double> symmetric_gram(const RowMatrix& a, const RowMatrix& b) {
    const std::size_t n = a.rows;
    const std::size_t dim = a.dim;
    const std::size_t row_panels = (n + kRowsPerPanel - 1) / kRowsPerPanel;
    const std::size_t col_panels = (n + kColsPerPanel - 1) / kColsPerPanel;

    const auto a_packed = pack_panels(a, kRowsPerPanel, row_panels);
    const auto b_packed = pack_panels(b, kColsPerPanel, col_panels);

    // tiles[ip][jp] is a 4x8 block; only tiles touching the upper triangle
    // are computed.
    std::vector<double> tiles(row_panels * col_panels * kRowsPerPanel * kColsPerPanel, 0.0);
    auto tile_at = [&](std::size_t ip, std::size_t jp) {
        return tiles.data() + (ip * col_panels + jp) * kRowsPerPanel * kColsPerPanel;
    };

    for (std::size_t k0 = 0; k0 < dim; k0 += kDepthBlock) {
        const std::size_t depth = std::min(kDepthBlock, dim - k0);
        for (std::size_t jp = 0; jp < col_panels; ++jp) {
            const double* b_panel = b_packed.data() + (jp * dim + k0) * kColsPerPanel;
            const std::size_t last_col = jp * kColsPerPanel + kColsPerPanel - 1;
            for (std::size_t ip = 0; ip < row_panels && ip * kRowsPerPanel <= last_col; ++ip) {
                const double* a_panel = a_packed.data() + (ip * dim + k0) * kRowsPerPanel;
                micro_kernel(a_panel, b_panel, depth, tile_at(ip, jp));
            }
        }
    }

    std::vector<double> gram(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const double v = tile_at(i / kRowsPerPanel, j / kColsPerPanel)[(i % kRowsPerPanel) * kColsPerPanel +
                                                                           j % kColsPerPanel];
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }
    return gram;
}

}  // namespace chirascope::detail
