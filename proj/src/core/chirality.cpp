#include "core/chirality.hpp"

#include <cmath>
#include <cstring>

#include <fmt/core.h>

#include "core/errors.hpp"
#include "core/gram.hpp"

namespace chirascope {

namespace {

// Unit-norm copies of every kernel in the layer, plus their mirrors when
// `flip` is set.
detail::RowMatrix normalized_kernels(const ConvLayer& layer) {
    detail::RowMatrix m;
    m.rows = layer.kernels();
    m.dim = layer.kernel_size();
    m.values.resize(m.rows * m.dim);
    for (std::size_t j = 0; j < m.rows; ++j) {
        const auto k = layer.kernel(j);
        double sq = 0.0;
        for (float x : k) sq += static_cast<double>(x) * static_cast<double>(x);
        const double norm = std::sqrt(sq);
        if (!(norm > 0.0) || !std::isfinite(norm))
            fail(ErrorKind::UndefinedSimilarity,
                 fmt::format("layer '{}': kernel {} has {} norm, similarity is undefined", layer.name(), j,
                             norm == 0.0 ? "zero" : "non-finite"));
        double* out = m.values.data() + j * m.dim;
        for (std::size_t i = 0; i < m.dim; ++i) out[i] = static_cast<double>(k[i]) / norm;
    }
    return m;
}

detail::RowMatrix mirrored(const detail::RowMatrix& m, std::size_t width) {
    detail::RowMatrix out = m;
    const std::size_t lines = m.rows * (m.dim / width);
    for (std::size_t line = 0; line < lines; ++line) {
        const double* src = m.values.data() + line * width;
        double* dst = out.values.data() + line * width;
        for (std::size_t w = 0; w < width; ++w) dst[w] = src[width - 1 - w];
    }
    return out;
}

LayerSimilarity average_similarity(const ConvLayer& layer, bool flip) {
    const auto originals = normalized_kernels(layer);
    const auto gram = flip ? detail::symmetric_gram(originals, mirrored(originals, layer.width()))
                           : detail::symmetric_gram(originals, originals);

    const std::size_t b = layer.kernels();
    double sum = 0.0;
    for (std::size_t jp = 0; jp < b; ++jp)
        for (std::size_t j = 0; j < b; ++j) sum += std::min(1.0, std::fabs(gram[j * b + jp]));

    LayerSimilarity s;
    s.layer = layer.name();
    s.stage = layer.stage();
    s.kernels = b;
    s.channels = layer.channels();
    s.height = layer.height();
    s.width = layer.width();
    s.value = sum / (static_cast<double>(b) * static_cast<double>(b));
    s.flipped = flip;
    return s;
}

}  // namespace

Kernel::Kernel(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != channels_ * height_ * width_)
        fail(ErrorKind::InvalidArgument,
             fmt::format("kernel data holds {} values, {}x{}x{} needs {}", data_.size(), channels_, height_, width_,
                         channels_ * height_ * width_));
}

Kernel Kernel::from_layer(const ConvLayer& layer, std::size_t index) {
    if (index >= layer.kernels())
        fail(ErrorKind::InvalidArgument, fmt::format("layer '{}' has no kernel {}", layer.name(), index));
    const auto k = layer.kernel(index);
    return Kernel(layer.channels(), layer.height(), layer.width(), {k.begin(), k.end()});
}

bool Kernel::operator==(const Kernel& other) const {
    return same_extents(other) && std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

Kernel flip_kernel(const Kernel& kernel) {
    std::vector<float> out(kernel.size());
    const auto in = kernel.data();
    const std::size_t w = kernel.width();
    for (std::size_t line = 0; line < kernel.channels() * kernel.height(); ++line)
        for (std::size_t x = 0; x < w; ++x) out[line * w + x] = in[line * w + (w - 1 - x)];
    return Kernel(kernel.channels(), kernel.height(), w, std::move(out));
}

double abs_cosine(const Kernel& a, const Kernel& b) {
    if (!a.same_extents(b))
        fail(ErrorKind::InvalidArgument,
             fmt::format("cosine needs equal extents, got {}x{}x{} and {}x{}x{}", a.channels(), a.height(), a.width(),
                         b.channels(), b.height(), b.width()));
    double dot = 0.0, aa = 0.0, bb = 0.0;
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i], yi = y[i];
        dot += xi * yi;
        aa += xi * xi;
        bb += yi * yi;
    }
    if (aa == 0.0 || bb == 0.0) fail(ErrorKind::UndefinedSimilarity, "cosine of a zero-norm kernel is undefined");
    return std::min(1.0, std::fabs(dot) / (std::sqrt(aa) * std::sqrt(bb)));
}

LayerSimilarity layer_similarity(const ConvLayer& layer) {
    if (!layer.flippable())
        fail(ErrorKind::InvalidArgument,
             fmt::format("layer '{}' has kernel width {} and cannot be flipped", layer.name(), layer.width()));
    return average_similarity(layer, true);
}

LayerSimilarity layer_similarity_noflip(const ConvLayer& layer) { return average_similarity(layer, false); }

LayerResidual layer_residual(const LayerSimilarity& untrained, const LayerSimilarity& trained) {
    if (untrained.layer != trained.layer || untrained.kernels != trained.kernels || untrained.dim() != trained.dim())
        fail(ErrorKind::LayerMismatch,
             fmt::format("cannot pair layer '{}' (B={}, dim={}) with '{}' (B={}, dim={})", untrained.layer,
                         untrained.kernels, untrained.dim(), trained.layer, trained.kernels, trained.dim()));
    LayerResidual r;
    r.layer = untrained.layer;
    r.stage = untrained.stage ? untrained.stage : trained.stage;
    r.s_untrained = untrained.value;
    r.s_trained = trained.value;
    r.residual = std::fabs(untrained.value - trained.value);
    return r;
}

ModelResidual model_residual(std::vector<LayerResidual> layers) {
    if (layers.empty()) fail(ErrorKind::NoAnalyzableLayers, "model residual needs at least one layer");
    ModelResidual m;
    for (const auto& l : layers) m.total += l.residual;
    m.layer_count = layers.size();
    m.tolerance = kChiralityTolerancePerLayer * static_cast<double>(m.layer_count);
    m.chirality_present = m.total > m.tolerance;
    m.layers = std::move(layers);
    return m;
}

}  // namespace chirascope
