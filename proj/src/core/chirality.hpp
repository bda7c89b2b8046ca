#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "core/layers.hpp"

namespace chirascope {

/// One C x H x W filter, row-major.
class Kernel {
public:
    Kernel(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data);
    static Kernel from_layer(const ConvLayer& layer, std::size_t index);

    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }
    std::span<const float> data() const { return data_; }
    float at(std::size_t c, std::size_t h, std::size_t w) const { return data_[(c * height_ + h) * width_ + w]; }

    bool same_extents(const Kernel& other) const {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }
    bool operator==(const Kernel& other) const;

private:
    std::size_t channels_;
    std::size_t height_;
    std::size_t width_;
    std::vector<float> data_;
};

/// Horizontal mirror: out[c][h][w] = in[c][h][W-1-w]. Channel and row order
/// are kept.
Kernel flip_kernel(const Kernel& kernel);

/// |<a, b>| / (|a| |b|) over the flattened kernels, accumulated in double.
/// Throws UndefinedSimilarity if either norm is zero.
double abs_cosine(const Kernel& a, const Kernel& b);

/// Average |cos| over one layer's B^2 ordered kernel pairs.
struct LayerSimilarity {
    std::string layer;
    Stage stage;
    std::size_t kernels = 0;
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    double value = 0.0;
    bool flipped = true;

    std::size_t dim() const { return channels * height * width; }
    bool operator==(const LayerSimilarity&) const = default;
};

/// (1/B^2) * sum_{j'} sum_j |cos(K_j, flip(K_j'))|, including j == j'.
/// Requires W >= 2.
LayerSimilarity layer_similarity(const ConvLayer& layer);

/// Ablation variant: the flipped set is replaced by the original kernels.
LayerSimilarity layer_similarity_noflip(const ConvLayer& layer);

struct LayerResidual {
    std::string layer;
    Stage stage;
    double s_untrained = 0.0;
    double s_trained = 0.0;
    double residual = 0.0;

    bool operator==(const LayerResidual&) const = default;
};

/// |S_untrained - S_trained| for one layer. Throws LayerMismatch unless both
/// sides describe the same layer with the same (B, C*H*W).
LayerResidual layer_residual(const LayerSimilarity& untrained, const LayerSimilarity& trained);

struct ModelResidual {
    std::vector<LayerResidual> layers;
    double total = 0.0;
    std::size_t layer_count = 0;
    double tolerance = 0.0;
    bool chirality_present = false;
};

/// E(M) compared against 1e-9 per layer.
inline constexpr double kChiralityTolerancePerLayer = 1e-9;

ModelResidual model_residual(std::vector<LayerResidual> layers);

}  // namespace chirascope
