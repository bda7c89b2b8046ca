#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/layers.hpp"
#include "core/tensor_map.hpp"

namespace chirascope {

struct ArchEntry {
    std::string tensor;
    std::size_t kernels;
    std::size_t channels;
    std::size_t height;
    std::size_t width;
    int stage;
    bool analyzable;
};

struct ArchitectureSpec {
    std::string id;
    Family family;
    std::vector<ArchEntry> entries;

    std::size_t analyzable_count() const;
};

/// alexnet, vgg11/13/16/19, resnet18/34/50/101/152.
std::span<const std::string_view> architecture_ids();

/// Conv layers of a torchvision-style model, in checkpoint order, with
/// checkpoint tensor names. Throws InvalidArgument for unknown ids.
ArchitectureSpec registry(std::string_view arch_id);

enum class InitMethod { KaimingNormal, XavierNormal, PlainNormal };

std::string_view to_string(InitMethod method);
/// Accepts "kaiming", "kaiming-normal", "kaiming_normal" and likewise for
/// "xavier" and "normal"/"plain-normal".
InitMethod parse_init_method(std::string_view text);

/// Standard deviation for `method`, rounded to kSigmaBits significant bits.
double init_sigma(InitMethod method, std::size_t kernels, std::size_t channels, std::size_t height,
                  std::size_t width);

/// Draws and sigmas carry this many significant bits so that every stored
/// value sigma * z is exact in F32. The three methods then differ by an exact
/// scalar.
inline constexpr int kSigmaBits = 12;
inline constexpr int kDrawBits = 12;

double round_significand(double x, int bits);

/// Counter-based standard normal variates keyed by (seed, stream name).
/// Element i of a stream is fixed regardless of how many elements are drawn.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::string_view name);

    /// Uniform in (0, 1) from counter `i`.
    double uniform(std::uint64_t i) const;
    /// Element `i` of the normal sequence (Box-Muller over uniform pairs).
    double normal(std::uint64_t i) const;
    /// Elements [0, out.size()).
    void fill(std::span<double> out) const;

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

ConvLayer init_layer(std::size_t kernels, std::size_t channels, std::size_t height, std::size_t width,
                     InitMethod method, std::uint64_t seed, const std::string& layer_name);

struct SynthesizedModel {
    TensorMap weights;
    Manifest manifest;
};

/// Layers are drawn in parallel (see resolve_threads); output does not depend
/// on the worker count.
SynthesizedModel synth_model(std::string_view arch_id, InitMethod method, std::uint64_t seed, unsigned threads = 0);

}  // namespace chirascope
