#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "core/tensor_map.hpp"

namespace chirascope {

enum class Family { AlexNet, Vgg, ResNet, Unknown };

std::string_view to_string(Family family);
Family parse_family(std::string_view text);

inline constexpr int kStageCount = 5;

/// Depth band 1..5, or unassigned.
using Stage = std::optional<int>;

bool valid_stage(int stage);

/// One convolution layer <B, C, H, W>, data row-major.
class ConvLayer {
public:
    ConvLayer(std::string name, std::size_t kernels, std::size_t channels, std::size_t height, std::size_t width,
              Stage stage, std::vector<float> data);

    const std::string& name() const { return name_; }
    std::size_t kernels() const { return kernels_; }
    std::size_t channels() const { return channels_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    Stage stage() const { return stage_; }
    void set_stage(Stage stage);

    /// C * H * W
    std::size_t kernel_size() const { return channels_ * height_ * width_; }
    bool flippable() const { return width_ >= 2; }

    std::span<const float> data() const { return data_; }
    /// Moves the values out; the layer is left empty.
    std::vector<float> release() && { return std::move(data_); }
    std::span<const float> kernel(std::size_t j) const;

private:
    std::string name_;
    std::size_t kernels_;
    std::size_t channels_;
    std::size_t height_;
    std::size_t width_;
    Stage stage_;
    std::vector<float> data_;
};

struct ManifestEntry {
    std::string tensor;
    int stage = 0;
    bool include = true;

    bool operator==(const ManifestEntry&) const = default;
};

struct Manifest {
    std::string model_name;
    Family family = Family::Unknown;
    std::vector<ManifestEntry> layers;

    bool operator==(const Manifest&) const = default;
};

Manifest parse_manifest(std::string_view text);
std::string manifest_to_json(const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Throws LayerMismatch unless every entry names a 4-D F32 tensor in `map`.
void validate_manifest(const Manifest& manifest, const TensorMap& map);

struct SkippedLayer {
    std::string name;
    std::string reason;

    bool operator==(const SkippedLayer&) const = default;
};

struct ExtractOptions {
    std::string suffix = "weight";
};

/// With a manifest: the included entries in manifest order, stages assigned.
/// Without: every 4-D tensor whose name ends in `options.suffix`, in header
/// order, stage unassigned.
std::vector<ConvLayer> extract_conv_layers(const TensorMap& map, const Manifest* manifest,
                                           const ExtractOptions& options = {});

/// Manifest entries with include = false, with the reason they are left out.
std::vector<SkippedLayer> manifest_exclusions(const TensorMap& map, const Manifest& manifest);

}  // namespace chirascope
