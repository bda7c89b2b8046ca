#include "core/layers.hpp"

#include <fmt/core.h>

#include "core/errors.hpp"
#include "json.hpp"

namespace chirascope {

namespace {

const TensorRecord& resolve_conv_tensor(const TensorMap& map, const std::string& name) {
    const auto* entry = map.find_entry(name);
    if (!entry) fail(ErrorKind::Parse, fmt::format("manifest references missing tensor '{}'", name));
    if (!entry->is_float())
        fail(ErrorKind::Parse, fmt::format("tensor '{}' has dtype {}; only F32 tensors can be analyzed "
                                           "(convert it when exporting)",
                                           name, entry->opaque().dtype));
    if (entry->tensor().rank() != 4)
        fail(ErrorKind::Parse, fmt::format("manifest references tensor '{}' of rank {}, expected a 4-D conv weight",
                                           name, entry->tensor().rank()));
    return entry->tensor();
}

ConvLayer make_layer(const std::string& name, const TensorRecord& t, Stage stage) {
    return ConvLayer(name, t.shape[0], t.shape[1], t.shape[2], t.shape[3], stage, t.data);
}

}  // namespace

std::string_view to_string(Family family) {
    switch (family) {
        case Family::AlexNet: return "alexnet";
        case Family::Vgg: return "vgg";
        case Family::ResNet: return "resnet";
        case Family::Unknown: break;
    }
    return "unknown";
}

Family parse_family(std::string_view text) {
    if (text == "alexnet") return Family::AlexNet;
    if (text == "vgg") return Family::Vgg;
    if (text == "resnet") return Family::ResNet;
    if (text == "unknown") return Family::Unknown;
    fail(ErrorKind::Parse, fmt::format("unknown model family '{}'", text));
}

bool valid_stage(int stage) { return stage >= 1 && stage <= kStageCount; }

ConvLayer::ConvLayer(std::string name, std::size_t kernels, std::size_t channels, std::size_t height,
                     std::size_t width, Stage stage, std::vector<float> data)
    : name_(std::move(name)),
      kernels_(kernels),
      channels_(channels),
      height_(height),
      width_(width),
      stage_(stage),
      data_(std::move(data)) {
    if (kernels_ == 0 || channels_ == 0 || height_ == 0 || width_ == 0)
        fail(ErrorKind::InvalidArgument, fmt::format("layer '{}': every extent must be at least 1 (got {}x{}x{}x{})",
                                                     name_, kernels_, channels_, height_, width_));
    if (data_.size() != kernels_ * kernel_size())
        fail(ErrorKind::InvalidArgument, fmt::format("layer '{}': {} values for shape {}x{}x{}x{}", name_,
                                                     data_.size(), kernels_, channels_, height_, width_));
    set_stage(stage);
}

void ConvLayer::set_stage(Stage stage) {
    if (stage && !valid_stage(*stage))
        fail(ErrorKind::InvalidArgument, fmt::format("layer '{}': stage {} outside 1..5", name_, *stage));
    stage_ = stage;
}

std::span<const float> ConvLayer::kernel(std::size_t j) const {
    return std::span<const float>(data_).subspan(j * kernel_size(), kernel_size());
}

Manifest parse_manifest(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, fmt::format("manifest is not valid JSON: {}", e.what()));
    }
    try {
        Manifest m;
        m.model_name = doc.at("model_name").get<std::string>();
        m.family = parse_family(doc.at("family").get<std::string>());
        for (const auto& item : doc.at("layers")) {
            ManifestEntry e;
            e.tensor = item.at("tensor").get<std::string>();
            e.stage = item.at("stage").get<int>();
            e.include = item.value("include", true);
            if (!valid_stage(e.stage))
                fail(ErrorKind::Parse, fmt::format("manifest entry '{}': stage {} outside 1..5", e.tensor, e.stage));
            m.layers.push_back(std::move(e));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, fmt::format("malformed manifest: {}", e.what()));
    }
}

std::string manifest_to_json(const Manifest& manifest) {
    nlohmann::ordered_json doc;
    doc["model_name"] = manifest.model_name;
    doc["family"] = std::string(to_string(manifest.family));
    doc["layers"] = nlohmann::ordered_json::array();
    for (const auto& e : manifest.layers)
        doc["layers"].push_back({{"tensor", e.tensor}, {"stage", e.stage}, {"include", e.include}});
    return doc.dump(2) + "\n";
}

Manifest read_manifest(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    } catch (const Error& e) {
        fail(e.kind(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    const auto text = manifest_to_json(manifest);
    write_file_bytes(path, std::as_bytes(std::span(text.data(), text.size())));
}

void validate_manifest(const Manifest& manifest, const TensorMap& map) {
    for (const auto& e : manifest.layers) resolve_conv_tensor(map, e.tensor);
}

std::vector<ConvLayer> extract_conv_layers(const TensorMap& map, const Manifest* manifest,
                                           const ExtractOptions& options) {
    std::vector<ConvLayer> layers;
    if (manifest) {
        validate_manifest(*manifest, map);
        for (const auto& e : manifest->layers) {
            if (!e.include) continue;
            layers.push_back(make_layer(e.tensor, resolve_conv_tensor(map, e.tensor), e.stage));
        }
        return layers;
    }
    for (const auto& entry : map.entries()) {
        if (!entry.name.ends_with(options.suffix)) continue;
        if (!entry.is_float()) {
            if (entry.opaque().shape.size() == 4)
                fail(ErrorKind::Parse, fmt::format("tensor '{}' has dtype {}; only F32 tensors can be analyzed "
                                                   "(convert it when exporting)",
                                                   entry.name, entry.opaque().dtype));
            continue;
        }
        if (entry.tensor().rank() != 4) continue;
        const auto& shape = entry.tensor().shape;
        // Zero-extent tensors carry no kernels.
        if (shape[0] == 0 || shape[1] == 0 || shape[2] == 0 || shape[3] == 0) continue;
        layers.push_back(make_layer(entry.name, entry.tensor(), std::nullopt));
    }
    return layers;
}

std::vector<SkippedLayer> manifest_exclusions(const TensorMap& map, const Manifest& manifest) {
    std::vector<SkippedLayer> out;
    for (const auto& e : manifest.layers) {
        if (e.include) continue;
        const auto& t = resolve_conv_tensor(map, e.tensor);
        std::string reason = t.shape[3] < 2 ? fmt::format("kernel width {} cannot be flipped", t.shape[3])
                                            : fmt::format("excluded by manifest (stage {})", e.stage);
        out.push_back(SkippedLayer{e.tensor, std::move(reason)});
    }
    return out;
}

}  // namespace chirascope
