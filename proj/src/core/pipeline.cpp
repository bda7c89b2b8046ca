#include "core/pipeline.hpp"

#include <chrono>
#include <ctime>

#include <fmt/core.h>

#include "core/errors.hpp"

namespace chirascope {

namespace {

std::string utc_stamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

ModelReport analyze_container(const TensorMap& map, const Manifest* manifest, const AnalyzeFileOptions& options,
                              const std::string& fallback_name) {
    ExtractOptions extract;
    extract.suffix = options.suffix;
    const auto layers = extract_conv_layers(map, manifest, extract);

    ModelReport report = analyze_model(layers, options.flipped, options.threads);
    if (manifest) {
        auto excluded = manifest_exclusions(map, *manifest);
        excluded.insert(excluded.end(), report.skipped.begin(), report.skipped.end());
        report.skipped = std::move(excluded);
    }

    const auto& meta = map.metadata();
    auto meta_value = [&](const char* key) -> const std::string* {
        auto it = meta.find(key);
        return it == meta.end() ? nullptr : &it->second;
    };
    if (manifest) {
        report.model_name = manifest->model_name;
        report.family = manifest->family;
    } else {
        report.model_name = meta_value("model_name") ? *meta_value("model_name") : fallback_name;
        report.family = Family::Unknown;
        if (const auto* f = meta_value("family")) {
            try {
                report.family = parse_family(*f);
            } catch (const Error&) {
                report.family = Family::Unknown;
            }
        }
    }
    if (const auto* t = meta_value("trained")) {
        if (*t == "true") report.trained = true;
        if (*t == "false") report.trained = false;
    }
    return report;
}

AnalyzedFile analyze_file(const std::filesystem::path& weights, const std::filesystem::path* manifest_path,
                          const AnalyzeFileOptions& options) {
    AnalyzedFile out;
    const auto bytes = read_file_bytes(weights);
    TensorMap map;
    try {
        map = parse_container(bytes);
    } catch (const Error& e) {
        fail(e.kind(), fmt::format("{}: {}", weights.string(), e.what()));
    }
    out.warnings = map.warnings();
    out.provenance.weights = SourceInfo{weights.string(), sha256_hex(bytes)};

    std::optional<Manifest> manifest;
    if (manifest_path) {
        const auto mbytes = read_file_bytes(*manifest_path);
        try {
            manifest = parse_manifest(std::string_view(reinterpret_cast<const char*>(mbytes.data()), mbytes.size()));
        } catch (const Error& e) {
            fail(e.kind(), fmt::format("{}: {}", manifest_path->string(), e.what()));
        }
        out.provenance.manifest = SourceInfo{manifest_path->string(), sha256_hex(mbytes)};
    }
    if (options.stamp) out.provenance.stamp = utc_stamp();

    out.report = analyze_container(map, manifest ? &*manifest : nullptr, options, weights.stem().string());
    return out;
}

SynthesizedModel write_synth_model(std::string_view arch_id, InitMethod method, std::uint64_t seed,
                                   const std::filesystem::path& weights, const std::filesystem::path& manifest) {
    auto model = synth_model(arch_id, method, seed);
    write_container(model.weights, weights);
    write_manifest(model.manifest, manifest);
    return model;
}

}  // namespace chirascope
