#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/arch.hpp"
#include "core/documents.hpp"

namespace chirascope {

struct AnalyzeFileOptions {
    bool flipped = true;
    std::string suffix = "weight";
    unsigned threads = 0;
    bool stamp = false;
};

struct AnalyzedFile {
    ModelReport report;
    Provenance provenance;
    std::vector<std::string> warnings;
};

/// Reads a container (and optional manifest) and analyzes it. Model name and
/// family come from the manifest, then container metadata, then the file
/// name. Manifest-excluded layers are listed as skipped.
AnalyzedFile analyze_file(const std::filesystem::path& weights, const std::filesystem::path* manifest,
                          const AnalyzeFileOptions& options = {});

ModelReport analyze_container(const TensorMap& map, const Manifest* manifest, const AnalyzeFileOptions& options,
                              const std::string& fallback_name);

/// Writes the synthesized container and manifest, returning the model.
SynthesizedModel write_synth_model(std::string_view arch_id, InitMethod method, std::uint64_t seed,
                                   const std::filesystem::path& weights, const std::filesystem::path& manifest);

}  // namespace chirascope
