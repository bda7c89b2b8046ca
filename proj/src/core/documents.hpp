#pragma once

// JSON documents exchanged with users: report, fingerprint, residual and match,
// plus the plot CSV. Field names are stable; see docs/formats.md.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "core/analysis.hpp"

namespace chirascope {

std::string_view tool_version();

struct SourceInfo {
    std::string path;
    std::string sha256;
};

struct Provenance {
    SourceInfo weights;
    std::optional<SourceInfo> manifest;
    std::optional<std::string> stamp;
};

struct ReportDocument {
    ModelReport report;
    std::optional<Provenance> provenance;
};

std::string report_to_json(const ModelReport& report, const Provenance* provenance = nullptr);
ReportDocument report_from_json(std::string_view text);

std::string fingerprint_to_json(const Fingerprint& fp, const std::string* source_sha256 = nullptr);
/// Accepts a fingerprint document, or a report document (fingerprinted on the
/// fly).
Fingerprint fingerprint_from_json(std::string_view text);

std::string residual_to_json(const ResidualComparison& comparison, const Provenance* untrained,
                             const Provenance* trained);

std::string match_to_json(const MatchResult& match);

/// Header `model,layer,stage,x,y`, one row per analyzed layer, models in the
/// given order.
std::string plot_csv(std::span<const std::pair<std::string, std::vector<PlotRow>>> models);

std::string sha256_hex(std::span<const std::byte> bytes);

}  // namespace chirascope
