#include "core/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>

#include <fmt/core.h>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace chirascope {

void fill_stage_means(ModelReport& report) {
    std::array<double, kStageCount> sums{};
    std::array<std::size_t, kStageCount> counts{};
    for (const auto& l : report.layers) {
        if (!l.stage) continue;
        sums[*l.stage - 1] += l.value;
        counts[*l.stage - 1] += 1;
    }
    for (int s = 0; s < kStageCount; ++s)
        report.stage_means[s] = counts[s] ? std::optional<double>(sums[s] / static_cast<double>(counts[s]))
                                          : std::nullopt;
}

ModelReport analyze_model(std::span<const ConvLayer> layers, bool flipped, unsigned threads) {
    ModelReport report;
    report.flipped = flipped;

    std::vector<const ConvLayer*> work;
    for (const auto& layer : layers) {
        if (layer.flippable())
            work.push_back(&layer);
        else
            report.skipped.push_back(
                SkippedLayer{layer.name(), fmt::format("kernel width {} cannot be flipped", layer.width())});
    }
    if (work.empty()) fail(ErrorKind::NoAnalyzableLayers, "no analyzable convolution layers");

    std::vector<std::optional<LayerSimilarity>> results(work.size());
    parallel_for(work.size(), threads, [&](std::size_t i) {
        results[i] = flipped ? layer_similarity(*work[i]) : layer_similarity_noflip(*work[i]);
    });

    for (auto& r : results) report.layers.push_back(std::move(*r));
    fill_stage_means(report);
    return report;
}

std::vector<PlotRow> stage_positions(const ModelReport& report) {
    std::array<std::vector<const LayerSimilarity*>, kStageCount> by_stage;
    for (const auto& l : report.layers) {
        if (!l.stage) fail(ErrorKind::InvalidArgument, fmt::format("layer '{}' has no stage assigned", l.layer));
        by_stage[*l.stage - 1].push_back(&l);
    }
    std::vector<PlotRow> rows;
    for (int s = 0; s < kStageCount; ++s) {
        const auto& members = by_stage[s];
        const double m = static_cast<double>(members.size());
        for (std::size_t k = 0; k < members.size(); ++k)
            rows.push_back(PlotRow{members[k]->layer, s + 1, (s + 1) + (static_cast<double>(k) + 0.5) / m,
                                   members[k]->value});
    }
    return rows;
}

ResidualComparison compare_reports(const ModelReport& untrained, const ModelReport& trained) {
    std::map<std::string, const LayerSimilarity*> trained_by_name;
    for (const auto& l : trained.layers) trained_by_name.emplace(l.layer, &l);
    if (trained_by_name.size() != untrained.layers.size())
        fail(ErrorKind::LayerMismatch, fmt::format("layer sets differ: {} untrained layers vs {} trained",
                                                   untrained.layers.size(), trained.layers.size()));

    ResidualComparison out;
    std::vector<LayerResidual> residuals;
    for (const auto& u : untrained.layers) {
        auto it = trained_by_name.find(u.layer);
        if (it == trained_by_name.end())
            fail(ErrorKind::LayerMismatch, fmt::format("layer '{}' has no trained counterpart", u.layer));
        const auto& t = *it->second;
        residuals.push_back(layer_residual(u, t));
        if (t.value < u.value)
            ++out.decreasing;
        else if (t.value > u.value)
            ++out.increasing;
        else
            ++out.unchanged;
    }
    out.residual = model_residual(std::move(residuals));
    return out;
}

std::size_t Fingerprint::present() const {
    return static_cast<std::size_t>(std::count_if(vector.begin(), vector.end(), [](auto& v) { return v.has_value(); }));
}

Fingerprint fingerprint(const ModelReport& report) {
    Fingerprint f;
    f.model_name = report.model_name;
    f.family = report.family;
    f.vector = report.stage_means;
    f.trained = report.trained;
    if (f.present() == 0)
        fail(ErrorKind::InvalidArgument,
             fmt::format("report '{}' has no stage means; supply a manifest with stages", report.model_name));
    return f;
}

std::vector<LayerSample> layer_samples(const ModelReport& report) {
    std::vector<LayerSample> out;
    out.reserve(report.layers.size());
    for (const auto& l : report.layers) out.push_back(LayerSample{l.dim(), l.value});
    return out;
}

double random_direction_baseline(std::size_t dim) {
    return std::sqrt(2.0 / (std::numbers::pi * static_cast<double>(dim)));
}

std::string_view to_string(Verdict verdict) {
    switch (verdict) {
        case Verdict::Trained: return "trained";
        case Verdict::Untrained: return "untrained";
        case Verdict::Inconclusive: break;
    }
    return "inconclusive";
}

MatchResult classify(const Fingerprint& query, std::span<const Fingerprint> references,
                     std::span<const LayerSample> samples, const ClassifyThresholds& thresholds) {
    if (references.empty()) fail(ErrorKind::NoReferences, "no reference fingerprints");

    MatchResult out;
    out.query = query.model_name;
    out.thresholds = thresholds;
    for (const auto& ref : references) {
        double sq = 0.0;
        std::size_t shared = 0;
        for (int s = 0; s < kStageCount; ++s) {
            if (!query.vector[s] || !ref.vector[s]) continue;
            const double d = *query.vector[s] - *ref.vector[s];
            sq += d * d;
            ++shared;
        }
        if (shared == 0) continue;
        out.distances.push_back(ReferenceDistance{ref.model_name, ref.family, std::sqrt(sq), shared});
    }
    if (out.distances.empty())
        fail(ErrorKind::NoReferences,
             fmt::format("query '{}' shares no stage with any reference fingerprint", query.model_name));

    const ReferenceDistance* best = &out.distances.front();
    for (const auto& d : out.distances)
        if (d.distance < best->distance || (d.distance == best->distance && d.reference < best->reference)) best = &d;
    out.best_reference = best->reference;
    out.best_family = best->family;
    for (const auto& d : out.distances)
        if (d.distance == best->distance && d.family != best->family) out.family_tie = true;

    if (samples.empty()) {
        out.baseline_deviation = std::nan("");
        out.verdict = Verdict::Inconclusive;
        return out;
    }
    double dev = 0.0;
    for (const auto& sample : samples) {
        const double b = random_direction_baseline(sample.dim);
        dev += std::fabs(sample.value - b) / b;
    }
    out.baseline_deviation = dev / static_cast<double>(samples.size());
    if (out.baseline_deviation < thresholds.untrained_below)
        out.verdict = Verdict::Untrained;
    else if (out.baseline_deviation > thresholds.trained_above)
        out.verdict = Verdict::Trained;
    else
        out.verdict = Verdict::Inconclusive;
    return out;
}

}  // namespace chirascope
