#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/chirality.hpp"
#include "core/parallel.hpp"
#include "core/layers.hpp"

namespace chirascope {

using StageVector = std::array<std::optional<double>, kStageCount>;

struct ModelReport {
    std::string model_name;
    Family family = Family::Unknown;
    bool flipped = true;
    std::vector<LayerSimilarity> layers;
    std::vector<SkippedLayer> skipped;
    /// Mean S of the analyzed layers in each stage; empty where no layer has
    /// that stage.
    StageVector stage_means;
    /// Known training state of the weights, when the container says so.
    std::optional<bool> trained;
};

/// Recomputes `report.stage_means` from `report.layers`.
void fill_stage_means(ModelReport& report);


/// S for every flippable layer (mirror or ablation variant per `flipped`);
/// W = 1 layers are recorded as skipped in both variants so the two see the
/// same layer set. Layers are spread over workers; results keep input order.
ModelReport analyze_model(std::span<const ConvLayer> layers, bool flipped, unsigned threads = 0);

struct PlotRow {
    std::string layer;
    int stage = 0;
    double x = 0.0;
    double y = 0.0;
};

/// k-th of m layers in stage s sits at x = s + (k + 0.5) / m.
std::vector<PlotRow> stage_positions(const ModelReport& report);

struct ResidualComparison {
    ModelResidual residual;
    std::size_t decreasing = 0;  // S_trained < S_untrained
    std::size_t increasing = 0;
    std::size_t unchanged = 0;
};

/// Pairs layers by name in the untrained report's order.
ResidualComparison compare_reports(const ModelReport& untrained, const ModelReport& trained);

struct Fingerprint {
    std::string model_name;
    Family family = Family::Unknown;
    StageVector vector;
    std::optional<bool> trained;

    std::size_t present() const;
};

Fingerprint fingerprint(const ModelReport& report);

struct LayerSample {
    std::size_t dim = 0;
    double value = 0.0;
};

std::vector<LayerSample> layer_samples(const ModelReport& report);

/// sqrt(2 / (pi * dim)): large-dimension mean of |cos| between independent
/// isotropic directions.
double random_direction_baseline(std::size_t dim);

enum class Verdict { Trained, Untrained, Inconclusive };
std::string_view to_string(Verdict verdict);

struct ClassifyThresholds {
    double untrained_below = 0.15;
    double trained_above = 0.5;
};

struct ReferenceDistance {
    std::string reference;
    Family family = Family::Unknown;
    double distance = 0.0;
    std::size_t shared_stages = 0;
};

struct MatchResult {
    std::string query;
    Family best_family = Family::Unknown;
    std::string best_reference;
    /// Another reference of a different family sits at the same distance.
    bool family_tie = false;
    std::vector<ReferenceDistance> distances;
    Verdict verdict = Verdict::Inconclusive;
    double baseline_deviation = 0.0;
    ClassifyThresholds thresholds;
};

/// Euclidean distance over the stages both fingerprints have; argmin with ties
/// going to the lexicographically smaller reference name. The verdict comes
/// from the mean relative deviation of each layer's S from the random
/// baseline for its dimension.
MatchResult classify(const Fingerprint& query, std::span<const Fingerprint> references,
                     std::span<const LayerSample> samples, const ClassifyThresholds& thresholds = {});

}  // namespace chirascope
