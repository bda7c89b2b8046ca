#include "chirascope.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "core/errors.hpp"
#include "core/pipeline.hpp"

using namespace chirascope;

struct cs_container {
    TensorMap map;
};

struct cs_report {
    ModelReport report;
    std::optional<Provenance> provenance;
    std::vector<std::string> warnings;
    std::string family;
};

struct cs_residual {
    ResidualComparison comparison;
    std::optional<Provenance> untrained;
    std::optional<Provenance> trained;
};

struct cs_fingerprint {
    Fingerprint fp;
    std::optional<std::string> source_sha256;
};

struct cs_match {
    MatchResult match;
    std::string family;
    std::string verdict;
};

namespace {

thread_local std::string g_last_error;

cs_status status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return CS_ERR_INVALID_ARGUMENT;
        case ErrorKind::Io: return CS_ERR_IO;
        case ErrorKind::Parse: return CS_ERR_PARSE;
        case ErrorKind::NoAnalyzableLayers: return CS_ERR_NO_ANALYZABLE_LAYERS;
        case ErrorKind::LayerMismatch: return CS_ERR_LAYER_MISMATCH;
        case ErrorKind::NoReferences: return CS_ERR_NO_REFERENCES;
        case ErrorKind::UndefinedSimilarity: return CS_ERR_UNDEFINED_SIMILARITY;
    }
    return CS_ERR_INTERNAL;
}

template <typename F>
cs_status guarded(F&& body) {
    try {
        body();
        return CS_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return CS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CS_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return CS_ERR_INTERNAL;
    }
}

// Out-parameters are cleared first so a failed call never leaves a stale handle.
template <typename T, typename F>
cs_status guarded_out(T** out, F&& body) {
    if (out) *out = nullptr;
    return guarded(std::forward<F>(body));
}

void require(const void* p, const char* what) {
    if (!p) fail(ErrorKind::InvalidArgument, std::string(what) + " must not be NULL");
}

char* duplicate(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

cs_report* wrap_report(ModelReport report, std::optional<Provenance> provenance, std::vector<std::string> warnings) {
    auto* r = new cs_report{std::move(report), std::move(provenance), std::move(warnings), {}};
    r->family = std::string(to_string(r->report.family));
    return r;
}

const TensorMap::Entry* entry_at(const cs_container* c, size_t i) {
    return (c && i < c->map.size()) ? &c->map.entries()[i] : nullptr;
}

}  // namespace

extern "C" {

const char* cs_version(void) { return tool_version().data(); }

const char* cs_last_error(void) { return g_last_error.c_str(); }

const char* cs_status_name(cs_status status) {
    switch (status) {
        case CS_OK: return "ok";
        case CS_ERR_INVALID_ARGUMENT: return "invalid argument";
        case CS_ERR_PARSE: return "parse error";
        case CS_ERR_NO_ANALYZABLE_LAYERS: return "no analyzable layers";
        case CS_ERR_LAYER_MISMATCH: return "layer mismatch";
        case CS_ERR_NO_REFERENCES: return "no references";
        case CS_ERR_IO: return "i/o error";
        case CS_ERR_UNDEFINED_SIMILARITY: return "undefined similarity";
        case CS_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void cs_string_free(char* text) { std::free(text); }

cs_status cs_container_read(const char* path, cs_container** out) {
    return guarded_out(out, [&] {
        require(path, "path");
        require(out, "out");
        *out = new cs_container{read_container(path)};
    });
}

cs_status cs_container_write(const cs_container* container, const char* path) {
    return guarded([&] {
        require(container, "container");
        require(path, "path");
        write_container(container->map, path);
    });
}

void cs_container_free(cs_container* container) { delete container; }

size_t cs_container_tensor_count(const cs_container* container) { return container ? container->map.size() : 0; }

const char* cs_container_tensor_name(const cs_container* container, size_t index) {
    const auto* e = entry_at(container, index);
    return e ? e->name.c_str() : nullptr;
}

const char* cs_container_tensor_dtype(const cs_container* container, size_t index) {
    const auto* e = entry_at(container, index);
    if (!e) return nullptr;
    return e->is_float() ? "F32" : e->opaque().dtype.c_str();
}

size_t cs_container_tensor_rank(const cs_container* container, size_t index) {
    const auto* e = entry_at(container, index);
    if (!e) return 0;
    return e->is_float() ? e->tensor().shape.size() : e->opaque().shape.size();
}

uint64_t cs_container_tensor_extent(const cs_container* container, size_t index, size_t axis) {
    const auto* e = entry_at(container, index);
    if (!e) return 0;
    const auto& shape = e->is_float() ? e->tensor().shape : e->opaque().shape;
    return axis < shape.size() ? shape[axis] : 0;
}

const char* cs_container_metadata(const cs_container* container, const char* key) {
    if (!container || !key) return nullptr;
    auto it = container->map.metadata().find(key);
    return it == container->map.metadata().end() ? nullptr : it->second.c_str();
}

size_t cs_container_warning_count(const cs_container* container) {
    return container ? container->map.warnings().size() : 0;
}

const char* cs_container_warning(const cs_container* container, size_t index) {
    if (!container || index >= container->map.warnings().size()) return nullptr;
    return container->map.warnings()[index].c_str();
}

size_t cs_architecture_count(void) { return architecture_ids().size(); }

const char* cs_architecture_id(size_t index) {
    const auto ids = architecture_ids();
    return index < ids.size() ? ids[index].data() : nullptr;
}

cs_status cs_parse_init_method(const char* text, cs_init_method* out) {
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        switch (parse_init_method(text)) {
            case InitMethod::KaimingNormal: *out = CS_INIT_KAIMING_NORMAL; break;
            case InitMethod::XavierNormal: *out = CS_INIT_XAVIER_NORMAL; break;
            case InitMethod::PlainNormal: *out = CS_INIT_PLAIN_NORMAL; break;
        }
    });
}

cs_status cs_synth_model(const char* arch, cs_init_method method, uint64_t seed, const char* weights_path,
                         const char* manifest_path) {
    return guarded([&] {
        require(arch, "arch");
        require(weights_path, "weights_path");
        require(manifest_path, "manifest_path");
        InitMethod m;
        switch (method) {
            case CS_INIT_KAIMING_NORMAL: m = InitMethod::KaimingNormal; break;
            case CS_INIT_XAVIER_NORMAL: m = InitMethod::XavierNormal; break;
            case CS_INIT_PLAIN_NORMAL: m = InitMethod::PlainNormal; break;
            default: fail(ErrorKind::InvalidArgument, "unknown initialization method");
        }
        write_synth_model(arch, m, seed, weights_path, manifest_path);
    });
}

void cs_analyze_options_init(cs_analyze_options* options) {
    if (!options) return;
    options->flipped = 1;
    options->suffix = nullptr;
    options->threads = 0;
    options->stamp = 0;
}

cs_status cs_analyze_file(const char* weights_path, const char* manifest_path, const cs_analyze_options* options,
                          cs_report** out) {
    return guarded_out(out, [&] {
        require(weights_path, "weights_path");
        require(out, "out");
        AnalyzeFileOptions opts;
        if (options) {
            opts.flipped = options->flipped != 0;
            if (options->suffix) opts.suffix = options->suffix;
            opts.threads = options->threads;
            opts.stamp = options->stamp != 0;
        }
        const std::filesystem::path manifest = manifest_path ? manifest_path : "";
        auto analyzed = analyze_file(weights_path, manifest_path ? &manifest : nullptr, opts);
        *out = wrap_report(std::move(analyzed.report), std::move(analyzed.provenance), std::move(analyzed.warnings));
    });
}

cs_status cs_report_from_json(const char* text, size_t length, cs_report** out) {
    return guarded_out(out, [&] {
        require(text, "text");
        require(out, "out");
        auto doc = report_from_json(std::string_view(text, length));
        *out = wrap_report(std::move(doc.report), std::move(doc.provenance), {});
    });
}

cs_status cs_report_to_json(const cs_report* report, char** out) {
    return guarded_out(out, [&] {
        require(report, "report");
        require(out, "out");
        *out = duplicate(report_to_json(report->report, report->provenance ? &*report->provenance : nullptr));
    });
}

void cs_report_free(cs_report* report) { delete report; }

const char* cs_report_model_name(const cs_report* report) {
    return report ? report->report.model_name.c_str() : nullptr;
}

const char* cs_report_family(const cs_report* report) { return report ? report->family.c_str() : nullptr; }

int cs_report_flipped(const cs_report* report) { return report && report->report.flipped ? 1 : 0; }

size_t cs_report_layer_count(const cs_report* report) { return report ? report->report.layers.size() : 0; }

cs_status cs_report_layer(const cs_report* report, size_t index, cs_layer_info* out) {
    return guarded([&] {
        require(report, "report");
        require(out, "out");
        if (index >= report->report.layers.size()) fail(ErrorKind::InvalidArgument, "layer index out of range");
        const auto& l = report->report.layers[index];
        *out = cs_layer_info{l.layer.c_str(), l.stage.value_or(0), l.kernels, l.channels, l.height, l.width, l.value};
    });
}

size_t cs_report_skipped_count(const cs_report* report) { return report ? report->report.skipped.size() : 0; }

cs_status cs_report_skipped(const cs_report* report, size_t index, const char** name, const char** reason) {
    return guarded([&] {
        require(report, "report");
        if (index >= report->report.skipped.size()) fail(ErrorKind::InvalidArgument, "skipped index out of range");
        const auto& s = report->report.skipped[index];
        if (name) *name = s.name.c_str();
        if (reason) *reason = s.reason.c_str();
    });
}

int cs_report_stage_mean(const cs_report* report, int stage, double* out) {
    if (!report || !valid_stage(stage)) return 0;
    const auto& m = report->report.stage_means[stage - 1];
    if (!m) return 0;
    if (out) *out = *m;
    return 1;
}

size_t cs_report_warning_count(const cs_report* report) { return report ? report->warnings.size() : 0; }

const char* cs_report_warning(const cs_report* report, size_t index) {
    return (report && index < report->warnings.size()) ? report->warnings[index].c_str() : nullptr;
}

cs_status cs_compare_reports(const cs_report* untrained, const cs_report* trained, cs_residual** out) {
    return guarded_out(out, [&] {
        require(untrained, "untrained");
        require(trained, "trained");
        require(out, "out");
        *out = new cs_residual{compare_reports(untrained->report, trained->report), untrained->provenance,
                               trained->provenance};
    });
}

cs_status cs_residual_to_json(const cs_residual* residual, char** out) {
    return guarded_out(out, [&] {
        require(residual, "residual");
        require(out, "out");
        *out = duplicate(residual_to_json(residual->comparison, residual->untrained ? &*residual->untrained : nullptr,
                                          residual->trained ? &*residual->trained : nullptr));
    });
}

void cs_residual_free(cs_residual* residual) { delete residual; }

double cs_residual_total(const cs_residual* residual) { return residual ? residual->comparison.residual.total : 0.0; }

size_t cs_residual_layer_count(const cs_residual* residual) {
    return residual ? residual->comparison.residual.layer_count : 0;
}

int cs_residual_chirality_present(const cs_residual* residual) {
    return residual && residual->comparison.residual.chirality_present ? 1 : 0;
}

size_t cs_residual_decreasing(const cs_residual* residual) { return residual ? residual->comparison.decreasing : 0; }

size_t cs_residual_increasing(const cs_residual* residual) { return residual ? residual->comparison.increasing : 0; }

void cs_thresholds_init(cs_thresholds* thresholds) {
    if (!thresholds) return;
    const ClassifyThresholds defaults;
    thresholds->untrained_below = defaults.untrained_below;
    thresholds->trained_above = defaults.trained_above;
}

cs_status cs_fingerprint_from_report(const cs_report* report, cs_fingerprint** out) {
    return guarded_out(out, [&] {
        require(report, "report");
        require(out, "out");
        std::optional<std::string> digest;
        if (report->provenance) digest = report->provenance->weights.sha256;
        *out = new cs_fingerprint{fingerprint(report->report), std::move(digest)};
    });
}

cs_status cs_fingerprint_from_json(const char* text, size_t length, cs_fingerprint** out) {
    return guarded_out(out, [&] {
        require(text, "text");
        require(out, "out");
        *out = new cs_fingerprint{fingerprint_from_json(std::string_view(text, length)), std::nullopt};
    });
}

cs_status cs_fingerprint_to_json(const cs_fingerprint* fingerprint, char** out) {
    return guarded_out(out, [&] {
        require(fingerprint, "fingerprint");
        require(out, "out");
        *out = duplicate(fingerprint_to_json(fingerprint->fp,
                                             fingerprint->source_sha256 ? &*fingerprint->source_sha256 : nullptr));
    });
}

void cs_fingerprint_free(cs_fingerprint* fingerprint) { delete fingerprint; }

const char* cs_fingerprint_model_name(const cs_fingerprint* fingerprint) {
    return fingerprint ? fingerprint->fp.model_name.c_str() : nullptr;
}

cs_status cs_classify(const cs_report* query, const cs_fingerprint* const* references, size_t count,
                      const cs_thresholds* thresholds, cs_match** out) {
    return guarded_out(out, [&] {
        require(query, "query");
        require(out, "out");
        if (count && !references) fail(ErrorKind::InvalidArgument, "references must not be NULL");
        std::vector<Fingerprint> refs;
        refs.reserve(count);
        for (size_t i = 0; i < count; ++i) {
            require(references[i], "reference");
            refs.push_back(references[i]->fp);
        }
        ClassifyThresholds t;
        if (thresholds) t = ClassifyThresholds{thresholds->untrained_below, thresholds->trained_above};
        const auto samples = layer_samples(query->report);
        auto result = classify(fingerprint(query->report), refs, samples, t);
        auto* m = new cs_match{std::move(result), {}, {}};
        m->family = std::string(to_string(m->match.best_family));
        m->verdict = std::string(to_string(m->match.verdict));
        *out = m;
    });
}

cs_status cs_match_to_json(const cs_match* match, char** out) {
    return guarded_out(out, [&] {
        require(match, "match");
        require(out, "out");
        *out = duplicate(match_to_json(match->match));
    });
}

void cs_match_free(cs_match* match) { delete match; }

const char* cs_match_best_family(const cs_match* match) { return match ? match->family.c_str() : nullptr; }

const char* cs_match_best_reference(const cs_match* match) {
    return match ? match->match.best_reference.c_str() : nullptr;
}

const char* cs_match_verdict(const cs_match* match) { return match ? match->verdict.c_str() : nullptr; }

double cs_match_baseline_deviation(const cs_match* match) { return match ? match->match.baseline_deviation : 0.0; }

cs_status cs_plot_csv(const cs_report* const* reports, size_t count, char** out) {
    return guarded_out(out, [&] {
        require(out, "out");
        if (count && !reports) fail(ErrorKind::InvalidArgument, "reports must not be NULL");
        std::vector<std::pair<std::string, std::vector<PlotRow>>> models;
        for (size_t i = 0; i < count; ++i) {
            require(reports[i], "report");
            models.emplace_back(reports[i]->report.model_name, stage_positions(reports[i]->report));
        }
        *out = duplicate(plot_csv(models));
    });
}

}  // extern "C"
