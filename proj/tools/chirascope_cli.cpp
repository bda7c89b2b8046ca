// chirascope command-line tool. Talks to the library only through chirascope.h.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chirascope.h"

namespace fs = std::filesystem;

namespace {

// Stable exit codes.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitNoLayers = 3;
constexpr int kExitMismatch = 4;
constexpr int kExitNoRefs = 5;

int exit_code(cs_status status) {
    switch (status) {
        case CS_OK: return kExitOk;
        case CS_ERR_INVALID_ARGUMENT:
        case CS_ERR_PARSE:
        case CS_ERR_IO:
        case CS_ERR_UNDEFINED_SIMILARITY: return kExitInput;
        case CS_ERR_NO_ANALYZABLE_LAYERS: return kExitNoLayers;
        case CS_ERR_LAYER_MISMATCH: return kExitMismatch;
        case CS_ERR_NO_REFERENCES: return kExitNoRefs;
        case CS_ERR_INTERNAL: break;
    }
    return kExitUsage;
}

struct Failure {
    int code;
};

void check(cs_status status) {
    if (status == CS_OK) return;
    std::cerr << "chirascope: " << cs_status_name(status) << ": " << cs_last_error() << "\n";
    throw Failure{exit_code(status)};
}

[[noreturn]] void die(int code, const std::string& message) {
    std::cerr << "chirascope: " << message << "\n";
    throw Failure{code};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using ReportPtr = std::unique_ptr<cs_report, Deleter<cs_report, cs_report_free>>;
using ResidualPtr = std::unique_ptr<cs_residual, Deleter<cs_residual, cs_residual_free>>;
using FingerprintPtr = std::unique_ptr<cs_fingerprint, Deleter<cs_fingerprint, cs_fingerprint_free>>;
using MatchPtr = std::unique_ptr<cs_match, Deleter<cs_match, cs_match_free>>;

std::string take_string(char* text) {
    std::string out(text);
    cs_string_free(text);
    return out;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) die(kExitInput, "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check_output_dir(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        die(kExitInput, "output directory '" + parent.string() + "' does not exist");
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) die(kExitInput, "cannot write '" + path + "'");
    out << text;
    if (!out) die(kExitInput, "failed writing '" + path + "'");
}

void print_warnings(const cs_report* report) {
    for (size_t i = 0; i < cs_report_warning_count(report); ++i)
        std::cerr << "chirascope: warning: " << cs_report_warning(report, i) << "\n";
}

ReportPtr analyze(const std::string& weights, const std::string& manifest, bool no_flip, const std::string& suffix,
                  unsigned threads, bool stamp) {
    cs_analyze_options opts;
    cs_analyze_options_init(&opts);
    opts.flipped = no_flip ? 0 : 1;
    opts.suffix = suffix.c_str();
    opts.threads = threads;
    opts.stamp = stamp ? 1 : 0;
    cs_report* raw = nullptr;
    check(cs_analyze_file(weights.c_str(), manifest.empty() ? nullptr : manifest.c_str(), &opts, &raw));
    ReportPtr report(raw);
    print_warnings(report.get());
    return report;
}

ReportPtr load_report(const std::string& path) {
    const std::string text = read_text(path);
    cs_report* raw = nullptr;
    const cs_status st = cs_report_from_json(text.data(), text.size(), &raw);
    if (st != CS_OK) die(exit_code(st), path + ": " + cs_last_error());
    return ReportPtr(raw);
}

void print_summary(const cs_report* report) {
    std::printf("model %s (family %s, %s)\n", cs_report_model_name(report), cs_report_family(report),
                cs_report_flipped(report) ? "flipped" : "no-flip ablation");
    std::printf("  %-6s %7s %12s\n", "stage", "layers", "mean S");
    size_t unassigned = 0;
    std::vector<size_t> counts(6, 0);
    for (size_t i = 0; i < cs_report_layer_count(report); ++i) {
        cs_layer_info info;
        check(cs_report_layer(report, i, &info));
        ++counts[static_cast<size_t>(info.stage)];
        if (info.stage == 0) ++unassigned;
    }
    for (int s = 1; s <= 5; ++s) {
        double mean = 0.0;
        if (cs_report_stage_mean(report, s, &mean))
            std::printf("  %-6d %7zu %12.6f\n", s, counts[s], mean);
        else
            std::printf("  %-6d %7zu %12s\n", s, counts[s], "-");
    }
    if (unassigned) std::printf("  %zu layer(s) without a stage\n", unassigned);
    std::printf("  analyzed %zu, skipped %zu\n", cs_report_layer_count(report), cs_report_skipped_count(report));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel-mirror similarity analysis of CNN weights"};
    app.set_version_flag("--version", std::string(cs_version()));
    app.require_subcommand(1);

    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = CHIRASCOPE_THREADS or all cores)");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Average kernel similarity per layer");
    std::string a_weights, a_manifest, a_out, a_suffix = "weight";
    bool a_noflip = false, a_stamp = false;
    analyze_cmd->add_option("weights", a_weights, "Tensor container")->required();
    analyze_cmd->add_option("--manifest", a_manifest, "Layer manifest (stages and inclusion)");
    analyze_cmd->add_flag("--no-flip", a_noflip, "Compare kernels with unflipped kernels (ablation)");
    analyze_cmd->add_option("--suffix", a_suffix, "Tensor-name suffix used without a manifest")->capture_default_str();
    analyze_cmd->add_option("--out,-o", a_out, "Report output path")->required();
    analyze_cmd->add_flag("--stamp", a_stamp, "Embed a UTC timestamp in the report");

    // synth-init
    auto* synth_cmd = app.add_subcommand("synth-init", "Write untrained weights for a registry architecture");
    std::string s_arch, s_method = "kaiming", s_out, s_manifest;
    std::uint64_t s_seed = 0;
    synth_cmd->add_option("--arch", s_arch, "Architecture id")->required();
    synth_cmd->add_option("--method", s_method, "kaiming | xavier | normal")->capture_default_str();
    synth_cmd->add_option("--seed", s_seed, "Generator seed")->capture_default_str();
    synth_cmd->add_option("--out,-o", s_out, "Container output path")->required();
    synth_cmd->add_option("--manifest", s_manifest, "Manifest output path (default: <out stem>.manifest.json)");

    // residual
    auto* residual_cmd = app.add_subcommand("residual", "Commutative residual between trained and untrained weights");
    std::string r_trained, r_untrained, r_manifest, r_tmanifest, r_umanifest, r_out, r_suffix = "weight";
    bool r_noflip = false;
    residual_cmd->add_option("trained", r_trained, "Trained container")->required();
    residual_cmd->add_option("untrained", r_untrained, "Untrained container")->required();
    residual_cmd->add_option("--manifest", r_manifest, "Manifest applied to both containers");
    residual_cmd->add_option("--trained-manifest", r_tmanifest, "Manifest for the trained container");
    residual_cmd->add_option("--untrained-manifest", r_umanifest, "Manifest for the untrained container");
    residual_cmd->add_flag("--no-flip", r_noflip, "Use the no-flip ablation on both sides");
    residual_cmd->add_option("--suffix", r_suffix, "Tensor-name suffix used without a manifest")->capture_default_str();
    residual_cmd->add_option("--out,-o", r_out, "Residual output path")->required();

    // fingerprint
    auto* fp_cmd = app.add_subcommand("fingerprint", "Match a report against reference fingerprints");
    std::string f_report, f_refs, f_out, f_save;
    cs_thresholds thresholds;
    cs_thresholds_init(&thresholds);
    fp_cmd->add_option("report", f_report, "Query report")->required();
    fp_cmd->add_option("--refs", f_refs, "Directory of reference fingerprint or report documents (*.json)")->required();
    fp_cmd->add_option("--out,-o", f_out, "Match output path")->required();
    fp_cmd->add_option("--untrained-below", thresholds.untrained_below, "Baseline deviation below which weights "
                                                                         "look untrained")
        ->capture_default_str();
    fp_cmd->add_option("--trained-above", thresholds.trained_above, "Baseline deviation above which weights look "
                                                                     "trained")
        ->capture_default_str();
    fp_cmd->add_option("--save-fingerprint", f_save, "Also write the query's fingerprint document");

    // plotdata
    auto* plot_cmd = app.add_subcommand("plotdata", "Stage-stretched plot rows as CSV");
    std::vector<std::string> p_reports;
    std::string p_out;
    plot_cmd->add_option("reports", p_reports, "Report documents")->required();
    plot_cmd->add_option("--out,-o", p_out, "CSV output path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*analyze_cmd) {
            check_output_dir(a_out);
            auto report = analyze(a_weights, a_manifest, a_noflip, a_suffix, threads, a_stamp);
            char* json = nullptr;
            check(cs_report_to_json(report.get(), &json));
            write_text(a_out, take_string(json));
            print_summary(report.get());
        } else if (*synth_cmd) {
            if (s_manifest.empty()) {
                fs::path p(s_out);
                s_manifest = (p.parent_path() / (p.stem().string() + ".manifest.json")).string();
            }
            check_output_dir(s_out);
            check_output_dir(s_manifest);
            cs_init_method method;
            check(cs_parse_init_method(s_method.c_str(), &method));
            check(cs_synth_model(s_arch.c_str(), method, s_seed, s_out.c_str(), s_manifest.c_str()));
            std::printf("wrote %s and %s (%s, %s, seed %llu)\n", s_out.c_str(), s_manifest.c_str(), s_arch.c_str(),
                        s_method.c_str(), static_cast<unsigned long long>(s_seed));
        } else if (*residual_cmd) {
            check_output_dir(r_out);
            const std::string tman = r_tmanifest.empty() ? r_manifest : r_tmanifest;
            const std::string uman = r_umanifest.empty() ? r_manifest : r_umanifest;
            auto trained = analyze(r_trained, tman, r_noflip, r_suffix, threads, false);
            auto untrained = analyze(r_untrained, uman, r_noflip, r_suffix, threads, false);
            cs_residual* raw = nullptr;
            check(cs_compare_reports(untrained.get(), trained.get(), &raw));
            ResidualPtr residual(raw);
            char* json = nullptr;
            check(cs_residual_to_json(residual.get(), &json));
            write_text(r_out, take_string(json));
            std::printf("E(M) = %.9g over %zu layers; chirality %s\n", cs_residual_total(residual.get()),
                        cs_residual_layer_count(residual.get()),
                        cs_residual_chirality_present(residual.get()) ? "present" : "absent");
            std::printf("  S decreased after training in %zu layer(s), increased in %zu\n",
                        cs_residual_decreasing(residual.get()), cs_residual_increasing(residual.get()));
        } else if (*fp_cmd) {
            check_output_dir(f_out);
            auto query = load_report(f_report);
            if (!fs::is_directory(f_refs)) die(kExitNoRefs, "reference directory '" + f_refs + "' does not exist");
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(f_refs))
                if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
            std::sort(files.begin(), files.end());
            if (files.empty()) die(kExitNoRefs, "no reference documents in '" + f_refs + "'");

            std::vector<FingerprintPtr> refs;
            for (const auto& file : files) {
                const std::string text = read_text(file.string());
                cs_fingerprint* raw = nullptr;
                const cs_status st = cs_fingerprint_from_json(text.data(), text.size(), &raw);
                if (st != CS_OK) die(exit_code(st), file.string() + ": " + cs_last_error());
                refs.emplace_back(raw);
            }
            std::vector<const cs_fingerprint*> views;
            for (const auto& r : refs) views.push_back(r.get());

            if (!f_save.empty()) {
                check_output_dir(f_save);
                cs_fingerprint* raw = nullptr;
                check(cs_fingerprint_from_report(query.get(), &raw));
                FingerprintPtr fp(raw);
                char* json = nullptr;
                check(cs_fingerprint_to_json(fp.get(), &json));
                write_text(f_save, take_string(json));
            }

            cs_match* raw = nullptr;
            check(cs_classify(query.get(), views.data(), views.size(), &thresholds, &raw));
            MatchPtr match(raw);
            char* json = nullptr;
            check(cs_match_to_json(match.get(), &json));
            write_text(f_out, take_string(json));
            std::printf("%s: closest %s (%s); verdict %s (baseline deviation %.4f)\n", cs_report_model_name(query.get()),
                        cs_match_best_reference(match.get()), cs_match_best_family(match.get()),
                        cs_match_verdict(match.get()), cs_match_baseline_deviation(match.get()));
        } else if (*plot_cmd) {
            check_output_dir(p_out);
            std::vector<ReportPtr> reports;
            for (const auto& path : p_reports) reports.push_back(load_report(path));
            std::vector<const cs_report*> views;
            for (const auto& r : reports) views.push_back(r.get());
            char* csv = nullptr;
            check(cs_plot_csv(views.data(), views.size(), &csv));
            write_text(p_out, take_string(csv));
            std::printf("wrote %s (%zu report(s))\n", p_out.c_str(), reports.size());
        }
    } catch (const Failure& f) {
        return f.code;
    }
    return kExitOk;
}
