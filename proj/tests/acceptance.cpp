// Acceptance run: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <fmt/core.h>

#include "core/analysis.hpp"
#include "core/arch.hpp"
#include "core/chirality.hpp"
#include "core/documents.hpp"
#include "core/errors.hpp"
#include "core/pipeline.hpp"
#include "oracles.hpp"

using namespace chirascope;
namespace fs = std::filesystem;

namespace {

enum class Outcome { Pass, Fail, Skip };

struct Result {
    Outcome outcome;
    std::string detail;
};

Result pass(std::string d) { return {Outcome::Pass, std::move(d)}; }
Result fail_with(std::string d) { return {Outcome::Fail, std::move(d)}; }
Result check(bool ok, std::string d) { return {ok ? Outcome::Pass : Outcome::Fail, std::move(d)}; }

int g_failures = 0;

void run(const char* name, double budget_s, const std::function<Result()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Result r;
    try {
        r = body();
    } catch (const std::exception& e) {
        r = fail_with(fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.outcome != Outcome::Skip && budget_s > 0 && secs > budget_s) {
        r.outcome = Outcome::Fail;
        r.detail += fmt::format("; runtime {:.2f} s exceeds {:.0f} s", secs, budget_s);
    }
    const char* tag = r.outcome == Outcome::Pass ? "PASS" : r.outcome == Outcome::Fail ? "FAIL" : "SKIP";
    if (r.outcome == Outcome::Fail) ++g_failures;
    fmt::print("[{}] {} ({:.2f} s): {}\n", tag, name, secs, r.detail);
    std::fflush(stdout);
}

void info(const std::string& text) {
    fmt::print("       {}\n", text);
    std::fflush(stdout);
}

ConvLayer random_layer(std::mt19937_64& rng, std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
    return ConvLayer("fuzz", b, c, h, w, std::nullopt, oracle::gaussian_floats(b * c * h * w, rng()));
}

ConvLayer with_data(const ConvLayer& like, std::vector<float> data) {
    return ConvLayer(like.name(), like.kernels(), like.channels(), like.height(), like.width(), like.stage(),
                     std::move(data));
}

ModelReport analyze_synth(const SynthesizedModel& m, bool flipped) {
    return analyze_container(m.weights, &m.manifest, AnalyzeFileOptions{flipped, "weight", 0, false},
                             m.manifest.model_name);
}

// Positions of the five stage means after sorting, e.g. {2,0,1,4,3}.
std::vector<int> rank_order(const StageVector& v) {
    std::vector<int> idx;
    for (int s = 0; s < kStageCount; ++s)
        if (v[s]) idx.push_back(s);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return *v[a] < *v[b]; });
    return idx;
}

std::string stage_list(const StageVector& v) {
    std::string out;
    for (const auto& m : v) out += m ? fmt::format(" {:.5f}", *m) : std::string(" -");
    return out;
}

// ---------------------------------------------------------------------------

Result flip_correctness() {
    const Kernel k(1, 3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    if (!(flip_kernel(k) == Kernel(1, 3, 3, {3, 2, 1, 6, 5, 4, 9, 8, 7})))
        return fail_with("worked example mismatch");
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> ext(1, 7);
    std::size_t bad = 0;
    const int cases = 10000;
    for (int t = 0; t < cases; ++t) {
        const std::size_t c = ext(rng), h = ext(rng), w = ext(rng);
        const Kernel x(c, h, w, oracle::gaussian_floats(c * h * w, rng()));
        const Kernel f = flip_kernel(x);
        double n0 = 0, n1 = 0;
        for (float v : x.data()) n0 += double(v) * v;
        for (float v : f.data()) n1 += double(v) * v;
        if (!(flip_kernel(f) == x) || std::fabs(n0 - n1) > 1e-12 * n0) ++bad;
    }
    return check(bad == 0, fmt::format("worked example bit-exact; {} fuzzed kernels, {} violations", cases, bad));
}

Result oracle_equivalence() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> b(1, 4), c(1, 2);
    double worst = 0;
    const int cases = 500;
    for (int t = 0; t < cases; ++t) {
        const std::size_t kb = b(rng), kc = c(rng);
        const auto l = random_layer(rng, kb, kc, 3, 3);
        worst = std::max(worst, std::fabs(layer_similarity(l).value - oracle::similarity(l.data(), kb, kc, 3, 3, true)));
        worst = std::max(worst,
                         std::fabs(layer_similarity_noflip(l).value - oracle::similarity(l.data(), kb, kc, 3, 3, false)));
    }
    return check(worst <= 1e-12, fmt::format("{} layers, both variants, max |diff| {:.3e} (tol 1e-12)", cases, worst));
}

Result invariances() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> b(1, 12), c(1, 6), hw(2, 5);
    std::uniform_real_distribution<double> mag(0.001, 1000.0);
    const int cases = 1000;
    std::size_t out_of_range = 0;
    double worst_perm = 0, worst_scale = 0;
    for (int t = 0; t < cases; ++t) {
        const std::size_t kb = b(rng), kc = c(rng), kh = hw(rng), kw = hw(rng), d = kc * kh * kw;
        // 16-bit data and 8-bit scalars keep every scaled value exact in F32.
        auto data = oracle::gaussian_floats(kb * d, rng());
        for (auto& x : data) x = float(oracle::round_bits(x, 16));
        const ConvLayer l("fuzz", kb, kc, kh, kw, std::nullopt, data);
        const double s = layer_similarity(l).value;
        if (!(s >= 0.0 && s <= 1.0)) ++out_of_range;

        std::vector<std::size_t> perm(kb);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<float> permuted(data.size()), scaled(data);
        for (std::size_t j = 0; j < kb; ++j) {
            std::copy_n(data.begin() + perm[j] * d, d, permuted.begin() + j * d);
            const float f = float((rng() % 2 ? -1.0 : 1.0) * oracle::round_bits(mag(rng), 8));
            for (std::size_t i = 0; i < d; ++i) scaled[j * d + i] *= f;
        }
        worst_perm = std::max(worst_perm, std::fabs(layer_similarity(with_data(l, permuted)).value - s));
        worst_scale = std::max(worst_scale, std::fabs(layer_similarity(with_data(l, scaled)).value - s));
    }
    return check(out_of_range == 0 && worst_perm <= 1e-12 && worst_scale <= 1e-12,
                 fmt::format("{} cases each: {} outside [0,1], permutation max |diff| {:.3e}, scale max |diff| {:.3e} "
                             "(tol 1e-12)",
                             cases, out_of_range, worst_perm, worst_scale));
}

Result random_baseline() {
    const double target = std::sqrt(2.0 / (std::numbers::pi * 576));
    const int seeds = 50;
    auto mean_s = [&](std::size_t c, std::size_t h, std::size_t w) {
        double sum = 0;
        for (int s = 0; s < seeds; ++s)
            sum += layer_similarity(init_layer(64, c, h, w, InitMethod::KaimingNormal, s, "baseline")).value;
        return sum / seeds;
    };
    // Even width: no column is its own mirror image, so every (K, T(K')) pair
    // including the self pairs behaves like two independent directions.
    const double even = mean_s(16, 6, 6);
    const auto mc_even = oracle::mc_expected_similarity(64, 16, 6, 6, 20000, 5);
    const double rel = (even - target) / target;
    const double rel_mc = (even - mc_even.mean) / mc_even.mean;

    // 3x3: the centre column maps onto itself, which lifts each of the B self
    // pairs to |cos| of about 1/3. Reported against its own oracle.
    const double odd = mean_s(64, 3, 3);
    const auto mc_odd = oracle::mc_expected_similarity(64, 64, 3, 3, 20000, 6);
    const double rel_odd = (odd - target) / target;
    const double rel_odd_mc = (odd - mc_odd.mean) / mc_odd.mean;
    info(fmt::format("64x64x3x3: mean S {:.5f}, {:+.1f}% vs sqrt(2/(pi d)), {:+.1f}% vs Monte-Carlo {:.5f}", odd,
                     100 * rel_odd, 100 * rel_odd_mc, mc_odd.mean));

    const bool ok = std::fabs(rel) <= 0.10 && std::fabs(rel_mc) <= 0.10 && std::fabs(rel_odd_mc) <= 0.10;
    return check(ok, fmt::format("64x16x6x6 over {} seeds: mean S {:.5f}, target {:.5f} ({:+.1f}%), Monte-Carlo {:.5f} "
                                 "({:+.1f}%) (tol 10%)",
                                 seeds, even, target, 100 * rel, mc_even.mean, 100 * rel_mc));
}

struct ArchRun {
    std::map<InitMethod, ModelReport> reports;
};

std::map<std::string, ArchRun> g_runs;

Result init_invariance() {
    const InitMethod methods[] = {InitMethod::KaimingNormal, InitMethod::XavierNormal, InitMethod::PlainNormal};
    double worst = 0;
    std::size_t layers = 0;
    for (const auto id : architecture_ids()) {
        auto& run = g_runs[std::string(id)];
        for (auto m : methods) run.reports[m] = analyze_synth(synth_model(id, m, 7), true);
        const auto& k = run.reports[InitMethod::KaimingNormal];
        for (auto m : methods) {
            const auto& r = run.reports[m];
            if (r.layers.size() != k.layers.size()) return fail_with(fmt::format("{}: layer count differs", id));
            for (std::size_t i = 0; i < r.layers.size(); ++i)
                worst = std::max(worst, std::fabs(r.layers[i].value - k.layers[i].value));
        }
        layers += k.layers.size();
    }
    return check(worst <= 1e-12, fmt::format("10 architectures, {} layers x 3 methods, max |diff| {:.3e} (tol 1e-12)",
                                             layers, worst));
}

// Expected conv structure, written out independently of the registry.
struct Expected {
    std::size_t tensors;
    std::array<std::size_t, 5> per_stage;  // analyzable layers
    std::vector<std::array<std::size_t, 2>> alexnet;  // (kernel size, B)
};

Result registry_conformance() {
    std::map<std::string, Expected> expected;
    expected["alexnet"] = {5, {1, 1, 1, 1, 1}, {{11, 64}, {5, 192}, {3, 384}, {3, 256}, {3, 256}}};
    const std::map<std::string, std::array<std::size_t, 5>> vgg = {
        {"vgg11", {1, 1, 2, 2, 2}}, {"vgg13", {2, 2, 2, 2, 2}}, {"vgg16", {2, 2, 3, 3, 3}}, {"vgg19", {2, 2, 4, 4, 4}}};
    for (const auto& [id, c] : vgg) expected[id] = {std::accumulate(c.begin(), c.end(), std::size_t{0}), c, {}};
    const std::map<std::string, std::pair<std::array<std::size_t, 4>, bool>> resnet = {
        {"resnet18", {{2, 2, 2, 2}, false}},  {"resnet34", {{3, 4, 6, 3}, false}},
        {"resnet50", {{3, 4, 6, 3}, true}},   {"resnet101", {{3, 4, 23, 3}, true}},
        {"resnet152", {{3, 8, 36, 3}, true}}};
    for (const auto& [id, spec] : resnet) {
        const auto& [blocks, bottleneck] = spec;
        const std::size_t total_blocks = std::accumulate(blocks.begin(), blocks.end(), std::size_t{0});
        std::array<std::size_t, 5> per{0, 0, 0, 0, 0};
        for (int s = 0; s < 4; ++s) per[s + 1] = blocks[s] * (bottleneck ? 1 : 2);
        // stem + convs per block + downsamples (every stage for bottleneck, stages 3-5 for basic)
        expected[id] = {1 + total_blocks * (bottleneck ? 3 : 2) + (bottleneck ? 4 : 3), per, {}};
    }

    std::vector<std::string> problems;
    std::size_t checked = 0;
    for (const auto id_view : architecture_ids()) {
        const std::string id(id_view);
        const auto& exp = expected.at(id);
        const auto m = synth_model(id, InitMethod::PlainNormal, 0);
        const auto report = analyze_synth(m, true);
        if (m.weights.size() != exp.tensors)
            problems.push_back(fmt::format("{}: {} tensors, expected {}", id, m.weights.size(), exp.tensors));
        std::array<std::size_t, 5> per{0, 0, 0, 0, 0};
        const bool is_resnet = id.starts_with("resnet");
        for (std::size_t i = 0; i < report.layers.size(); ++i) {
            const auto& l = report.layers[i];
            ++per[*l.stage - 1];
            std::size_t ks = 3, b;
            if (id == "alexnet") {
                ks = exp.alexnet[i][0];
                b = exp.alexnet[i][1];
            } else if (is_resnet) {
                b = std::size_t{64} << (*l.stage - 2);
            } else {
                b = std::min<std::size_t>(512, std::size_t{64} << (*l.stage - 1));
            }
            if (l.height != ks || l.width != ks || l.kernels != b)
                problems.push_back(fmt::format("{} {}: {}x{} B={}", id, l.layer, l.height, l.width, l.kernels));
            ++checked;
        }
        if (per != exp.per_stage) problems.push_back(fmt::format("{}: per-stage counts differ", id));
        // Everything else in the container must be a 1x1 or the ResNet stem.
        for (const auto& e : m.weights.entries()) {
            const auto& rec = e.tensor();
            const bool analyzed = std::any_of(report.layers.begin(), report.layers.end(),
                                              [&](const LayerSimilarity& l) { return l.layer == e.name; });
            if (analyzed) continue;
            const bool stem = is_resnet && e.name == "conv1.weight";
            if (!stem && rec.shape[3] != 1) problems.push_back(fmt::format("{}: {} not analyzed", id, e.name));
        }
        if (is_resnet && report.stage_means[0]) problems.push_back(id + ": stage 1 analyzed");
        if (id == "alexnet" && report.layers.size() != 5) problems.push_back("alexnet: analyzable count");
        if (id == "vgg19" && report.layers.size() != 16) problems.push_back("vgg19: analyzable count");
    }
    if (!problems.empty()) return fail_with(fmt::format("{} problems, first: {}", problems.size(), problems.front()));
    return pass(fmt::format("10 architectures, {} analyzed layers match; AlexNet 5, VGG-19 16; ResNet stems and all 1x1 "
                            "excluded",
                            checked));
}

Result determinism() {
    const fs::path dir = fs::temp_directory_path() / fmt::format("chirascope_acceptance_{}", ::getpid());
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> differing;
    std::size_t files = 0;
    for (const char* arch : {"alexnet", "vgg11", "resnet18"}) {
        std::string first[3];
        for (int run = 0; run < 2; ++run) {
            const auto w = dir / fmt::format("{}_{}.safetensors", arch, run);
            const auto m = dir / fmt::format("{}_{}.manifest.json", arch, run);
            write_synth_model(arch, InitMethod::KaimingNormal, 11, w, m);
            AnalyzeFileOptions opt;
            opt.threads = run == 0 ? 1 : 3;
            const auto analyzed = analyze_file(w, &m, opt);
            auto prov = analyzed.provenance;
            prov.weights.path = "w";
            prov.manifest->path = "m";
            const auto bytes_w = read_file_bytes(w);
            const auto bytes_m = read_file_bytes(m);
            const std::string got[3] = {std::string(reinterpret_cast<const char*>(bytes_w.data()), bytes_w.size()),
                                        std::string(reinterpret_cast<const char*>(bytes_m.data()), bytes_m.size()),
                                        report_to_json(analyzed.report, &prov) +
                                            fingerprint_to_json(fingerprint(analyzed.report))};
            for (int i = 0; i < 3; ++i) {
                if (run == 0)
                    first[i] = got[i];
                else if (first[i] != got[i])
                    differing.push_back(fmt::format("{} output {}", arch, i));
            }
        }
        files += 3;
    }
    fs::remove_all(dir);
    return check(differing.empty(), differing.empty()
                                        ? fmt::format("{} outputs (container, manifest, report) byte-identical across "
                                                      "reruns and worker counts",
                                                      files)
                                        : "differs: " + differing.front());
}

std::optional<SynthesizedModel> g_vgg11;

Result ablation() {
    std::vector<std::string> notes;
    bool ok = true;
    auto compare = [&](const std::string& label, const ModelReport& f, const ModelReport& n) {
        const auto a = rank_order(f.stage_means), b = rank_order(n.stage_means);
        ok = ok && a == b && a.size() == 5;
        notes.push_back(fmt::format("{} {}", label, a == b ? "same order" : "order differs"));
        info(fmt::format("{} flipped:{}", label, stage_list(f.stage_means)));
        info(fmt::format("{} no-flip:{}", label, stage_list(n.stage_means)));
    };
    for (std::uint64_t seed : {0, 1, 2}) {
        const auto m = synth_model("vgg11", InitMethod::KaimingNormal, seed);
        compare(fmt::format("synthesized vgg11 seed {}", seed), analyze_synth(m, true), analyze_synth(m, false));
    }
    if (const char* dir = std::getenv("CHIRASCOPE_PRETRAINED_DIR")) {
        const fs::path w = fs::path(dir) / "vgg11.safetensors";
        if (fs::exists(w)) {
            const auto m = synth_model("vgg11", InitMethod::KaimingNormal, 0);
            const auto map = read_container(w);
            compare("pretrained vgg11", analyze_container(map, &m.manifest, {}, "vgg11"),
                    analyze_container(map, &m.manifest, AnalyzeFileOptions{false, "weight", 0, false}, "vgg11"));
        } else {
            notes.push_back("pretrained vgg11 not supplied");
        }
    } else {
        notes.push_back("pretrained vgg11 not supplied");
    }
    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    return check(ok, detail);
}

Result integration() {
    const char* dir = std::getenv("CHIRASCOPE_PRETRAINED_DIR");
    if (!dir) return {Outcome::Skip, "set CHIRASCOPE_PRETRAINED_DIR to a directory with vgg16, resnet18 and resnet50 "
                                     ".safetensors checkpoints"};
    std::vector<std::string> missing;
    for (const char* id : {"vgg16", "resnet18", "resnet50"})
        if (!fs::exists(fs::path(dir) / fmt::format("{}.safetensors", id))) missing.push_back(id);
    if (!missing.empty()) return {Outcome::Skip, fmt::format("missing {}.safetensors in {}", missing.front(), dir)};

    auto trained = [&](const std::string& id) {
        const fs::path w = fs::path(dir) / (id + ".safetensors");
        const fs::path mp = fs::path(dir) / (id + ".manifest.json");
        const auto registry_manifest = synth_model(id, InitMethod::KaimingNormal, 0).manifest;
        const Manifest manifest = fs::exists(mp) ? read_manifest(mp) : registry_manifest;
        return analyze_container(read_container(w), &manifest, {}, id);
    };
    bool ok = true;
    std::vector<std::string> notes;
    for (const char* id : {"vgg16", "resnet18"}) {
        const auto t = trained(id);
        const auto u = analyze_synth(synth_model(id, InitMethod::KaimingNormal, 0), true);
        const auto c = compare_reports(u, t);
        const double frac = double(c.decreasing) / double(c.residual.layer_count);
        const bool good = c.residual.total > 1e-3 && frac >= 0.8;
        ok = ok && good;
        notes.push_back(fmt::format("{} E(M) {:.4f}, {:.0f}% decreasing", id, c.residual.total, 100 * frac));
    }
    for (const char* id : {"vgg16", "resnet50"}) {
        const auto t = trained(id);
        int violations = 0;
        for (int s = 1; s < 4; ++s)
            if (t.stage_means[s] && t.stage_means[s + 1] && *t.stage_means[s + 1] < *t.stage_means[s]) ++violations;
        ok = ok && violations <= 1;
        notes.push_back(fmt::format("{} stage means{} ({} violations from stage 2 to 5)", id, stage_list(t.stage_means), violations));
    }
    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    return check(ok, detail);
}

}  // namespace

int main() {
    fmt::print("chirascope {} acceptance\n", tool_version());
    run("flip correctness", 1, flip_correctness);
    run("oracle equivalence", 5, oracle_equivalence);
    run("range, permutation and scale invariance", 0, invariances);
    run("random-direction baseline", 30, random_baseline);
    run("initialization invariance", 60, init_invariance);
    run("registry conformance", 0, registry_conformance);
    run("determinism", 0, determinism);
    run("pretrained trends", 300, integration);
    run("no-flip ablation rank order", 0, ablation);
    fmt::print("{} criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
