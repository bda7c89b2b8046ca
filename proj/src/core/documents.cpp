#include "core/documents.hpp"

#include <charconv>
#include <cmath>

#include <fmt/core.h>
#include <openssl/evp.h>

#include "core/errors.hpp"
#include "json.hpp"

#ifndef CHIRASCOPE_VERSION
#define CHIRASCOPE_VERSION "0.0.0"
#endif

namespace chirascope {

using ojson = nlohmann::ordered_json;

namespace {

constexpr int kSchema = 1;

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }
ojson optional_stage(const Stage& s) { return s ? ojson(*s) : ojson(nullptr); }
ojson optional_bool(const std::optional<bool>& b) { return b ? ojson(*b) : ojson(nullptr); }

ojson stage_vector_json(const StageVector& v) {
    ojson arr = ojson::array();
    for (const auto& x : v) arr.push_back(optional_number(x));
    return arr;
}

ojson source_json(const SourceInfo& s) { return ojson{{"path", s.path}, {"sha256", s.sha256}}; }

ojson provenance_json(const Provenance& p) {
    ojson out = source_json(p.weights);
    out["manifest"] = p.manifest ? source_json(*p.manifest) : ojson(nullptr);
    return out;
}

ojson header(std::string_view kind) {
    return ojson{{"kind", std::string("chirascope.") + std::string(kind)},
                 {"schema", kSchema},
                 {"tool_version", std::string(tool_version())}};
}

std::string dump(const ojson& doc) { return doc.dump(2) + "\n"; }

ojson parse_document(std::string_view text, std::string_view what) {
    try {
        ojson doc = ojson::parse(text);
        if (!doc.is_object()) fail(ErrorKind::Parse, fmt::format("{} is not a JSON object", what));
        return doc;
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, fmt::format("{} is not valid JSON: {}", what, e.what()));
    }
}

std::string kind_of(const ojson& doc) {
    auto it = doc.find("kind");
    return (it != doc.end() && it->is_string()) ? it->get<std::string>() : std::string();
}

// Documents from a newer tool may change field meanings; refuse them.
void check_document(const ojson& doc, std::string_view kind) {
    if (kind_of(doc) != kind)
        fail(ErrorKind::Parse, fmt::format("expected a {} document, found kind '{}'", kind, kind_of(doc)));
    const auto it = doc.find("schema");
    if (it == doc.end() || !it->is_number_integer() || it->get<int>() != 1)
        fail(ErrorKind::Parse, fmt::format("{} document has unsupported schema (expected 1)", kind));
}

std::size_t read_extent(const ojson& layer, const char* key, const std::string& name) {
    const auto v = layer.at(key).get<std::size_t>();
    if (v == 0) fail(ErrorKind::Parse, fmt::format("layer '{}': {} must be at least 1", name, key));
    return v;
}

Stage read_stage(const ojson& j, const std::string& layer) {
    if (j.is_null()) return std::nullopt;
    const int s = j.get<int>();
    if (!valid_stage(s)) fail(ErrorKind::Parse, fmt::format("layer '{}': stage {} outside 1..5", layer, s));
    return s;
}

std::optional<bool> read_optional_bool(const ojson& doc, const char* key) {
    auto it = doc.find(key);
    if (it == doc.end() || it->is_null()) return std::nullopt;
    return it->get<bool>();
}

SourceInfo read_source(const ojson& j) { return SourceInfo{j.at("path").get<std::string>(), j.at("sha256").get<std::string>()}; }

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string_view tool_version() { return CHIRASCOPE_VERSION; }

std::string report_to_json(const ModelReport& report, const Provenance* provenance) {
    ojson doc = header("report");
    if (provenance) {
        doc["source"] = provenance_json(*provenance);
        if (provenance->stamp) doc["stamp"] = *provenance->stamp;
    } else {
        doc["source"] = nullptr;
    }
    doc["model_name"] = report.model_name;
    doc["family"] = std::string(to_string(report.family));
    doc["trained"] = optional_bool(report.trained);
    doc["flipped"] = report.flipped;
    ojson layers = ojson::array();
    for (const auto& l : report.layers) {
        layers.push_back(ojson{{"name", l.layer},
                               {"stage", optional_stage(l.stage)},
                               {"kernels", l.kernels},
                               {"channels", l.channels},
                               {"height", l.height},
                               {"width", l.width},
                               {"dim", l.dim()},
                               {"similarity", l.value}});
    }
    doc["layers"] = std::move(layers);
    ojson skipped = ojson::array();
    for (const auto& s : report.skipped) skipped.push_back(ojson{{"name", s.name}, {"reason", s.reason}});
    doc["skipped"] = std::move(skipped);
    doc["stage_means"] = stage_vector_json(report.stage_means);
    return dump(doc);
}

ReportDocument report_from_json(std::string_view text) {
    const ojson doc = parse_document(text, "report");
    check_document(doc, "chirascope.report");
    try {
        ReportDocument out;
        auto& r = out.report;
        r.model_name = doc.at("model_name").get<std::string>();
        r.family = parse_family(doc.at("family").get<std::string>());
        r.trained = read_optional_bool(doc, "trained");
        r.flipped = doc.at("flipped").get<bool>();
        for (const auto& l : doc.at("layers")) {
            LayerSimilarity s;
            s.layer = l.at("name").get<std::string>();
            s.stage = read_stage(l.at("stage"), s.layer);
            s.kernels = read_extent(l, "kernels", s.layer);
            s.channels = read_extent(l, "channels", s.layer);
            s.height = read_extent(l, "height", s.layer);
            s.width = read_extent(l, "width", s.layer);
            if (l.contains("dim") && l["dim"].get<std::size_t>() != s.dim())
                fail(ErrorKind::Parse, fmt::format("layer '{}': dim does not equal channels * height * width", s.layer));
            s.value = l.at("similarity").get<double>();
            s.flipped = r.flipped;
            if (!(s.value >= 0.0 && s.value <= 1.0))
                fail(ErrorKind::Parse, fmt::format("layer '{}': similarity {} outside [0, 1]", s.layer, s.value));
            r.layers.push_back(std::move(s));
        }
        if (doc.contains("skipped"))
            for (const auto& s : doc.at("skipped"))
                r.skipped.push_back(SkippedLayer{s.at("name").get<std::string>(), s.at("reason").get<std::string>()});
        fill_stage_means(r);
        if (doc.contains("source") && !doc["source"].is_null()) {
            const auto& src = doc["source"];
            Provenance p;
            p.weights = read_source(src);
            if (src.contains("manifest") && !src["manifest"].is_null()) p.manifest = read_source(src["manifest"]);
            if (doc.contains("stamp")) p.stamp = doc["stamp"].get<std::string>();
            out.provenance = std::move(p);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, fmt::format("malformed report: {}", e.what()));
    }
}

std::string fingerprint_to_json(const Fingerprint& fp, const std::string* source_sha256) {
    ojson doc = header("fingerprint");
    doc["model_name"] = fp.model_name;
    doc["family"] = std::string(to_string(fp.family));
    doc["trained"] = optional_bool(fp.trained);
    doc["vector"] = stage_vector_json(fp.vector);
    doc["source_sha256"] = source_sha256 ? ojson(*source_sha256) : ojson(nullptr);
    return dump(doc);
}

Fingerprint fingerprint_from_json(std::string_view text) {
    const ojson doc = parse_document(text, "fingerprint");
    const std::string kind = kind_of(doc);
    if (kind == "chirascope.report") return fingerprint(report_from_json(text).report);
    if (kind != "chirascope.fingerprint")
        fail(ErrorKind::Parse, fmt::format("expected a fingerprint or report document, found kind '{}'", kind));
    check_document(doc, kind);
    try {
        Fingerprint fp;
        fp.model_name = doc.at("model_name").get<std::string>();
        fp.family = parse_family(doc.at("family").get<std::string>());
        fp.trained = read_optional_bool(doc, "trained");
        const auto& vec = doc.at("vector");
        if (!vec.is_array() || vec.size() != kStageCount)
            fail(ErrorKind::Parse, "fingerprint vector must have five entries");
        for (int s = 0; s < kStageCount; ++s) {
            if (vec[s].is_null()) continue;
            const double v = vec[s].get<double>();
            if (!(v >= 0.0 && v <= 1.0))
                fail(ErrorKind::Parse, fmt::format("fingerprint component {} = {} outside [0, 1]", s + 1, v));
            fp.vector[s] = v;
        }
        if (fp.present() == 0) fail(ErrorKind::Parse, "fingerprint has no stage components");
        return fp;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, fmt::format("malformed fingerprint: {}", e.what()));
    }
}

std::string residual_to_json(const ResidualComparison& comparison, const Provenance* untrained,
                             const Provenance* trained) {
    ojson doc = header("residual");
    doc["untrained"] = untrained ? provenance_json(*untrained) : ojson(nullptr);
    doc["trained"] = trained ? provenance_json(*trained) : ojson(nullptr);
    ojson layers = ojson::array();
    for (const auto& l : comparison.residual.layers)
        layers.push_back(ojson{{"name", l.layer},
                               {"stage", optional_stage(l.stage)},
                               {"s_untrained", l.s_untrained},
                               {"s_trained", l.s_trained},
                               {"residual", l.residual}});
    doc["layers"] = std::move(layers);
    doc["total"] = comparison.residual.total;
    doc["layer_count"] = comparison.residual.layer_count;
    doc["tolerance"] = comparison.residual.tolerance;
    doc["chirality_present"] = comparison.residual.chirality_present;
    doc["direction"] = ojson{{"decreasing", comparison.decreasing},
                             {"increasing", comparison.increasing},
                             {"unchanged", comparison.unchanged}};
    return dump(doc);
}

std::string match_to_json(const MatchResult& match) {
    ojson doc = header("match");
    doc["query"] = match.query;
    doc["best_family"] = std::string(to_string(match.best_family));
    doc["best_reference"] = match.best_reference;
    doc["family_tie"] = match.family_tie;
    doc["verdict"] = std::string(to_string(match.verdict));
    doc["baseline_deviation"] = std::isfinite(match.baseline_deviation) ? ojson(match.baseline_deviation) : ojson(nullptr);
    doc["thresholds"] = ojson{{"untrained_below", match.thresholds.untrained_below},
                              {"trained_above", match.thresholds.trained_above}};
    ojson distances = ojson::array();
    for (const auto& d : match.distances)
        distances.push_back(ojson{{"reference", d.reference},
                                  {"family", std::string(to_string(d.family))},
                                  {"distance", d.distance},
                                  {"shared_stages", d.shared_stages}});
    doc["distances"] = std::move(distances);
    return dump(doc);
}

std::string plot_csv(std::span<const std::pair<std::string, std::vector<PlotRow>>> models) {
    std::string out = "model,layer,stage,x,y\n";
    for (const auto& [model, rows] : models)
        for (const auto& r : rows)
            out += fmt::format("{},{},{},{},{}\n", csv_field(model), csv_field(r.layer), r.stage, format_double(r.x),
                               format_double(r.y));
    return out;
}

std::string sha256_hex(std::span<const std::byte> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        fail(ErrorKind::Io, "SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

}  // namespace chirascope
