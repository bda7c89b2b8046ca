#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "core/arch.hpp"
#include "core/documents.hpp"
#include "core/errors.hpp"
#include "core/pipeline.hpp"
#include "doctest.h"

using namespace chirascope;
using nlohmann::json;

namespace {

ModelReport vgg_report() {
    const auto m = synth_model("vgg11", InitMethod::KaimingNormal, 2);
    return analyze_container(m.weights, &m.manifest, {}, "vgg11");
}

void expect_parse_error(const std::string& text) {
    try {
        report_from_json(text);
        FAIL("accepted: " << text.substr(0, 80));
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Parse);
    }
}

}  // namespace

TEST_CASE("report round trip") {
    const auto r = vgg_report();
    Provenance p{{"w.safetensors", std::string(64, 'a')}, SourceInfo{"m.json", std::string(64, 'b')},
                 std::string("2026-01-01T00:00:00Z")};
    const auto text = report_to_json(r, &p);
    CHECK(text.back() == '\n');
    const auto doc = json::parse(text);
    CHECK(doc["kind"] == "chirascope.report");
    CHECK(doc["schema"] == 1);
    CHECK(doc["tool_version"] == std::string(tool_version()));
    CHECK(doc["source"]["manifest"]["sha256"] == std::string(64, 'b'));
    CHECK(doc["stamp"] == "2026-01-01T00:00:00Z");
    CHECK(doc["layers"].size() == 8);
    CHECK(doc["layers"][0]["dim"] == 27);

    const auto back = report_from_json(text);
    CHECK(back.report.model_name == r.model_name);
    CHECK(back.report.family == r.family);
    CHECK(back.report.trained == r.trained);
    REQUIRE(back.report.layers.size() == r.layers.size());
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
        CHECK(back.report.layers[i].layer == r.layers[i].layer);
        CHECK(back.report.layers[i].value == r.layers[i].value);  // shortest round-trip text
        CHECK(back.report.layers[i].stage == r.layers[i].stage);
    }
    CHECK(back.report.stage_means == r.stage_means);
    REQUIRE(back.provenance);
    CHECK(back.provenance->weights.path == "w.safetensors");
    CHECK(report_to_json(back.report, &*back.provenance) == text);

    // Without provenance or stamp.
    const auto bare = report_to_json(r);
    CHECK(json::parse(bare).count("stamp") == 0);
    CHECK(report_to_json(report_from_json(bare).report) == bare);
}

TEST_CASE("reports with unassigned stages and skipped layers") {
    ModelReport r;
    r.model_name = "odd \"name\"";
    r.flipped = false;
    r.layers.push_back(LayerSimilarity{"a", std::nullopt, 2, 1, 3, 3, 0.25, false});
    r.skipped.push_back(SkippedLayer{"pw", "kernel width 1 cannot be flipped"});
    fill_stage_means(r);
    const auto text = report_to_json(r);
    const auto doc = json::parse(text);
    CHECK(doc["layers"][0]["stage"].is_null());
    CHECK(doc["flipped"] == false);
    CHECK(doc["trained"].is_null());
    CHECK(doc["family"] == "unknown");
    for (const auto& m : doc["stage_means"]) CHECK(m.is_null());
    const auto back = report_from_json(text).report;
    CHECK(back.model_name == r.model_name);
    CHECK(back.skipped.size() == 1);
    CHECK(back.skipped[0].reason == r.skipped[0].reason);
    CHECK_FALSE(back.trained.has_value());
}

TEST_CASE("malformed report documents") {
    const auto good = json::parse(report_to_json(vgg_report()));
    expect_parse_error("");
    expect_parse_error("[1, 2]");
    expect_parse_error("{\"kind\": \"chirascope.residual\"}");
    auto edit = [&](auto fn) {
        auto d = good;
        fn(d);
        expect_parse_error(d.dump());
    };
    edit([](json& d) { d.erase("layers"); });
    edit([](json& d) { d["layers"][0]["similarity"] = 1.5; });
    edit([](json& d) { d["layers"][0]["similarity"] = "x"; });
    edit([](json& d) { d["layers"][0]["stage"] = 6; });
    edit([](json& d) { d["layers"][0].erase("name"); });
    edit([](json& d) { d["family"] = "lenet"; });
    edit([](json& d) { d["schema"] = 2; });
    edit([](json& d) { d["flipped"] = "yes"; });
}

TEST_CASE("stored stage means are recomputed") {
    auto d = json::parse(report_to_json(vgg_report()));
    d["stage_means"] = json::array({0.9, 0.9, 0.9, 0.9, 0.9});
    const auto r = report_from_json(d.dump()).report;
    CHECK(*r.stage_means[0] == r.layers[0].value);
}

TEST_CASE("fingerprint documents") {
    const auto r = vgg_report();
    auto f = fingerprint(r);
    const std::string digest(64, 'c');
    const auto text = fingerprint_to_json(f, &digest);
    const auto doc = json::parse(text);
    CHECK(doc["kind"] == "chirascope.fingerprint");
    CHECK(doc["vector"].size() == 5);
    CHECK(doc["source_sha256"] == digest);
    const auto back = fingerprint_from_json(text);
    CHECK(back.vector == f.vector);
    CHECK(back.family == Family::Vgg);
    CHECK(back.model_name == "vgg11");
    CHECK(back.trained == false);

    // A report is accepted as a fingerprint source.
    CHECK(fingerprint_from_json(report_to_json(r)).vector == f.vector);

    auto partial = doc;
    partial["vector"][0] = nullptr;
    CHECK_FALSE(fingerprint_from_json(partial.dump()).vector[0]);
    auto bad = doc;
    bad["vector"] = json::array({0.1, 0.2});
    CHECK_THROWS_AS(fingerprint_from_json(bad.dump()), Error);
    bad = doc;
    bad["vector"][2] = -0.1;
    CHECK_THROWS_AS(fingerprint_from_json(bad.dump()), Error);
    bad = doc;
    bad["vector"] = json::array({nullptr, nullptr, nullptr, nullptr, nullptr});
    CHECK_THROWS_AS(fingerprint_from_json(bad.dump()), Error);
    CHECK_THROWS_AS(fingerprint_from_json("{\"kind\": \"x\"}"), Error);
}

TEST_CASE("residual document") {
    const auto u = vgg_report();
    auto t = u;
    t.layers[0].value -= 0.01;
    t.layers[3].value += 0.002;
    fill_stage_means(t);
    const auto c = compare_reports(u, t);
    Provenance pu{{"u.safetensors", std::string(64, '1')}, std::nullopt, std::nullopt};
    const auto doc = json::parse(residual_to_json(c, &pu, nullptr));
    CHECK(doc["kind"] == "chirascope.residual");
    CHECK(doc["untrained"]["path"] == "u.safetensors");
    CHECK(doc["trained"].is_null());
    CHECK(doc["layers"].size() == 8);
    CHECK(doc["layers"][0]["s_untrained"] == u.layers[0].value);
    CHECK(doc["layers"][0]["residual"].get<double>() == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(doc["total"].get<double>() == doctest::Approx(0.012).epsilon(1e-9));
    CHECK(doc["layer_count"] == 8);
    CHECK(doc["chirality_present"] == true);
    CHECK(doc["direction"]["decreasing"] == 1);
    CHECK(doc["direction"]["increasing"] == 1);
    CHECK(doc["direction"]["unchanged"] == 6);
    CHECK(doc["tolerance"].get<double>() == doctest::Approx(8e-9));
}

TEST_CASE("match document") {
    const auto r = vgg_report();
    const std::vector<Fingerprint> refs = {fingerprint(r)};
    const auto m = classify(fingerprint(r), refs, layer_samples(r));
    const auto doc = json::parse(match_to_json(m));
    CHECK(doc["kind"] == "chirascope.match");
    CHECK(doc["best_family"] == "vgg");
    CHECK(doc["best_reference"] == "vgg11");
    CHECK(doc["verdict"] == "untrained");
    CHECK(doc["distances"][0]["distance"] == 0.0);
    CHECK(doc["thresholds"]["untrained_below"] == 0.15);
    CHECK(doc["baseline_deviation"].get<double>() == m.baseline_deviation);

    // NaN deviation is written as null.
    const auto none = classify(fingerprint(r), refs, {});
    CHECK(json::parse(match_to_json(none))["baseline_deviation"].is_null());
}

TEST_CASE("plot csv") {
    std::vector<std::pair<std::string, std::vector<PlotRow>>> models;
    models.push_back({"a,b", {{"l1", 1, 1.5, 0.25}, {"l2", 2, 2.25, 0.1}}});
    models.push_back({"plain", {{"x\"y", 3, 3.5, 1.0 / 3}}});
    const auto csv = plot_csv(models);
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == "model,layer,stage,x,y");
    CHECK(lines[1] == "\"a,b\",l1,1,1.5,0.25");
    CHECK(lines[2] == "\"a,b\",l2,2,2.25,0.1");
    CHECK(lines[3] == "plain,\"x\"\"y\",3,3.5,0.3333333333333333");
    CHECK(csv.back() == '\n');
    CHECK(plot_csv({}) == "model,layer,stage,x,y\n");
}

TEST_CASE("sha256") {
    CHECK(sha256_hex({}) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(sha256_hex(std::as_bytes(std::span(abc))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("more malformed reports") {
    const auto good = json::parse(report_to_json(vgg_report()));
    auto d = good;
    d["layers"][0]["width"] = 0;
    expect_parse_error(d.dump());
    d = good;
    d["layers"][0]["dim"] = 28;
    expect_parse_error(d.dump());
    d = good;
    d.erase("schema");
    expect_parse_error(d.dump());
    auto f = json::parse(fingerprint_to_json(fingerprint(vgg_report())));
    f["schema"] = 7;
    CHECK_THROWS_AS(fingerprint_from_json(f.dump()), Error);
}
