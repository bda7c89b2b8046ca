#include "core/arch.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <cmath>
#include <numbers>

#include <fmt/core.h>

#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace chirascope {

namespace {

constexpr std::array<std::string_view, 10> kArchIds = {
    "alexnet", "vgg11", "vgg13", "vgg16", "vgg19", "resnet18", "resnet34", "resnet50", "resnet101", "resnet152",
};

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

void add(ArchitectureSpec& spec, std::string tensor, std::size_t b, std::size_t c, std::size_t h, std::size_t w,
         int stage) {
    const bool analyzable = w >= 2 && !(spec.family == Family::ResNet && stage == 1);
    spec.entries.push_back(ArchEntry{std::move(tensor), b, c, h, w, stage, analyzable});
}

ArchitectureSpec alexnet() {
    ArchitectureSpec s{"alexnet", Family::AlexNet, {}};
    add(s, "features.0.weight", 64, 3, 11, 11, 1);
    add(s, "features.3.weight", 192, 64, 5, 5, 2);
    add(s, "features.6.weight", 384, 192, 3, 3, 3);
    add(s, "features.8.weight", 256, 384, 3, 3, 4);
    add(s, "features.10.weight", 256, 256, 3, 3, 5);
    return s;
}

// Per-stage conv counts; stage widths are 64, 128, 256, 512, 512. Module
// indices follow torchvision's `features` Sequential: conv, ReLU per conv and
// one MaxPool per stage.
ArchitectureSpec vgg(std::string id, std::array<int, 5> per_stage) {
    constexpr std::array<std::size_t, 5> widths = {64, 128, 256, 512, 512};
    ArchitectureSpec s{std::move(id), Family::Vgg, {}};
    std::size_t index = 0;
    std::size_t channels = 3;
    for (int stage = 0; stage < 5; ++stage) {
        for (int i = 0; i < per_stage[stage]; ++i) {
            add(s, fmt::format("features.{}.weight", index), widths[stage], channels, 3, 3, stage + 1);
            channels = widths[stage];
            index += 2;
        }
        index += 1;
    }
    return s;
}

ArchitectureSpec resnet(std::string id, std::array<int, 4> blocks, bool bottleneck) {
    ArchitectureSpec s{std::move(id), Family::ResNet, {}};
    add(s, "conv1.weight", 64, 3, 7, 7, 1);
    std::size_t inplanes = 64;
    for (int li = 0; li < 4; ++li) {
        const std::size_t planes = std::size_t{64} << li;
        const std::size_t out = bottleneck ? planes * 4 : planes;
        const int stage = li + 2;
        for (int b = 0; b < blocks[li]; ++b) {
            const std::string prefix = fmt::format("layer{}.{}.", li + 1, b);
            if (bottleneck) {
                add(s, prefix + "conv1.weight", planes, inplanes, 1, 1, stage);
                add(s, prefix + "conv2.weight", planes, planes, 3, 3, stage);
                add(s, prefix + "conv3.weight", out, planes, 1, 1, stage);
            } else {
                add(s, prefix + "conv1.weight", planes, inplanes, 3, 3, stage);
                add(s, prefix + "conv2.weight", planes, planes, 3, 3, stage);
            }
            // Stride-2 stages and width changes get a 1x1 projection shortcut.
            if (b == 0 && (li > 0 || inplanes != out)) add(s, prefix + "downsample.0.weight", out, inplanes, 1, 1, stage);
            inplanes = out;
        }
    }
    return s;
}

}  // namespace

std::size_t ArchitectureSpec::analyzable_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.analyzable ? 1 : 0;
    return n;
}

std::span<const std::string_view> architecture_ids() { return kArchIds; }

ArchitectureSpec registry(std::string_view id) {
    if (id == "alexnet") return alexnet();
    if (id == "vgg11") return vgg("vgg11", {1, 1, 2, 2, 2});
    if (id == "vgg13") return vgg("vgg13", {2, 2, 2, 2, 2});
    if (id == "vgg16") return vgg("vgg16", {2, 2, 3, 3, 3});
    if (id == "vgg19") return vgg("vgg19", {2, 2, 4, 4, 4});
    if (id == "resnet18") return resnet("resnet18", {2, 2, 2, 2}, false);
    if (id == "resnet34") return resnet("resnet34", {3, 4, 6, 3}, false);
    if (id == "resnet50") return resnet("resnet50", {3, 4, 6, 3}, true);
    if (id == "resnet101") return resnet("resnet101", {3, 4, 23, 3}, true);
    if (id == "resnet152") return resnet("resnet152", {3, 8, 36, 3}, true);
    fail(ErrorKind::InvalidArgument, fmt::format("unknown architecture '{}'", id));
}

std::string_view to_string(InitMethod method) {
    switch (method) {
        case InitMethod::KaimingNormal: return "kaiming-normal";
        case InitMethod::XavierNormal: return "xavier-normal";
        case InitMethod::PlainNormal: break;
    }
    return "plain-normal";
}

InitMethod parse_init_method(std::string_view text) {
    if (text == "kaiming" || text == "kaiming-normal" || text == "kaiming_normal") return InitMethod::KaimingNormal;
    if (text == "xavier" || text == "xavier-normal" || text == "xavier_normal") return InitMethod::XavierNormal;
    if (text == "normal" || text == "plain-normal" || text == "plain_normal") return InitMethod::PlainNormal;
    fail(ErrorKind::InvalidArgument, fmt::format("unknown initialization method '{}'", text));
}

double round_significand(double x, int bits) {
    if (x == 0.0 || !std::isfinite(x) || bits >= 53) return x;
    if (std::fabs(x) < std::numeric_limits<double>::min() || bits < 1) {
        int exp = 0;
        const double m = std::frexp(x, &exp);
        return std::ldexp(std::nearbyint(std::ldexp(m, bits)), exp - bits);
    }
    // Normal doubles: round half to even on the raw encoding. A carry out of
    // the mantissa bumps the exponent, which is the right answer.
    const int drop = 53 - bits;
    auto u = std::bit_cast<std::uint64_t>(x);
    const std::uint64_t half = std::uint64_t{1} << (drop - 1);
    const std::uint64_t keep_lsb = (u >> drop) & 1;
    u += half - 1 + keep_lsb;
    u &= ~((std::uint64_t{1} << drop) - 1);
    return std::bit_cast<double>(u);
}

double init_sigma(InitMethod method, std::size_t kernels, std::size_t channels, std::size_t height,
                  std::size_t width) {
    const double fan_in = static_cast<double>(channels * height * width);
    const double fan_out = static_cast<double>(kernels * height * width);
    double sigma = 0.01;
    switch (method) {
        case InitMethod::KaimingNormal: sigma = std::sqrt(2.0 / fan_in); break;
        case InitMethod::XavierNormal: sigma = std::sqrt(2.0 / (fan_in + fan_out)); break;
        case InitMethod::PlainNormal: break;
    }
    return round_significand(sigma, kSigmaBits);
}

NormalStream::NormalStream(std::uint64_t seed, std::string_view name) : key_(mix64(mix64(seed) ^ fnv1a64(name))) {}

double NormalStream::uniform(std::uint64_t i) const {
    const std::uint64_t bits = mix64(key_ + (i + 1) * kGolden);
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double NormalStream::normal(std::uint64_t i) const {
    const std::uint64_t pair = i / 2;
    const double radius = std::sqrt(-2.0 * std::log(uniform(2 * pair)));
    const double angle = 2.0 * std::numbers::pi * uniform(2 * pair + 1);
    double sn = 0.0, cs = 0.0;
    ::sincos(angle, &sn, &cs);
    return (i % 2 == 0) ? radius * cs : radius * sn;
}

void NormalStream::fill(std::span<double> out) const {
    for (std::size_t i = 0; i < out.size(); i += 2) {
        const double radius = std::sqrt(-2.0 * std::log(uniform(i)));
        const double angle = 2.0 * std::numbers::pi * uniform(i + 1);
        double sn = 0.0, cs = 0.0;
        ::sincos(angle, &sn, &cs);
        out[i] = radius * cs;
        if (i + 1 < out.size()) out[i + 1] = radius * sn;
    }
}

ConvLayer init_layer(std::size_t kernels, std::size_t channels, std::size_t height, std::size_t width,
                     InitMethod method, std::uint64_t seed, const std::string& layer_name) {
    const double sigma = init_sigma(method, kernels, channels, height, width);
    std::vector<double> z(kernels * channels * height * width);
    NormalStream(seed, layer_name).fill(z);
    std::vector<float> data(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        data[i] = static_cast<float>(sigma * round_significand(z[i], kDrawBits));
    return ConvLayer(layer_name, kernels, channels, height, width, std::nullopt, std::move(data));
}

SynthesizedModel synth_model(std::string_view arch_id, InitMethod method, std::uint64_t seed, unsigned threads) {
    const auto spec = registry(arch_id);
    std::vector<std::vector<float>> values(spec.entries.size());
    parallel_for(values.size(), threads, [&](std::size_t i) {
        const auto& e = spec.entries[i];
        values[i] = init_layer(e.kernels, e.channels, e.height, e.width, method, seed, e.tensor).release();
    });
    SynthesizedModel out;
    out.manifest.model_name = spec.id;
    out.manifest.family = spec.family;
    for (std::size_t i = 0; i < spec.entries.size(); ++i) {
        const auto& e = spec.entries[i];
        out.weights.insert(e.tensor, TensorRecord({e.kernels, e.channels, e.height, e.width}, std::move(values[i])));
        out.manifest.layers.push_back(ManifestEntry{e.tensor, e.stage, e.analyzable});
    }
    auto& meta = out.weights.metadata();
    meta["arch"] = spec.id;
    meta["family"] = std::string(to_string(spec.family));
    meta["model_name"] = spec.id;
    meta["init"] = std::string(to_string(method));
    meta["seed"] = std::to_string(seed);
    meta["trained"] = "false";
    return out;
}

}  // namespace chirascope
