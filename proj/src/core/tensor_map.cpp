#include "core/tensor_map.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include <fmt/core.h>

#include "core/errors.hpp"
#include "json.hpp"

namespace chirascope {

static_assert(std::endian::native == std::endian::little,
              "container payloads are read in place; big-endian hosts are not supported");

namespace {

constexpr std::uint64_t kMaxHeaderBytes = 100ull << 20;
constexpr std::string_view kMetadataKey = "__metadata__";

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b, const std::string& what) {
    if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
        fail(ErrorKind::Parse, fmt::format("{}: element count overflows", what));
    return a * b;
}

struct Span {
    std::uint64_t begin;
    std::uint64_t end;
    std::string name;
};

Shape parse_shape(const nlohmann::ordered_json& j, const std::string& name) {
    if (!j.is_array())
        fail(ErrorKind::Parse, fmt::format("tensor '{}': shape is not an array", name));
    Shape shape;
    shape.reserve(j.size());
    for (const auto& extent : j) {
        if (!extent.is_number_unsigned() && !(extent.is_number_integer() && extent.get<std::int64_t>() >= 0))
            fail(ErrorKind::Parse, fmt::format("tensor '{}': shape extents must be non-negative integers", name));
        shape.push_back(extent.get<std::uint64_t>());
    }
    return shape;
}

}  // namespace

std::uint64_t element_count(const Shape& shape) {
    std::uint64_t n = 1;
    for (auto extent : shape) n = checked_mul(n, extent, "shape");
    return n;
}

TensorRecord::TensorRecord(Shape s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
    if (element_count(shape) != data.size())
        fail(ErrorKind::InvalidArgument,
             fmt::format("tensor data holds {} values but shape requires {}", data.size(), element_count(shape)));
}

bool TensorRecord::operator==(const TensorRecord& other) const {
    return shape == other.shape && data.size() == other.data.size() &&
           std::memcmp(data.data(), other.data.data(), data.size() * sizeof(float)) == 0;
}

bool TensorMap::Entry::operator==(const Entry& other) const {
    return name == other.name && payload == other.payload;
}

void TensorMap::insert_entry(std::string name, Payload payload) {
    if (name == kMetadataKey)
        fail(ErrorKind::InvalidArgument, "tensor name '__metadata__' is reserved");
    if (index_.contains(name))
        fail(ErrorKind::InvalidArgument, fmt::format("duplicate tensor name '{}'", name));
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(payload)});
}

void TensorMap::insert(std::string name, TensorRecord record) {
    if (element_count(record.shape) != record.data.size())
        fail(ErrorKind::InvalidArgument, fmt::format("tensor '{}': data length does not match shape", name));
    insert_entry(std::move(name), std::move(record));
}

void TensorMap::insert_opaque(std::string name, OpaqueRecord record) {
    insert_entry(std::move(name), std::move(record));
}

const TensorMap::Entry* TensorMap::find_entry(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second];
}

const TensorRecord* TensorMap::find(std::string_view name) const {
    const Entry* e = find_entry(name);
    return (e && e->is_float()) ? &e->tensor() : nullptr;
}

bool TensorMap::contains(std::string_view name) const { return find_entry(name) != nullptr; }

bool TensorMap::operator==(const TensorMap& other) const {
    return entries_ == other.entries_ && metadata_ == other.metadata_;
}

std::size_t dtype_size(std::string_view dtype) {
    if (dtype == "F64" || dtype == "I64" || dtype == "U64") return 8;
    if (dtype == "F32" || dtype == "I32" || dtype == "U32") return 4;
    if (dtype == "F16" || dtype == "BF16" || dtype == "I16" || dtype == "U16") return 2;
    if (dtype == "I8" || dtype == "U8" || dtype == "BOOL" || dtype == "F8_E4M3" || dtype == "F8_E5M2") return 1;
    return 0;
}

TensorMap parse_container(std::span<const std::byte> bytes) {
    if (bytes.size() < 8)
        fail(ErrorKind::Parse, fmt::format("malformed header: file is {} bytes, shorter than the length prefix",
                                           bytes.size()));
    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data(), sizeof header_len);
    if (header_len > bytes.size() - 8)
        fail(ErrorKind::Parse, fmt::format("malformed header: declared length {} exceeds the {} bytes after the prefix",
                                           header_len, bytes.size() - 8));
    if (header_len > kMaxHeaderBytes)
        fail(ErrorKind::Parse, fmt::format("malformed header: declared length {} is implausibly large", header_len));

    const char* header_begin = reinterpret_cast<const char*>(bytes.data() + 8);
    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(header_begin, header_begin + header_len);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::Parse, fmt::format("header is not valid JSON: {}", e.what()));
    }
    if (!header.is_object()) fail(ErrorKind::Parse, "header is not a JSON object");

    const std::span<const std::byte> payload = bytes.subspan(8 + header_len);
    TensorMap map;
    std::vector<Span> spans;

    for (const auto& [name, info] : header.items()) {
        if (name == kMetadataKey) {
            if (!info.is_object()) fail(ErrorKind::Parse, "__metadata__ must be an object");
            for (const auto& [key, value] : info.items()) {
                if (!value.is_string())
                    fail(ErrorKind::Parse, fmt::format("__metadata__ value for '{}' is not a string", key));
                map.metadata().emplace(key, value.get<std::string>());
            }
            continue;
        }
        if (!info.is_object()) fail(ErrorKind::Parse, fmt::format("tensor '{}': entry is not an object", name));
        if (!info.contains("dtype") || !info["dtype"].is_string())
            fail(ErrorKind::Parse, fmt::format("tensor '{}': missing dtype", name));
        if (!info.contains("shape")) fail(ErrorKind::Parse, fmt::format("tensor '{}': missing shape", name));
        if (!info.contains("data_offsets") || !info["data_offsets"].is_array() || info["data_offsets"].size() != 2 ||
            !info["data_offsets"][0].is_number_unsigned() || !info["data_offsets"][1].is_number_unsigned())
            fail(ErrorKind::Parse, fmt::format("tensor '{}': data_offsets must be two non-negative integers", name));

        const auto dtype = info["dtype"].get<std::string>();
        Shape shape = parse_shape(info["shape"], name);
        const auto begin = info["data_offsets"][0].get<std::uint64_t>();
        const auto end = info["data_offsets"][1].get<std::uint64_t>();
        if (begin > end || end > payload.size())
            fail(ErrorKind::Parse, fmt::format("tensor '{}': data offsets [{}, {}) fall outside the {}-byte payload",
                                               name, begin, end, payload.size()));

        const std::uint64_t count = element_count(shape);
        const std::size_t width = dtype_size(dtype);
        if (width != 0 && checked_mul(count, width, name) != end - begin)
            fail(ErrorKind::Parse, fmt::format("tensor '{}': {} bytes declared but shape and {} require {}", name,
                                               end - begin, dtype, count * width));
        spans.push_back(Span{begin, end, name});

        const auto raw = payload.subspan(begin, end - begin);
        if (dtype == "F32") {
            std::vector<float> data(count);
            if (count) std::memcpy(data.data(), raw.data(), raw.size());
            map.insert(name, TensorRecord(std::move(shape), std::move(data)));
        } else {
            map.add_warning(fmt::format("tensor '{}' has dtype {}; only F32 is decoded, entry kept opaque", name, dtype));
            map.insert_opaque(name, OpaqueRecord{dtype, std::move(shape), {raw.begin(), raw.end()}});
        }
    }

    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) {
        return a.begin != b.begin ? a.begin < b.begin : a.end < b.end;
    });
    for (std::size_t i = 1; i < spans.size(); ++i) {
        const Span& prev = spans[i - 1];
        const Span& cur = spans[i];
        if (cur.begin < prev.end && cur.begin != cur.end && prev.begin != prev.end)
            fail(ErrorKind::Parse, fmt::format("tensors '{}' and '{}' have overlapping data offsets", prev.name, cur.name));
    }
    return map;
}

std::vector<std::byte> serialize_container(const TensorMap& map) {
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    if (!map.metadata().empty()) {
        nlohmann::ordered_json meta = nlohmann::ordered_json::object();
        for (const auto& [k, v] : map.metadata()) meta[k] = v;
        header[std::string(kMetadataKey)] = std::move(meta);
    }

    std::uint64_t offset = 0;
    for (const auto& entry : map.entries()) {
        std::uint64_t bytes = 0;
        nlohmann::ordered_json info;
        if (entry.is_float()) {
            info["dtype"] = "F32";
            info["shape"] = entry.tensor().shape;
            bytes = entry.tensor().data.size() * sizeof(float);
        } else {
            info["dtype"] = entry.opaque().dtype;
            info["shape"] = entry.opaque().shape;
            bytes = entry.opaque().bytes.size();
        }
        info["data_offsets"] = {offset, offset + bytes};
        header[entry.name] = std::move(info);
        offset += bytes;
    }

    std::string text = header.dump();
    // Pad with spaces so the payload starts 8-byte aligned.
    text.append((8 - text.size() % 8) % 8, ' ');

    std::vector<std::byte> out(8 + text.size() + offset);
    const std::uint64_t header_len = text.size();
    std::memcpy(out.data(), &header_len, sizeof header_len);
    std::memcpy(out.data() + 8, text.data(), text.size());
    std::byte* cursor = out.data() + 8 + text.size();
    for (const auto& entry : map.entries()) {
        if (entry.is_float()) {
            const auto& data = entry.tensor().data;
            if (!data.empty()) std::memcpy(cursor, data.data(), data.size() * sizeof(float));
            cursor += data.size() * sizeof(float);
        } else {
            const auto& raw = entry.opaque().bytes;
            if (!raw.empty()) std::memcpy(cursor, raw.data(), raw.size());
            cursor += raw.size();
        }
    }
    return out;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, fmt::format("cannot open '{}' for reading", path.string()));
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::byte> bytes(size);
    if (size && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        fail(ErrorKind::Io, fmt::format("failed reading '{}'", path.string()));
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, fmt::format("cannot open '{}' for writing", path.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, fmt::format("failed writing '{}'", path.string()));
}

TensorMap read_container(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return parse_container(bytes);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Parse) throw;
        fail(ErrorKind::Parse, fmt::format("{}: {}", path.string(), e.what()));
    }
}

void write_container(const TensorMap& map, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_container(map));
}

}  // namespace chirascope
