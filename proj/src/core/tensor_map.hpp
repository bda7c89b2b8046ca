#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace chirascope {

using Shape = std::vector<std::uint64_t>;

std::uint64_t element_count(const Shape& shape);

/// Dense F32 tensor, row-major.
struct TensorRecord {
    Shape shape;
    std::vector<float> data;

    TensorRecord() = default;
    TensorRecord(Shape s, std::vector<float> d);

    std::size_t rank() const { return shape.size(); }
    bool operator==(const TensorRecord& other) const;
};

/// A tensor whose element type is not F32. Kept byte-for-byte so the container
/// can be written back, but never decoded.
struct OpaqueRecord {
    std::string dtype;
    Shape shape;
    std::vector<std::byte> bytes;

    bool operator==(const OpaqueRecord& other) const = default;
};

/// Named tensors in header order. Names are unique; insertion of a duplicate
/// throws.
class TensorMap {
public:
    using Payload = std::variant<TensorRecord, OpaqueRecord>;

    struct Entry {
        std::string name;
        Payload payload;

        bool is_float() const { return std::holds_alternative<TensorRecord>(payload); }
        const TensorRecord& tensor() const { return std::get<TensorRecord>(payload); }
        const OpaqueRecord& opaque() const { return std::get<OpaqueRecord>(payload); }
        bool operator==(const Entry& other) const;
    };

    void insert(std::string name, TensorRecord record);
    void insert_opaque(std::string name, OpaqueRecord record);

    const TensorRecord* find(std::string_view name) const;
    const Entry* find_entry(std::string_view name) const;
    bool contains(std::string_view name) const;

    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    std::map<std::string, std::string>& metadata() { return metadata_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

    /// Non-fatal notes collected while parsing (skipped dtypes and similar).
    const std::vector<std::string>& warnings() const { return warnings_; }
    void add_warning(std::string message) { warnings_.push_back(std::move(message)); }

    /// Compares entries (in order) and metadata; warnings are ignored.
    bool operator==(const TensorMap& other) const;

private:
    void insert_entry(std::string name, Payload payload);

    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
    std::map<std::string, std::string> metadata_;
    std::vector<std::string> warnings_;
};

/// Bytes per element for a container dtype string, or 0 when unknown.
std::size_t dtype_size(std::string_view dtype);

TensorMap parse_container(std::span<const std::byte> bytes);
std::vector<std::byte> serialize_container(const TensorMap& map);

TensorMap read_container(const std::filesystem::path& path);
void write_container(const TensorMap& map, const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace chirascope
