#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "meldiff/tensor.hpp"

namespace meldiff {

// Flat archive of named arrays. Byte layout, all little-endian:
//   magic "MDTC0001"
//   u64 entry count
//   per entry: u32 name length, name bytes, u8 dtype (0 = f32, 1 = f64),
//              u32 rank, u64 dims[rank], raw element data
//   u64 FNV-1a checksum over all preceding bytes
class TensorContainer {
public:
    void add(const std::string& name, const Tensor& t, bool as_f32 = false);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
    std::vector<std::string> names() const;
    size_t size() const { return entries_.size(); }

    std::vector<uint8_t> serialize() const;
    static TensorContainer deserialize(const uint8_t* bytes, size_t len);

    void write_file(const std::string& path) const;
    static TensorContainer read_file(const std::string& path);

private:
    struct Entry {
        std::string name;
        Tensor data;
        bool f32 = false;
    };
    std::vector<Entry> entries_;
    std::map<std::string, size_t> index_;
};

uint64_t fnv1a64_bytes(const uint8_t* data, size_t len);

} // namespace meldiff
