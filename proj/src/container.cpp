#include "meldiff/container.hpp"

#include <cstring>
#include <fstream>

#include "meldiff/errors.hpp"

namespace meldiff {

namespace {

constexpr char kMagic[8] = {'M', 'D', 'T', 'C', '0', '0', '0', '1'};

template <typename T>
void put(std::vector<uint8_t>& buf, T v) {
    uint8_t bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    buf.insert(buf.end(), bytes, bytes + sizeof(T));
}

template <typename T>
T take(const uint8_t* bytes, size_t len, size_t& off) {
    if (off + sizeof(T) > len) throw CorruptFile("tensor container truncated");
    T v;
    std::memcpy(&v, bytes + off, sizeof(T));
    off += sizeof(T);
    return v;
}

} // namespace

uint64_t fnv1a64_bytes(const uint8_t* data, size_t len) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

void TensorContainer::add(const std::string& name, const Tensor& t, bool as_f32) {
    if (index_.count(name) != 0)
        throw InvalidArgument("container already holds an array named '" + name + "'");
    index_[name] = entries_.size();
    entries_.push_back({name, t, as_f32});
}

bool TensorContainer::has(const std::string& name) const { return index_.count(name) != 0; }

const Tensor& TensorContainer::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw InvalidArgument("container has no array named '" + name + "'");
    return entries_[it->second].data;
}

std::vector<std::string> TensorContainer::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
}

std::vector<uint8_t> TensorContainer::serialize() const {
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 8);
    put<uint64_t>(buf, entries_.size());
    for (const auto& e : entries_) {
        put<uint32_t>(buf, static_cast<uint32_t>(e.name.size()));
        buf.insert(buf.end(), e.name.begin(), e.name.end());
        put<uint8_t>(buf, e.f32 ? 0 : 1);
        put<uint32_t>(buf, static_cast<uint32_t>(e.data.rank()));
        for (int64_t d : e.data.shape()) put<uint64_t>(buf, static_cast<uint64_t>(d));
        if (e.f32) {
            for (int64_t i = 0; i < e.data.size(); ++i)
                put<float>(buf, static_cast<float>(e.data[i]));
        } else {
            for (int64_t i = 0; i < e.data.size(); ++i) put<double>(buf, e.data[i]);
        }
    }
    put<uint64_t>(buf, fnv1a64_bytes(buf.data(), buf.size()));
    return buf;
}

TensorContainer TensorContainer::deserialize(const uint8_t* bytes, size_t len) {
    if (len < 8 + 8 + 8) throw CorruptFile("tensor container too small");
    if (std::memcmp(bytes, kMagic, 8) != 0)
        throw CorruptFile("bad tensor container magic");
    const uint64_t stored = [&] {
        uint64_t v;
        std::memcpy(&v, bytes + len - 8, 8);
        return v;
    }();
    if (fnv1a64_bytes(bytes, len - 8) != stored)
        throw CorruptFile("tensor container checksum mismatch");

    size_t off = 8;
    const size_t body_end = len - 8;
    const uint64_t count = take<uint64_t>(bytes, body_end, off);

    TensorContainer c;
    for (uint64_t k = 0; k < count; ++k) {
        const uint32_t name_len = take<uint32_t>(bytes, body_end, off);
        if (off + name_len > body_end) throw CorruptFile("tensor container truncated");
        std::string name(reinterpret_cast<const char*>(bytes + off), name_len);
        off += name_len;
        const uint8_t dtype = take<uint8_t>(bytes, body_end, off);
        if (dtype > 1) throw CorruptFile("unknown element type in tensor container");
        const uint32_t rank = take<uint32_t>(bytes, body_end, off);
        if (rank > 8) throw CorruptFile("implausible tensor rank");
        std::vector<int64_t> shape(rank);
        for (uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<int64_t>(take<uint64_t>(bytes, body_end, off));
        Tensor t(shape);
        if (dtype == 0) {
            for (int64_t i = 0; i < t.size(); ++i)
                t[i] = static_cast<double>(take<float>(bytes, body_end, off));
        } else {
            for (int64_t i = 0; i < t.size(); ++i) t[i] = take<double>(bytes, body_end, off);
        }
        c.add(name, t, dtype == 0);
    }
    if (off != body_end) throw CorruptFile("tensor container has trailing bytes");
    return c;
}

void TensorContainer::write_file(const std::string& path) const {
    const std::vector<uint8_t> buf = serialize();
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CorruptFile("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw CorruptFile("short write to '" + path + "'");
}

TensorContainer TensorContainer::read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw CorruptFile("cannot open '" + path + "'");
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    if (!f.read(reinterpret_cast<char*>(buf.data()), size))
        throw CorruptFile("cannot read '" + path + "'");
    return deserialize(buf.data(), buf.size());
}

} // namespace meldiff
