#include "meldiff/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "meldiff/audio.hpp"
#include "meldiff/errors.hpp"

using json = nlohmann::json;

namespace meldiff {

namespace {
constexpr char kMagic[8] = {'M', 'D', 'C', 'K', '0', '0', '0', '1'};
}

void write_meta_blob(const std::string& path, const std::string& meta_json,
                     const TensorContainer& tensors) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CorruptFile("cannot open '" + path + "' for writing");
    f.write(kMagic, 8);
    const uint64_t len = meta_json.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(meta_json.data(), static_cast<std::streamsize>(meta_json.size()));
    const std::vector<uint8_t> blob = tensors.serialize();
    f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
    if (!f) throw CorruptFile("short write to '" + path + "'");
}

std::pair<std::string, TensorContainer> read_meta_blob(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw CorruptFile("cannot open '" + path + "'");
    const auto size = static_cast<size_t>(f.tellg());
    f.seekg(0);
    std::vector<uint8_t> buf(size);
    if (!f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size)))
        throw CorruptFile("cannot read '" + path + "'");

    if (size < 16 || std::memcmp(buf.data(), kMagic, 8) != 0)
        throw CorruptFile("'" + path + "' is not a checkpoint");
    uint64_t len;
    std::memcpy(&len, buf.data() + 8, 8);
    if (16 + len > size) throw CorruptFile("checkpoint metadata truncated");
    std::string meta(reinterpret_cast<const char*>(buf.data() + 16), len);
    TensorContainer tensors =
        TensorContainer::deserialize(buf.data() + 16 + len, size - 16 - len);
    return {std::move(meta), std::move(tensors)};
}

void save_checkpoint(UNetModel& model, const std::string& path, const Adam* optimizer) {
    const UNetConfig& cfg = model.config();
    json meta = {
        {"format_version", kCheckpointFormatVersion},
        {"kind", "denoiser"},
        {"model",
         {{"base_width", cfg.base_width},
          {"depth", cfg.depth},
          {"time_embed_dim", cfg.time_embed_dim},
          {"use_attention", cfg.use_attention},
          {"param_kind", to_string(cfg.kind)}}},
        {"schedule", {{"family", "cosine"}, {"T", cfg.schedule_T}}},
        {"layout", std::string(kSnakeLayoutTag)},
        {"step", model.step_counter()},
        {"has_optimizer", optimizer != nullptr},
    };

    TensorContainer tensors;
    for (const auto& p : model.parameters()) tensors.add(p.name, *p.value);
    if (optimizer != nullptr) {
        Adam& opt = const_cast<Adam&>(*optimizer);
        meta["adam_steps"] = opt.steps_taken();
        size_t k = 0;
        for (const auto& p : model.parameters()) {
            if (!p.trainable) continue;
            tensors.add("opt/m/" + p.name, opt.m()[k]);
            tensors.add("opt/v/" + p.name, opt.v()[k]);
            ++k;
        }
    }
    write_meta_blob(path, meta.dump(), tensors);
}

namespace {

json parse_meta(const std::string& text, const std::string& path) {
    json meta = json::parse(text, nullptr, false);
    if (meta.is_discarded()) throw CorruptFile("checkpoint metadata in '" + path + "' is not JSON");
    if (!meta.contains("format_version") ||
        meta["format_version"].get<int>() != kCheckpointFormatVersion)
        throw IncompatibleCheckpoint("unsupported checkpoint format version in '" + path + "'");
    return meta;
}

} // namespace

LoadedCheckpoint load_checkpoint(const std::string& path) {
    auto [text, tensors] = read_meta_blob(path);
    json meta = parse_meta(text, path);
    if (meta.value("kind", "") != "denoiser")
        throw IncompatibleCheckpoint("'" + path + "' is not a denoiser checkpoint");

    UNetConfig cfg;
    const json& m = meta.at("model");
    cfg.base_width = m.at("base_width").get<int>();
    cfg.depth = m.at("depth").get<int>();
    cfg.time_embed_dim = m.at("time_embed_dim").get<int>();
    cfg.use_attention = m.at("use_attention").get<bool>();
    cfg.kind = param_kind_from_string(m.at("param_kind").get<std::string>());
    cfg.schedule_T = meta.at("schedule").at("T").get<int>();

    RandomStream init_rng(0, "checkpoint/shape-init"); // every value is overwritten below
    LoadedCheckpoint out{UNetModel(cfg, init_rng), meta.value("layout", ""),
                         meta.at("schedule").value("family", ""),
                         meta.value("has_optimizer", false)};
    out.model.set_step_counter(meta.value("step", int64_t{0}));

    for (const auto& p : out.model.parameters()) {
        if (!tensors.has(p.name))
            throw IncompatibleCheckpoint("checkpoint is missing parameter '" + p.name + "'");
        const Tensor& src = tensors.get(p.name);
        if (!src.same_shape(*p.value))
            throw IncompatibleCheckpoint("parameter '" + p.name + "' has the wrong shape");
        *p.value = src;
    }
    return out;
}

void load_optimizer_state(const std::string& path, UNetModel& model, Adam& optimizer) {
    auto [text, tensors] = read_meta_blob(path);
    json meta = parse_meta(text, path);
    if (!meta.value("has_optimizer", false))
        throw IncompatibleCheckpoint("'" + path + "' carries no optimizer state");
    optimizer.set_steps_taken(meta.value("adam_steps", int64_t{0}));
    size_t k = 0;
    for (const auto& p : model.parameters()) {
        if (!p.trainable) continue;
        optimizer.m()[k] = tensors.get("opt/m/" + p.name);
        optimizer.v()[k] = tensors.get("opt/v/" + p.name);
        ++k;
    }
}

} // namespace meldiff
