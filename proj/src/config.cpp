#include "meldiff/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meldiff/errors.hpp"
#include "meldiff/param.hpp"

using json = nlohmann::json;

namespace meldiff {

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    if (!obj.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) {
                ok = true;
                break;
            }
        if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
    }
}

template <typename T>
void fetch(const json& obj, const char* key, T& dst) {
    if (obj.contains(key)) {
        try {
            dst = obj.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("key '") + key + "' has the wrong type");
        }
    }
}

} // namespace

void RunConfig::validate() const {
    if (schedule_family != "cosine")
        throw ConfigError("unsupported schedule family '" + schedule_family + "'");
    if (schedule_T < 1) throw ConfigError("schedule T must be positive");
    try {
        UNetConfig m = model;
        m.schedule_T = schedule_T;
        m.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    try {
        weight_scheme_from_string(train.weighting);
        weight_scheme_from_string(distill.weighting);
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    if (sample.sampler != "ddim" && sample.sampler != "ancestral")
        throw ConfigError("unsupported sampler '" + sample.sampler + "'");
    if (train.steps < 0 || train.batch < 1 || train.lr <= 0)
        throw ConfigError("invalid training parameters");
    if (sample.n_steps < 1 || sample.count < 1 || sample.gl_iters < 1)
        throw ConfigError("invalid sampling parameters");
    if (distill.n0 < 2 || distill.rounds < 1 || distill.steps_per_round < 1 ||
        distill.batch < 1 || distill.lr <= 0)
        throw ConfigError("invalid distillation parameters");
    if (distill.rounds >= 31 || distill.n0 % (1 << distill.rounds) != 0)
        throw ConfigError("distill n0 must be divisible by 2^rounds");
    if (eval.extractor_steps < 1) throw ConfigError("extractor_steps must be positive");
    if (stft.win < 16 || (stft.win & (stft.win - 1)) != 0)
        throw ConfigError("stft window must be a power of two");
    if (stft.hop < 1 || stft.hop > stft.win) throw ConfigError("invalid stft hop");
    if (stft.n_mels != kMelBins)
        throw ConfigError("n_mels must be " + std::to_string(kMelBins));
    if (stft.frames_per_slice != 3 * kFrameAxis)
        throw ConfigError("frames_per_slice must be " + std::to_string(3 * kFrameAxis));
}

RunConfig parse_run_config(const std::string& text) {
    json root = json::parse(text, nullptr, false);
    if (root.is_discarded()) throw ConfigError("configuration is not valid JSON");
    check_keys(root,
               {"seed", "out", "schedule", "model", "audio", "ingest", "train", "distill",
                "sample", "eval"},
               "config");

    RunConfig c;
    fetch(root, "seed", c.seed);
    fetch(root, "out", c.out);

    if (root.contains("schedule")) {
        const json& s = root["schedule"];
        check_keys(s, {"family", "T"}, "schedule");
        fetch(s, "family", c.schedule_family);
        fetch(s, "T", c.schedule_T);
    }
    if (root.contains("model")) {
        const json& m = root["model"];
        check_keys(m, {"base_width", "depth", "time_embed_dim", "use_attention", "param_kind"},
                   "model");
        fetch(m, "base_width", c.model.base_width);
        fetch(m, "depth", c.model.depth);
        fetch(m, "time_embed_dim", c.model.time_embed_dim);
        fetch(m, "use_attention", c.model.use_attention);
        if (m.contains("param_kind")) {
            try {
                c.model.kind = param_kind_from_string(m.at("param_kind").get<std::string>());
            } catch (const InvalidArgument& e) {
                throw ConfigError(e.what());
            }
        }
    }
    if (root.contains("audio")) {
        const json& a = root["audio"];
        check_keys(a, {"sample_rate", "win", "hop", "n_mels", "frames_per_slice", "log_floor"},
                   "audio");
        fetch(a, "sample_rate", c.stft.sample_rate);
        fetch(a, "win", c.stft.win);
        fetch(a, "hop", c.stft.hop);
        fetch(a, "n_mels", c.stft.n_mels);
        fetch(a, "frames_per_slice", c.stft.frames_per_slice);
        fetch(a, "log_floor", c.log_floor);
    }
    if (root.contains("ingest")) {
        const json& v = root["ingest"];
        check_keys(v, {"audio_dir"}, "ingest");
        fetch(v, "audio_dir", c.ingest.audio_dir);
    }
    if (root.contains("train")) {
        const json& v = root["train"];
        check_keys(v, {"manifest", "lr", "steps", "batch", "weighting"}, "train");
        fetch(v, "manifest", c.train.manifest);
        fetch(v, "lr", c.train.lr);
        fetch(v, "steps", c.train.steps);
        fetch(v, "batch", c.train.batch);
        fetch(v, "weighting", c.train.weighting);
    }
    if (root.contains("distill")) {
        const json& v = root["distill"];
        check_keys(v,
                   {"teacher", "manifest", "n0", "rounds", "steps_per_round", "lr", "batch",
                    "weighting"},
                   "distill");
        fetch(v, "teacher", c.distill.teacher);
        fetch(v, "manifest", c.distill.manifest);
        fetch(v, "n0", c.distill.n0);
        fetch(v, "rounds", c.distill.rounds);
        fetch(v, "steps_per_round", c.distill.steps_per_round);
        fetch(v, "lr", c.distill.lr);
        fetch(v, "batch", c.distill.batch);
        fetch(v, "weighting", c.distill.weighting);
    }
    if (root.contains("sample")) {
        const json& v = root["sample"];
        check_keys(v,
                   {"checkpoint", "stats", "n_steps", "count", "sampler", "write_wav",
                    "gl_iters"},
                   "sample");
        fetch(v, "checkpoint", c.sample.checkpoint);
        fetch(v, "stats", c.sample.stats);
        fetch(v, "n_steps", c.sample.n_steps);
        fetch(v, "count", c.sample.count);
        fetch(v, "sampler", c.sample.sampler);
        fetch(v, "write_wav", c.sample.write_wav);
        fetch(v, "gl_iters", c.sample.gl_iters);
    }
    if (root.contains("eval")) {
        const json& v = root["eval"];
        check_keys(v,
                   {"generated", "reference", "extractor", "model_id", "n_steps",
                    "extractor_steps"},
                   "eval");
        fetch(v, "generated", c.eval.generated);
        fetch(v, "reference", c.eval.reference);
        fetch(v, "extractor", c.eval.extractor);
        fetch(v, "model_id", c.eval.model_id);
        fetch(v, "n_steps", c.eval.n_steps);
        fetch(v, "extractor_steps", c.eval.extractor_steps);
    }

    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

std::string RunConfig::to_json() const {
    json root = {
        {"seed", seed},
        {"out", out},
        {"schedule", {{"family", schedule_family}, {"T", schedule_T}}},
        {"model",
         {{"base_width", model.base_width},
          {"depth", model.depth},
          {"time_embed_dim", model.time_embed_dim},
          {"use_attention", model.use_attention},
          {"param_kind", to_string(model.kind)}}},
        {"audio",
         {{"sample_rate", stft.sample_rate},
          {"win", stft.win},
          {"hop", stft.hop},
          {"n_mels", stft.n_mels},
          {"frames_per_slice", stft.frames_per_slice},
          {"log_floor", log_floor}}},
        {"ingest", {{"audio_dir", ingest.audio_dir}}},
        {"train",
         {{"manifest", train.manifest},
          {"lr", train.lr},
          {"steps", train.steps},
          {"batch", train.batch},
          {"weighting", train.weighting}}},
        {"distill",
         {{"teacher", distill.teacher},
          {"manifest", distill.manifest},
          {"n0", distill.n0},
          {"rounds", distill.rounds},
          {"steps_per_round", distill.steps_per_round},
          {"lr", distill.lr},
          {"batch", distill.batch},
          {"weighting", distill.weighting}}},
        {"sample",
         {{"checkpoint", sample.checkpoint},
          {"stats", sample.stats},
          {"n_steps", sample.n_steps},
          {"count", sample.count},
          {"sampler", sample.sampler},
          {"write_wav", sample.write_wav},
          {"gl_iters", sample.gl_iters}}},
        {"eval",
         {{"generated", eval.generated},
          {"reference", eval.reference},
          {"extractor", eval.extractor},
          {"model_id", eval.model_id},
          {"n_steps", eval.n_steps},
          {"extractor_steps", eval.extractor_steps}}},
    };
    return root.dump(2);
}

void write_effective_config(const RunConfig& cfg, const std::string& dir) {
    std::ofstream f(dir + "/effective_config.json", std::ios::trunc);
    if (!f) throw ConfigError("cannot write effective config under '" + dir + "'");
    f << cfg.to_json() << '\n';
}

} // namespace meldiff
