#include "meldiff/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "meldiff/checkpoint.hpp"
#include "meldiff/container.hpp"
#include "meldiff/distill.hpp"
#include "meldiff/errors.hpp"
#include "meldiff/metrics.hpp"
#include "meldiff/unet.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace meldiff {

namespace {

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "'");
}

uint64_t hash_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IngestError("cannot open '" + path + "'");
    std::vector<char> buf(1 << 16);
    uint64_t h = 0xcbf29ce484222325ULL;
    while (f) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        const auto got = f.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[static_cast<size_t>(i)]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string slice_file_name(uint64_t file_hash, int window) {
    const uint64_t mixed = derive_stream_seed(file_hash, "slice/" + std::to_string(window));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "slice_%016llx.ntc", static_cast<unsigned long long>(mixed));
    return buf;
}

struct StatsFile {
    NormStats norm;
    std::string layout;
    std::string id;
};

std::string stats_path_for(const std::string& out_dir) { return out_dir + "/norm_stats.json"; }

void write_stats_file(const std::string& path, const NormStats& n, const StftParams& p) {
    json j = {{"log_floor", n.log_floor},
              {"scale_min", n.scale_min},
              {"scale_max", n.scale_max},
              {"layout", std::string(kSnakeLayoutTag)},
              {"audio",
               {{"sample_rate", p.sample_rate},
                {"win", p.win},
                {"hop", p.hop},
                {"n_mels", p.n_mels},
                {"frames_per_slice", p.frames_per_slice}}}};
    const std::string text = j.dump(2);
    j["stats_id"] = "ns-" + std::to_string(fnv1a64_bytes(
                                 reinterpret_cast<const uint8_t*>(text.data()), text.size()));
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IngestError("cannot write '" + path + "'");
    f << j.dump(2) << '\n';
}

StatsFile read_stats_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open stats file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    json j = json::parse(ss.str(), nullptr, false);
    if (j.is_discarded()) throw CorruptFile("stats file '" + path + "' is not JSON");
    StatsFile s;
    s.norm.log_floor = j.value("log_floor", -80.0);
    s.norm.scale_min = j.value("scale_min", -80.0);
    s.norm.scale_max = j.value("scale_max", 0.0);
    s.layout = j.value("layout", "");
    s.id = j.value("stats_id", "");
    return s;
}

} // namespace

// ------------------------------------------------------------------ ingest

int run_ingest(const RunConfig& cfg) {
    if (cfg.ingest.audio_dir.empty()) throw ConfigError("ingest: audio_dir is required");
    if (!fs::is_directory(cfg.ingest.audio_dir))
        throw ConfigError("ingest: '" + cfg.ingest.audio_dir + "' is not a directory");

    const std::string out_dir = cfg.out + "/ingest";
    const std::string slice_dir = out_dir + "/slices";
    ensure_dir(slice_dir);
    write_effective_config(cfg, out_dir);

    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(cfg.ingest.audio_dir)) {
        if (!e.is_regular_file()) continue;
        std::string ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (ext == ".wav") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());

    std::ofstream manifest(out_dir + "/manifest.csv", std::ios::trunc);
    manifest << "source,window,tensor,stats\n";

    if (files.empty()) {
        std::cerr << "ingest: no .wav files under '" << cfg.ingest.audio_dir << "'\n";
        write_stats_file(stats_path_for(out_dir),
                         NormStats{cfg.log_floor, cfg.log_floor, 0.0}, cfg.stft);
        return kExitOk;
    }

    // Pass 1: dB slices plus the dataset-level range, unless a previous run
    // already pinned the stats.
    NormStats stats{cfg.log_floor, cfg.log_floor, 0.0};
    bool have_stats = false;
    if (fs::exists(stats_path_for(out_dir))) {
        const StatsFile prev = read_stats_file(stats_path_for(out_dir));
        if (prev.layout != kSnakeLayoutTag)
            throw IncompatibleCheckpoint("existing stats carry layout '" + prev.layout +
                                         "' but this build uses '" +
                                         std::string(kSnakeLayoutTag) + "'");
        stats = prev.norm;
        have_stats = true;
    }

    struct FileSlices {
        std::string path;
        uint64_t hash = 0;
        std::vector<Tensor> db; // empty when every slice file already exists
        int count = 0;
    };
    std::vector<FileSlices> work;
    std::vector<std::string> failures;

    double db_min = 0.0, db_max = 0.0;
    bool any_value = false;
    for (const std::string& path : files) {
        try {
            FileSlices fsl;
            fsl.path = path;
            fsl.hash = hash_file_bytes(path);
            fsl.db = slice_db_mels(path, cfg.stft, cfg.log_floor);
            fsl.count = static_cast<int>(fsl.db.size());
            for (const Tensor& t : fsl.db) {
                for (int64_t i = 0; i < t.size(); ++i) {
                    const double v = t[i];
                    if (!any_value) {
                        db_min = db_max = v;
                        any_value = true;
                    } else {
                        db_min = std::min(db_min, v);
                        db_max = std::max(db_max, v);
                    }
                }
            }
            work.push_back(std::move(fsl));
        } catch (const IngestError& e) {
            std::cerr << "ingest: " << e.what() << '\n';
            failures.push_back(path);
        }
    }

    if (!have_stats) {
        stats.log_floor = cfg.log_floor;
        stats.scale_min = cfg.log_floor;
        stats.scale_max = (any_value && db_max > cfg.log_floor + 1e-6) ? db_max : 0.0;
        write_stats_file(stats_path_for(out_dir), stats, cfg.stft);
    }

    // Pass 2: normalize, pack, write missing slice tensors, emit records.
    const StatsFile sf = read_stats_file(stats_path_for(out_dir));
    for (const FileSlices& fsl : work) {
        for (int w = 0; w < fsl.count; ++w) {
            const std::string name = slice_file_name(fsl.hash, w);
            const std::string path = slice_dir + "/" + name;
            if (!fs::exists(path)) {
                const Tensor& db = fsl.db[static_cast<size_t>(w)];
                LongMel lm;
                lm.norm = stats;
                lm.data = Tensor({1, cfg.stft.n_mels, cfg.stft.frames_per_slice});
                for (int64_t i = 0; i < db.size(); ++i)
                    lm.data[i] = normalize_db(db[i], stats);
                const MelSlice slice = pack(lm);
                TensorContainer c;
                c.add("slice", slice.data, /*as_f32=*/true);
                c.write_file(path);
            }
            manifest << fsl.path << ',' << w << ',' << "slices/" + name << ',' << sf.id << '\n';
        }
    }

    if (!failures.empty()) {
        std::cerr << "ingest: " << failures.size() << " of " << files.size()
                  << " files failed\n";
        return failures.size() == files.size() ? kExitRuntimeError : kExitPartialIngest;
    }
    return kExitOk;
}

// ----------------------------------------------------------- dataset load

Dataset load_manifest_dataset(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw ConfigError("cannot open manifest '" + manifest_path + "'");
    const std::string base = fs::path(manifest_path).parent_path().string();

    const std::string stats_path = base + "/norm_stats.json";
    if (fs::exists(stats_path)) {
        const StatsFile sf = read_stats_file(stats_path);
        if (sf.layout != kSnakeLayoutTag)
            throw IncompatibleCheckpoint("dataset layout '" + sf.layout +
                                         "' does not match this build's '" +
                                         std::string(kSnakeLayoutTag) + "'");
    }

    Dataset data;
    std::string line;
    std::getline(f, line); // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        // columns: source,window,tensor,stats — tensor path is third
        size_t p1 = line.find(',');
        size_t p2 = line.find(',', p1 + 1);
        size_t p3 = line.find(',', p2 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos || p3 == std::string::npos)
            throw CorruptFile("malformed manifest line: " + line);
        const std::string tensor_rel = line.substr(p2 + 1, p3 - p2 - 1);
        const TensorContainer c = TensorContainer::read_file(base + "/" + tensor_rel);
        data.items.push_back(c.get("slice"));
    }
    return data;
}

Tensor load_slice_set(const std::string& path) {
    if (path.size() > 4 && path.substr(path.size() - 4) == ".csv") {
        const Dataset d = load_manifest_dataset(path);
        if (d.empty()) throw ConfigError("manifest '" + path + "' references no slices");
        std::vector<int64_t> shape = d.items.front().shape();
        shape.insert(shape.begin(), static_cast<int64_t>(d.size()));
        Tensor out(shape);
        const int64_t item = d.items.front().size();
        for (size_t i = 0; i < d.size(); ++i)
            std::copy(d.items[i].data(), d.items[i].data() + item,
                      out.data() + static_cast<int64_t>(i) * item);
        return out;
    }
    const TensorContainer c = TensorContainer::read_file(path);
    return c.get("slices");
}

// ------------------------------------------------------------------ train

int run_train(const RunConfig& cfg) {
    if (cfg.train.manifest.empty()) throw ConfigError("train: manifest is required");
    if (!fs::exists(cfg.train.manifest))
        throw ConfigError("train: manifest '" + cfg.train.manifest + "' does not exist");

    const std::string out_dir = cfg.out + "/train";
    ensure_dir(out_dir);
    write_effective_config(cfg, out_dir);

    const Dataset data = load_manifest_dataset(cfg.train.manifest);
    if (data.empty()) throw ConfigError("train: dataset is empty");

    UNetConfig mc = cfg.model;
    mc.schedule_T = cfg.schedule_T;
    RandomStream init_rng(cfg.seed, "model/init");
    UNetModel model(mc, init_rng);

    const NoiseSchedule schedule = make_cosine_schedule(cfg.schedule_T);
    TrainConfig tc;
    tc.lr = cfg.train.lr;
    tc.total_steps = cfg.train.steps;
    tc.batch_size = cfg.train.batch;
    tc.weighting = weight_scheme_from_string(cfg.train.weighting);
    tc.seed = cfg.seed;
    tc.loss_csv_path = out_dir + "/loss.csv";

    try {
        train(model, data, tc, schedule);
    } catch (const NumericFailure& e) {
        // the model still holds the last successfully updated parameters
        save_checkpoint(model, out_dir + "/model_rescue.ckpt");
        std::cerr << "train: " << e.what() << "; rescue checkpoint written\n";
        return kExitRuntimeError;
    }

    model.set_step_counter(cfg.train.steps);
    save_checkpoint(model, out_dir + "/model_final.ckpt");
    return kExitOk;
}

// ---------------------------------------------------------------- distill

int run_distill(const RunConfig& cfg) {
    if (cfg.distill.teacher.empty()) throw ConfigError("distill: teacher checkpoint is required");
    if (!fs::exists(cfg.distill.teacher))
        throw ConfigError("distill: teacher '" + cfg.distill.teacher + "' does not exist");
    if (cfg.distill.manifest.empty()) throw ConfigError("distill: manifest is required");
    if (!fs::exists(cfg.distill.manifest))
        throw ConfigError("distill: manifest '" + cfg.distill.manifest + "' does not exist");

    const std::string out_dir = cfg.out + "/distill";
    ensure_dir(out_dir);
    write_effective_config(cfg, out_dir);

    LoadedCheckpoint teacher = load_checkpoint(cfg.distill.teacher);
    if (teacher.layout_tag != kSnakeLayoutTag)
        throw IncompatibleCheckpoint("teacher layout '" + teacher.layout_tag +
                                     "' does not match this build");

    const Dataset data = load_manifest_dataset(cfg.distill.manifest);
    if (data.empty()) throw ConfigError("distill: dataset is empty");

    DistillConfig dc;
    dc.n0 = cfg.distill.n0;
    dc.rounds = cfg.distill.rounds;
    dc.steps_per_round = cfg.distill.steps_per_round;
    dc.lr = cfg.distill.lr;
    dc.batch_size = cfg.distill.batch;
    dc.weighting = weight_scheme_from_string(cfg.distill.weighting);
    dc.kind = teacher.model.config().kind;
    dc.seed = cfg.seed;
    dc.loss_csv_prefix = out_dir + "/loss_";
    dc.validate();

    progressive_distill(teacher.model, data, dc,
                        [&](int round, int n_steps, const UNetModel& student) {
                            UNetModel copy = student;
                            save_checkpoint(copy,
                                            out_dir + "/model_N" + std::to_string(n_steps) +
                                                ".ckpt");
                            std::cout << "distill: round " << round << " done, N = " << n_steps
                                      << '\n';
                        });
    return kExitOk;
}

// ----------------------------------------------------------------- sample

int run_sample(const RunConfig& cfg) {
    if (cfg.sample.checkpoint.empty()) throw ConfigError("sample: checkpoint is required");
    if (!fs::exists(cfg.sample.checkpoint))
        throw ConfigError("sample: checkpoint '" + cfg.sample.checkpoint + "' does not exist");

    const std::string out_dir = cfg.out + "/sample";
    ensure_dir(out_dir);
    write_effective_config(cfg, out_dir);

    LoadedCheckpoint lc = load_checkpoint(cfg.sample.checkpoint);
    if (lc.layout_tag != kSnakeLayoutTag)
        throw IncompatibleCheckpoint("checkpoint layout '" + lc.layout_tag +
                                     "' does not match this build's '" +
                                     std::string(kSnakeLayoutTag) + "'");

    UNetDenoiser denoiser(lc.model);
    RandomStream rng(cfg.seed, "sample/noise");
    Tensor samples;
    if (cfg.sample.sampler == "ddim") {
        samples = sample_ddim(denoiser, cfg.sample.n_steps, cfg.sample.count, rng);
    } else {
        const NoiseSchedule s = make_cosine_schedule(lc.model.config().schedule_T);
        samples = sample_ancestral(denoiser, s, cfg.sample.count, rng);
    }

    TensorContainer c;
    c.add("slices", samples, /*as_f32=*/true);
    c.write_file(out_dir + "/samples.ntc");

    // Per-sample unpacked mels and waveforms. Values are clamped into the
    // normalized range before inversion. Inversion uses the ingest stats
    // when given, so amplitudes come back on the training scale.
    NormStats stats{cfg.log_floor, cfg.log_floor, 0.0};
    if (!cfg.sample.stats.empty()) {
        if (!fs::exists(cfg.sample.stats))
            throw ConfigError("sample: stats file '" + cfg.sample.stats + "' does not exist");
        stats = read_stats_file(cfg.sample.stats).norm;
    }
    const int64_t item = samples.size() / samples.dim(0);
    for (int64_t i = 0; i < samples.dim(0); ++i) {
        MelSlice slice;
        slice.norm = stats;
        slice.data = Tensor({3, cfg.stft.n_mels, cfg.stft.frames_per_slice / 3});
        for (int64_t j = 0; j < item; ++j)
            slice.data[j] = std::clamp(samples[i * item + j], -1.0, 1.0);
        const LongMel lm = unpack(slice);

        char name[64];
        std::snprintf(name, sizeof(name), "mel_%04lld.ntc", static_cast<long long>(i));
        TensorContainer mc;
        mc.add("mel", lm.data, /*as_f32=*/true);
        mc.write_file(out_dir + "/" + name);

        if (cfg.sample.write_wav) {
            const std::vector<double> wave =
                invert_mel(lm, cfg.sample.gl_iters, cfg.stft, cfg.seed);
            std::snprintf(name, sizeof(name), "sample_%04lld.wav", static_cast<long long>(i));
            save_wav_mono(out_dir + "/" + name, wave, cfg.stft.sample_rate);
        }
    }
    return kExitOk;
}

// ------------------------------------------------------------------- eval

int run_eval(const RunConfig& cfg) {
    if (cfg.eval.generated.empty() || cfg.eval.reference.empty())
        throw ConfigError("eval: generated and reference sets are required");
    if (!fs::exists(cfg.eval.generated))
        throw ConfigError("eval: '" + cfg.eval.generated + "' does not exist");
    if (!fs::exists(cfg.eval.reference))
        throw ConfigError("eval: '" + cfg.eval.reference + "' does not exist");
    if (!cfg.eval.extractor.empty() && !fs::exists(cfg.eval.extractor))
        throw ConfigError("eval: extractor '" + cfg.eval.extractor + "' does not exist");

    const std::string out_dir = cfg.out + "/eval";
    ensure_dir(out_dir);
    write_effective_config(cfg, out_dir);

    const Tensor gen = load_slice_set(cfg.eval.generated);
    const Tensor ref = load_slice_set(cfg.eval.reference);

    StandinExtractor extractor = [&] {
        if (!cfg.eval.extractor.empty()) return StandinExtractor::load(cfg.eval.extractor);
        std::cout << "eval: training stand-in extractor (" << cfg.eval.extractor_steps
                  << " steps)\n";
        StandinExtractor ex = train_standin_extractor(cfg.seed, cfg.eval.extractor_steps);
        ex.save(out_dir + "/extractor.ckpt");
        return ex;
    }();

    const Eigen::MatrixXd emb_gen = extractor.embed(gen);
    const Eigen::MatrixXd emb_ref = extractor.embed(ref);
    const double fad = frechet_distance(fit_gaussian(emb_ref), fit_gaussian(emb_gen));

    const Eigen::MatrixXd pp = extractor.pitch_probs(gen);
    const Eigen::MatrixXd ip = extractor.instrument_probs(gen);
    const double pis = inception_score(pp);
    const double iis = inception_score(ip);

    const double pkid = mmd2_imq(extractor.pitch_probs(ref), pp);
    const double ikid = mmd2_imq(extractor.instrument_probs(ref), ip);

    std::ofstream csv(out_dir + "/metrics.csv", std::ios::trunc);
    csv << "model,n_steps,PIS,IIS,PKID,IKID,FAD\n";
    csv << cfg.eval.model_id << ',' << cfg.eval.n_steps << ',' << pis << ',' << iis << ','
        << pkid << ',' << ikid << ',' << fad << '\n';

    std::printf("%-24s %8s %8s %8s %10s %10s %10s\n", "model", "steps", "PIS", "IIS", "PKID",
                "IKID", "FAD");
    std::printf("%-24s %8d %8.3f %8.3f %10.5f %10.5f %10.4f\n", cfg.eval.model_id.c_str(),
                cfg.eval.n_steps, pis, iis, pkid, ikid, fad);
    return kExitOk;
}

// ------------------------------------------------------------------- pack

int run_pack(const RunConfig& cfg, const std::string& input_path) {
    if (input_path.empty()) throw ConfigError("pack: input tensor file is required");
    if (!fs::exists(input_path))
        throw ConfigError("pack: '" + input_path + "' does not exist");

    const std::string out_dir = cfg.out + "/pack";
    ensure_dir(out_dir);

    const TensorContainer c = TensorContainer::read_file(input_path);
    TensorContainer out;
    if (c.has("mel")) {
        LongMel lm;
        lm.data = c.get("mel");
        const MelSlice s = pack(lm);
        const LongMel round = unpack(s);
        for (int64_t i = 0; i < lm.data.size(); ++i)
            if (round.data[i] != lm.data[i])
                throw NumericFailure("pack: round trip mismatch at element " + std::to_string(i));
        out.add("slice", s.data);
        out.write_file(out_dir + "/packed.ntc");
        std::cout << "pack: mel -> slice round trip exact\n";
    } else if (c.has("slice")) {
        MelSlice s;
        s.data = c.get("slice");
        const LongMel lm = unpack(s);
        const MelSlice round = pack(lm);
        for (int64_t i = 0; i < s.data.size(); ++i)
            if (round.data[i] != s.data[i])
                throw NumericFailure("pack: round trip mismatch at element " + std::to_string(i));
        out.add("mel", lm.data);
        out.write_file(out_dir + "/unpacked.ntc");
        std::cout << "pack: slice -> mel round trip exact\n";
    } else {
        throw ConfigError("pack: input holds neither 'mel' nor 'slice'");
    }
    return kExitOk;
}

} // namespace meldiff
