#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "meldiff/audio.hpp"
#include "meldiff/checkpoint.hpp"
#include "meldiff/container.hpp"
#include "meldiff/metrics.hpp"
#include "meldiff/rng.hpp"
#include "meldiff/tones.hpp"
#include "meldiff/unet.hpp"

namespace fs = std::filesystem;
using namespace meldiff;

namespace {

std::string g_cli;
const std::string kScratch = "cli_scratch";

int run_cli(const std::string& args) {
    const std::string cmd = g_cli + " " + args + " >> " + kScratch + "/cli_log.txt 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

int count_manifest_rows(const std::string& path) {
    std::ifstream f(path);
    if (!f) return -1;
    std::string line;
    std::getline(f, line); // header
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    return rows;
}

UNetModel make_tiny_model(uint64_t seed) {
    UNetConfig cfg;
    cfg.base_width = 4;
    cfg.depth = 1;
    cfg.time_embed_dim = 8;
    cfg.use_attention = false;
    cfg.schedule_T = 64;
    RandomStream rng(seed, "cli-test/model");
    return UNetModel(cfg, rng);
}

void write_tone_wav(const std::string& path, int windows, int pitch_class) {
    const StftParams p;
    const int64_t samples = p.samples_for_frames(static_cast<int64_t>(windows) * 384) + p.hop;
    const double secs = static_cast<double>(samples) / p.sample_rate;
    const std::vector<double> wave =
        synth_tone(pitch_class_freq(pitch_class), Timbre::Square, secs, p.sample_rate, 0.5);
    save_wav_mono(path, wave, p.sample_rate);
}

} // namespace

TEST_CASE("ingest of an empty directory succeeds with an empty manifest") {
    fs::create_directories(kScratch + "/empty_audio");
    const int rc = run_cli("--out " + kScratch + "/empty ingest --audio-dir " + kScratch +
                           "/empty_audio");
    CHECK(rc == 0);
    CHECK(count_manifest_rows(kScratch + "/empty/ingest/manifest.csv") == 0);
}

TEST_CASE("ingest slices a three-window file and re-running changes nothing") {
    fs::create_directories(kScratch + "/audio");
    write_tone_wav(kScratch + "/audio/tone.wav", 3, 4);

    const std::string args =
        "--out " + kScratch + "/run --seed 11 ingest --audio-dir " + kScratch + "/audio";
    REQUIRE(run_cli(args) == 0);
    const std::string manifest = kScratch + "/run/ingest/manifest.csv";
    CHECK(count_manifest_rows(manifest) == 3);
    CHECK(fs::exists(kScratch + "/run/ingest/norm_stats.json"));
    CHECK(fs::exists(kScratch + "/run/ingest/effective_config.json"));

    // idempotent re-run: same record count, same slice files
    std::vector<std::string> before;
    for (const auto& e : fs::directory_iterator(kScratch + "/run/ingest/slices"))
        before.push_back(e.path().filename().string());
    REQUIRE(run_cli(args) == 0);
    CHECK(count_manifest_rows(manifest) == 3);
    std::vector<std::string> after;
    for (const auto& e : fs::directory_iterator(kScratch + "/run/ingest/slices"))
        after.push_back(e.path().filename().string());
    CHECK(before.size() == after.size());
}

TEST_CASE("unknown config keys are a config error") {
    std::ofstream f(kScratch + "/bad.json");
    f << R"({"seed": 1, "bogus_key": true})";
    f.close();
    const int rc = run_cli("--config " + kScratch + "/bad.json --out " + kScratch +
                           "/bad ingest --audio-dir " + kScratch + "/audio");
    CHECK(rc == 1);
}

TEST_CASE("missing required inputs fail before any compute") {
    CHECK(run_cli("--out " + kScratch + "/nothing train") == 1);
    CHECK(run_cli("--out " + kScratch + "/nothing distill") == 1);
    CHECK(run_cli("--out " + kScratch + "/nothing sample") == 1);
    CHECK(run_cli("--out " + kScratch + "/nothing eval") == 1);
}

TEST_CASE("sample with one step on an untrained model emits artifacts") {
    UNetModel model = make_tiny_model(21);
    save_checkpoint(model, kScratch + "/untrained.ckpt");
    const int rc = run_cli("--out " + kScratch + "/samp --seed 3 sample --checkpoint " +
                           kScratch + "/untrained.ckpt --n-steps 1 --count 1 --gl-iters 2");
    CHECK(rc == 0);
    CHECK(fs::exists(kScratch + "/samp/sample/samples.ntc"));
    CHECK(fs::exists(kScratch + "/samp/sample/mel_0000.ntc"));
    CHECK(fs::exists(kScratch + "/samp/sample/sample_0000.wav"));

    const TensorContainer c = TensorContainer::read_file(kScratch + "/samp/sample/samples.ntc");
    const Tensor& slices = c.get("slices");
    REQUIRE(slices.rank() == 4);
    CHECK(slices.dim(0) == 1);
    CHECK(slices.dim(1) == 3);

    // inversion against the ingest normalization stats
    const std::string stats = kScratch + "/run/ingest/norm_stats.json";
    REQUIRE(fs::exists(stats));
    CHECK(run_cli("--out " + kScratch + "/samp2 --seed 3 sample --checkpoint " + kScratch +
                  "/untrained.ckpt --stats " + stats + " --n-steps 1 --count 1 --gl-iters 2") ==
          0);
    CHECK(fs::exists(kScratch + "/samp2/sample/sample_0000.wav"));
}

TEST_CASE("a checkpoint with a foreign layout tag is rejected by sample") {
    UNetModel model = make_tiny_model(22);
    // same tensors, hand-built metadata with a different layout tag
    TensorContainer tensors;
    for (const auto& p : model.parameters()) tensors.add(p.name, *p.value);
    write_meta_blob(kScratch + "/foreign.ckpt",
                    R"({"format_version": 1, "kind": "denoiser",)"
                    R"( "model": {"base_width": 4, "depth": 1, "time_embed_dim": 8,)"
                    R"( "use_attention": false, "param_kind": "v"},)"
                    R"( "schedule": {"family": "cosine", "T": 64},)"
                    R"( "layout": "snake-other-v9", "step": 0, "has_optimizer": false})",
                    tensors);
    const int rc = run_cli("--out " + kScratch + "/foreign sample --checkpoint " + kScratch +
                           "/foreign.ckpt --n-steps 1 --count 1");
    CHECK(rc == 2);
}

TEST_CASE("ancestral sampling runs on the full discrete grid") {
    UNetModel model = make_tiny_model(23);
    save_checkpoint(model, kScratch + "/anc.ckpt");
    const int rc = run_cli("--out " + kScratch + "/anc --seed 5 sample --checkpoint " +
                           kScratch + "/anc.ckpt --sampler ancestral --count 1 --no-wav");
    CHECK(rc == 0);
    CHECK(fs::exists(kScratch + "/anc/sample/samples.ntc"));
}

TEST_CASE("train, distill round count and checkpoint naming") {
    // manifest from the earlier ingest run
    const std::string manifest = kScratch + "/run/ingest/manifest.csv";
    REQUIRE(fs::exists(manifest));

    std::ofstream f(kScratch + "/train.json");
    f << R"({"seed": 7, "out": ")" << kScratch << R"(/train_run",
            "schedule": {"T": 64},
            "model": {"base_width": 4, "depth": 1, "time_embed_dim": 8,
                      "use_attention": false},
            "train": {"manifest": ")" << manifest << R"(", "steps": 2, "batch": 2},
            "distill": {"manifest": ")" << manifest << R"(",
                        "n0": 8, "rounds": 2, "steps_per_round": 1,
                        "batch": 2}})";
    f.close();

    REQUIRE(run_cli("--config " + kScratch + "/train.json train") == 0);
    const std::string final_ckpt = kScratch + "/train_run/train/model_final.ckpt";
    REQUIRE(fs::exists(final_ckpt));
    CHECK(fs::exists(kScratch + "/train_run/train/loss.csv"));

    REQUIRE(run_cli("--config " + kScratch + "/train.json distill --teacher " + final_ckpt) ==
            0);
    CHECK(fs::exists(kScratch + "/train_run/distill/model_N8.ckpt"));
    CHECK(fs::exists(kScratch + "/train_run/distill/model_N4.ckpt"));
    CHECK(!fs::exists(kScratch + "/train_run/distill/model_N2.ckpt"));
}

TEST_CASE("eval of two identical sample sets reports a zero distance") {
    // a fixed slice set, used as both generated and reference
    RandomStream rng(24, "cli-test/eval");
    Tensor slices({8, 3, 128, 128});
    for (int64_t i = 0; i < slices.size(); ++i)
        slices[i] = std::clamp(0.3 * rng.normal() - 0.5, -1.0, 1.0);
    TensorContainer c;
    c.add("slices", slices, true);
    fs::create_directories(kScratch);
    c.write_file(kScratch + "/set.ntc");

    // an untrained extractor is enough: identical sets give identical stats
    RandomStream ex_rng(25, "cli-test/extractor");
    StandinExtractor ex(StandinExtractor::Config{}, ex_rng);
    ex.save(kScratch + "/ex.ckpt");

    REQUIRE(run_cli("--out " + kScratch + "/eval eval --generated " + kScratch +
                    "/set.ntc --reference " + kScratch + "/set.ntc --extractor " + kScratch +
                    "/ex.ckpt --model-id selftest --n-steps 4") == 0);

    std::ifstream mf(kScratch + "/eval/eval/metrics.csv");
    REQUIRE(mf.good());
    std::string header, row;
    std::getline(mf, header);
    std::getline(mf, row);
    CHECK(header == "model,n_steps,PIS,IIS,PKID,IKID,FAD");
    std::vector<std::string> cols;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    REQUIRE(cols.size() == 7);
    CHECK(cols[0] == "selftest");
    CHECK(std::abs(std::stod(cols[4])) < 0.02); // PKID of identical sets
    CHECK(std::abs(std::stod(cols[5])) < 0.02);
    CHECK(std::abs(std::stod(cols[6])) < 1e-6); // FAD identity
}

TEST_CASE("re-running from the effective config reproduces the artifact") {
    const std::string manifest = kScratch + "/run/ingest/manifest.csv";
    REQUIRE(fs::exists(manifest));

    REQUIRE(run_cli("--out " + kScratch + "/repro --seed 42 train --manifest " + manifest +
                    " --steps 2 --batch 2") == 0);
    const std::string first = kScratch + "/repro/train/model_final.ckpt";
    REQUIRE(fs::exists(first));
    std::ifstream a(first, std::ios::binary);
    std::stringstream sa;
    sa << a.rdbuf();

    // wipe and rerun purely from the recorded configuration
    const std::string cfg_path = kScratch + "/repro/train/effective_config.json";
    std::stringstream cfg_text;
    {
        std::ifstream c(cfg_path);
        cfg_text << c.rdbuf();
    }
    fs::remove_all(kScratch + "/repro/train");
    std::ofstream c2(kScratch + "/repro_config.json");
    c2 << cfg_text.str();
    c2.close();
    REQUIRE(run_cli("--config " + kScratch + "/repro_config.json train") == 0);

    std::ifstream b(first, std::ios::binary);
    std::stringstream sb;
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}

TEST_CASE("numeric failure keeps a rescue checkpoint and exits 2") {
    // a manifest pointing at a slice with a non-finite cell
    const std::string dir = kScratch + "/poison";
    fs::create_directories(dir + "/slices");
    Tensor bad({3, 128, 128});
    bad[5] = std::numeric_limits<double>::infinity();
    TensorContainer c;
    c.add("slice", bad);
    c.write_file(dir + "/slices/slice_bad.ntc");
    std::ofstream m(dir + "/manifest.csv");
    m << "source,window,tensor,stats\n";
    m << "none,0,slices/slice_bad.ntc,none\n";
    m.close();

    const int rc = run_cli("--out " + dir + "/out train --manifest " + dir +
                           "/manifest.csv --steps 3 --batch 1");
    CHECK(rc == 2);
    CHECK(fs::exists(dir + "/out/train/model_rescue.ckpt"));
    CHECK(!fs::exists(dir + "/out/train/model_final.ckpt"));
}

TEST_CASE("undecodable files are skipped and flagged as partial failure") {
    const std::string dir = kScratch + "/mixed_audio";
    fs::create_directories(dir);
    write_tone_wav(dir + "/good.wav", 1, 2);
    std::ofstream bad(dir + "/broken.wav", std::ios::binary);
    bad << "this is not a wav file";
    bad.close();

    const int rc = run_cli("--out " + kScratch + "/mixed ingest --audio-dir " + dir);
    CHECK(rc == 3);
    CHECK(count_manifest_rows(kScratch + "/mixed/ingest/manifest.csv") == 1);
}

TEST_CASE("pack round trips a mel container") {
    RandomStream rng(26, "cli-test/pack");
    LongMel m;
    m.data = rng.normal_tensor({1, 128, 384});
    TensorContainer c;
    c.add("mel", m.data);
    c.write_file(kScratch + "/mel.ntc");
    REQUIRE(run_cli("--out " + kScratch + "/pk pack --input " + kScratch + "/mel.ntc") == 0);
    CHECK(fs::exists(kScratch + "/pk/pack/packed.ntc"));

    REQUIRE(run_cli("--out " + kScratch + "/pk2 pack --input " + kScratch +
                    "/pk/pack/packed.ntc") == 0);
    const TensorContainer back =
        TensorContainer::read_file(kScratch + "/pk2/pack/unpacked.ntc");
    const Tensor& mel = back.get("mel");
    for (int64_t i = 0; i < mel.size(); ++i) CHECK(mel[i] == m.data[i]);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-cli>\n", argv[0]);
        return 1;
    }
    g_cli = argv[argc - 1];
    fs::remove_all(kScratch);
    fs::create_directories(kScratch);

    doctest::Context ctx;
    int dargc = 1;
    ctx.applyCommandLine(dargc, argv);
    const int rc = ctx.run();
    if (rc == 0) fs::remove_all(kScratch);
    return rc;
}
