#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "meldiff/commands.hpp"
#include "meldiff/config.hpp"
#include "meldiff/errors.hpp"

using namespace meldiff;

int main(int argc, char** argv) {
    CLI::App app{"Progressive-distillation diffusion for mel-spectrogram audio"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration")->expected(1);

    uint64_t seed = 0;
    std::string out_dir;
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    auto* out_opt = app.add_option("--out", out_dir, "output directory override");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "slice a directory of WAV files into tensors");
    std::string audio_dir;
    auto* audio_opt = ingest->add_option("--audio-dir", audio_dir, "directory of 16-bit PCM WAVs");

    // train
    auto* train = app.add_subcommand("train", "train the denoiser");
    std::string manifest;
    int steps = -1, batch = -1;
    double lr = -1.0;
    std::string weighting;
    auto* tr_manifest = train->add_option("--manifest", manifest, "dataset manifest");
    auto* tr_steps = train->add_option("--steps", steps, "optimizer updates");
    auto* tr_batch = train->add_option("--batch", batch, "batch size");
    auto* tr_lr = train->add_option("--lr", lr, "initial learning rate");
    auto* tr_w = train->add_option("--weighting", weighting, "snr | snr_trunc | snr_plus_one");

    // distill
    auto* distill = app.add_subcommand("distill", "progressively distill a trained denoiser");
    std::string teacher, d_manifest, d_weighting;
    int n0 = -1, rounds = -1, spr = -1, d_batch = -1;
    double d_lr = -1.0;
    auto* di_teacher = distill->add_option("--teacher", teacher, "teacher checkpoint");
    auto* di_manifest = distill->add_option("--manifest", d_manifest, "dataset manifest");
    auto* di_n0 = distill->add_option("--n0", n0, "initial student sampling steps");
    auto* di_rounds = distill->add_option("--rounds", rounds, "number of halving rounds");
    auto* di_spr = distill->add_option("--steps-per-round", spr, "updates per round");
    auto* di_batch = distill->add_option("--batch", d_batch, "batch size");
    auto* di_lr = distill->add_option("--lr", d_lr, "learning rate");
    auto* di_w = distill->add_option("--weighting", d_weighting, "loss weighting");

    // sample
    auto* sample = app.add_subcommand("sample", "generate slices, mels and WAVs");
    std::string checkpoint, sampler;
    int n_steps = -1, count = -1, gl_iters = -1;
    bool no_wav = false;
    auto* sa_ckpt = sample->add_option("--checkpoint", checkpoint, "denoiser checkpoint");
    std::string sample_stats;
    auto* sa_stats =
        sample->add_option("--stats", sample_stats, "norm_stats.json for waveform inversion");
    auto* sa_steps = sample->add_option("--n-steps", n_steps, "sampling steps");
    auto* sa_count = sample->add_option("--count", count, "number of samples");
    auto* sa_sampler = sample->add_option("--sampler", sampler, "ddim | ancestral");
    auto* sa_gl = sample->add_option("--gl-iters", gl_iters, "phase recovery iterations");
    sample->add_flag("--no-wav", no_wav, "skip waveform inversion");

    // eval
    auto* eval = app.add_subcommand("eval", "score a generated set against a reference set");
    std::string generated, reference, extractor, model_id;
    int e_steps = -1, ex_steps = -1;
    auto* ev_gen = eval->add_option("--generated", generated, "generated slices (.ntc or .csv)");
    auto* ev_ref = eval->add_option("--reference", reference, "reference slices (.ntc or .csv)");
    auto* ev_ex = eval->add_option("--extractor", extractor, "extractor checkpoint");
    auto* ev_id = eval->add_option("--model-id", model_id, "label for the report");
    auto* ev_n = eval->add_option("--n-steps", e_steps, "steps column for the report");
    auto* ev_exs = eval->add_option("--extractor-steps", ex_steps, "stand-in training steps");

    // pack
    auto* packc = app.add_subcommand("pack", "debug pack/unpack round trip on a tensor file");
    std::string pack_input;
    packc->add_option("--input", pack_input, "tensor container holding 'mel' or 'slice'")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfigError;
    }

    try {
        RunConfig cfg = load_run_config(config_path);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (out_opt->count() > 0) cfg.out = out_dir;
        if (audio_opt->count() > 0) cfg.ingest.audio_dir = audio_dir;

        if (tr_manifest->count() > 0) cfg.train.manifest = manifest;
        if (tr_steps->count() > 0) cfg.train.steps = steps;
        if (tr_batch->count() > 0) cfg.train.batch = batch;
        if (tr_lr->count() > 0) cfg.train.lr = lr;
        if (tr_w->count() > 0) cfg.train.weighting = weighting;

        if (di_teacher->count() > 0) cfg.distill.teacher = teacher;
        if (di_manifest->count() > 0) cfg.distill.manifest = d_manifest;
        if (di_n0->count() > 0) cfg.distill.n0 = n0;
        if (di_rounds->count() > 0) cfg.distill.rounds = rounds;
        if (di_spr->count() > 0) cfg.distill.steps_per_round = spr;
        if (di_batch->count() > 0) cfg.distill.batch = d_batch;
        if (di_lr->count() > 0) cfg.distill.lr = d_lr;
        if (di_w->count() > 0) cfg.distill.weighting = d_weighting;

        if (sa_ckpt->count() > 0) cfg.sample.checkpoint = checkpoint;
        if (sa_stats->count() > 0) cfg.sample.stats = sample_stats;
        if (sa_steps->count() > 0) cfg.sample.n_steps = n_steps;
        if (sa_count->count() > 0) cfg.sample.count = count;
        if (sa_sampler->count() > 0) cfg.sample.sampler = sampler;
        if (sa_gl->count() > 0) cfg.sample.gl_iters = gl_iters;
        if (no_wav) cfg.sample.write_wav = false;

        if (ev_gen->count() > 0) cfg.eval.generated = generated;
        if (ev_ref->count() > 0) cfg.eval.reference = reference;
        if (ev_ex->count() > 0) cfg.eval.extractor = extractor;
        if (ev_id->count() > 0) cfg.eval.model_id = model_id;
        if (ev_n->count() > 0) cfg.eval.n_steps = e_steps;
        if (ev_exs->count() > 0) cfg.eval.extractor_steps = ex_steps;

        cfg.validate();

        if (ingest->parsed()) return run_ingest(cfg);
        if (train->parsed()) return run_train(cfg);
        if (distill->parsed()) return run_distill(cfg);
        if (sample->parsed()) return run_sample(cfg);
        if (eval->parsed()) return run_eval(cfg);
        if (packc->parsed()) return run_pack(cfg, pack_input);
        return kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntimeError;
    }
}
