#include "modiff/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "modiff/audio.hpp"
#include "modiff/checkpoint.hpp"
#include "modiff/dataset.hpp"
#include "modiff/metrics.hpp"
#include "modiff/sampler.hpp"
#include "modiff/trainer.hpp"

namespace modiff::cli {

namespace {

uint64_t hash_string(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = splitmix64(h ^ c);
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

FrameMask parse_mask(const std::string& text, int n_frames) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (kind == "none") return FrameMask::none(n_frames);
  if (colon == std::string::npos) throw ParameterError("mask must be kind:args");
  const std::string args = text.substr(colon + 1);
  if (kind == "prefix") return FrameMask::prefix(n_frames, std::stoi(args));
  if (kind == "keyframes") {
    std::vector<int> frames;
    std::stringstream ss(args);
    std::string tok;
    while (std::getline(ss, tok, ',')) frames.push_back(std::stoi(tok));
    return FrameMask::keyframes(n_frames, frames);
  }
  throw ParameterError("unknown mask kind: " + kind);
}

// Conditioning selected by CLI flags; at most one of audio/text.
ConditionInput make_condition(const Checkpoint& ckpt, const std::string& audio_path,
                              const std::string& text) {
  ConditionInput cond;
  if (!audio_path.empty() && !text.empty())
    throw ParameterError("give either --audio or --text, not both");
  if (!audio_path.empty()) {
    if (ckpt.model.hyper.modality != Modality::kAudio)
      throw ParameterError("model was not trained with audio conditioning");
    MelSpec spec;
    spec.bands = ckpt.model.hyper.mel_bands;
    cond.modality = Modality::kAudio;
    cond.mel = mel_from_file(audio_path, spec);
  } else if (!text.empty()) {
    if (ckpt.model.hyper.modality != Modality::kText)
      throw ParameterError("model was not trained with text conditioning");
    if (!ckpt.vocab) throw ParameterError("checkpoint carries no vocabulary");
    cond.modality = Modality::kText;
    cond.tokens = ckpt.vocab->encode(text, ckpt.model.hyper.text_max_tokens);
  }
  return cond;
}

MotionSequence to_motion(const Tensor<float>& frames, double fps) {
  MotionSequence m;
  m.fps = fps;
  m.frames = tensor_cast<double>(frames);
  return m;
}

int run_impl(int argc, const char* const* argv) {
  CLI::App app{"mel-conditioned diffusion motion synthesis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from a TOML/INI file");
  uint64_t seed = 0;
  app.add_option("--seed", seed, "global RNG seed")->envname("MODIFF_SEED");

  // ---- gen-data ----
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic beat-locked dataset");
  std::string gen_out;
  SyntheticSpec spec;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", spec.n_sequences, "number of sequences");
  gen->add_option("--seconds", spec.seconds, "sequence length in seconds");
  gen->add_option("--fps", spec.fps, "motion frame rate");
  gen->add_option("--beat-hz", spec.beat_hz, "beat frequency");
  gen->add_option("--skeleton", spec.skeleton, "skeleton preset (toy8|biped24)");
  gen->add_option("--sample-rate", spec.sample_rate, "audio sample rate");
  gen->callback([&] {
    spec.seed = seed;
    gen_data(gen_out, spec);
    std::cout << "wrote " << spec.n_sequences << " sequences to " << gen_out << "\n";
  });

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train a denoiser on a dataset");
  std::string tr_data, tr_out, tr_task = "audio", tr_resume;
  TrainConfig tcfg;
  DenoiserHyper hyper;
  int sched_steps = 1000;
  double beta_start = 1e-4, beta_end = 0.02;
  tr->add_option("--data", tr_data, "dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--task", tr_task, "conditioning modality (audio|text|none)");
  tr->add_option("--resume", tr_resume, "checkpoint to continue from");
  tr->add_option("--steps", tcfg.max_steps, "total optimization steps");
  tr->add_option("--batch", tcfg.batch_size, "mini-batch size");
  tr->add_option("--lr", tcfg.lr, "peak learning rate");
  tr->add_option("--warmup", tcfg.warmup_steps, "linear warm-up steps (0 = off)");
  tr->add_option("--weight-decay", tcfg.weight_decay, "decoupled weight decay");
  tr->add_option("--ckpt-every", tcfg.ckpt_every, "checkpoint cadence (0 = only final)");
  tr->add_option("--log-every", tcfg.log_every, "loss log cadence");
  tr->add_option("--lambda-a", tcfg.loss.lambda_a, "symmetry loss weight");
  tr->add_option("--lambda-m", tcfg.loss.lambda_m, "clean-motion loss weight");
  tr->add_flag("--no-loss-skeleton", [&](int64_t) { tcfg.loss.use_skeleton = false; },
               "disable the bone-length variance loss");
  tr->add_flag("--no-loss-symmetry", [&](int64_t) { tcfg.loss.use_symmetry = false; },
               "disable the symmetry loss");
  tr->add_flag("--no-loss-motion", [&](int64_t) { tcfg.loss.use_motion = false; },
               "disable the clean-motion loss");
  tr->add_option("--base", hyper.base_channels, "base channel count");
  tr->add_option("--heads", hyper.heads, "attention heads");
  tr->add_option("--attn-dim", hyper.attn_dim, "attention width");
  tr->add_option("--ctx-dim", hyper.ctx_dim, "context width");
  tr->add_option("--time-sin", hyper.time_sin_dim, "sinusoidal time embedding width");
  tr->add_option("--time-mlp", hyper.time_mlp_dim, "time MLP width");
  tr->add_option("--diffusion-steps", sched_steps, "diffusion timesteps");
  tr->callback([&] {
    tcfg.seed = seed;
    const Dataset data = load_dataset(tr_data);
    if (data.items.empty()) throw ParameterError("dataset is empty");
    Checkpoint ckpt;
    if (!tr_resume.empty()) {
      ckpt = load_checkpoint(tr_resume);
      tcfg.seed = ckpt.seed;  // resume must replay the original stream
    } else {
      hyper.modality = modality_from_name(tr_task);
      hyper.input_channels = data.skeleton.channel_count();
      if (hyper.modality == Modality::kText) {
        std::vector<std::string> corpus;
        for (const auto& item : data.items) corpus.push_back(item.caption);
        Vocabulary vocab = Vocabulary::build(corpus);
        hyper.vocab_size = vocab.size();
        ckpt.vocab = std::move(vocab);
      }
      ckpt.model = build_denoiser<float>(hyper);
      init_params(ckpt.model, seed);
      ckpt.schedule_steps = sched_steps;
      ckpt.beta_start = beta_start;
      ckpt.beta_end = beta_end;
      ckpt.skeleton = data.skeleton;
      ckpt.fps = data.fps;
      ckpt.seed = seed;
    }
    if (ckpt.model.hyper.input_channels != data.skeleton.channel_count())
      throw ParameterError("checkpoint skeleton does not match the dataset");
    const TrainResult res = train(ckpt, data, tcfg, tr_out);
    nlohmann::json out = {{"final_step", res.final_step},
                          {"total", res.last.total},
                          {"data", res.last.data},
                          {"skeleton", res.last.skeleton},
                          {"symmetry", res.last.symmetry},
                          {"motion", res.last.motion}};
    std::cout << out.dump() << "\n";
  });

  // ---- sample ----
  auto* sm = app.add_subcommand("sample", "draw a motion from a trained model");
  std::string sm_ckpt, sm_out, sm_audio, sm_text;
  double sm_len_sec = 2.0;
  int sm_frames = 0;
  sm->add_option("--ckpt", sm_ckpt, "checkpoint file")->required();
  sm->add_option("--out", sm_out, "output motion JSON")->required();
  sm->add_option("--audio", sm_audio, "conditioning audio (wav)");
  sm->add_option("--text", sm_text, "conditioning caption");
  sm->add_option("--length-sec", sm_len_sec, "output length in seconds");
  sm->add_option("--frames", sm_frames, "output length in frames (overrides --length-sec)");
  sm->callback([&] {
    const Checkpoint ckpt = load_checkpoint(sm_ckpt);
    const ConditionInput cond = make_condition(ckpt, sm_audio, sm_text);
    const int n = sm_frames > 0 ? sm_frames : int(std::lround(sm_len_sec * ckpt.fps));
    if (n < 1) throw ParameterError("output length must be at least one frame");
    const auto frames = sample(ckpt.model, cond, n, ckpt.schedule(), seed);
    write_motion_json(sm_out, to_motion(frames, ckpt.fps), ckpt.skeleton);
    std::cout << "wrote " << n << " frames to " << sm_out << "\n";
  });

  // ---- edit ----
  auto* ed = app.add_subcommand("edit", "mask-conditioned sampling around a seed motion");
  std::string ed_ckpt, ed_seed_motion, ed_mask = "prefix:0", ed_out, ed_audio, ed_text;
  ed->add_option("--ckpt", ed_ckpt, "checkpoint file")->required();
  ed->add_option("--seed-motion", ed_seed_motion, "seed motion JSON (the canvas)")->required();
  ed->add_option("--mask", ed_mask, "prefix:S or keyframes:a,b,c or none");
  ed->add_option("--out", ed_out, "output motion JSON")->required();
  ed->add_option("--audio", ed_audio, "conditioning audio (wav)");
  ed->add_option("--text", ed_text, "conditioning caption");
  ed->callback([&] {
    const Checkpoint ckpt = load_checkpoint(ed_ckpt);
    const ConditionInput cond = make_condition(ckpt, ed_audio, ed_text);
    Skeleton skel;
    const MotionSequence seed_motion = read_motion_json(ed_seed_motion, &skel);
    if (skel.channel_count() != ckpt.model.hyper.input_channels)
      throw ParameterError("seed motion skeleton does not match the model");
    const FrameMask mask = parse_mask(ed_mask, seed_motion.frame_count());
    const auto frames = masked_sample(ckpt.model, cond, tensor_cast<float>(seed_motion.frames),
                                      mask, ckpt.schedule(), seed);
    MotionSequence out = to_motion(frames, ckpt.fps);
    for (int r = 0; r < out.frames.rows; ++r)
      if (mask.keep[size_t(r)])
        for (int c = 0; c < out.frames.cols; ++c)
          out.frames.at(r, c) = seed_motion.frames.at(r, c);
    write_motion_json(ed_out, out, ckpt.skeleton);
    std::cout << "wrote " << frames.rows << " frames to " << ed_out << "\n";
  });

  // ---- eval ----
  auto* ev = app.add_subcommand("eval", "evaluate a model (or the dataset itself) on a dataset");
  std::string ev_data, ev_ckpt, ev_out;
  int mm_k = 50;
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--ckpt", ev_ckpt, "checkpoint (omit to score ground truth against itself)");
  ev->add_option("--out", ev_out, "write the report JSON here as well");
  ev->add_option("--mm-k", mm_k, "samples per context for multi-modality");
  ev->callback([&] {
    const Dataset data = load_dataset(ev_data);
    if (data.items.empty()) throw ParameterError("dataset is empty");
    const MelSpec mel_spec;

    std::vector<std::vector<double>> gt_feats;
    std::vector<std::vector<int>> gt_music;
    for (const auto& item : data.items) {
      gt_feats.push_back(kinetic_features(item.motion));
      if (!item.audio_path.empty())
        gt_music.push_back(music_beats(mel_from_file(item.audio_path, mel_spec), mel_spec,
                                       data.fps));
      else
        gt_music.emplace_back();
    }

    double bas = 0.0, fid = 0.0, div = 0.0, mm = 0.0;
    if (ev_ckpt.empty()) {
      int bas_n = 0;
      for (size_t i = 0; i < data.items.size(); ++i) {
        if (gt_music[i].empty()) continue;
        bas += beat_alignment_score(kinematic_beats(kinetic_velocity(data.items[i].motion)), gt_music[i]);
        ++bas_n;
      }
      bas = bas_n ? bas / bas_n : 0.0;
      fid = frechet_distance(gt_feats, gt_feats);
      div = gt_feats.size() > 1 ? diversity(gt_feats) : 0.0;
    } else {
      const Checkpoint ckpt = load_checkpoint(ev_ckpt);
      if (ckpt.model.hyper.input_channels != data.skeleton.channel_count())
        throw ParameterError("checkpoint skeleton does not match the dataset");
      const NoiseSchedule sched = ckpt.schedule();
      const auto conds = prepare_conditioning(data, ckpt.model.hyper.modality,
                                              ckpt.vocab ? &*ckpt.vocab : nullptr);
      std::vector<std::vector<double>> gen_feats;
      int bas_n = 0;
      for (size_t i = 0; i < data.items.size(); ++i) {
        const auto frames = sample(ckpt.model, conds[i], data.items[i].motion.frame_count(),
                                   sched, mix_seed(seed, 0x65766c, i));
        const MotionSequence gen = to_motion(frames, data.fps);
        gen_feats.push_back(kinetic_features(gen));
        if (!gt_music[i].empty()) {
          bas += beat_alignment_score(kinematic_beats(kinetic_velocity(gen)), gt_music[i]);
          ++bas_n;
        }
      }
      bas = bas_n ? bas / bas_n : 0.0;
      fid = frechet_distance(gen_feats, gt_feats);
      div = gen_feats.size() > 1 ? diversity(gen_feats) : 0.0;
      if (mm_k > 1) {
        std::vector<uint64_t> mm_seeds;
        for (int k = 0; k < mm_k; ++k) mm_seeds.push_back(mix_seed(seed, 0x6d6d6f64, uint64_t(k)));
        mm = multi_modality(
            [&](uint64_t s) {
              return to_motion(sample(ckpt.model, conds[0],
                                      data.items[0].motion.frame_count(), sched, s),
                               data.fps);
            },
            mm_seeds);
      }
    }

    const uint64_t cfg_hash = hash_string(ev_data + "|" + ev_ckpt + "|" + std::to_string(seed) +
                                          "|" + std::to_string(mm_k));
    nlohmann::json report = {{"bas", bas},
                             {"fid", fid},
                             {"diversity", div},
                             {"multimodality", mm},
                             {"n_sequences", data.items.size()},
                             {"config_hash", hex64(cfg_hash)}};
    std::cout << report.dump() << "\n";
    if (!ev_out.empty()) {
      std::ofstream out(ev_out, std::ios::binary);
      if (!out) throw IoError("cannot write report: " + ev_out);
      out << report.dump(2) << '\n';
    }
  });

  // ---- mel ----
  auto* ml = app.add_subcommand("mel", "compute a log-Mel map from audio");
  std::string ml_audio, ml_out;
  MelSpec ml_spec;
  ml->add_option("--audio", ml_audio, "input wav")->required();
  ml->add_option("--out", ml_out, "output JSON (stdout if omitted)");
  ml->add_option("--sr", ml_spec.sample_rate, "analysis sample rate");
  ml->add_option("--bands", ml_spec.bands, "Mel bands");
  ml->add_option("--hop", ml_spec.hop, "hop length in samples");
  ml->add_option("--n-fft", ml_spec.n_fft, "window / FFT length");
  ml->callback([&] {
    const Tensor<double> mel = mel_from_file(ml_audio, ml_spec);
    nlohmann::json rows = nlohmann::json::array();
    for (int f = 0; f < mel.rows; ++f) {
      nlohmann::json row = nlohmann::json::array();
      for (int b = 0; b < mel.cols; ++b) row.push_back(mel.at(f, b));
      rows.push_back(std::move(row));
    }
    nlohmann::json out = {{"sample_rate", ml_spec.sample_rate}, {"hop", ml_spec.hop},
                          {"n_fft", ml_spec.n_fft},             {"bands", ml_spec.bands},
                          {"frames", mel.rows},                 {"data", rows}};
    if (ml_out.empty()) {
      std::cout << out.dump() << "\n";
    } else {
      std::ofstream f(ml_out, std::ios::binary);
      if (!f) throw IoError("cannot write mel JSON: " + ml_out);
      f << out.dump() << '\n';
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  try {
    return run_impl(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace modiff::cli
