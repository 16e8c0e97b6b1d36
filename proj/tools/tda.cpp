// Copyright 2026 The tda Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// tda: corpus synthesis, pre-training, two-stage fine-tuning, ablations,
// decoding, evaluation and noise mixing from one JSON config.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tda/audio.hpp"
#include "tda/config.hpp"
#include "tda/corpus.hpp"
#include "tda/error.hpp"
#include "tda/eval.hpp"
#include "tda/model.hpp"
#include "tda/pretrain.hpp"
#include "tda/text.hpp"
#include "tda/train.hpp"

namespace fs = std::filesystem;
using namespace tda;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

// A missing or unreadable input; always exit 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::SanityFailed:
    case ErrorCode::IoError:
      return kRuntime;
    default:
      return kData;
  }
}

void require_file(const fs::path& path, const std::string& what) {
  if (path.empty()) throw InputError("missing " + what);
  if (!fs::exists(path)) throw InputError(what + " not found: " + path.string());
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool dump = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file (all sections optional)");
  cmd->add_option("--seed", c.seed, "Seed for every section (falls back to config seed, then $TDA_SEED)");
  cmd->add_flag("--dump-config", c.dump, "Print the effective config as JSON and exit");
}

// File values, then TDA_SEED when nothing else sets a seed, then flags.
Config effective_config(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : load_config(c.config_path);
  if (c.seed) {
    cfg.seed = c.seed;
  } else if (!cfg.seed) {
    if (const char* env = std::getenv("TDA_SEED")) {
      try {
        cfg.seed = std::stoull(env);
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidConfig, std::string("TDA_SEED is not an integer: ") + env);
      }
    }
  }
  if (cfg.seed) cfg.corpus.seed = *cfg.seed;
  cfg.apply_seed();
  return cfg;
}

bool maybe_dump(const Common& c, const Config& cfg) {
  if (!c.dump) return false;
  std::cout << config_to_json(cfg).dump(2) << "\n";
  return true;
}

struct CorpusData {
  std::vector<Utterance> standard;
  std::vector<Utterance> dialect;
  fs::path std_manifest;
  fs::path dialect_manifest;
  Vocabulary vocab;

  std::vector<Example> load(bool standard_side, const char* split) const {
    const auto& utts = standard_side ? standard : dialect;
    return load_examples(standard_side ? std_manifest : dialect_manifest, filter_split(utts, split), vocab);
  }
};

CorpusData load_corpus(const fs::path& dir) {
  CorpusData d;
  d.std_manifest = dir / kStandardManifest;
  d.dialect_manifest = dir / kDialectManifest;
  require_file(d.std_manifest, "standard manifest");
  require_file(d.dialect_manifest, "dialect manifest");
  d.standard = load_manifest(d.std_manifest);
  d.dialect = load_manifest(d.dialect_manifest);
  d.vocab = Vocabulary::build(std::vector<std::vector<Utterance>>{d.standard, d.dialect});
  return d;
}

ModelConfig model_for(const Config& cfg, const Vocabulary& vocab) {
  ModelConfig m = cfg.model;
  m.vocab_size = vocab.size();
  m.validate();
  return m;
}

// Architecture and vocabulary come from the checkpoint.
Checkpoint load_init(const fs::path& path, const Vocabulary& vocab) {
  require_file(path, "checkpoint");
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.vocab == vocab)) {
    throw Error(ErrorCode::ShapeMismatchOnLoad, path.string() + " was trained on a different vocabulary");
  }
  return ck;
}

fs::path log_path_for(const fs::path& ckpt, const std::string& log) {
  return log.empty() ? fs::path(ckpt.string() + ".log.csv") : fs::path(log);
}

void print_final(const RunLog& log) {
  const double train = log.steps.empty() ? 0.0 : log.steps.back().loss;
  std::cout << "final train loss " << fmt("%.4f", train);
  if (!log.dev_loss.empty()) std::cout << ", dev loss " << fmt("%.4f", log.dev_loss.back());
  std::cout << " (" << log.steps.size() << " steps)\n";
}

// ---------------------------------------------------------------------------

int cmd_synth_corpus(const Common& c, const std::string& out) {
  const Config cfg = effective_config(c);
  if (maybe_dump(c, cfg)) return kOk;
  cfg.corpus.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out + ": " + ec.message());
  const ToyCorpus corpus = gen_toy_corpus(cfg.corpus, out);
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const auto* list : {&corpus.standard, &corpus.dialect}) {
    for (const Utterance& u : *list) ++counts[{u.dialect, u.split}];
  }
  std::map<std::string, bool> dialects;
  for (const auto& [key, n] : counts) dialects[key.first] = true;
  for (const auto& [dialect, unused] : dialects) {
    std::cout << dialect << ": train " << counts[{dialect, "train"}] << ", dev " << counts[{dialect, "dev"}]
              << ", test " << counts[{dialect, "test"}] << "\n";
  }
  return kOk;
}

int cmd_pretrain(const Common& c, const std::string& corpus_dir, const std::string& out, const std::string& log,
                 std::optional<std::size_t> steps) {
  Config cfg = effective_config(c);
  if (steps) cfg.pretrain.steps = *steps;
  if (maybe_dump(c, cfg)) return kOk;
  cfg.validate();
  const CorpusData data = load_corpus(corpus_dir);
  const ModelConfig model = model_for(cfg, data.vocab);
  std::vector<Waveform> audio;
  for (bool standard_side : {true, false}) {
    for (Example& ex : data.load(standard_side, "train")) audio.push_back(std::move(ex.wave));
  }
  const std::vector<Waveform> bank = build_noise_bank(cfg.stage2.noise_specs);
  const PretrainResult r = run_pretrain(model, cfg.pretrain, audio, bank);
  save_checkpoint(r.params, model, data.vocab, out);
  write_pretrain_log(r.log, log_path_for(out, log));
  const std::size_t w = std::max<std::size_t>(1, r.log.size() / 10);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < w; ++i) {
    first += r.log[i].loss / static_cast<double>(w);
    last += r.log[r.log.size() - w + i].loss / static_cast<double>(w);
  }
  std::cout << "pre-training loss " << fmt("%.4f", first) << " -> " << fmt("%.4f", last) << " over " << r.log.size()
            << " steps; " << r.mix_calls << " noisy mixes\n";
  return kOk;
}

struct TrainFlags {
  int stage = 0;
  std::string corpus;
  std::string init;
  std::string out;
  std::string log;
  std::optional<std::size_t> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  bool clean = false;
};

void apply_train_flags(TrainConfig& t, const TrainFlags& f) {
  if (f.epochs) t.epochs = *f.epochs;
  if (f.lr) t.peak_lr = *f.lr;
  if (f.batch_size) t.batch_size = *f.batch_size;
}

int cmd_train(const Common& c, const TrainFlags& f) {
  Config cfg = effective_config(c);
  apply_train_flags(f.stage == 1 ? cfg.stage1 : cfg.stage2, f);
  if (f.clean) cfg.stage2.noise_augmentation = false;
  if (maybe_dump(c, cfg)) return kOk;
  cfg.validate();
  if (f.stage == 2 && f.init.empty()) {
    throw InputError("stage 2 needs --init pointing at the stage-1 checkpoint");
  }
  const CorpusData data = load_corpus(f.corpus);
  StageResult result;
  ModelConfig model;
  if (f.stage == 1) {
    ModelParams<float> init;
    if (!f.init.empty()) {
      Checkpoint ck = load_init(f.init, data.vocab);
      model = ck.config;
      init = std::move(ck.params);
    } else {
      model = model_for(cfg, data.vocab);
      Rng rng(derive_seed(cfg.stage1.seed, "init"));
      init = init_params<float>(model, rng);
    }
    result = run_stage1(model, cfg.stage1, data.load(true, "train"), data.load(true, "dev"), std::move(init));
  } else {
    Checkpoint ck = load_init(f.init, data.vocab);
    model = ck.config;
    result = run_stage2(model, cfg.stage2, data.load(false, "train"), data.load(false, "dev"),
                        build_noise_bank(cfg.stage2.noise_specs), std::move(ck.params));
  }
  save_stage(result, model, data.vocab, f.out);
  write_run_log(result.log, log_path_for(f.out, f.log));
  print_final(result.log);
  return kOk;
}

int cmd_ablate(const Common& c, const std::string& variant_name_str, const TrainFlags& f, const std::string& out_dir) {
  Config cfg = effective_config(c);
  if (maybe_dump(c, cfg)) return kOk;
  cfg.validate();
  const AblationVariant variant = parse_variant(variant_name_str);
  const CorpusData data = load_corpus(f.corpus);
  AblationInputs in;
  if (!f.init.empty()) {
    Checkpoint ck = load_init(f.init, data.vocab);
    in.model_cfg = ck.config;
    in.pretrained = std::move(ck.params);
  } else {
    in.model_cfg = model_for(cfg, data.vocab);
    Rng rng(derive_seed(cfg.stage1.seed, "init"));
    in.pretrained = init_params<float>(in.model_cfg, rng);
  }
  in.stage1 = cfg.stage1;
  in.stage2 = cfg.stage2;
  in.standard_train = data.load(true, "train");
  in.standard_dev = data.load(true, "dev");
  in.dialect_train = data.load(false, "train");
  in.dialect_dev = data.load(false, "dev");
  in.noise_bank = build_noise_bank(cfg.stage2.noise_specs);
  AblationRun run = run_ablation(variant, in);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + out_dir + ": " + ec.message());
  const std::string name(tda::variant_name(variant));
  const fs::path dir(out_dir);
  if (!run.stage1.log.steps.empty()) {
    save_stage(run.stage1, in.model_cfg, data.vocab, dir / (name + ".stage1.ckpt"));
    write_run_log(run.stage1.log, dir / (name + ".stage1.log.csv"));
  }
  save_stage(run.final, in.model_cfg, data.vocab, dir / (name + ".ckpt"));
  write_run_log(run.final.log, dir / (name + ".stage2.log.csv"));
  std::cout << name << ": ";
  print_final(run.final.log);
  return kOk;
}

int cmd_decode(const std::string& ckpt_path, const std::string& audio, const std::string& manifest,
               const std::string& split, const std::string& out) {
  require_file(ckpt_path, "checkpoint");
  if (audio.empty() == manifest.empty()) throw InputError("give exactly one of --audio or --manifest");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  std::ostringstream lines;
  auto decode_one = [&](const std::string& id, const fs::path& wav) {
    require_file(wav, "audio file");
    Waveform w;
    try {
      w = read_wav(wav);
    } catch (const Error& e) {
      throw InputError(e.what());
    }
    lines << id << '\t' << transcribe(w.samples, ck.params, ck.config, ck.vocab) << '\n';
  };
  if (!audio.empty()) {
    decode_one(fs::path(audio).stem().string(), audio);
  } else {
    require_file(manifest, "manifest");
    const auto utts = load_manifest(manifest);
    for (const Utterance& u : split.empty() ? utts : filter_split(utts, split)) {
      decode_one(u.id, fs::path(manifest).parent_path() / u.audio);
    }
  }
  if (out.empty()) {
    std::cout << lines.str();
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f || !(f << lines.str())) throw Error(ErrorCode::IoError, "cannot write " + out);
  }
  return kOk;
}

void print_matrix(const EvalReport& report, const std::vector<Condition>& conds) {
  std::printf("WER / CER (%%)\n%-8s", "dialect");
  for (const Condition& c : conds) std::printf(" %13s", (c.label() + (c.snr_db ? "dB" : "")).c_str());
  std::printf("\n");
  std::map<std::string, std::vector<const ReportRow*>> by_dialect;
  for (const ReportRow& r : report.rows) by_dialect[r.dialect].push_back(&r);
  for (const auto& [dialect, rows] : by_dialect) {
    std::printf("%-8s", dialect.c_str());
    for (const ReportRow* r : rows) std::printf(" %6.1f/%6.1f", 100.0 * r->wer, 100.0 * r->cer);
    std::printf("\n");
  }
  std::fflush(stdout);
}

int cmd_eval(const Common& c, const std::string& ckpt_path, const std::string& manifest,
             const std::string& conditions, const std::string& out, const std::string& model_id) {
  Config cfg = effective_config(c);
  if (!conditions.empty()) {
    cfg.eval.conditions.clear();
    std::stringstream ss(conditions);
    for (std::string item; std::getline(ss, item, ',');) cfg.eval.conditions.push_back(Condition::parse(item));
  }
  if (maybe_dump(c, cfg)) return kOk;
  cfg.validate();
  require_file(ckpt_path, "checkpoint");
  require_file(manifest, "manifest");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const auto test_utts = filter_split(load_manifest(manifest), "test");
  if (test_utts.empty()) throw Error(ErrorCode::EmptyCorpus, manifest + " has no test split");
  const auto test = load_examples(manifest, test_utts, ck.vocab);
  const bool noisy = std::any_of(cfg.eval.conditions.begin(), cfg.eval.conditions.end(),
                                 [](const Condition& k) { return k.snr_db.has_value(); });
  const std::vector<Waveform> bank = noisy ? build_noise_bank(cfg.eval.noise_specs) : std::vector<Waveform>{};
  const std::string id = model_id.empty() ? fs::path(ckpt_path).stem().string() : model_id;
  const EvalReport report = snr_sweep_eval(id, ck.params, ck.config, ck.vocab, test, cfg.eval.conditions, bank,
                                           cfg.eval.seed);
  emit_report(report, out, ReportFormat::Csv);
  fs::path json_path(out);
  json_path.replace_extension(".json");
  emit_report(report, json_path, ReportFormat::Json);
  print_matrix(report, cfg.eval.conditions);
  return kOk;
}

int cmd_mix(const std::string& speech_path, const std::string& kind, double snr, std::uint64_t seed,
            double noise_duration, const std::string& out) {
  require_file(speech_path, "speech file");
  Waveform speech;
  try {
    speech = read_wav(speech_path);
  } catch (const Error& e) {
    throw InputError(e.what());
  }
  const Waveform noise = synth_noise({parse_noise_kind(kind), seed, noise_duration}, speech.sample_rate);
  Rng rng(derive_seed(seed, "mix"));
  const MixResult mix = mix_at_snr_detailed(speech, noise, snr, rng);
  write_wav(out, mix.mixed);
  std::cout << "measured SNR " << fmt("%.4f", snr_db(speech, mix.scaled_noise)) << " dB\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-robust dialect ASR toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tda 0.1.0");

  Common common;

  auto* synth = app.add_subcommand("synth-corpus", "Synthesize the toy standard/dialect corpus");
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  add_common(synth, common);

  auto* pre = app.add_subcommand("pretrain", "Masked denoising pre-training on unlabeled train audio");
  std::string pre_corpus, pre_out, pre_log;
  std::optional<std::size_t> pre_steps;
  pre->add_option("--corpus", pre_corpus, "Corpus directory")->required();
  pre->add_option("--out", pre_out, "Output checkpoint")->required();
  pre->add_option("--log", pre_log, "Loss CSV (default <out>.log.csv)");
  pre->add_option("--steps", pre_steps, "Override pretrain.steps");
  add_common(pre, common);

  TrainFlags tf;
  auto* train = app.add_subcommand("train", "Stage-1 or stage-2 CTC fine-tuning");
  train->add_option("--stage", tf.stage, "1 (clean standard) or 2 (noisy dialect)")->required()->check(CLI::IsMember({1, 2}));
  train->add_option("--corpus", tf.corpus, "Corpus directory")->required();
  train->add_option("--init", tf.init, "Initial checkpoint (stage 1: pre-trained body; stage 2: stage-1 output)");
  train->add_option("--out", tf.out, "Output checkpoint")->required();
  train->add_option("--log", tf.log, "Run-log CSV (default <out>.log.csv)");
  train->add_option("--epochs", tf.epochs, "Override the stage's epochs");
  train->add_option("--lr", tf.lr, "Override the stage's peak learning rate");
  train->add_option("--batch-size", tf.batch_size, "Override the stage's batch size");
  train->add_flag("--clean", tf.clean, "Stage 2 without noise augmentation");
  add_common(train, common);

  TrainFlags af;
  std::string variant = "full", ablate_out;
  auto* ablate = app.add_subcommand("ablate", "Run one ablation variant end to end");
  ablate->add_option("--variant", variant, "full | no_stage1 | no_noise_aug")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "no_stage1", "no_noise_aug"}));
  ablate->add_option("--corpus", af.corpus, "Corpus directory")->required();
  ablate->add_option("--init", af.init, "Pre-trained checkpoint (default: random init)");
  ablate->add_option("--out-dir", ablate_out, "Directory for checkpoints and logs")->required();
  add_common(ablate, common);

  auto* decode = app.add_subcommand("decode", "Greedy CTC transcription");
  std::string dec_ckpt, dec_audio, dec_manifest, dec_split, dec_out;
  decode->add_option("--ckpt", dec_ckpt, "Checkpoint")->required();
  decode->add_option("--audio", dec_audio, "One WAV file");
  decode->add_option("--manifest", dec_manifest, "JSONL manifest");
  decode->add_option("--split", dec_split, "Only this split of the manifest");
  decode->add_option("--out", dec_out, "Write id<TAB>hypothesis lines here instead of stdout");

  auto* eval = app.add_subcommand("eval", "WER/CER under clean and noisy conditions");
  std::string ev_ckpt, ev_manifest, ev_conditions, ev_out, ev_model;
  eval->add_option("--ckpt", ev_ckpt, "Checkpoint")->required();
  eval->add_option("--manifest", ev_manifest, "Manifest whose test split is scored")->required();
  eval->add_option("--conditions", ev_conditions, "Comma-separated, e.g. clean,20,10,5,0 (default from config)");
  eval->add_option("--out", ev_out, "Report CSV; JSON is written next to it")->required();
  eval->add_option("--model-id", ev_model, "model_id column (default: checkpoint stem)");
  add_common(eval, common);

  auto* mix = app.add_subcommand("mix", "Mix synthesized noise into speech at a target SNR");
  std::string mix_speech, mix_kind = "white", mix_out;
  double mix_snr = 0.0, mix_duration = 4.0;
  std::uint64_t mix_seed = 1;
  mix->add_option("--speech", mix_speech, "Speech WAV")->required();
  mix->add_option("--noise-kind", mix_kind, "white | babble_surrogate | hum | factory_surrogate")->capture_default_str();
  mix->add_option("--snr", mix_snr, "Target SNR in dB")->required();
  mix->add_option("--seed", mix_seed, "Noise and offset seed")->capture_default_str();
  mix->add_option("--noise-duration", mix_duration, "Seconds of noise to synthesize")->capture_default_str();
  mix->add_option("--out", mix_out, "Output WAV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth_corpus(common, synth_out);
    if (*pre) return cmd_pretrain(common, pre_corpus, pre_out, pre_log, pre_steps);
    if (*train) return cmd_train(common, tf);
    if (*ablate) return cmd_ablate(common, variant, af, ablate_out);
    if (*decode) return cmd_decode(dec_ckpt, dec_audio, dec_manifest, dec_split, dec_out);
    if (*eval) return cmd_eval(common, ev_ckpt, ev_manifest, ev_conditions, ev_out, ev_model);
    if (*mix) return cmd_mix(mix_speech, mix_kind, mix_snr, mix_seed, mix_duration, mix_out);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
