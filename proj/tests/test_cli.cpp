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

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tda/audio.hpp"
#include "tda/eval.hpp"
#include "tda/model.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "tda_test_cli";

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const fs::path log = kWork / "stdout.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" TDA_CLI_PATH "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream f(log);
  std::stringstream ss;
  ss << f.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_config() {
  std::ofstream(kWork / "tiny.json") << R"({
  "model": {"conv_layers": [{"channels": 8, "kernel": 10, "stride": 5}, {"channels": 8, "kernel": 8, "stride": 4},
                            {"channels": 8, "kernel": 4, "stride": 4}],
            "norm_groups": 4, "d_model": 16, "d_ff": 32, "n_heads": 2, "n_layers": 1, "pretrain_clusters": 4},
  "corpus": {"standard_counts": {"train": 6, "dev": 2, "test": 2}, "dialect_counts": {"train": 4, "dev": 2, "test": 2}},
  "pretrain": {"steps": 4, "batch_size": 2},
  "stage1": {"epochs": 1, "batch_size": 4, "peak_lr": 1e-3},
  "stage2": {"epochs": 1, "batch_size": 4, "peak_lr": 5e-4,
             "noise_specs": [{"kind": "white", "seed": 1, "duration": 0.5}]},
  "eval": {"snr_conditions": ["clean", "5"], "noise_specs": [{"kind": "hum", "seed": 7, "duration": 0.5}]}
})";
}

std::string cfg() { return "--config \"" + (kWork / "tiny.json").string() + "\""; }
std::string at(const std::string& name) { return "\"" + (kWork / name).string() + "\""; }

}  // namespace

TEST_CASE("cli pipeline") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  write_config();

  Run r = run("synth-corpus " + cfg() + " --out " + at("corpus"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("std: train 6, dev 2, test 2") != std::string::npos);
  CHECK(fs::exists(kWork / "corpus" / "std.jsonl"));
  CHECK(fs::exists(kWork / "corpus" / "dialect.jsonl"));

  r = run("pretrain " + cfg() + " --corpus " + at("corpus") + " --out " + at("pre.ckpt"));
  REQUIRE(r.code == 0);
  CHECK(read_text(kWork / "pre.ckpt.log.csv").rfind("step,loss,p_noisy_applied,snr\n", 0) == 0);

  r = run("train --stage 1 " + cfg() + " --corpus " + at("corpus") + " --init " + at("pre.ckpt") + " --out " +
          at("s1.ckpt"));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("final train loss") != std::string::npos);

  SUBCASE("stage 2 without init names the missing checkpoint") {
    r = run("train --stage 2 " + cfg() + " --corpus " + at("corpus") + " --out " + at("s2.ckpt"));
    CHECK(r.code == 2);
    CHECK(r.out.find("--init") != std::string::npos);
    CHECK_FALSE(fs::exists(kWork / "s2.ckpt"));
  }

  SUBCASE("stage 2 with a missing init file") {
    r = run("train --stage 2 " + cfg() + " --corpus " + at("corpus") + " --init " + at("absent.ckpt") + " --out " +
            at("s2.ckpt"));
    CHECK(r.code == 2);
    CHECK(r.out.find("absent.ckpt") != std::string::npos);
  }

  SUBCASE("stage 2, decode, eval") {
    r = run("train --stage 2 " + cfg() + " --corpus " + at("corpus") + " --init " + at("s1.ckpt") + " --out " +
            at("s2.ckpt") + " --log " + at("s2.csv"));
    REQUIRE(r.code == 0);
    const std::string log = read_text(kWork / "s2.csv");
    CHECK(log.rfind("step,epoch,lr,loss,grad_norm,snr\n", 0) == 0);
    const tda::Checkpoint ck = tda::load_checkpoint(kWork / "s2.ckpt");
    CHECK(ck.config.d_model == 16);

    r = run("decode --ckpt " + at("s2.ckpt") + " --manifest " + at("corpus/dialect.jsonl") + " --split test");
    REQUIRE(r.code == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
    CHECK(r.out.rfind("A-test-0000\t", 0) == 0);

    r = run("eval " + cfg() + " --ckpt " + at("s2.ckpt") + " --manifest " + at("corpus/dialect.jsonl") +
            " --out " + at("report.csv") + " --model-id m");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("WER / CER") != std::string::npos);
    const tda::EvalReport csv = tda::parse_report(read_text(kWork / "report.csv"), tda::ReportFormat::Csv);
    const tda::EvalReport json = tda::parse_report(read_text(kWork / "report.json"), tda::ReportFormat::Json);
    CHECK(csv.rows.size() == 6);  // A, B, all x clean, 5 dB
    CHECK(json.rows.size() == csv.rows.size());
    CHECK(csv.find("m", "all", "5").n_utts == 4);

    // Same inputs, same report bytes.
    const std::string first = read_text(kWork / "report.csv");
    r = run("eval " + cfg() + " --ckpt " + at("s2.ckpt") + " --manifest " + at("corpus/dialect.jsonl") +
            " --out " + at("report.csv") + " --model-id m");
    REQUIRE(r.code == 0);
    CHECK(read_text(kWork / "report.csv") == first);
  }

  SUBCASE("ablate") {
    r = run("ablate --variant no_noise_aug " + cfg() + " --corpus " + at("corpus") + " --init " + at("pre.ckpt") +
            " --out-dir " + at("abl"));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(kWork / "abl" / "no_noise_aug.ckpt"));
    CHECK(fs::exists(kWork / "abl" / "no_noise_aug.stage1.ckpt"));
    const std::string log = read_text(kWork / "abl" / "no_noise_aug.stage2.log.csv");
    std::istringstream lines(log);
    std::string line;
    std::getline(lines, line);
    int records = 0;
    while (std::getline(lines, line)) {
      CHECK(line.substr(line.rfind(',') + 1) == "clean");
      ++records;
    }
    CHECK(records == 2);
  }
}

TEST_CASE("cli mix reports the measured snr") {
  fs::create_directories(kWork);
  const fs::path speech = kWork / "corpus" / "wav" / "A-dev-0000.wav";
  if (!fs::exists(speech)) {
    write_config();
    REQUIRE(run("synth-corpus " + cfg() + " --out " + at("corpus")).code == 0);
  }
  const Run r = run("mix --speech \"" + speech.string() + "\" --noise-kind babble_surrogate --snr 10 --seed 3 --out " +
                    at("mix.wav"));
  REQUIRE(r.code == 0);
  CHECK(r.out == "measured SNR 10.0000 dB\n");
  CHECK(fs::exists(kWork / "mix.wav"));
}

TEST_CASE("cli exit codes and seeds") {
  fs::create_directories(kWork);
  write_config();
  CHECK(run("").code == 1);
  CHECK(run("train --stage 3 --corpus x --out y").code == 1);
  CHECK(run("mix --speech \"" + (kWork / "nope.wav").string() + "\" --snr 0 --out " + at("m.wav")).code == 2);
  CHECK(run("pretrain --corpus " + at("no_corpus") + " --out " + at("p.ckpt")).code == 2);
  CHECK(run("eval --conditions loud --ckpt a --manifest b --out c").code == 2);

  std::ofstream(kWork / "bad.json") << R"({"stage1": {"epoch": 3}})";
  CHECK(run("synth-corpus --config " + at("bad.json") + " --out " + at("c2")).code == 2);

  const auto seeds = [](const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    return std::vector<std::uint64_t>{j["pretrain"]["seed"], j["stage1"]["seed"], j["stage2"]["seed"],
                                      j["eval"]["seed"]};
  };
  Run r = run("synth-corpus --out x --dump-config", "TDA_SEED=7");
  REQUIRE(r.code == 0);
  CHECK(seeds(r.out) == std::vector<std::uint64_t>{7, 7, 7, 7});
  r = run("synth-corpus --out x --dump-config --seed 11", "TDA_SEED=7");
  REQUIRE(r.code == 0);
  CHECK(seeds(r.out) == std::vector<std::uint64_t>{11, 11, 11, 11});
  r = run("synth-corpus --out x --dump-config", "TDA_SEED=seven");
  CHECK(r.code == 2);
}

TEST_CASE("cli artifacts are reproducible") {
  fs::create_directories(kWork);
  write_config();
  REQUIRE(run("synth-corpus " + cfg() + " --out " + at("r1")).code == 0);
  REQUIRE(run("synth-corpus " + cfg() + " --out " + at("r2")).code == 0);
  CHECK(read_text(kWork / "r1" / "std.jsonl") == read_text(kWork / "r2" / "std.jsonl"));
  CHECK(read_text(kWork / "r1" / "dialect.jsonl") == read_text(kWork / "r2" / "dialect.jsonl"));

  const std::string speech = at("r1/wav/std-train-0000.wav");
  REQUIRE(run("mix --speech " + speech + " --noise-kind factory_surrogate --snr 5 --seed 4 --out " + at("m1.wav")).code == 0);
  REQUIRE(run("mix --speech " + speech + " --noise-kind factory_surrogate --snr 5 --seed 4 --out " + at("m2.wav")).code == 0);
  CHECK(read_text(kWork / "m1.wav") == read_text(kWork / "m2.wav"));
  CHECK(read_text(kWork / "m1.wav").size() == read_text(kWork / "r1" / "wav" / "std-train-0000.wav").size());

  // A dumped config reproduces the run it was dumped from.
  Run dump = run("synth-corpus " + cfg() + " --seed 5 --out x --dump-config");
  REQUIRE(dump.code == 0);
  std::ofstream(kWork / "dumped.json") << dump.out;
  REQUIRE(run("synth-corpus " + cfg() + " --seed 5 --out " + at("r3")).code == 0);
  REQUIRE(run("synth-corpus --config " + at("dumped.json") + " --out " + at("r4")).code == 0);
  CHECK(read_text(kWork / "r3" / "std.jsonl") == read_text(kWork / "r4" / "std.jsonl"));
  CHECK(read_text(kWork / "r3" / "std.jsonl") != read_text(kWork / "r1" / "std.jsonl"));
  CHECK(run("synth-corpus --config " + at("dumped.json") + " --out x --dump-config").out == dump.out);
}

TEST_CASE("cli decode and eval edge cases") {
  fs::create_directories(kWork);
  write_config();
  if (!fs::exists(kWork / "s1.ckpt")) {
    REQUIRE(run("synth-corpus " + cfg() + " --out " + at("corpus")).code == 0);
    REQUIRE(run("train --stage 1 " + cfg() + " --corpus " + at("corpus") + " --out " + at("s1.ckpt")).code == 0);
  }
  tda::write_wav(kWork / "silence.wav", {std::vector<float>(8000, 0.0f), tda::kDefaultSampleRate});
  Run r = run("decode --ckpt " + at("s1.ckpt") + " --audio " + at("silence.wav"));
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("silence\t", 0) == 0);

  const std::string decode = "decode --ckpt " + at("s1.ckpt") + " --manifest " + at("corpus/std.jsonl");
  const Run first = run(decode), second = run(decode);
  CHECK(first.code == 0);
  CHECK(first.out == second.out);

  r = run("eval " + cfg() + " --ckpt " + at("s1.ckpt") + " --manifest " + at("corpus/std.jsonl") +
          " --conditions clean --out " + at("clean.csv"));
  REQUIRE(r.code == 0);
  const tda::EvalReport rep = tda::parse_report(read_text(kWork / "clean.csv"), tda::ReportFormat::Csv);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].condition == "clean");

  // Only train/dev entries: no test split to score.
  std::ifstream in(kWork / "corpus" / "std.jsonl");
  std::ofstream out(kWork / "corpus" / "notest.jsonl");
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"test\"") == std::string::npos) out << line << "\n";
  }
  out.close();
  CHECK(run("eval " + cfg() + " --ckpt " + at("s1.ckpt") + " --manifest " + at("corpus/notest.jsonl") +
            " --out " + at("none.csv")).code == 2);

  CHECK(run("mix --speech " + at("silence.wav") + " --snr 5 --out " + at("m.wav")).code == 2);
  std::ofstream(kWork / "blocker") << "x";
  CHECK(run("synth-corpus " + cfg() + " --out " + at("blocker/sub")).code == 3);
}
