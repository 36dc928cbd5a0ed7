// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "process.hpp"

namespace fs = std::filesystem;
using chimera::testing::read_file;
using chimera::testing::shell_quote;

namespace {

struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "chimera_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string path(const std::string& name) const { return shell_quote((root / name).string()); }
  chimera::testing::CommandResult run(const std::string& args) const {
    return chimera::testing::run_cli(args, root / "last_output.txt");
  }
};

const char* kSmallTrain = " --epochs 2 --hidden 8 --embed_dim 8 --batch_size 16";

}  // namespace

TEST_CASE("usage errors") {
  Workspace w;
  CHECK(w.run("").exit_code == 2);
  CHECK(w.run("frobnicate").exit_code == 2);
  CHECK(w.run("gen --no-such-flag -o " + w.path("g")).exit_code == 2);
  CHECK(w.run("parse").exit_code == 2);
  const auto v = w.run("--version");
  CHECK(v.exit_code == 0);
  CHECK(v.output.find("0.1.0") != std::string::npos);
  CHECK(w.run("--help").exit_code == 0);
}

TEST_CASE("gen, parse, train, eval and diagnose") {
  Workspace w;
  auto r = w.run("gen --seed 3 --lines 3000 -o " + w.path("corpus"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(w.root / "corpus" / "corpus.log"));
  CHECK(fs::exists(w.root / "corpus" / "labels.txt"));
  CHECK(fs::exists(w.root / "corpus" / "manifest.json"));
  const auto gen_manifest = nlohmann::json::parse(read_file(w.root / "corpus" / "run_manifest.json"));
  CHECK(gen_manifest.at("command") == "gen");
  CHECK(gen_manifest.at("seed") == 3);

  r = w.run("parse --log " + w.path("corpus/corpus.log") + " --labels " + w.path("corpus/labels.txt") + " -o " +
            w.path("data"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("150 windows") != std::string::npos);
  const auto parse_manifest = nlohmann::json::parse(read_file(w.root / "data" / "run_manifest.json"));
  CHECK(parse_manifest.at("inputs").size() == 2);
  CHECK(parse_manifest.at("inputs").at(0).at("fnv1a64").get<std::string>().size() == 16);

  r = w.run("train --data " + w.path("data") + " --run " + w.path("run") + kSmallTrain);
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(fs::exists(w.root / "run" / "best.ckpt"));
  CHECK(fs::exists(w.root / "run" / "epoch_1.ckpt"));
  std::ifstream log(w.root / "run" / "train_log.jsonl");
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"epoch", "detector", "localizer", "disentangle", "align", "total", "val_f1"}) {
      CHECK(j.contains(key));
    }
    ++epochs;
  }
  CHECK(epochs == 2);
  const auto train_manifest = nlohmann::json::parse(read_file(w.root / "run" / "run_manifest.json"));
  CHECK(train_manifest.at("config").at("epochs") == "2");

  r = w.run("eval --checkpoint " + w.path("run/best.ckpt") + " --data " + w.path("data") + " --out " +
            w.path("report") + " --bias-study --quadrant-study --quadrant-k 3");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("Diagnostic bias") != std::string::npos);
  const auto report = nlohmann::json::parse(read_file(w.root / "report" / "report.json"));
  CHECK(report.at("quadrant_study").at("k") == 3);
  CHECK(report.at("test_sequences") == 45);
  CHECK(read_file(w.root / "report" / "quadrants.csv").rfind("method,DLF,DF,LF,MF,total", 0) == 0);

  r = w.run("eval --checkpoint " + w.path("run/best.ckpt") + " --data " + w.path("data") + " --out " +
            w.path("ablate") + " --ablation cda" + " --ablation ilrl");
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(r.output.find("w/o CDA") != std::string::npos);
  CHECK(r.output.find("w/o ILRL") != std::string::npos);
  std::ifstream cda(w.root / "ablate" / "ablation_cda" / "train_log.jsonl");
  while (std::getline(cda, line)) CHECK(nlohmann::json::parse(line).at("align") == 0.0);
  CHECK(w.run("eval --checkpoint " + w.path("run/best.ckpt") + " --data " + w.path("data") + " --ablation nope")
            .exit_code == 2);

  // 70 lines: three full windows and a 10-line tail.
  {
    std::ifstream in(w.root / "corpus" / "corpus.log");
    std::ofstream out(w.root / "short.log");
    for (int i = 0; i < 70 && std::getline(in, line); ++i) out << line << '\n';
  }
  r = w.run("diagnose --checkpoint " + w.path("run/best.ckpt") + " --log " + w.path("short.log"));
  CHECK(r.exit_code == 65);
  CHECK(r.output.find("--partial pad") != std::string::npos);
  r = w.run("diagnose --checkpoint " + w.path("run/best.ckpt") + " --log " + w.path("short.log") +
            " --partial pad --all --top-k 2 --json " + w.path("verdicts.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const auto verdicts = nlohmann::json::parse(read_file(w.root / "verdicts.json"));
  REQUIRE(verdicts.size() == 4);
  CHECK(verdicts.at(3).at("padded") == true);
  CHECK(verdicts.at(3).at("first_line") == 61);
  CHECK(verdicts.at(3).at("last_line") == 70);
  CHECK(verdicts.at(0).at("top").size() == 2);
  for (const auto& v : verdicts) {
    for (const auto& t : v.at("top")) {
      CHECK(t.at("line") >= v.at("first_line"));
      CHECK(t.at("line") <= v.at("last_line"));
    }
  }
}

TEST_CASE("input and configuration errors") {
  Workspace w;
  CHECK(w.run("parse --log " + w.path("missing.log") + " -o " + w.path("d")).exit_code == 66);
  CHECK(w.run("train --data " + w.path("nowhere") + " --run " + w.path("r")).exit_code == 66);
  CHECK(w.run("diagnose --checkpoint " + w.path("x.ckpt") + " --log " + w.path("y.log")).exit_code == 66);

  REQUIRE(w.run("gen --seed 1 --lines 600 -o " + w.path("c")).exit_code == 0);
  REQUIRE(w.run("parse --log " + w.path("c/corpus.log") + " --labels " + w.path("c/labels.txt") + " -o " +
                w.path("d"))
              .exit_code == 0);
  auto r = w.run("train --data " + w.path("d") + " --run " + w.path("r") + " --batch_size 0");
  CHECK(r.exit_code == 78);
  CHECK(r.output.find("batch_size") != std::string::npos);
  r = w.run("train --data " + w.path("d") + " --run " + w.path("r") + " --window 10");
  CHECK(r.exit_code == 78);
  CHECK(r.output.find("window") != std::string::npos);
  CHECK(w.run("train --data " + w.path("d") + " --run " + w.path("r") + " --lambda2 -1").exit_code == 78);
  CHECK(w.run("train --data " + w.path("d") + " --run " + w.path("r") + " --learning_rate abc").exit_code == 78);
  {
    std::ofstream cfg(w.root / "bad.conf");
    cfg << "hidden = 8\nmystery = 1\n";
  }
  r = w.run("train --data " + w.path("d") + " --run " + w.path("r") + " --config " + w.path("bad.conf"));
  CHECK(r.exit_code == 78);
  CHECK(r.output.find("mystery") != std::string::npos);
  CHECK(w.run("parse --log " + w.path("c/corpus.log") + " -o " + w.path("e") + " --similarity 1.5").exit_code == 78);

  {
    std::ofstream bad(w.root / "bad_labels.txt");
    bad << "seven\n";
  }
  CHECK(w.run("parse --log " + w.path("c/corpus.log") + " --labels " + w.path("bad_labels.txt") + " -o " +
              w.path("e"))
            .exit_code == 65);
  fs::create_directories(w.root / "d2");
  {
    std::ofstream bad(w.root / "d2" / "sequences.jsonl");
    bad << "{broken\n";
  }
  CHECK(w.run("train --data " + w.path("d2") + " --run " + w.path("r2")).exit_code == 65);
}
