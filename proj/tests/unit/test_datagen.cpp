// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>

#include "chimera/datagen.hpp"
#include "chimera/error.hpp"
#include "chimera/pipeline.hpp"
#include "test_support.hpp"

using namespace chimera;
using namespace chimera::datagen;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("chimera_datagen_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

// Every generated template must map to exactly one parsed template and back.
void check_template_recovery(const Corpus& corpus, std::size_t expected) {
  const ParsedLog parsed = parse_records(testing::corpus_records(corpus), {}, 20, 20);
  CHECK(parsed.parser.size() == expected);
  std::map<std::size_t, std::set<int>> forward;
  std::map<int, std::set<std::size_t>> backward;
  for (std::size_t i = 0; i < corpus.lines.size(); ++i) {
    forward[corpus.line_templates[i]].insert(parsed.template_ids[i]);
    backward[parsed.template_ids[i]].insert(corpus.line_templates[i]);
  }
  for (const auto& [idx, ids] : forward) CHECK(ids.size() == 1);
  for (const auto& [id, idxs] : backward) CHECK(idxs.size() == 1);
}

}  // namespace

TEST_CASE("zero injection rate labels nothing") {
  CorpusSpec spec = default_spec(3);
  spec.num_lines = 5000;
  for (FaultSpec& f : spec.faults) f.rate = 0.0;
  const Corpus c = generate_corpus(spec);
  CHECK(c.lines.size() == 5000);
  CHECK(c.labeled_lines.empty());
  CHECK(c.faults.empty());
}

TEST_CASE("same seed gives an identical corpus") {
  CorpusSpec spec = default_spec(21);
  spec.num_lines = 3000;
  const Corpus a = generate_corpus(spec);
  const Corpus b = generate_corpus(spec);
  CHECK(a.lines == b.lines);
  CHECK(a.labeled_lines == b.labeled_lines);
  spec.seed = 22;
  CHECK_FALSE(generate_corpus(spec).lines == a.lines);
}

TEST_CASE("default corpus: rate, manifest agreement and template recovery") {
  const CorpusSpec spec = default_spec(7);
  const Corpus c = generate_corpus(spec);
  REQUIRE(c.lines.size() == 40000);
  const double fraction = static_cast<double>(c.labeled_lines.size()) / 40000.0;
  CHECK(fraction >= 0.03);
  CHECK(fraction <= 0.07);

  const auto dir = scratch("default");
  const CorpusFiles files = write_corpus(c, spec, dir);
  std::ifstream in(files.manifest);
  const nlohmann::json m = nlohmann::json::parse(in);
  std::set<std::size_t> from_manifest;
  for (const auto& f : m.at("faults"))
    for (std::size_t line : f.at("trigger_lines").get<std::vector<std::size_t>>()) from_manifest.insert(line);
  std::ifstream lin(files.labels);
  const std::set<std::size_t> from_labels = parser::read_label_lines(lin);
  CHECK(from_manifest == from_labels);
  CHECK(m.at("labeled_lines").get<std::size_t>() == from_labels.size());
  CHECK(m.at("templates").size() == 50);

  // Labeled lines come from trigger templates only.
  for (std::size_t line : c.labeled_lines) CHECK(c.templates[c.line_templates[line - 1]].role == "trigger");
  check_template_recovery(c, 50);

  // Timestamps strictly increase.
  for (std::size_t i = 1; i < c.lines.size(); ++i) CHECK(c.lines[i - 1].substr(0, 23) < c.lines[i].substr(0, 23));
  std::filesystem::remove_all(dir);
}

TEST_CASE("hard mode: context precedes every labeled trigger") {
  CorpusSpec spec = default_spec(7, true);
  spec.num_lines = 20000;
  const Corpus c = generate_corpus(spec);
  CHECK_FALSE(c.labeled_lines.empty());
  std::map<std::size_t, std::size_t> context_of;
  for (const FaultSpec& f : spec.faults)
    for (std::size_t i = 0; i < f.triggers.size(); ++i) context_of[f.triggers[i]] = f.contexts[i];
  for (std::size_t line : c.labeled_lines) {
    REQUIRE(line >= 2);
    const std::size_t trig = c.line_templates[line - 1];
    REQUIRE(context_of.count(trig) == 1);
    CHECK(c.line_templates[line - 2] == context_of[trig]);
  }
  // Trigger templates also occur unlabeled in the background.
  std::size_t unlabeled_trigger_lines = 0;
  const std::set<std::size_t> labeled(c.labeled_lines.begin(), c.labeled_lines.end());
  for (std::size_t i = 0; i < c.lines.size(); ++i) {
    if (context_of.count(c.line_templates[i]) && !labeled.count(i + 1)) ++unlabeled_trigger_lines;
  }
  CHECK(unlabeled_trigger_lines > 0);
  check_template_recovery(c, 50);
}

TEST_CASE("spec validation") {
  auto expect_field = [](const CorpusSpec& s, const std::string& field) {
    try {
      s.validate();
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(e.field() == field);
    }
  };
  CorpusSpec s = default_spec();
  CHECK_NOTHROW(s.validate());
  s.num_templates = 20;
  expect_field(s, "num_templates");
  s = default_spec();
  s.faults[0].rate = 1.0;
  expect_field(s, "rate");
  s = default_spec();
  s.faults[1].symptoms = s.faults[0].symptoms;
  expect_field(s, "symptoms");
  s = default_spec();
  s.faults[0].triggers.clear();
  expect_field(s, "triggers");
  s = default_spec();
  s.faults[0].triggers[0] = 99;
  expect_field(s, "triggers");
  s = default_spec();
  s.slot_kinds.clear();
  expect_field(s, "slot_kinds");
}

TEST_CASE("mean burst length") {
  const BurstShape b;
  // before 0..2, trigger 1..2, after 1..3: 1 + 1.5 + 2
  CHECK(mean_burst_length(b, false) == doctest::Approx(4.5));
}
