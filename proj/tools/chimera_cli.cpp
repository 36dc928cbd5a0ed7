// SPDX-License-Identifier: Apache-2.0
// chimera: gen | parse | train | eval | diagnose
#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "chimera/datagen.hpp"
#include "chimera/error.hpp"
#include "chimera/formats.hpp"
#include "chimera/pipeline.hpp"
#include "chimera/report.hpp"
#include "chimera/trainer.hpp"

#ifndef CHIMERA_VERSION
#define CHIMERA_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// sysexits-style codes
constexpr int kExitUsage = 2;
constexpr int kExitDataErr = 65;
constexpr int kExitNoInput = 66;
constexpr int kExitConfig = 78;

struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw MissingInput(what + " not found: " + p.string());
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw chimera::Error("cannot write " + p.string());
}

// Written before any long-running work and never touched afterwards.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<fs::path> inputs;
  std::vector<fs::path> artifacts;

  void write(const fs::path& dir) const {
    ordered_json j;
    j["tool"] = "chimera";
    j["version"] = CHIMERA_VERSION;
    j["command"] = command;
    j["argv"] = argv;
    j["seed"] = seed;
    ordered_json cfg = ordered_json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    ordered_json in = ordered_json::array();
    for (const fs::path& p : inputs) in.push_back({{"path", p.string()}, {"fnv1a64", chimera::file_hash(p)}});
    j["inputs"] = in;
    ordered_json out = ordered_json::array();
    for (const fs::path& p : artifacts) out.push_back(p.string());
    j["artifacts"] = out;
    write_text(dir / "run_manifest.json", j.dump(2) + "\n");
  }
};

std::vector<std::string> g_argv;

// Data directory layout produced by `parse`.
struct DataDir {
  fs::path sequences, templates, parser;
};

DataDir data_dir(const fs::path& dir) {
  return DataDir{dir / "sequences.jsonl", dir / "templates.jsonl", dir / "parser.json"};
}

chimera::parser::DrainOptions read_parser_options(const fs::path& p) {
  try {
    const ordered_json j = ordered_json::parse(read_text(p));
    return chimera::parser::DrainOptions{j.at("depth").get<int>(), j.at("similarity_threshold").get<double>(),
                                         j.at("max_children").get<std::size_t>()};
  } catch (const ordered_json::exception& e) {
    throw chimera::InputError(p.string() + ": " + e.what());
  }
}

// Config file first, then per-key flags.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  bool disable_ilrl = false, disable_cda = false, hinge_on_logits = false;

  void attach(CLI::App& app) {
    app.add_option("--config", config_file, "flat key = value configuration file");
    for (const auto& [key, value] : chimera::config_entries(chimera::TrainConfig{})) {
      app.add_option("--" + key, values[key], "config override (default " + value + ")");
    }
    app.add_flag("--disable-ilrl", disable_ilrl, "drop the disentanglement term");
    app.add_flag("--disable-cda", disable_cda, "drop the alignment term");
    app.add_flag("--hinge-on-logits", hinge_on_logits, "rank pre-sigmoid localizer scores");
  }

  chimera::TrainConfig resolve() const {
    chimera::TrainConfig c;
    if (!config_file.empty()) {
      require_file(config_file, "config file");
      std::ifstream in(config_file);
      c = chimera::parse_config(in, c);
    }
    for (const auto& [key, value] : values)
      if (!value.empty()) chimera::set_config_field(c, key, value);
    if (disable_ilrl) c.disable_ilrl = true;
    if (disable_cda) c.disable_cda = true;
    if (hinge_on_logits) c.hinge_on_logits = true;
    c.validate();
    return c;
  }
};

// ---- gen ----

struct GenArgs {
  std::uint64_t seed = 7;
  std::size_t lines = 40000;
  std::size_t templates = 50;
  double rate = 0.05;
  double symptom_noise = -1.0;
  bool hard = false;
  std::string out;
};

int run_gen(const GenArgs& a) {
  chimera::datagen::CorpusSpec spec = chimera::datagen::default_spec(a.seed, a.hard);
  spec.num_lines = a.lines;
  spec.num_templates = a.templates;
  for (auto& f : spec.faults) f.rate = a.rate / static_cast<double>(spec.faults.size());
  if (a.symptom_noise >= 0.0) spec.symptom_noise = a.symptom_noise;
  spec.validate();

  const fs::path dir(a.out);
  fs::create_directories(dir);
  RunManifest m{"gen", g_argv, a.seed, {}, {}, {dir / "corpus.log", dir / "labels.txt", dir / "manifest.json"}};
  m.config = {{"lines", std::to_string(a.lines)},
              {"templates", std::to_string(a.templates)},
              {"rate", std::to_string(a.rate)},
              {"symptom_noise", std::to_string(spec.symptom_noise)},
              {"hard", a.hard ? "true" : "false"}};
  m.write(dir);

  const chimera::datagen::Corpus corpus = chimera::datagen::generate_corpus(spec);
  chimera::datagen::write_corpus(corpus, spec, dir);
  std::cout << "wrote " << corpus.lines.size() << " lines, " << corpus.labeled_lines.size() << " labeled, "
            << corpus.faults.size() << " fault bursts to " << dir.string() << "\n";
  return 0;
}

// ---- parse ----

struct ParseArgs {
  std::string log, labels, out;
  bool inline_markers = false;
  std::size_t window = 20, stride = 20;
  chimera::parser::DrainOptions drain;
};

int run_parse(const ParseArgs& a) {
  require_file(a.log, "log file");
  if (!a.labels.empty()) require_file(a.labels, "label file");
  if (a.window < 1) throw chimera::ConfigError("window", "must be at least 1");
  if (a.stride < 1) throw chimera::ConfigError("stride", "must be at least 1");
  chimera::parser::DrainParser probe(a.drain);  // validates the options

  const fs::path dir(a.out);
  fs::create_directories(dir);
  const DataDir d = data_dir(dir);
  RunManifest m{"parse", g_argv, 0, {}, {a.log}, {d.sequences, d.templates, d.parser}};
  if (!a.labels.empty()) m.inputs.push_back(a.labels);
  m.config = {{"window", std::to_string(a.window)},
              {"stride", std::to_string(a.stride)},
              {"depth", std::to_string(a.drain.depth)},
              {"similarity_threshold", std::to_string(a.drain.similarity_threshold)},
              {"max_children", std::to_string(a.drain.max_children)}};
  m.write(dir);

  std::optional<fs::path> labels;
  if (!a.labels.empty()) labels = a.labels;
  chimera::ParsedLog parsed =
      chimera::parse_records(chimera::parser::read_log_file(a.log, labels, a.inline_markers), a.drain, a.window, a.stride);
  {
    std::ofstream out(d.sequences, std::ios::binary);
    chimera::formats::write_sequences(out, parsed.sequences);
  }
  {
    std::ofstream out(d.templates, std::ios::binary);
    chimera::formats::write_templates(out, parsed.parser.templates());
  }
  write_text(d.parser, ordered_json{{"depth", a.drain.depth},
                                    {"similarity_threshold", a.drain.similarity_threshold},
                                    {"max_children", a.drain.max_children}}
                               .dump(2) +
                           "\n");
  std::size_t anomalous = 0;
  for (const auto& s : parsed.sequences) anomalous += s.seq_label ? 1 : 0;
  std::cout << "parsed " << parsed.records.size() << " lines into " << parsed.parser.size() << " templates and "
            << parsed.sequences.size() << " windows (" << anomalous << " anomalous)\n";
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string data, run, vectors;
  ConfigFlags flags;
};

struct LoadedData {
  std::vector<chimera::EventSequence> sequences;
  std::vector<chimera::parser::LogTemplate> templates;
  chimera::parser::DrainOptions drain;
  std::vector<fs::path> inputs;
};

LoadedData load_data(const fs::path& dir) {
  const DataDir d = data_dir(dir);
  require_file(d.sequences, "sequence file");
  LoadedData out;
  out.sequences = chimera::formats::load_sequences(d.sequences);
  out.inputs.push_back(d.sequences);
  if (fs::is_regular_file(d.templates)) {
    out.templates = chimera::formats::load_templates(d.templates);
    out.inputs.push_back(d.templates);
  }
  if (fs::is_regular_file(d.parser)) {
    out.drain = read_parser_options(d.parser);
    out.inputs.push_back(d.parser);
  }
  if (out.sequences.empty()) throw chimera::InputError("no sequences in " + d.sequences.string());
  return out;
}

void check_window(const chimera::TrainConfig& c, const std::vector<chimera::EventSequence>& seqs) {
  if (seqs.front().size() != c.window) {
    throw chimera::ConfigError("window", "is " + std::to_string(c.window) + " but the sequences hold " +
                                             std::to_string(seqs.front().size()) + " events");
  }
}

ordered_json epoch_json(const chimera::EpochLog& l) {
  return {{"epoch", l.epoch},
          {"detector", l.train.detector},
          {"localizer", l.train.localizer},
          {"disentangle", l.train.disentangle},
          {"align", l.train.align},
          {"total", l.train.total},
          {"val_f1", l.val_f1}};
}

struct TrainOutcome {
  chimera::TrainResult result;
  fs::path best;
};

// Trains and writes train_log.jsonl, epoch_{k}.ckpt and best.ckpt into `run`.
TrainOutcome train_into(const chimera::TrainConfig& config, const LoadedData& data, const fs::path& run,
                        const std::map<int, std::vector<double>>* vectors) {
  fs::create_directories(run);
  std::ofstream log(run / "train_log.jsonl", std::ios::binary);
  chimera::Checkpoint base;
  base.config = config;
  base.drain = data.drain;
  base.templates = data.templates;

  chimera::TrainHooks hooks;
  hooks.on_epoch = [&](const chimera::EpochLog& l, const chimera::ModelParams& params,
                       const chimera::EventVocabulary& vocab) {
    log << epoch_json(l).dump() << '\n';
    log.flush();
    chimera::Checkpoint c = base;
    c.params = params;
    c.threshold = l.threshold;
    c.epoch = l.epoch;
    c.vocab = vocab;
    chimera::save_checkpoint(c, run / ("epoch_" + std::to_string(l.epoch) + ".ckpt"));
    std::cerr << "epoch " << l.epoch << "  total " << l.train.total << "  val_f1 " << l.val_f1 << "\n";
  };
  chimera::TrainResult result = chimera::train(config, data.sequences, hooks, vectors);
  chimera::Checkpoint best = base;
  best.params = result.params;
  best.vocab = result.vocab;
  best.threshold = result.threshold;
  best.epoch = result.best_epoch;
  chimera::save_checkpoint(best, run / "best.ckpt");
  return TrainOutcome{std::move(result), run / "best.ckpt"};
}

int run_train(TrainArgs& a) {
  const chimera::TrainConfig config = a.flags.resolve();
  if (a.data.empty()) throw MissingInput("--data is required");
  LoadedData data = load_data(a.data);
  check_window(config, data.sequences);
  std::map<int, std::vector<double>> vectors;
  if (!a.vectors.empty()) {
    require_file(a.vectors, "vector file");
    std::ifstream in(a.vectors);
    vectors = chimera::formats::read_vectors(in);
    data.inputs.push_back(a.vectors);
  }

  const fs::path run(a.run);
  fs::create_directories(run);
  RunManifest m{"train", g_argv, config.seed, chimera::config_entries(config), data.inputs,
                {run / "train_log.jsonl", run / "epoch_{k}.ckpt", run / "best.ckpt"}};
  m.write(run);

  const TrainOutcome out = train_into(config, data, run, a.vectors.empty() ? nullptr : &vectors);
  std::cout << "best epoch " << out.result.best_epoch << " of " << out.result.history.size() << ", threshold "
            << out.result.threshold << ", checkpoint " << out.best.string() << "\n";
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint, data, out;
  bool bias = false, quadrant = false;
  int quadrant_k = 5;
  std::vector<std::string> ablations;
};

int run_eval(const EvalArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  if (a.data.empty()) throw MissingInput("--data is required");
  if (a.quadrant_k < 1) throw chimera::ConfigError("quadrant-k", "must be at least 1");
  const LoadedData data = load_data(a.data);
  const chimera::Checkpoint ckpt = chimera::load_checkpoint(a.checkpoint);
  check_window(ckpt.config, data.sequences);

  const fs::path out(a.out);
  if (!a.out.empty()) {
    fs::create_directories(out);
    RunManifest m{"eval", g_argv, ckpt.config.seed, chimera::config_entries(ckpt.config), data.inputs,
                  {out / "report.json", out / "report.txt"}};
    m.inputs.insert(m.inputs.begin(), a.checkpoint);
    if (a.quadrant) m.artifacts.push_back(out / "quadrants.csv");
    for (const std::string& v : a.ablations) m.artifacts.push_back(out / ("ablation_" + v));
    m.write(out);
  }

  const chimera::DatasetSplit split = chimera::split_dataset(
      data.sequences.size(), ckpt.config.ratio_train, ckpt.config.ratio_test, ckpt.config.ratio_val, ckpt.config.seed);
  const std::vector<chimera::EventSequence> test = chimera::select(data.sequences, split.test);

  chimera::report::Report r;
  r.checkpoint_hash = chimera::file_hash(a.checkpoint);
  r.main = chimera::evaluate(ckpt.params, ckpt.vocab, ckpt.threshold, test, a.quadrant_k);
  r.bias_study = a.bias;
  r.quadrant_study = a.quadrant;

  for (const std::string& v : a.ablations) {
    chimera::TrainConfig c = ckpt.config;
    c.disable_ilrl = v == "ilrl" || v == "both";
    c.disable_cda = v == "cda" || v == "both";
    const fs::path run = a.out.empty() ? fs::temp_directory_path() / ("chimera_ablation_" + v) : out / ("ablation_" + v);
    const TrainOutcome t = train_into(c, data, run, nullptr);
    const std::string name = v == "ilrl" ? "w/o ILRL" : v == "cda" ? "w/o CDA" : "w/o ILRL+CDA";
    r.ablations.push_back({name, chimera::evaluate(t.result.params, t.result.vocab, t.result.threshold, test,
                                                   a.quadrant_k)});
  }

  const std::string text = chimera::report::to_text(r);
  std::cout << text;
  if (!a.out.empty()) {
    write_text(out / "report.json", chimera::report::to_json(r));
    write_text(out / "report.txt", text);
    if (a.quadrant) write_text(out / "quadrants.csv", chimera::report::quadrant_csv({{"Chimera", r.main.quadrants}}));
  }
  return 0;
}

// ---- diagnose ----

struct DiagnoseArgs {
  std::string checkpoint, log, json_out;
  std::size_t top_k = 5;
  std::string partial = "reject";
  bool all = false;
};

int run_diagnose(const DiagnoseArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.log, "log file");
  if (a.top_k < 1) throw chimera::ConfigError("top-k", "must be at least 1");
  const chimera::Checkpoint ckpt = chimera::load_checkpoint(a.checkpoint);
  if (ckpt.templates.empty()) throw chimera::InputError("checkpoint carries no template catalog");
  const chimera::parser::DrainParser parser = chimera::parser::DrainParser::from_catalog(ckpt.templates, ckpt.drain);

  std::ifstream in(a.log);
  const std::vector<chimera::RawLogRecord> records = chimera::parser::read_log(in, {});
  const std::size_t n = ckpt.config.window;
  const std::size_t stride = ckpt.config.stride;

  std::vector<int> ids;
  ids.reserve(records.size());
  for (const chimera::RawLogRecord& r : records) ids.push_back(parser.match(r.content).value_or(-1));

  // Window starts; a trailing partial window is padded or rejected, never dropped.
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + n <= records.size(); s += stride) starts.push_back(s);
  const std::size_t covered = starts.empty() ? 0 : starts.back() + n;
  if (covered < records.size()) {
    const std::size_t tail_start = starts.empty() ? 0 : starts.back() + stride;
    if (a.partial == "reject") {
      throw chimera::InputError("log has " + std::to_string(records.size() - tail_start) +
                                " trailing lines that do not fill a window of " + std::to_string(n) +
                                "; rerun with --partial pad to score them");
    }
    starts.push_back(tail_start);
  }

  std::vector<chimera::EventSequence> windows;
  std::vector<std::size_t> real_lengths;
  for (std::size_t s : starts) {
    chimera::EventSequence w;
    const std::size_t len = std::min(n, records.size() - s);
    for (std::size_t i = 0; i < n; ++i) {
      // Padding sits after the real lines, so their localizer states are
      // unaffected; pads map to the unknown row.
      w.event_ids.push_back(i < len ? ids[s + i] : -1);
      w.positions.push_back(i < len ? records[s + i].line_no : 0);
      w.root_cause_flags.push_back(false);
    }
    windows.push_back(std::move(w));
    real_lengths.push_back(len);
  }
  const std::vector<chimera::DiagnosisOutput> outputs = chimera::diagnose(ckpt.params, ckpt.vocab, windows);

  ordered_json report = ordered_json::array();
  std::size_t flagged = 0;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const chimera::DiagnosisOutput& o = outputs[w];
    const bool anomalous = o.y_hat >= ckpt.threshold;
    flagged += anomalous ? 1 : 0;
    const std::size_t len = real_lengths[w];
    std::vector<double> scores(o.p.begin(), o.p.begin() + static_cast<std::ptrdiff_t>(len));
    const std::vector<std::size_t> order = chimera::eval::rank_positions(scores);
    const std::size_t first = windows[w].positions.front();
    const std::size_t last = windows[w].positions[len - 1];
    std::cout << "window " << (w + 1) << " lines " << first << "-" << last << (len < n ? " (padded)" : "") << ": "
              << (anomalous ? "ANOMALOUS" : "normal") << "  y_hat=" << o.y_hat << "\n";
    ordered_json top = ordered_json::array();
    for (std::size_t r = 0; r < std::min(a.top_k, order.size()); ++r) {
      const std::size_t pos = order[r];
      const chimera::RawLogRecord& rec = records[starts[w] + pos];
      top.push_back({{"rank", r + 1}, {"line", rec.line_no}, {"score", o.p[pos]}, {"content", rec.content}});
      if (anomalous || a.all) {
        std::cout << "  #" << (r + 1) << " line " << rec.line_no << "  p=" << o.p[pos] << "  " << rec.content << "\n";
      }
    }
    report.push_back({{"window", w + 1},
                      {"first_line", first},
                      {"last_line", last},
                      {"padded", len < n},
                      {"anomalous", anomalous},
                      {"y_hat", o.y_hat},
                      {"top", top}});
  }
  std::cout << flagged << " of " << windows.size() << " windows flagged\n";
  if (!a.json_out.empty()) write_text(a.json_out, report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"Chimera log-based fault diagnosis"};
  app.set_version_flag("--version", std::string(CHIMERA_VERSION));
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* g = app.add_subcommand("gen", "generate a synthetic labeled corpus");
  g->add_option("--seed", gen.seed, "root seed");
  g->add_option("--lines", gen.lines, "number of log lines");
  g->add_option("--templates", gen.templates, "number of templates");
  g->add_option("--rate", gen.rate, "target fraction of root-cause lines");
  g->add_option("--symptom-noise", gen.symptom_noise, "probability of a symptom template in normal traffic");
  g->add_flag("--hard", gen.hard, "triggers reuse background templates and depend on context");
  g->add_option("-o,--out", gen.out, "output directory")->required();

  ParseArgs parse;
  CLI::App* p = app.add_subcommand("parse", "parse a raw log into windows");
  p->add_option("--log", parse.log, "raw log file")->required();
  p->add_option("--labels", parse.labels, "anomalous line numbers, one per line");
  p->add_flag("--inline-markers", parse.inline_markers, "lines start with '+ ' (anomalous) or '- ' (normal)");
  p->add_option("--window", parse.window, "window length");
  p->add_option("--stride", parse.stride, "window stride");
  p->add_option("--depth", parse.drain.depth, "parse tree depth");
  p->add_option("--similarity", parse.drain.similarity_threshold, "similarity threshold");
  p->add_option("--max-children", parse.drain.max_children, "children per internal node");
  p->add_option("-o,--out", parse.out, "output directory")->required();

  TrainArgs train;
  CLI::App* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", train.data, "directory written by `parse`");
  t->add_option("--run", train.run, "run directory")->required();
  t->add_option("--vectors", train.vectors, "JSON-lines {template_id, vector} to seed the embedding table");
  train.flags.attach(*t);

  EvalArgs ev;
  CLI::App* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--data", ev.data, "directory written by `parse`");
  e->add_option("--out", ev.out, "report directory");
  e->add_flag("--bias-study", ev.bias, "theoretical vs actual localization");
  e->add_flag("--quadrant-study", ev.quadrant, "DLF/DF/LF/MF counts");
  e->add_option("--quadrant-k", ev.quadrant_k, "top-k cutoff for 'localized'");
  e->add_option("--ablation", ev.ablations, "retrain without a component: ilrl, cda or both")
      ->check(CLI::IsMember({"ilrl", "cda", "both"}));

  DiagnoseArgs dg;
  CLI::App* d = app.add_subcommand("diagnose", "score a raw log with a checkpoint");
  d->add_option("--checkpoint", dg.checkpoint, "checkpoint file")->required();
  d->add_option("--log", dg.log, "raw log file")->required();
  d->add_option("--top-k", dg.top_k, "root-cause lines to show per window");
  d->add_option("--partial", dg.partial, "trailing lines short of a window: pad or reject")
      ->check(CLI::IsMember({"pad", "reject"}));
  d->add_flag("--all", dg.all, "show ranked lines for normal windows too");
  d->add_option("--json", dg.json_out, "write verdicts as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*g) return run_gen(gen);
    if (*p) return run_parse(parse);
    if (*t) return run_train(train);
    if (*e) return run_eval(ev);
    if (*d) return run_diagnose(dg);
  } catch (const MissingInput& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitNoInput;
  } catch (const chimera::ConfigError& err) {
    std::cerr << "config error: " << err.what() << "\n";
    return kExitConfig;
  } catch (const chimera::InputError& err) {
    std::cerr << "input error: " << err.what() << "\n";
    return kExitDataErr;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
