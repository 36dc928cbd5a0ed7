// SPDX-License-Identifier: Apache-2.0
#include "chimera/datagen.hpp"

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <json.hpp>
#include <set>

#include "chimera/drain.hpp"
#include "chimera/error.hpp"
#include "chimera/random.hpp"

namespace chimera::datagen {
namespace {

constexpr const char* kWords[] = {
    "connection", "failed",   "request",  "received", "from",     "node",     "worker",   "started",
    "stopped",    "timeout",  "while",    "waiting",  "for",      "reply",    "cache",    "miss",
    "on",         "block",    "replica",  "written",  "to",       "disk",     "session",  "opened",
    "closed",     "by",       "user",     "retrying", "after",    "error",    "packet",   "dropped",
    "queue",      "length",   "exceeded", "limit",    "storage",  "volume",   "mounted",  "at",
    "kernel",     "module",   "loaded",   "heartbeat", "missed",  "leader",   "elected",  "term",
    "checkpoint", "flushed",  "memory",   "pressure", "high",     "service",  "ready",    "link",
    "state",      "changed",  "job",      "finished", "with",     "status",   "lock",     "acquired",
};

constexpr const char* kOnsets[] = {"b", "br", "c", "ch", "d", "dr", "f", "g", "gr", "h", "j", "k", "l",
                                   "m", "n", "p", "pl", "r", "s", "sh", "st", "t", "tr", "v", "w", "z"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr const char* kCodas[] = {"", "n", "r", "s", "l", "x", "m"};

template <class T, std::size_t N>
const T& pick(const T (&items)[N], Rng& rng) {
  return items[rng.below(N)];
}

std::string make_head_word(Rng& rng) {
  std::string w;
  const std::size_t syllables = 2 + rng.below(2);
  for (std::size_t s = 0; s < syllables; ++s) {
    w += pick(kOnsets, rng);
    w += pick(kVowels, rng);
  }
  w += pick(kCodas, rng);
  return w;
}

struct TemplatePart {
  bool slot = false;
  std::string word;
  SlotKind kind = SlotKind::Integer;
};

using TemplateParts = std::vector<TemplatePart>;

std::vector<TemplateParts> make_templates(const CorpusSpec& spec) {
  Rng rng = Rng::derive(spec.seed, "datagen-templates");
  std::set<std::string> heads;
  std::vector<TemplateParts> out;
  while (out.size() < spec.num_templates) {
    std::string head = make_head_word(rng);
    if (parser::is_variable_token(head) || !heads.insert(head).second) continue;
    TemplateParts parts{TemplatePart{false, head, SlotKind::Integer}};
    const std::size_t extra = 2 + rng.below(6);
    for (std::size_t i = 0; i < extra; ++i) {
      if (rng.bernoulli(0.3)) {
        parts.push_back(TemplatePart{true, {}, spec.slot_kinds[rng.below(spec.slot_kinds.size())]});
      } else {
        parts.push_back(TemplatePart{false, pick(kWords, rng), SlotKind::Integer});
      }
    }
    out.push_back(std::move(parts));
  }
  return out;
}

std::string fill_slot(SlotKind kind, Rng& rng) {
  char buf[64];
  switch (kind) {
    case SlotKind::Integer:
      std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(rng.below(100000)));
      break;
    case SlotKind::Hex:
      std::snprintf(buf, sizeof buf, "0x%08llx", static_cast<unsigned long long>(rng.below(0x100000000ULL)));
      break;
    case SlotKind::Node:
      std::snprintf(buf, sizeof buf, "R%llu-M%llu-N%llu", static_cast<unsigned long long>(rng.below(64)),
                    static_cast<unsigned long long>(rng.below(2)), static_cast<unsigned long long>(rng.below(16)));
      break;
    case SlotKind::Path:
      std::snprintf(buf, sizeof buf, "/var/lib/svc%llu/part%llu.dat", static_cast<unsigned long long>(rng.below(8)),
                    static_cast<unsigned long long>(rng.below(1000)));
      break;
  }
  return buf;
}

std::string render(const TemplateParts& parts, Rng& rng) {
  std::string s;
  for (const TemplatePart& p : parts) {
    if (!s.empty()) s += ' ';
    s += p.slot ? fill_slot(p.kind, rng) : p.word;
  }
  return s;
}

std::string masked_text(const TemplateParts& parts) {
  std::string s;
  for (const TemplatePart& p : parts) {
    if (!s.empty()) s += ' ';
    s += p.slot ? std::string(parser::kWildcard) : p.word;
  }
  return s;
}

std::string format_timestamp(std::uint64_t millis) {
  const std::time_t secs = static_cast<std::time_t>(millis / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03u", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<unsigned>(millis % 1000));
  return buf;
}

std::size_t draw(std::size_t lo, std::size_t hi, Rng& rng) { return lo + rng.below(hi - lo + 1); }

double mean_triggers(const BurstShape& s) { return 0.5 * static_cast<double>(s.trigger_min + s.trigger_max); }

// Burst start probability per emitted unit so that labeled lines make up
// `rate` of the corpus in expectation: q T / (q L + 1 - q) = rate.
double burst_probability(const CorpusSpec& spec) {
  double rate = 0.0, t = 0.0, l = 0.0;
  for (const FaultSpec& f : spec.faults) rate += f.rate;
  if (rate == 0.0) return 0.0;
  for (const FaultSpec& f : spec.faults) {
    t += f.rate / rate * mean_triggers(f.burst);
    l += f.rate / rate * mean_burst_length(f.burst, spec.hard_mode);
  }
  return rate / (t - rate * (l - 1.0));
}

class Generator {
 public:
  Generator(const CorpusSpec& spec, Corpus& corpus)
      : spec_(spec), corpus_(corpus), rng_(Rng::derive(spec.seed, "datagen-lines")) {
    parts_ = make_templates(spec);
    std::vector<bool> fault_only(spec.num_templates, false);
    corpus_.templates.resize(spec.num_templates);
    for (std::size_t i = 0; i < spec.num_templates; ++i) {
      corpus_.templates[i] = TemplateInfo{masked_text(parts_[i]), "background", -1};
    }
    for (const FaultSpec& f : spec.faults) {
      for (std::size_t s : f.symptoms) {
        fault_only[s] = true;
        corpus_.templates[s].role = "symptom";
        corpus_.templates[s].fault_type = f.fault_type;
        symptoms_.push_back(s);
      }
      for (std::size_t i = 0; i < f.triggers.size(); ++i) {
        corpus_.templates[f.triggers[i]].role = "trigger";
        corpus_.templates[f.triggers[i]].fault_type = f.fault_type;
        if (spec.hard_mode) {
          forbidden_.insert({f.contexts[i], f.triggers[i]});
        } else {
          fault_only[f.triggers[i]] = true;
        }
      }
    }
    for (std::size_t i = 0; i < spec.num_templates; ++i) {
      if (fault_only[i]) continue;
      background_.push_back(i);
      // Mildly skewed popularity; every template keeps a real share.
      const double w = 1.0 / (1.0 + 0.05 * static_cast<double>(background_.size() - 1));
      cumulative_.push_back((cumulative_.empty() ? 0.0 : cumulative_.back()) + w);
    }
    q_ = burst_probability(spec);
  }

  void run() {
    Rng fault_rng = Rng::derive(spec_.seed, "datagen-faults");
    double rate = 0.0;
    for (const FaultSpec& f : spec_.faults) rate += f.rate;
    while (corpus_.lines.size() < spec_.num_lines) {
      if (q_ > 0.0 && fault_rng.bernoulli(q_)) {
        double u = fault_rng.uniform() * rate;
        std::size_t k = 0;
        while (k + 1 < spec_.faults.size() && u >= spec_.faults[k].rate) u -= spec_.faults[k++].rate;
        burst(spec_.faults[k]);
      } else {
        background();
      }
    }
  }

 private:
  bool full() const { return corpus_.lines.size() >= spec_.num_lines; }

  std::size_t emit(std::size_t tmpl) {
    clock_ += 1 + rng_.below(250);
    corpus_.lines.push_back(format_timestamp(clock_) + " " + render(parts_[tmpl], rng_));
    corpus_.line_templates.push_back(tmpl);
    return corpus_.lines.size();
  }

  std::size_t previous() const {
    return corpus_.line_templates.empty() ? spec_.num_templates : corpus_.line_templates.back();
  }

  void background() {
    if (!symptoms_.empty() && rng_.bernoulli(spec_.symptom_noise)) {
      emit(symptoms_[rng_.below(symptoms_.size())]);
      return;
    }
    for (;;) {
      const double u = rng_.uniform() * cumulative_.back();
      const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
      const std::size_t tmpl = background_[std::min<std::size_t>(it - cumulative_.begin(), background_.size() - 1)];
      if (forbidden_.count({previous(), tmpl})) continue;
      emit(tmpl);
      return;
    }
  }

  void symptoms(const FaultSpec& f, std::size_t count, InjectedFault& out) {
    for (std::size_t i = 0; i < count && !full(); ++i) {
      out.symptom_lines.push_back(emit(f.symptoms[rng_.below(f.symptoms.size())]));
    }
  }

  void burst(const FaultSpec& f) {
    InjectedFault out;
    out.fault_type = f.fault_type;
    const BurstShape& s = f.burst;
    symptoms(f, draw(s.before_min, s.before_max, rng_), out);
    const std::size_t triggers = draw(s.trigger_min, s.trigger_max, rng_);
    for (std::size_t i = 0; i < triggers && !full(); ++i) {
      const std::size_t pick_index = rng_.below(f.triggers.size());
      if (spec_.hard_mode) {
        out.context_lines.push_back(emit(f.contexts[pick_index]));
        if (full()) break;
      }
      const std::size_t line = emit(f.triggers[pick_index]);
      out.trigger_lines.push_back(line);
      corpus_.labeled_lines.push_back(line);
    }
    symptoms(f, draw(s.after_min, s.after_max, rng_), out);
    corpus_.faults.push_back(std::move(out));
  }

  const CorpusSpec& spec_;
  Corpus& corpus_;
  Rng rng_;
  std::vector<TemplateParts> parts_;
  std::vector<std::size_t> background_;
  std::vector<double> cumulative_;
  std::vector<std::size_t> symptoms_;
  std::set<std::pair<std::size_t, std::size_t>> forbidden_;
  double q_ = 0.0;
  std::uint64_t clock_ = 1767225600000ULL;  // 2026-01-01T00:00:00Z
};

const char* slot_name(SlotKind k) {
  switch (k) {
    case SlotKind::Integer: return "integer";
    case SlotKind::Hex: return "hex";
    case SlotKind::Node: return "node";
    case SlotKind::Path: return "path";
  }
  return "?";
}

}  // namespace

double mean_burst_length(const BurstShape& s, bool hard_mode) {
  const double t = mean_triggers(s);
  return 0.5 * static_cast<double>(s.before_min + s.before_max) + t * (hard_mode ? 2.0 : 1.0) +
         0.5 * static_cast<double>(s.after_min + s.after_max);
}

void CorpusSpec::validate() const {
  if (num_templates < 2) throw ConfigError("num_templates", "must be at least 2");
  if (num_lines < 1) throw ConfigError("num_lines", "must be at least 1");
  if (slot_kinds.empty()) throw ConfigError("slot_kinds", "at least one slot kind is required");
  if (!(symptom_noise >= 0.0 && symptom_noise < 1.0)) throw ConfigError("symptom_noise", "must lie in [0, 1)");

  std::size_t fault_templates = 0;
  std::set<std::size_t> claimed;
  auto check_index = [&](std::size_t idx, const char* field) {
    if (idx >= num_templates) throw ConfigError(field, "template index out of range");
  };
  for (const FaultSpec& f : faults) {
    if (f.triggers.empty()) throw ConfigError("triggers", "each fault needs at least one trigger template");
    if (f.symptoms.empty()) throw ConfigError("symptoms", "each fault needs at least one symptom template");
    if (!(f.rate >= 0.0 && f.rate < 1.0)) throw ConfigError("rate", "must lie in [0, 1)");
    const BurstShape& b = f.burst;
    if (b.before_min > b.before_max || b.after_min > b.after_max || b.trigger_min > b.trigger_max ||
        b.trigger_min < 1) {
      throw ConfigError("burst", "ranges must satisfy min <= max and at least one trigger");
    }
    fault_templates += f.triggers.size() + f.symptoms.size();
    for (std::size_t s : f.symptoms) {
      check_index(s, "symptoms");
      if (!claimed.insert(s).second) throw ConfigError("symptoms", "templates may serve only one role");
    }
    if (hard_mode && f.contexts.size() != f.triggers.size()) {
      throw ConfigError("contexts", "hard mode needs one context template per trigger");
    }
    for (std::size_t i = 0; i < f.triggers.size(); ++i) {
      check_index(f.triggers[i], "triggers");
      if (!claimed.insert(f.triggers[i]).second) throw ConfigError("triggers", "templates may serve only one role");
      if (hard_mode) {
        check_index(f.contexts[i], "contexts");
        if (f.contexts[i] == f.triggers[i]) throw ConfigError("contexts", "context must differ from its trigger");
      }
    }
  }
  if (hard_mode) {
    for (const FaultSpec& f : faults)
      for (std::size_t c : f.contexts)
        if (claimed.count(c)) throw ConfigError("contexts", "context templates must not be triggers or symptoms");
  }
  if (num_templates < 2 * fault_templates) {
    throw ConfigError("num_templates", "must be at least twice the number of trigger and symptom templates");
  }
  const double q = burst_probability(*this);
  if (!(q >= 0.0 && q < 1.0)) throw ConfigError("rate", "injection rates too high for the burst shapes");
}

CorpusSpec default_spec(std::uint64_t seed, bool hard_mode) {
  CorpusSpec spec;
  spec.seed = seed;
  spec.hard_mode = hard_mode;
  // Symptoms stay common in normal traffic and rarely trail the trigger, so
  // the context pair is the only reliable signal.
  if (hard_mode) spec.symptom_noise = 0.05;
  for (int f = 0; f < 3; ++f) {
    FaultSpec fs;
    fs.fault_type = f;
    const std::size_t base = static_cast<std::size_t>(f) * 5;
    fs.symptoms = {base + 2, base + 3, base + 4};
    if (hard_mode) {
      const std::size_t b = 15 + static_cast<std::size_t>(f) * 4;
      fs.triggers = {b, b + 1};
      fs.contexts = {b + 2, b + 3};
      fs.burst.before_min = 1;
      fs.burst.before_max = 3;
      fs.burst.after_min = 0;
      fs.burst.after_max = 1;
    } else {
      fs.triggers = {base, base + 1};
    }
    fs.rate = 0.05 / 3.0;
    spec.faults.push_back(fs);
  }
  return spec;
}

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  Generator gen(spec, corpus);
  gen.run();
  return corpus;
}

CorpusFiles write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  CorpusFiles files{dir / "corpus.log", dir / "labels.txt", dir / "manifest.json"};
  {
    std::ofstream out(files.log, std::ios::binary);
    for (const std::string& line : corpus.lines) out << line << '\n';
    if (!out) throw Error("cannot write " + files.log.string());
  }
  {
    std::ofstream out(files.labels, std::ios::binary);
    for (std::size_t line : corpus.labeled_lines) out << line << '\n';
    if (!out) throw Error("cannot write " + files.labels.string());
  }
  nlohmann::ordered_json m;
  m["seed"] = spec.seed;
  m["num_lines"] = corpus.lines.size();
  m["num_templates"] = spec.num_templates;
  m["hard_mode"] = spec.hard_mode;
  m["symptom_noise"] = spec.symptom_noise;
  m["labeled_lines"] = corpus.labeled_lines.size();
  nlohmann::ordered_json slots = nlohmann::ordered_json::array();
  for (SlotKind k : spec.slot_kinds) slots.push_back(slot_name(k));
  m["slot_kinds"] = slots;
  nlohmann::ordered_json templates = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < corpus.templates.size(); ++i) {
    const TemplateInfo& t = corpus.templates[i];
    templates.push_back({{"index", i}, {"template", t.text}, {"role", t.role}, {"fault_type", t.fault_type}});
  }
  m["templates"] = templates;
  nlohmann::ordered_json faults = nlohmann::ordered_json::array();
  for (const InjectedFault& f : corpus.faults) {
    nlohmann::ordered_json j{{"fault_type", f.fault_type},
                             {"trigger_lines", f.trigger_lines},
                             {"symptom_lines", f.symptom_lines}};
    if (spec.hard_mode) j["context_lines"] = f.context_lines;
    faults.push_back(std::move(j));
  }
  m["faults"] = faults;
  std::ofstream out(files.manifest, std::ios::binary);
  out << m.dump(1) << '\n';
  if (!out) throw Error("cannot write " + files.manifest.string());
  return files;
}

}  // namespace chimera::datagen
