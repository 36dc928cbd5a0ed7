// SPDX-License-Identifier: Apache-2.0
#include "chimera/drain.hpp"

#include <algorithm>
#include <cctype>

#include "chimera/error.hpp"

namespace chimera::parser {
namespace {

constexpr std::string_view kPad = "<pad>";

bool has_digit(std::string_view token) {
  return std::any_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool is_hex_word(std::string_view token) {
  if (token.starts_with("0x") || token.starts_with("0X")) token.remove_prefix(2);
  return token.size() >= 8 &&
         std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isxdigit(c); });
}

struct Similarity {
  double score = 0.0;
  std::size_t wildcards = 0;
};

Similarity similarity(std::span<const std::string> tmpl, std::span<const std::string> tokens) {
  Similarity s;
  std::size_t same = 0;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == kWildcard) {
      ++s.wildcards;
      continue;
    }
    if (tmpl[i] == tokens[i]) ++same;
  }
  s.score = tmpl.empty() ? 0.0 : static_cast<double>(same) / static_cast<double>(tmpl.size());
  return s;
}

}  // namespace

std::string LogTemplate::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view content) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < content.size()) {
    while (i < content.size() && std::isspace(static_cast<unsigned char>(content[i]))) ++i;
    std::size_t j = i;
    while (j < content.size() && !std::isspace(static_cast<unsigned char>(content[j]))) ++j;
    if (j > i) out.emplace_back(content.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_variable_token(std::string_view token) { return has_digit(token) || is_hex_word(token); }

std::vector<std::string> masked_tokens(std::string_view content) {
  std::vector<std::string> tokens = tokenize(content);
  for (std::string& t : tokens) {
    if (is_variable_token(t)) t = std::string(kWildcard);
  }
  return tokens;
}

DrainParser::DrainParser(DrainOptions options) : options_(options), root_(std::make_unique<Node>()) {
  if (options_.depth < 3) throw ConfigError("depth", "must be at least 3");
  if (!(options_.similarity_threshold > 0.0 && options_.similarity_threshold < 1.0)) {
    throw ConfigError("similarity_threshold", "must lie in (0, 1)");
  }
  if (options_.max_children < 1) throw ConfigError("max_children", "must be at least 1");
}

DrainParser DrainParser::from_catalog(std::vector<LogTemplate> catalog, DrainOptions options) {
  DrainParser parser(options);
  std::sort(catalog.begin(), catalog.end(),
            [](const LogTemplate& a, const LogTemplate& b) { return a.template_id < b.template_id; });
  for (LogTemplate& t : catalog) {
    if (t.tokens.empty()) throw InputError("catalog template " + std::to_string(t.template_id) + " is empty");
    if (!parser.templates_.empty() && parser.templates_.back().template_id == t.template_id) {
      throw InputError("duplicate template id " + std::to_string(t.template_id));
    }
    Node& group = parser.insert_path(t.tokens);
    group.groups.push_back(parser.templates_.size());
    parser.templates_.push_back(std::move(t));
  }
  return parser;
}

std::string DrainParser::layer_key(std::span<const std::string> tokens, std::size_t layer) const {
  return layer < tokens.size() ? tokens[layer] : std::string(kPad);
}

const DrainParser::Node* DrainParser::find_group(std::span<const std::string> tokens) const {
  auto it = root_->children.find(std::to_string(tokens.size()));
  if (it == root_->children.end()) return nullptr;
  const Node* node = it->second.get();
  for (std::size_t layer = 0; layer < token_layers(); ++layer) {
    const std::string key = layer_key(tokens, layer);
    if (auto c = node->children.find(key); c != node->children.end()) {
      node = c->second.get();
    } else if (auto w = node->children.find(kWildcard); w != node->children.end()) {
      node = w->second.get();
    } else {
      return nullptr;
    }
  }
  return node;
}

DrainParser::Node& DrainParser::insert_path(std::span<const std::string> tokens) {
  auto& by_length = root_->children[std::to_string(tokens.size())];
  if (!by_length) by_length = std::make_unique<Node>();
  Node* node = by_length.get();
  const std::string wildcard(kWildcard);
  auto child = [](Node* parent, const std::string& key) -> Node* {
    auto& slot = parent->children[key];
    if (!slot) slot = std::make_unique<Node>();
    return slot.get();
  };
  for (std::size_t layer = 0; layer < token_layers(); ++layer) {
    const std::string key = layer_key(tokens, layer);
    auto& kids = node->children;
    if (auto c = kids.find(key); c != kids.end()) {
      node = c->second.get();
    } else if (key == kWildcard || key == kPad) {
      node = child(node, key);
    } else if (kids.contains(kWildcard)) {
      node = kids.size() < options_.max_children ? child(node, key) : kids.find(kWildcard)->second.get();
    } else if (kids.size() + 1 < options_.max_children) {
      node = child(node, key);
    } else {
      node = child(node, wildcard);
    }
  }
  return *node;
}

std::optional<std::size_t> DrainParser::best_match(const Node& group,
                                                   std::span<const std::string> tokens) const {
  std::optional<std::size_t> best;
  Similarity best_sim{-1.0, 0};
  for (std::size_t idx : group.groups) {
    // A line identical to a template always joins it, even when wildcards
    // leave too few constant tokens to clear the threshold.
    if (std::equal(tokens.begin(), tokens.end(), templates_[idx].tokens.begin(), templates_[idx].tokens.end())) {
      return idx;
    }
    const Similarity s = similarity(templates_[idx].tokens, tokens);
    if (s.score > best_sim.score || (s.score == best_sim.score && s.wildcards > best_sim.wildcards)) {
      best_sim = s;
      best = idx;
    }
  }
  if (best && best_sim.score >= options_.similarity_threshold) return best;
  return std::nullopt;
}

int DrainParser::parse(std::string_view content) {
  const std::vector<std::string> tokens = masked_tokens(content);
  if (tokens.empty()) throw InputError("cannot parse empty log content");

  if (const Node* group = find_group(tokens)) {
    if (auto idx = best_match(*group, tokens)) {
      LogTemplate& t = templates_[*idx];
      for (std::size_t i = 0; i < t.tokens.size(); ++i) {
        if (t.tokens[i] != tokens[i]) t.tokens[i] = std::string(kWildcard);
      }
      ++t.match_count;
      return t.template_id;
    }
  }
  const int id = templates_.empty() ? 1 : templates_.back().template_id + 1;
  Node& group = insert_path(tokens);
  group.groups.push_back(templates_.size());
  templates_.push_back(LogTemplate{id, tokens, 1});
  return id;
}

std::optional<int> DrainParser::match(std::string_view content) const {
  const std::vector<std::string> tokens = masked_tokens(content);
  if (tokens.empty()) return std::nullopt;
  const Node* group = find_group(tokens);
  if (!group) return std::nullopt;
  if (auto idx = best_match(*group, tokens)) return templates_[*idx].template_id;
  return std::nullopt;
}

const LogTemplate& DrainParser::get(int template_id) const {
  auto it = std::lower_bound(templates_.begin(), templates_.end(), template_id,
                             [](const LogTemplate& t, int id) { return t.template_id < id; });
  if (it == templates_.end() || it->template_id != template_id) {
    throw InputError("unknown template id " + std::to_string(template_id));
  }
  return *it;
}

std::vector<LogTemplate> DrainParser::templates() const { return templates_; }

std::vector<std::size_t> DrainParser::group_depths() const {
  std::vector<std::size_t> out;
  // root = level 1, length layer = level 2, token layers follow, groups last.
  auto walk = [&](auto&& self, const Node& node, std::size_t level) -> void {
    if (!node.groups.empty()) out.push_back(level + 1);
    for (const auto& [key, kid] : node.children) self(self, *kid, level + 1);
  };
  walk(walk, *root_, 1);
  return out;
}

std::size_t DrainParser::max_fanout() const {
  std::size_t best = 0;
  auto walk = [&](auto&& self, const Node& node, bool count) -> void {
    if (count) best = std::max(best, node.children.size());
    for (const auto& [key, kid] : node.children) self(self, *kid, true);
  };
  // The token-count layer under the root is not bounded by max_children.
  walk(walk, *root_, false);
  return best;
}

}  // namespace chimera::parser
