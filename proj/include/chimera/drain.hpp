// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fixed-depth parse tree log template miner (Drain).
//
// Lines are tokenized on whitespace; tokens containing a digit, and long
// hex-looking tokens, are masked to the wildcard before tree descent. The
// tree has a root, one layer keyed by token count, `depth - 3` layers keyed
// by leading tokens, and template groups hanging off the last layer, so every
// root-to-group path has exactly `depth` levels. Sequences shorter than the
// number of token layers are padded with a reserved key.

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chimera::parser {

inline constexpr std::string_view kWildcard = "<*>";

struct DrainOptions {
  int depth = 4;
  double similarity_threshold = 0.5;
  std::size_t max_children = 100;
};

struct LogTemplate {
  int template_id = 0;
  std::vector<std::string> tokens;
  std::size_t match_count = 0;

  std::string text() const;
};

std::vector<std::string> tokenize(std::string_view content);
bool is_variable_token(std::string_view token);
std::vector<std::string> masked_tokens(std::string_view content);

class DrainParser {
 public:
  explicit DrainParser(DrainOptions options = {});
  DrainParser(DrainParser&&) noexcept = default;
  DrainParser& operator=(DrainParser&&) noexcept = default;

  // Rebuilds a tree from a saved catalog. Ids and counts are kept.
  static DrainParser from_catalog(std::vector<LogTemplate> catalog, DrainOptions options = {});

  // Returns the matching template id, creating a template when nothing in
  // the target group reaches the similarity threshold. Throws InputError on
  // blank content.
  int parse(std::string_view content);

  // Read-only lookup; nullopt when no template matches.
  std::optional<int> match(std::string_view content) const;

  const LogTemplate& get(int template_id) const;
  // Ordered by template id.
  std::vector<LogTemplate> templates() const;
  std::size_t size() const noexcept { return templates_.size(); }
  const DrainOptions& options() const noexcept { return options_; }

  // Levels on each root-to-group path (one entry per group node).
  std::vector<std::size_t> group_depths() const;
  // Largest child count over all internal nodes.
  std::size_t max_fanout() const;

 private:
  struct Node {
    std::map<std::string, std::unique_ptr<Node>, std::less<>> children;
    std::vector<std::size_t> groups;  // indexes into templates_
  };

  std::size_t token_layers() const { return static_cast<std::size_t>(options_.depth - 3); }
  std::string layer_key(std::span<const std::string> tokens, std::size_t layer) const;
  const Node* find_group(std::span<const std::string> tokens) const;
  Node& insert_path(std::span<const std::string> tokens);
  std::optional<std::size_t> best_match(const Node& group, std::span<const std::string> tokens) const;

  DrainOptions options_;
  std::unique_ptr<Node> root_;
  std::vector<LogTemplate> templates_;
};

}  // namespace chimera::parser
