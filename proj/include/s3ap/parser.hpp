#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "s3ap/backend.hpp"
#include "s3ap/oracle.hpp"
#include "s3ap/schema.hpp"

namespace s3ap {

enum class TaskKind { ToMi, ParaToMi, HiToM, FANToM, MMToMQA, ConfAIde, Generic };

std::string task_kind_name(TaskKind kind);
std::optional<TaskKind> task_kind_from(const std::string& name);

struct ParseTask {
  TaskKind name = TaskKind::Generic;
  std::string instructions;
  std::string exemplar;

  // Instruction block and worked exemplar for a task family. The exemplar is
  // a hand-written scene, not drawn from any evaluation set.
  static ParseTask builtin(TaskKind kind);
};

struct ParseAttempt {
  std::size_t attempt_index{};
  std::string prompt;
  std::string raw_response;
  std::vector<ValidationIssue> issues;  // empty iff the attempt succeeded
};

class ParseFailedError : public S3apError {
 public:
  ParseFailedError(const std::string& message, std::vector<ParseAttempt> attempts)
      : S3apError(message), attempts_(std::move(attempts)) {}
  const std::vector<ParseAttempt>& attempts() const { return attempts_; }

 private:
  std::vector<ParseAttempt> attempts_;
};

// Fills the parse template. The feedback section is elided entirely when no
// feedback is given. Byte-deterministic.
std::string build_parse_prompt(const std::string& narrative, const ParseTask& task,
                               const std::optional<std::string>& feedback = std::nullopt);

struct ParseResult {
  Trajectory trajectory;
  std::vector<ParseAttempt> attempts;
};

// prompt -> backend -> decode/validate -> feedback retry. Never sees any
// downstream question. Metadata records the source narrative, task name,
// backend identity, and attempt count. Throws ParseFailedError (carrying all
// attempts) after max_retries+1 failed attempts; BackendError propagates
// with attempt context.
ParseResult parse_narrative(const std::string& narrative, const ParseTask& task,
                            CompletionBackend& backend, int max_retries = 2);

// First JSON value in a completion, fenced-block aware. nullopt when none.
std::optional<nlohmann::ordered_json> extract_first_json(const std::string& text);

// Greedy template unification: literals anchor left to right, "{slot}"s
// capture the nonempty text in between. Templates never place two slots back
// to back. nullopt when the text does not fit.
std::optional<std::map<std::string, std::string>> match_template(
    const std::string& tpl, const std::string& text);

// Deterministic inverse of oracle::render_narrative: matches every sentence
// against the rendering grammar, rebuilds the event list (verifying exit
// locations by replay), and emits the ground-truth trajectory for the
// reconstructed scenario. Throws TemplateMismatchError on any sentence that
// does not match.
Trajectory reference_parse(const std::string& narrative,
                           const oracle::OracleScenario& scenario);

// Narrative-only variant: rebuilds the entity inventory from the placement
// paragraph first. An "X is in the Y" sentence names an object placement when
// Y is a container introduced earlier in the paragraph, otherwise a container
// in location Y; locations seen only in event sentences are inferred from the
// enter/exit grammar before the strict parse.
Trajectory reference_parse(const std::string& narrative);

}  // namespace s3ap
