#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "s3ap/backend.hpp"
#include "s3ap/oracle.hpp"
#include "s3ap/parser.hpp"

namespace s3ap::bench {

struct MultipleChoice {
  std::vector<std::string> options;
  int gold_index = 0;
};
struct ListAnswer {
  std::vector<std::string> gold_set;
};
struct ExactText {
  std::string gold;
};
using AnswerSpec = std::variant<MultipleChoice, ListAnswer, ExactText>;

struct QAItem {
  std::string context_id;
  std::string context;
  std::string question;
  AnswerSpec answer_spec;
  std::optional<std::string> group_id;

  nlohmann::ordered_json to_json() const;
};

enum class DatasetFormat { S3apSynthetic, GenericJsonl };

std::optional<DatasetFormat> dataset_format_from(const std::string& name);

// JSON Lines. The synthetic format is the strict schema `gen` emits
// (context_id required, answer under an "answer" object). GenericJsonl
// accepts the flattened shims described in the README and derives a stable
// context_id from the context text when absent. Throws DatasetFormatError
// carrying the 1-based line number.
std::vector<QAItem> load_dataset(const std::string& path, DatasetFormat format);
void save_dataset(const std::vector<QAItem>& items, const std::string& path);

// Fills the QA template. Absent extra_info renders as "(none)".
std::string build_qa_prompt(const std::string& context,
                            const std::optional<std::string>& extra_info,
                            const std::string& question);

// MultipleChoice: first standalone option letter or 1-based index, case
// insensitive. ListAnswer: normalized set equality (trim, lowercase, strip
// punctuation, split on commas and newlines). ExactText: normalized equality.
// Unparseable responses score incorrect.
bool score_answer(const QAItem& item, const std::string& response);

struct ItemRecord {
  std::string context_id;
  std::optional<std::string> group_id;
  std::string prompt_digest;
  std::string answer;
  bool correct = false;
  std::string note;  // nonempty iff an error was recorded for the item
};

struct RunReport {
  std::string task;
  std::string condition;
  std::vector<ItemRecord> records;
  double accuracy = 0.0;
  std::optional<double> all_qs;
  std::map<std::string, std::string> config;

  nlohmann::ordered_json to_json() const;
};

// Fraction of groups in which every record is correct. Throws
// MissingGroupError when any record lacks a group id.
double all_qs_score(const std::vector<ItemRecord>& records);

enum class Condition { Baseline, WithS3ap };

std::string condition_name(Condition condition);
std::optional<Condition> condition_from(const std::string& name);

struct ParserConfig {
  enum class Kind { Reference, Llm };
  Kind kind = Kind::Reference;
  ParseTask task;                        // Llm only
  CompletionBackend* backend = nullptr;  // Llm only
  int max_retries = 2;
};

// Per item: (WithS3ap only) parse the context, assemble the prompt, query the
// answer backend, score. Contexts are parsed once per distinct context_id and
// never under Baseline. Items run concurrently up to `parallelism`; per-item
// failures are recorded as incorrect with a note and never abort the run.
RunReport run_benchmark(const std::vector<QAItem>& items, Condition condition,
                        const ParserConfig& parser, CompletionBackend& answers,
                        int parallelism = 4, const std::string& task = "synthetic");

// report.json holds {"runs": [...]}; report.md is a side-by-side accuracy
// table over the conditions present.
std::string render_report_markdown(const std::vector<RunReport>& reports);
void write_reports(const std::vector<RunReport>& reports, const std::string& dir);

// Belief and location questions with oracle gold answers. Multiple-choice
// options are the scenario's containers; every item's group_id is the
// context_id.
std::vector<QAItem> synthesize_qa(const oracle::OracleScenario& scenario,
                                  const std::string& context_id,
                                  const std::string& context);

// Inverts a ground-truth-grammar trajectory (state text of step 0 plus the
// recorded action texts) back into a scenario.
oracle::OracleScenario scenario_from_trajectory(const Trajectory& traj);

// Answer backend that decodes the trajectory in the prompt's Extra Info
// section, rebuilds the scenario, and reads the asked-for belief off the
// simulation. Without extra info it falls back to a fixed "(A)" guess.
class RuleReaderBackend : public CompletionBackend {
 public:
  std::string complete(const CompletionRequest& request) override;
  BackendKind kind() const override { return BackendKind::OracleBacked; }
  const std::string& identity() const override;
};

}  // namespace s3ap::bench
