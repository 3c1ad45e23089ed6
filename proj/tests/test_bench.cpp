#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "s3ap/bench.hpp"
#include "s3ap/oracle.hpp"
#include "s3ap/schema.hpp"

using namespace s3ap;
using namespace s3ap::bench;

TEST_SUITE_BEGIN("bench");

namespace {

oracle::OracleScenario sally_anne() {
  oracle::OracleScenario sc;
  sc.locations = {"kitchen", "garden"};
  sc.containers = {{"basket", "kitchen"}, {"box", "kitchen"}};
  sc.objects = {{"apple", "basket"}};
  sc.agents = {{AgentId{"Sally"}, "kitchen"}, {AgentId{"Anne"}, "kitchen"}};
  sc.events = {
      {oracle::EventKind::Exit, AgentId{"Sally"}, "", "", "", {}},
      {oracle::EventKind::MoveObject, AgentId{"Anne"}, "", "apple", "box", {}},
  };
  return sc;
}

struct BenchTempDir {
  std::filesystem::path path;
  BenchTempDir() {
    path = std::filesystem::temp_directory_path() /
           ("s3ap-bench-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~BenchTempDir() { std::filesystem::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

QAItem mc_item(const std::string& gold_of_three, int gold_index,
               std::optional<std::string> group = std::nullopt) {
  QAItem item;
  item.context_id = "ctx";
  item.context = "stub context";
  item.question = "pick " + gold_of_three;
  item.answer_spec = MultipleChoice{{"basket", "box", "chest"}, gold_index};
  item.group_id = std::move(group);
  return item;
}

}  // namespace

TEST_CASE("multiple choice scoring takes the first valid token") {
  QAItem item = mc_item("box", 1);
  CHECK(score_answer(item, "(B)"));
  CHECK(score_answer(item, "The answer is B."));
  CHECK(score_answer(item, "I think b."));  // 'I' is out of range, skipped
  CHECK(score_answer(item, "2"));
  CHECK(score_answer(item, "option 2: box"));
  CHECK_FALSE(score_answer(item, "A"));
  CHECK_FALSE(score_answer(item, "d"));
  CHECK_FALSE(score_answer(item, "42"));
  CHECK_FALSE(score_answer(item, "B2"));
  CHECK_FALSE(score_answer(item, ""));
  CHECK_FALSE(score_answer(item, "no letter here"));  // n, h are out of range
}

TEST_CASE("list scoring compares normalized sets") {
  QAItem item;
  item.context_id = "ctx";
  item.context = "stub";
  item.question = "who";
  item.answer_spec = ListAnswer{{"Sally", "Anne"}};
  CHECK(score_answer(item, "anne, sally"));
  CHECK(score_answer(item, "Sally.\nAnne"));
  CHECK(score_answer(item, "Anne, anne, Sally"));
  CHECK_FALSE(score_answer(item, "Sally"));
  CHECK_FALSE(score_answer(item, "sally, anne, mark"));
  CHECK_FALSE(score_answer(item, ""));
}

TEST_CASE("exact scoring normalizes case and punctuation") {
  QAItem item;
  item.context_id = "ctx";
  item.context = "stub";
  item.question = "is it";
  item.answer_spec = ExactText{"yes"};
  CHECK(score_answer(item, "Yes."));
  CHECK(score_answer(item, "  YES  "));
  CHECK_FALSE(score_answer(item, "no"));
  CHECK_FALSE(score_answer(item, "yes sir"));
  CHECK_FALSE(score_answer(item, ""));
}

TEST_CASE("the qa prompt fills its three slots") {
  std::string prompt = build_qa_prompt("a tale", std::nullopt, "what happened?");
  CHECK(prompt.rfind("## Context\n", 0) == 0);
  CHECK(prompt.find("a tale") != std::string::npos);
  CHECK(prompt.find("(none)") != std::string::npos);
  CHECK(prompt.find("what happened?") != std::string::npos);

  std::string with_extra = build_qa_prompt("a tale", "STRUCTURED", "what?");
  CHECK(with_extra.find("STRUCTURED") != std::string::npos);
  CHECK(with_extra.find("(none)") == std::string::npos);

  CHECK_THROWS_AS(build_qa_prompt("  ", std::nullopt, "q"), S3apError);
  CHECK_THROWS_AS(build_qa_prompt("c", std::nullopt, ""), S3apError);
}

TEST_CASE("all-qs credits only fully correct groups") {
  auto rec = [](const char* group, bool correct) {
    ItemRecord r;
    r.context_id = group;
    r.group_id = group;
    r.correct = correct;
    return r;
  };
  std::vector<ItemRecord> records = {rec("g1", true), rec("g1", true),
                                     rec("g2", true), rec("g2", false)};
  CHECK(all_qs_score(records) == doctest::Approx(0.5));
  CHECK(all_qs_score({}) == 0.0);

  records.push_back(ItemRecord{"loose", std::nullopt, "", "", true, ""});
  CHECK_THROWS_AS(all_qs_score(records), MissingGroupError);
}

TEST_CASE("names map to formats and conditions") {
  CHECK(dataset_format_from("synthetic") == DatasetFormat::S3apSynthetic);
  CHECK(dataset_format_from("s3ap-synthetic") == DatasetFormat::S3apSynthetic);
  CHECK(dataset_format_from("jsonl") == DatasetFormat::GenericJsonl);
  CHECK(dataset_format_from("generic-jsonl") == DatasetFormat::GenericJsonl);
  CHECK_FALSE(dataset_format_from("csv").has_value());

  CHECK(condition_from("baseline") == Condition::Baseline);
  CHECK(condition_from("with-s3ap") == Condition::WithS3ap);
  CHECK(condition_from("s3ap") == Condition::WithS3ap);
  CHECK_FALSE(condition_from("plain").has_value());
  CHECK(condition_name(Condition::Baseline) == "baseline");
  CHECK(condition_name(Condition::WithS3ap) == "with-s3ap");
}

TEST_CASE("synthesized qa covers truth, beliefs, nesting, and presence") {
  oracle::OracleScenario sc = sally_anne();
  const std::string narrative = oracle::render_narrative(sc);
  std::vector<QAItem> items = synthesize_qa(sc, "ctx-1", narrative);
  REQUIRE(items.size() == 8);
  for (const QAItem& item : items) {
    CHECK(item.context_id == "ctx-1");
    CHECK(item.group_id == "ctx-1");
    CHECK(item.context == narrative);
  }

  CHECK(items[0].question ==
        "Where is the apple?\n(A) basket\n(B) box");
  CHECK(std::get<MultipleChoice>(items[0].answer_spec).gold_index == 1);

  CHECK(items[1].question.rfind("Where will Sally look for the apple?", 0) == 0);
  CHECK(std::get<MultipleChoice>(items[1].answer_spec).gold_index == 0);

  CHECK(items[2].question.rfind(
            "Where does Sally think that Anne will look for the apple?", 0) == 0);
  CHECK(std::get<MultipleChoice>(items[2].answer_spec).gold_index == 0);

  CHECK(items[3].question.rfind("Where will Anne look for the apple?", 0) == 0);
  CHECK(std::get<MultipleChoice>(items[3].answer_spec).gold_index == 1);

  CHECK(items[4].question.rfind(
            "Where does Anne think that Sally will look for the apple?", 0) == 0);
  CHECK(std::get<MultipleChoice>(items[4].answer_spec).gold_index == 0);

  CHECK(items[5].question == "Is the apple in the basket? Answer yes or no.");
  CHECK(std::get<ExactText>(items[5].answer_spec).gold == "no");
  CHECK(items[6].question == "Is the apple in the box? Answer yes or no.");
  CHECK(std::get<ExactText>(items[6].answer_spec).gold == "yes");

  CHECK(items[7].question == "Which agents are in the kitchen?");
  CHECK(std::get<ListAnswer>(items[7].answer_spec).gold_set ==
        std::vector<std::string>{"Anne"});
}

TEST_CASE("trajectories invert back into scenarios") {
  oracle::OracleScenario sc = sally_anne();
  Trajectory traj = oracle::ground_truth_trajectory(sc);
  oracle::OracleScenario back = scenario_from_trajectory(traj);

  CHECK(back.containers == sc.containers);
  CHECK(back.objects == sc.objects);
  CHECK(back.agents == sc.agents);
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[0].kind == oracle::EventKind::Exit);
  CHECK(back.events[1].kind == oracle::EventKind::MoveObject);
  CHECK(back.events[1].object == "apple");
  CHECK(back.events[1].container == "box");

  std::vector<oracle::WorldSnapshot> snaps = oracle::simulate(back);
  CHECK(oracle::query_belief(snaps, {AgentId{"Sally"}}, "apple", 2) == "basket");
  CHECK(oracle::query_belief(snaps, {}, "apple", 2) == "box");

  CHECK_THROWS_AS(scenario_from_trajectory(Trajectory{}), TemplateMismatchError);

  Trajectory rogue = traj;
  rogue.steps[1].actions.set(AgentId{"Anne"}, AgentAction{"flew to the moon"});
  CHECK_THROWS_AS(scenario_from_trajectory(rogue), TemplateMismatchError);

  Trajectory odd_state = traj;
  odd_state.steps.front().state = "Chaos reigns everywhere.";
  CHECK_THROWS_AS(scenario_from_trajectory(odd_state), TemplateMismatchError);
}

TEST_CASE("datasets survive a save and load cycle") {
  BenchTempDir dir;
  oracle::OracleScenario sc = sally_anne();
  std::vector<QAItem> items =
      synthesize_qa(sc, "ctx-1", oracle::render_narrative(sc));

  const std::string path = dir.file("items.jsonl");
  save_dataset(items, path);
  std::vector<QAItem> loaded = load_dataset(path, DatasetFormat::S3apSynthetic);
  REQUIRE(loaded.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(loaded[i].to_json() == items[i].to_json());
  }
}

TEST_CASE("generic jsonl accepts flattened answer shims") {
  BenchTempDir dir;
  const std::string path = dir.file("generic.jsonl");
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"context": "shared text", "question": "q1", "options": ["a", "b"], "gold_index": 1})"
        << "\n"
        << R"({"context": "shared text", "question": "q2", "gold_set": ["x", "y"]})"
        << "\n"
        << R"({"context": "shared text", "question": "q3", "gold": "z"})" << "\n";
  }
  std::vector<QAItem> items = load_dataset(path, DatasetFormat::GenericJsonl);
  REQUIRE(items.size() == 3);
  CHECK(std::holds_alternative<MultipleChoice>(items[0].answer_spec));
  CHECK(std::holds_alternative<ListAnswer>(items[1].answer_spec));
  CHECK(std::holds_alternative<ExactText>(items[2].answer_spec));
  CHECK(items[0].context_id.rfind("ctx-", 0) == 0);
  CHECK(items[0].context_id.size() == 16);
  CHECK(items[0].context_id == items[2].context_id);
  CHECK_FALSE(items[0].group_id.has_value());

  // The synthetic reader insists on explicit ids and an answer object.
  CHECK_THROWS_AS(load_dataset(path, DatasetFormat::S3apSynthetic),
                  DatasetFormatError);
}

TEST_CASE("dataset errors carry the offending line number") {
  BenchTempDir dir;
  const std::string path = dir.file("broken.jsonl");
  {
    std::ofstream out(path, std::ios::binary);
    out << R"({"context": "c", "question": "q", "gold": "g"})" << "\n";
    out << "\n";  // blank lines are skipped
    out << "not json\n";
  }
  try {
    load_dataset(path, DatasetFormat::GenericJsonl);
    FAIL("expected DatasetFormatError");
  } catch (const DatasetFormatError& e) {
    CHECK(e.line == 3);
  }

  const std::string bad_gold = dir.file("bad-gold.jsonl");
  {
    std::ofstream out(bad_gold, std::ios::binary);
    out << R"({"context": "c", "question": "q", "options": ["a"], "gold_index": 5})"
        << "\n";
  }
  CHECK_THROWS_AS(load_dataset(bad_gold, DatasetFormat::GenericJsonl),
                  DatasetFormatError);
  CHECK_THROWS_AS(load_dataset(dir.file("missing.jsonl"), DatasetFormat::GenericJsonl),
                  S3apError);
}

TEST_CASE("the rule reader answers from structure and guesses without it") {
  RuleReaderBackend reader;
  CHECK(reader.identity() == "rule-reader");
  CHECK(reader.kind() == BackendKind::OracleBacked);

  CompletionRequest request;
  request.model_id = reader.default_model();
  request.messages = {
      {"user", build_qa_prompt("a tale", std::nullopt, "Where is the apple?")}};
  CHECK(reader.complete(request) == "(A)");

  request.messages = {
      {"user", build_qa_prompt("a tale", "not a trajectory", "Where is it?")}};
  CHECK(reader.complete(request) == "unknown");

  request.messages = {{"user", "hello"}};
  CHECK_THROWS_AS(reader.complete(request), S3apError);
  request.messages = {{"system", "hi"}};
  CHECK_THROWS_AS(reader.complete(request), S3apError);
}

TEST_CASE("structure lifts the rule reader from guessing to perfect") {
  oracle::OracleScenario sc = sally_anne();
  const std::string narrative = oracle::render_narrative(sc);
  std::vector<QAItem> items = synthesize_qa(sc, "ctx-1", narrative);
  RuleReaderBackend reader;
  ParserConfig parser;  // reference

  RunReport with = run_benchmark(items, Condition::WithS3ap, parser, reader);
  CHECK(with.accuracy == doctest::Approx(1.0));
  REQUIRE(with.all_qs.has_value());
  CHECK(*with.all_qs == doctest::Approx(1.0));
  CHECK(with.condition == "with-s3ap");
  CHECK(with.config.at("parser") == "reference");
  CHECK(with.config.at("parser_calls") == "1");
  CHECK(with.records.size() == items.size());
  for (const ItemRecord& rec : with.records) {
    CHECK(rec.correct);
    CHECK(rec.note.empty());
    CHECK(rec.prompt_digest.size() == 64);
  }

  RunReport base = run_benchmark(items, Condition::Baseline, parser, reader);
  CHECK(base.accuracy == doctest::Approx(3.0 / 8.0));
  REQUIRE(base.all_qs.has_value());
  CHECK(*base.all_qs == 0.0);
  CHECK(base.config.at("parser") == "none");
  CHECK(base.config.at("parser_calls") == "0");

  RunReport again = run_benchmark(items, Condition::WithS3ap, parser, reader);
  CHECK(again.to_json() == with.to_json());

  CHECK_THROWS_AS(run_benchmark(items, Condition::Baseline, parser, reader, 0),
                  S3apError);
  ParserConfig llm;
  llm.kind = ParserConfig::Kind::Llm;
  CHECK_THROWS_AS(run_benchmark(items, Condition::WithS3ap, llm, reader),
                  S3apError);
}

TEST_CASE("an llm parser feeds the same pipeline") {
  oracle::OracleScenario sc = sally_anne();
  const std::string narrative = oracle::render_narrative(sc);
  std::vector<QAItem> items = synthesize_qa(sc, "ctx-1", narrative);

  const std::string payload =
      encode_trajectory(oracle::ground_truth_trajectory(sc), WireForm::ObjectMap);
  ScriptedMockBackend parser_model({payload});
  ParserConfig parser;
  parser.kind = ParserConfig::Kind::Llm;
  parser.task = ParseTask::builtin(TaskKind::ToMi);
  parser.backend = &parser_model;

  RuleReaderBackend reader;
  RunReport report = run_benchmark(items, Condition::WithS3ap, parser, reader);
  CHECK(report.accuracy == doctest::Approx(1.0));
  CHECK(report.config.at("parser") == "llm:scripted-mock");
  CHECK(parser_model.calls() == 1);  // one distinct context
}

TEST_CASE("per-item failures are recorded, not fatal") {
  oracle::OracleScenario sc = sally_anne();
  std::vector<QAItem> items =
      synthesize_qa(sc, "ctx-1", oracle::render_narrative(sc));
  items.resize(2);

  ScriptedMockBackend answers({"(B) box"});
  ParserConfig parser;
  RunReport report =
      run_benchmark(items, Condition::Baseline, parser, answers, 1);
  CHECK(report.records[0].correct);
  CHECK(report.records[1].note.rfind("answer failed:", 0) == 0);
  CHECK_FALSE(report.records[1].correct);
  CHECK(report.accuracy == doctest::Approx(0.5));

  QAItem off_grammar = items[0];
  off_grammar.context_id = "ctx-odd";
  off_grammar.context = "The narrative grammar does not cover this.";
  ScriptedMockBackend silent({});
  RunReport parse_fail =
      run_benchmark({off_grammar}, Condition::WithS3ap, parser, silent, 1);
  CHECK(parse_fail.records[0].note.rfind("parse failed:", 0) == 0);
  CHECK_FALSE(parse_fail.records[0].correct);
  CHECK(parse_fail.accuracy == 0.0);
  CHECK(silent.calls() == 0);
}

TEST_CASE("reports serialize byte-identically across reruns") {
  oracle::OracleScenario sc = sally_anne();
  std::vector<QAItem> items =
      synthesize_qa(sc, "ctx-1", oracle::render_narrative(sc));
  RuleReaderBackend reader;
  ParserConfig parser;
  RunReport base = run_benchmark(items, Condition::Baseline, parser, reader);
  RunReport with = run_benchmark(items, Condition::WithS3ap, parser, reader);

  BenchTempDir dir;
  write_reports({base, with}, dir.file("one"));
  write_reports({base, with}, dir.file("two"));
  CHECK(slurp(dir.file("one") + "/report.json") ==
        slurp(dir.file("two") + "/report.json"));
  CHECK(slurp(dir.file("one") + "/report.md") ==
        slurp(dir.file("two") + "/report.md"));

  nlohmann::ordered_json doc =
      nlohmann::ordered_json::parse(slurp(dir.file("one") + "/report.json"));
  CHECK(doc["runs"].size() == 2);

  const std::string md = slurp(dir.file("one") + "/report.md");
  CHECK(md.find("| synthetic | 8 | 0.3750 | 1.0000 | 0.0000 | 1.0000 |") !=
        std::string::npos);
}

TEST_SUITE_END();
