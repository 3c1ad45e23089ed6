#include <optional>
#include <string>
#include <vector>

#include "doctest.h"
#include "s3ap/oracle.hpp"
#include "s3ap/parser.hpp"
#include "s3ap/schema.hpp"

using namespace s3ap;

TEST_SUITE_BEGIN("parser");

namespace {

oracle::OracleScenario transfer_scene() {
  oracle::OracleScenario sc;
  sc.locations = {"kitchen", "garden"};
  sc.containers = {{"basket", "kitchen"}, {"box", "kitchen"}};
  sc.objects = {{"apple", "basket"}};
  sc.agents = {{AgentId{"Sally"}, "kitchen"}, {AgentId{"Anne"}, "kitchen"}};
  sc.events = {
      oracle::Event{oracle::EventKind::Exit, AgentId{"Sally"}, "", "", "", {}},
      oracle::Event{oracle::EventKind::MoveObject, AgentId{"Anne"}, "", "apple",
                    "box", {}},
      oracle::Event{oracle::EventKind::PrivateTell, AgentId{"Anne"}, "", "apple",
                    "basket", AgentId{"Sally"}},
  };
  return sc;
}

struct FailingBackend : CompletionBackend {
  std::string complete(const CompletionRequest&) override {
    throw BackendError(BackendError::Kind::Auth, "key rejected");
  }
  BackendKind kind() const override { return BackendKind::ScriptedMock; }
  const std::string& identity() const override {
    static const std::string id = "failing";
    return id;
  }
};

}  // namespace

TEST_CASE("match_template captures slots between literal anchors") {
  auto m = match_template("{A} moved the {O} to the {C}.",
                          "Anne moved the apple to the box.");
  REQUIRE(m.has_value());
  CHECK((*m)["A"] == "Anne");
  CHECK((*m)["O"] == "apple");
  CHECK((*m)["C"] == "box");
}

TEST_CASE("match_template rejects leftovers, misses, and empty captures") {
  CHECK_FALSE(match_template("{A} is away.", "Bo is away. And more"));
  CHECK_FALSE(match_template("{A} is away.", "Bo is here."));
  CHECK_FALSE(match_template("a{X}b", "ab"));
  CHECK_FALSE(match_template("literal only", "something else"));
  CHECK(match_template("literal only", "literal only").has_value());
}

TEST_CASE("extract_first_json prefers fenced blocks and balances braces") {
  auto fenced = extract_first_json("Sure!\n```json\n{\"k\": \"v\"}\n```\ndone");
  REQUIRE(fenced.has_value());
  CHECK((*fenced)["k"] == "v");

  auto inline_doc = extract_first_json("prefix {\"a\": [1, 2], \"s\": \"}\"} suffix");
  REQUIRE(inline_doc.has_value());
  CHECK((*inline_doc)["a"][1] == 2);

  auto arr = extract_first_json("rows: [1, 2, 3]");
  REQUIRE(arr.has_value());
  CHECK(arr->is_array());

  CHECK_FALSE(extract_first_json("no json to be found").has_value());
  CHECK_FALSE(extract_first_json("broken { \"a\": ").has_value());
}

TEST_CASE("task kinds map to names and back") {
  CHECK(task_kind_name(TaskKind::FANToM) == "FANToM");
  CHECK(task_kind_from("tomi") == TaskKind::ToMi);
  CHECK(task_kind_from("HiToM") == TaskKind::HiToM);
  CHECK_FALSE(task_kind_from("frodo").has_value());
}

TEST_CASE("builtin tasks share the ToMi instructions across variants") {
  ParseTask tomi = ParseTask::builtin(TaskKind::ToMi);
  ParseTask para = ParseTask::builtin(TaskKind::ParaToMi);
  ParseTask generic = ParseTask::builtin(TaskKind::Generic);
  CHECK(tomi.instructions == para.instructions);
  CHECK_FALSE(tomi.instructions.empty());
  CHECK(generic.instructions.empty());
  CHECK_FALSE(generic.exemplar.empty());
}

TEST_CASE("the parse prompt embeds narrative, task, and schema") {
  ParseTask task = ParseTask::builtin(TaskKind::ToMi);
  const std::string narrative = "Sally is in the kitchen.";
  const std::string prompt = build_parse_prompt(narrative, task);
  CHECK(prompt.find(narrative) != std::string::npos);
  CHECK(prompt.find(task.instructions) != std::string::npos);
  CHECK(prompt.find("\"observations\"") != std::string::npos);
  CHECK(prompt.find("{context}") == std::string::npos);
  CHECK(prompt.find("{feedback}") == std::string::npos);
  CHECK(prompt.find("Previous attempt had these issues") == std::string::npos);

  const std::string with_feedback =
      build_parse_prompt(narrative, task, std::string("1. step 0: bad"));
  CHECK(with_feedback.find("Previous attempt had these issues") !=
        std::string::npos);
  CHECK(with_feedback.find("1. step 0: bad") != std::string::npos);

  CHECK_THROWS_AS(build_parse_prompt("   ", task), S3apError);
}

TEST_CASE("reference parse inverts the renderer exactly") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string expected =
      encode_trajectory(oracle::ground_truth_trajectory(sc), WireForm::ObjectMap);

  Trajectory with_inventory =
      reference_parse(oracle::render_narrative(sc), sc);
  CHECK(encode_trajectory(with_inventory, WireForm::ObjectMap) == expected);

  Trajectory narrative_only = reference_parse(oracle::render_narrative(sc));
  CHECK(encode_trajectory(narrative_only, WireForm::ObjectMap) == expected);
}

TEST_CASE("reference parse handles paraphrased surface forms") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string expected =
      encode_trajectory(oracle::ground_truth_trajectory(sc), WireForm::ObjectMap);
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const std::string fancy = oracle::render_narrative(sc, true, seed);
    CHECK(encode_trajectory(reference_parse(fancy, sc), WireForm::ObjectMap) ==
          expected);
    CHECK(encode_trajectory(reference_parse(fancy), WireForm::ObjectMap) ==
          expected);
  }
}

TEST_CASE("reference parse refuses off-grammar sentences") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string narrative = oracle::render_narrative(sc);
  CHECK_THROWS_AS(reference_parse(narrative + "\nSally vanished mysteriously.", sc),
                  TemplateMismatchError);
  CHECK_THROWS_AS(reference_parse("The vase is on the table. " + narrative, sc),
                  TemplateMismatchError);
  CHECK_THROWS_AS(
      reference_parse(narrative + "\nSally vanished mysteriously."),
      TemplateMismatchError);
}

TEST_CASE("reference parse verifies exit locations against replay") {
  oracle::OracleScenario sc = transfer_scene();
  sc.events.clear();
  const std::string lie =
      oracle::render_narrative(sc) + "\n\nSally exited the garden.";
  CHECK_THROWS_AS(reference_parse(lie, sc), TemplateMismatchError);
}

TEST_CASE("parse_narrative succeeds first try and stamps metadata") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string narrative = oracle::render_narrative(sc);
  const std::string payload =
      encode_trajectory(oracle::ground_truth_trajectory(sc), WireForm::ObjectMap);
  ScriptedMockBackend backend({"Here you go:\n```json\n" + payload + "```"},
                              "unit-mock");

  ParseResult result =
      parse_narrative(narrative, ParseTask::builtin(TaskKind::ToMi), backend);
  CHECK(result.attempts.size() == 1);
  CHECK(result.attempts[0].issues.empty());
  CHECK(result.trajectory.metadata.at("source_narrative") == narrative);
  CHECK(result.trajectory.metadata.at("task") == "ToMi");
  CHECK(result.trajectory.metadata.at("backend") == "unit-mock");
  CHECK(result.trajectory.metadata.at("attempts") == "1");

  Trajectory stripped = result.trajectory;
  stripped.metadata.clear();
  CHECK(encode_trajectory(stripped, WireForm::ObjectMap) == payload);

  REQUIRE(backend.seen_requests().size() == 1);
  CHECK(backend.seen_requests()[0].temperature == 0.0);
  CHECK_FALSE(backend.seen_requests()[0].constrained_schema.has_value());
}

TEST_CASE("parse_narrative feeds validation issues back into the retry") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string narrative = oracle::render_narrative(sc);
  const std::string payload =
      encode_trajectory(oracle::ground_truth_trajectory(sc), WireForm::ObjectMap);
  ScriptedMockBackend backend({"not json at all", payload});

  ParseResult result =
      parse_narrative(narrative, ParseTask::builtin(TaskKind::ToMi), backend);
  REQUIRE(result.attempts.size() == 2);
  CHECK_FALSE(result.attempts[0].issues.empty());
  CHECK(result.attempts[0].prompt.find("Previous attempt") == std::string::npos);
  CHECK(result.attempts[1].prompt.find("Previous attempt had these issues") !=
        std::string::npos);
  CHECK(result.trajectory.metadata.at("attempts") == "2");
}

TEST_CASE("parse_narrative reports every failed attempt") {
  oracle::OracleScenario sc = transfer_scene();
  const std::string narrative = oracle::render_narrative(sc);
  ScriptedMockBackend backend({"junk", "more junk", "still junk"});
  try {
    parse_narrative(narrative, ParseTask::builtin(TaskKind::ToMi), backend, 2);
    FAIL("expected ParseFailedError");
  } catch (const ParseFailedError& e) {
    CHECK(e.attempts().size() == 3);
    CHECK(std::string(e.what()).find("3 attempt(s)") != std::string::npos);
    for (const ParseAttempt& attempt : e.attempts()) {
      CHECK_FALSE(attempt.issues.empty());
    }
  }
}

TEST_CASE("parse_narrative annotates backend failures with the attempt") {
  FailingBackend backend;
  try {
    parse_narrative("Sally is away.", ParseTask::builtin(TaskKind::Generic),
                    backend);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.kind == BackendError::Kind::Auth);
    CHECK(std::string(e.what()).find("(parse attempt 0)") != std::string::npos);
  }
}

TEST_SUITE_END();
