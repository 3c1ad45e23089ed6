#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "s3ap/schema.hpp"
#include "test_util.hpp"

using namespace s3ap;

TEST_SUITE_BEGIN("schema");

namespace {

SimulationStep sample_step() {
  SimulationStep step;
  step.timestep.raw = "3";
  step.timestep.ordinal = 3;
  step.state = "Rex and Una face each other across the table.";
  step.observations.set(AgentId{"Rex"}, ObservationExpr{"<same_as_state />"});
  step.observations.set(
      AgentId{"Una"},
      ObservationExpr{"<same_as_last_action_1 /> <mental_state>she suspects a "
                      "bluff</mental_state>"});
  step.actions.set(AgentId{"Rex"}, AgentAction{"raises the stakes"});
  step.actions.set(AgentId{"Una"}, AgentAction{"none"});
  return step;
}

bool has_code(const std::vector<ValidationIssue>& issues, IssueCode code) {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const ValidationIssue& i) { return i.code == code; });
}

}  // namespace

TEST_CASE("object-map wire form keys payloads by agent name") {
  nlohmann::ordered_json doc =
      encode_step_json(sample_step(), WireForm::ObjectMap);
  CHECK(doc["timestep"] == "3");
  CHECK(doc["observations"].is_object());
  CHECK(doc["observations"]["Rex"] == "<same_as_state />");
  CHECK(doc["actions"]["Una"] == "none");
}

TEST_CASE("string-list wire form prefixes payloads with the agent name") {
  nlohmann::ordered_json doc =
      encode_step_json(sample_step(), WireForm::StringList);
  CHECK(doc["observations"].is_array());
  CHECK(doc["observations"][0] == "Rex: <same_as_state />");
  CHECK(doc["actions"][1] == "Una: none");
}

TEST_CASE("decode infers the wire form from the observations shape") {
  for (WireForm form : {WireForm::ObjectMap, WireForm::StringList}) {
    StepDecodeResult r = decode_step(encode_step(sample_step(), form));
    REQUIRE(r.step.has_value());
    CHECK(r.issues.empty());
    CHECK(testutil::same_step(*r.step, sample_step()));
  }
}

TEST_CASE("round trips hold on generated steps in both forms") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    Trajectory traj = testutil::random_trajectory(rng);
    for (WireForm form : {WireForm::ObjectMap, WireForm::StringList}) {
      const std::string wire = encode_step(traj.steps[0], form);
      StepDecodeResult r = decode_step(wire);
      REQUIRE(r.step.has_value());
      CHECK(testutil::same_step(*r.step, traj.steps[0]));
      CHECK(encode_step(*r.step, form) == wire);
    }
  }
}

TEST_CASE("missing fields are all reported with paths") {
  StepDecodeResult r = decode_step(R"({"timestep": "0"})");
  CHECK_FALSE(r.step.has_value());
  CHECK(has_code(r.issues, IssueCode::MissingField));
  CHECK(r.issues.size() >= 3);
  for (const ValidationIssue& issue : r.issues) {
    CHECK_FALSE(issue.path.empty());
  }
}

TEST_CASE("agent sets must match between observations and actions") {
  StepDecodeResult r = decode_step(
      R"({"timestep": "0", "state": "s",
          "observations": {"A": "none", "B": "none"},
          "actions": {"A": "none"}})");
  CHECK_FALSE(r.step.has_value());
  CHECK(has_code(r.issues, IssueCode::AgentSetMismatch));
}

TEST_CASE("string-list entries need the name prefix") {
  StepDecodeResult r = decode_step(
      R"({"timestep": "0", "state": "s",
          "observations": ["A: none", "missing separator"],
          "actions": ["A: none", "B: none"]})");
  CHECK_FALSE(r.step.has_value());
  CHECK(has_code(r.issues, IssueCode::BadEntryFormat));
}

TEST_CASE("malformed tags are validation issues, not exceptions") {
  StepDecodeResult r = decode_step(
      R"({"timestep": "0", "state": "s",
          "observations": {"A": "<same_as_last_action_x />"},
          "actions": {"A": "none"}})");
  CHECK_FALSE(r.step.has_value());
  CHECK(has_code(r.issues, IssueCode::MalformedTag));
}

TEST_CASE("non-json input yields a parse issue") {
  StepDecodeResult r = decode_step("not json at all");
  CHECK_FALSE(r.step.has_value());
  CHECK(has_code(r.issues, IssueCode::ParseError));
}

TEST_CASE("trajectory decode accepts wrapper, bare array, and single step") {
  Trajectory traj;
  traj.agents = {AgentId{"Rex"}, AgentId{"Una"}};
  traj.steps.push_back(sample_step());
  const std::string wrapped = encode_trajectory(traj, WireForm::ObjectMap);

  TrajectoryDecodeResult a = decode_trajectory(wrapped);
  REQUIRE(a.trajectory.has_value());
  CHECK(a.trajectory->agents == traj.agents);
  CHECK(testutil::same_step(a.trajectory->steps[0], traj.steps[0]));

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  arr.push_back(encode_step_json(sample_step(), WireForm::ObjectMap));
  TrajectoryDecodeResult b = decode_trajectory(arr.dump());
  REQUIRE(b.trajectory.has_value());
  CHECK(b.trajectory->steps.size() == 1);

  TrajectoryDecodeResult c =
      decode_trajectory(encode_step(sample_step(), WireForm::ObjectMap));
  REQUIRE(c.trajectory.has_value());
  CHECK(c.trajectory->steps.size() == 1);
}

TEST_CASE("trajectory decode normalizes ordinals by position") {
  std::mt19937_64 rng(12);
  Trajectory traj = testutil::random_trajectory(rng, {2, 3, 3, 5, true});
  TrajectoryDecodeResult r =
      decode_trajectory(encode_trajectory(traj, WireForm::StringList));
  REQUIRE(r.trajectory.has_value());
  for (std::size_t t = 0; t < r.trajectory->steps.size(); ++t) {
    CHECK(r.trajectory->steps[t].timestep.ordinal == t);
  }
}

TEST_CASE("trajectory encoding ends with a newline and is stable") {
  Trajectory traj;
  traj.agents = {AgentId{"Rex"}, AgentId{"Una"}};
  traj.steps.push_back(sample_step());
  const std::string once = encode_trajectory(traj, WireForm::ObjectMap);
  CHECK(once.back() == '\n');
  CHECK(once == encode_trajectory(traj, WireForm::ObjectMap));
}

TEST_CASE("save and load round-trip through a file") {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() / "s3ap-schema-roundtrip.json";
  Trajectory traj;
  traj.agents = {AgentId{"Rex"}, AgentId{"Una"}};
  traj.steps.push_back(sample_step());
  traj.metadata["note"] = "round trip";
  save_trajectory_file(traj, path.string());
  Trajectory back = load_trajectory_file(path.string());
  CHECK(back.agents == traj.agents);
  CHECK(back.metadata.at("note") == "round trip");
  CHECK(testutil::same_step(back.steps[0], traj.steps[0]));
  fs::remove(path);

  std::ofstream(path.string()) << "{broken";
  CHECK_THROWS_AS(load_trajectory_file(path.string()), S3apError);
  fs::remove(path);
}

TEST_CASE("feedback numbers every issue with its path") {
  std::vector<ValidationIssue> issues = {
      {"steps[0].state", IssueCode::EmptyValue, "state must not be empty"},
      {"steps[1]", IssueCode::NonObjectStep, "step must be an object"},
  };
  const std::string feedback = issues_to_feedback(issues);
  CHECK(feedback.find("1.") != std::string::npos);
  CHECK(feedback.find("2.") != std::string::npos);
  CHECK(feedback.find("steps[0].state") != std::string::npos);
  CHECK(feedback.find("step must be an object") != std::string::npos);
}

TEST_CASE("embedded schema is valid json with both layouts described") {
  nlohmann::ordered_json doc =
      nlohmann::ordered_json::parse(embedded_schema(), nullptr, false);
  REQUIRE_FALSE(doc.is_discarded());
  CHECK(doc["title"] == "SocializedStructure");
  CHECK(doc["properties"]["observations"]["type"] == "object");
  CHECK(doc["definitions"]["SocializedStructureForModel"]["properties"]
           ["observations"]["type"] == "array");
}

TEST_CASE("embedded schema equals the checked-in fixture canonically") {
  std::ifstream in(std::string(S3AP_FIXTURE_DIR) +
                   "/socialized_structure.schema.json");
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::ordered_json fixture =
      nlohmann::ordered_json::parse(buf.str(), nullptr, false);
  nlohmann::ordered_json embedded =
      nlohmann::ordered_json::parse(embedded_schema(), nullptr, false);
  REQUIRE_FALSE(fixture.is_discarded());
  CHECK(fixture.dump() == embedded.dump());
}

TEST_SUITE_END();
