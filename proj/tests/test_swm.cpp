#include <string>
#include <vector>

#include "doctest.h"
#include "s3ap/schema.hpp"
#include "s3ap/swm.hpp"

using namespace s3ap;

TEST_SUITE_BEGIN("swm");

namespace {

const AgentId kAna{"Ana"};
const AgentId kBix{"Bix"};
const AgentId kCal{"Cal"};

SimulationStep make_step(std::size_t ordinal, const std::string& state,
                         std::vector<std::pair<AgentId, std::string>> actions) {
  SimulationStep step;
  step.timestep.raw = std::to_string(ordinal);
  step.timestep.ordinal = ordinal;
  step.state = state;
  for (const auto& [agent, action] : actions) {
    step.observations.set(agent, ObservationExpr{"watches the room"});
    step.actions.set(agent, AgentAction{action});
  }
  return step;
}

Trajectory base_trajectory() {
  Trajectory traj;
  traj.agents = {kAna, kBix};
  traj.steps.push_back(make_step(0, "a quiet room", {{kAna, "none"}, {kBix, "none"}}));
  return traj;
}

// Echoes the queried ego action into a synthesized next step.
class StubModel : public SocialWorldModel {
 public:
  AgentMap<AgentAction> predict_others_actions(const SwmQuery& query) override {
    ++others_calls;
    AgentMap<AgentAction> out;
    for (const AgentId& agent : query.trajectory.agents) {
      if (!(agent == query.ego)) out.set(agent, AgentAction{"none"});
    }
    return out;
  }

  NextStepPrediction predict_next_step(const SwmQuery& query) override {
    ++next_calls;
    NextStepPrediction pred;
    std::vector<std::pair<AgentId, std::string>> actions;
    for (const AgentId& agent : query.trajectory.agents) {
      actions.emplace_back(agent, agent == query.ego ? query.ego_action->raw
                                                     : std::string("none"));
    }
    pred.next_step = make_step(query.trajectory.steps.size(),
                               "predicted state " +
                                   std::to_string(query.trajectory.steps.size()),
                               actions);
    for (const auto& [agent, action] : pred.next_step.actions) {
      if (!(agent == query.ego)) pred.others_actions.set(agent, action);
    }
    return pred;
  }

  NextStepPrediction predict_next_step_given(
      const SwmQuery& query, const AgentMap<AgentAction>&) override {
    ++given_calls;
    return predict_next_step(query);
  }

  std::string identity() const override { return "stub"; }

  int others_calls = 0;
  int next_calls = 0;
  int given_calls = 0;
};

}  // namespace

TEST_CASE("queries insist the ego belongs to the trajectory") {
  SwmQuery query{base_trajectory(), AgentId{"Zed"}, std::nullopt};
  CHECK_THROWS_AS(query.validate(), UnknownAgentError);
}

TEST_CASE("llm swm parses others-actions lines, last entry winning") {
  Trajectory traj = base_trajectory();
  traj.agents.push_back(kCal);
  traj.steps[0].observations.set(kCal, ObservationExpr{"none"});
  traj.steps[0].actions.set(kCal, AgentAction{"none"});

  ScriptedMockBackend backend(
      {"Bix: waves\nsome commentary without meaning\nBix: nods\n- Cal:"});
  LlmSwm swm(backend);
  CHECK(swm.identity() == "llm-swm:scripted-mock");

  AgentMap<AgentAction> out =
      swm.predict_others_actions(SwmQuery{traj, kAna, std::nullopt});
  CHECK(out.size() == 2);
  CHECK(out.at(kBix).raw == "nods");
  CHECK(out.at(kCal).raw == "none");
  CHECK_FALSE(out.contains(kAna));

  const std::string prompt = backend.seen_requests()[0].messages[0].content;
  CHECK(prompt.find("Ana") != std::string::npos);
  CHECK(prompt.find("watches the room") != std::string::npos);
}

TEST_CASE("llm swm fails loudly when an agent line is missing") {
  ScriptedMockBackend backend({"Nobody: idles"});
  LlmSwm swm(backend);
  CHECK_THROWS_AS(
      swm.predict_others_actions(SwmQuery{base_trajectory(), kAna, std::nullopt}),
      PredictionDecodeError);
}

TEST_CASE("the two prediction entry points enforce the ego_action contract") {
  ScriptedMockBackend backend({});
  LlmSwm swm(backend);
  Trajectory traj = base_trajectory();
  CHECK_THROWS_AS(
      swm.predict_others_actions(SwmQuery{traj, kAna, AgentAction{"wave"}}),
      S3apError);
  CHECK_THROWS_AS(swm.predict_next_step(SwmQuery{traj, kAna, std::nullopt}),
                  S3apError);
  CHECK(backend.calls() == 0);
}

TEST_CASE("llm swm decodes a predicted step and strips the ego from others") {
  Trajectory traj = base_trajectory();
  SimulationStep pred =
      make_step(1, "changed state", {{kAna, "wave"}, {kBix, "clap"}});
  ScriptedMockBackend backend({encode_step(pred, WireForm::ObjectMap)});
  LlmSwm swm(backend);

  NextStepPrediction got =
      swm.predict_next_step(SwmQuery{traj, kAna, AgentAction{"wave"}});
  CHECK(got.next_step.state == "changed state");
  CHECK(got.next_step.actions.at(kAna).raw == "wave");
  CHECK(got.others_actions.size() == 1);
  CHECK(got.others_actions.at(kBix).raw == "clap");

  const std::string prompt = backend.seen_requests()[0].messages[0].content;
  CHECK(prompt.find("wave") != std::string::npos);
  CHECK(prompt.find("\"observations\"") != std::string::npos);
}

TEST_CASE("llm swm unwraps trajectory and array shaped responses") {
  Trajectory traj = base_trajectory();
  SimulationStep pred = make_step(1, "s1", {{kAna, "go"}, {kBix, "none"}});
  const std::string step_json = encode_step(pred, WireForm::ObjectMap);

  ScriptedMockBackend wrapped(
      {"{\"agents\": [\"Ana\", \"Bix\"], \"steps\": [" + step_json + "]}"});
  LlmSwm swm_a(wrapped);
  CHECK(swm_a.predict_next_step(SwmQuery{traj, kAna, AgentAction{"go"}})
            .next_step.state == "s1");

  ScriptedMockBackend arr({"[" + step_json + "]"});
  LlmSwm swm_b(arr);
  CHECK(swm_b.predict_next_step(SwmQuery{traj, kAna, AgentAction{"go"}})
            .next_step.state == "s1");
}

TEST_CASE("llm swm rejects predictions over a different agent set") {
  Trajectory traj = base_trajectory();
  SimulationStep pred =
      make_step(1, "s1", {{kAna, "go"}, {AgentId{"Zed"}, "none"}});
  ScriptedMockBackend backend({encode_step(pred, WireForm::ObjectMap)});
  LlmSwm swm(backend);
  CHECK_THROWS_AS(swm.predict_next_step(SwmQuery{traj, kAna, AgentAction{"go"}}),
                  PredictionDecodeError);
}

TEST_CASE("given actions override the echoed ones but never the ego slot") {
  Trajectory traj = base_trajectory();
  SimulationStep pred =
      make_step(1, "s1", {{kAna, "jump"}, {kBix, "sings"}});
  ScriptedMockBackend backend({encode_step(pred, WireForm::ObjectMap)});
  LlmSwm swm(backend);

  AgentMap<AgentAction> given;
  given.set(kBix, AgentAction{"claps"});
  NextStepPrediction got = swm.predict_next_step_given(
      SwmQuery{traj, kAna, AgentAction{"wave"}}, given);
  CHECK(got.next_step.actions.at(kAna).raw == "jump");
  CHECK(got.next_step.actions.at(kBix).raw == "claps");
  CHECK(got.others_actions.at(kBix).raw == "claps");

  const std::string prompt = backend.seen_requests()[0].messages[0].content;
  CHECK(prompt.find("Bix: claps") != std::string::npos);
}

TEST_CASE("predict_next_step_given validates the action map") {
  ScriptedMockBackend backend({});
  LlmSwm swm(backend);
  Trajectory traj = base_trajectory();
  SwmQuery query{traj, kAna, AgentAction{"wave"}};

  AgentMap<AgentAction> empty;
  CHECK_THROWS_AS(swm.predict_next_step_given(query, empty),
                  PredictionDecodeError);

  AgentMap<AgentAction> with_ego;
  with_ego.set(kBix, AgentAction{"x"});
  with_ego.set(kAna, AgentAction{"y"});
  CHECK_THROWS_AS(swm.predict_next_step_given(query, with_ego),
                  PredictionDecodeError);
  CHECK(backend.calls() == 0);
}

TEST_CASE("rollout extends a private copy step by step") {
  StubModel model;
  Trajectory traj = base_trajectory();
  int sampler_calls = 0;
  ActionSampler sampler = [&](const Trajectory& cur) {
    ++sampler_calls;
    return AgentAction{"go " + std::to_string(cur.steps.size())};
  };

  CHECK(rollout(model, traj, kAna, sampler, 0).empty());
  CHECK(model.next_calls == 0);
  CHECK(sampler_calls == 0);

  std::vector<SimulationStep> steps = rollout(model, traj, kAna, sampler, 2);
  REQUIRE(steps.size() == 2);
  CHECK(model.next_calls == 2);
  CHECK(model.others_calls == 0);
  CHECK(sampler_calls == 2);
  CHECK(steps[0].timestep.ordinal == 1);
  CHECK(steps[1].timestep.ordinal == 2);
  CHECK(steps[0].actions.at(kAna).raw == "go 1");
  CHECK(steps[1].actions.at(kAna).raw == "go 2");
  CHECK(traj.steps.size() == 1);

  CHECK_THROWS_AS(rollout(model, traj, kAna, sampler, -1), BoundsError);
}

TEST_SUITE_END();
