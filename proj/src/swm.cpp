#include "s3ap/swm.hpp"

#include <algorithm>

#include "s3ap/parser.hpp"
#include "s3ap/prompts.hpp"
#include "s3ap/schema.hpp"

namespace s3ap {

void SwmQuery::validate() const {
  if (!trajectory.has_agent(ego)) {
    throw UnknownAgentError("ego '" + ego.name + "' is not in the trajectory");
  }
}

namespace {

std::string serialized_history(const Trajectory& traj) {
  return encode_trajectory(traj, WireForm::StringList);
}

std::string completion(CompletionBackend& backend, const std::string& prompt,
                       bool constrained) {
  CompletionRequest request;
  request.model_id = backend.default_model();
  request.messages.push_back({"user", prompt});
  request.temperature = 0.0;
  if (constrained && backend.supports_constrained_output()) {
    request.constrained_schema = embedded_schema();
  }
  return backend.complete(request);
}

std::string step_format_instructions() {
  return "Output a single JSON step object conforming to this schema.\n" +
         embedded_schema();
}

}  // namespace

AgentMap<AgentAction> LlmSwm::predict_others_actions(const SwmQuery& query) {
  query.validate();
  if (query.ego_action.has_value()) {
    throw S3apError("predict_others_actions takes a query without ego_action");
  }
  std::string prompt = prompts::swm_others_actions_template();
  prompt = prompts::fill_slot(prompt, "history", serialized_history(query.trajectory));
  prompt = prompts::fill_slot(prompt, "ego", query.ego.name);

  const std::string raw = completion(*backend_, prompt, false);

  // name: action, one per line; the last line for a name wins.
  std::vector<std::pair<std::string, std::string>> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t eol = raw.find('\n', start);
    if (eol == std::string::npos) eol = raw.size();
    std::string line = trim(raw.substr(start, eol - start));
    start = eol + 1;
    if (line.rfind("- ", 0) == 0) line = trim(line.substr(2));
    std::size_t colon = line.find(':');
    if (line.empty() || colon == std::string::npos) continue;
    std::string name = trim(line.substr(0, colon));
    std::string action = trim(line.substr(colon + 1));
    if (action.empty()) action = "none";
    lines.emplace_back(std::move(name), std::move(action));
  }

  AgentMap<AgentAction> out;
  for (const AgentId& agent : query.trajectory.agents) {
    if (agent == query.ego) continue;
    std::optional<std::string> found;
    for (const auto& [name, action] : lines) {
      if (name == agent.name) found = action;
    }
    if (!found) {
      throw PredictionDecodeError("no action line for agent '" + agent.name + "'");
    }
    out.set(agent, AgentAction{*found});
  }
  return out;
}

NextStepPrediction LlmSwm::decode_prediction(const SwmQuery& query,
                                             const std::string& raw,
                                             const AgentMap<AgentAction>* given) {
  auto doc = extract_first_json(raw);
  if (!doc) {
    throw PredictionDecodeError("no JSON value in the world-model response");
  }
  nlohmann::ordered_json step_doc = *doc;
  if (step_doc.is_object() && step_doc.contains("steps") &&
      step_doc["steps"].is_array() && !step_doc["steps"].empty()) {
    step_doc = step_doc["steps"].front();
  } else if (step_doc.is_array() && !step_doc.empty()) {
    step_doc = step_doc.front();
  }

  StepDecodeResult decoded = decode_step_json(step_doc, std::nullopt, "prediction");
  if (!decoded.step) {
    throw PredictionDecodeError(issues_to_feedback(decoded.issues));
  }
  SimulationStep step = std::move(*decoded.step);

  std::vector<AgentId> want = query.trajectory.agents;
  std::vector<AgentId> got = step.observations.keys();
  auto key = [](std::vector<AgentId> v) {
    std::vector<std::string> names;
    for (const AgentId& a : v) names.push_back(a.name);
    std::sort(names.begin(), names.end());
    return names;
  };
  if (key(want) != key(got)) {
    throw PredictionDecodeError(
        "predicted step names a different agent set than the trajectory");
  }

  // Given others-actions override whatever the model echoed back. The ego
  // slot stays as predicted: the conditioning action is already part of the
  // predicted state, and the slot describes the ego's next move.
  SimulationStep normalized;
  normalized.timestep = step.timestep;
  normalized.state = step.state;
  for (const AgentId& agent : want) {
    normalized.observations.set(agent, step.observations.at(agent));
    AgentAction action = step.actions.at(agent);
    if (given && !(agent == query.ego)) action = given->at(agent);
    normalized.actions.set(agent, action);
  }

  NextStepPrediction prediction;
  prediction.next_step = std::move(normalized);
  for (const AgentId& agent : want) {
    if (agent == query.ego) continue;
    prediction.others_actions.set(agent, prediction.next_step.actions.at(agent));
  }
  return prediction;
}

NextStepPrediction LlmSwm::predict_next_step(const SwmQuery& query) {
  query.validate();
  if (!query.ego_action.has_value()) {
    throw S3apError("predict_next_step takes a query with ego_action");
  }
  std::string prompt = prompts::swm_next_step_template();
  prompt = prompts::fill_slot(prompt, "history", serialized_history(query.trajectory));
  prompt = prompts::fill_slot(prompt, "ego", query.ego.name);
  prompt = prompts::fill_slot(prompt, "ego_action", query.ego_action->raw);
  prompt = prompts::fill_slot(prompt, "format_instructions", step_format_instructions());

  const std::string raw = completion(*backend_, prompt, true);
  return decode_prediction(query, raw, nullptr);
}

NextStepPrediction LlmSwm::predict_next_step_given(
    const SwmQuery& query, const AgentMap<AgentAction>& others_actions) {
  query.validate();
  if (!query.ego_action.has_value()) {
    throw S3apError("predict_next_step_given takes a query with ego_action");
  }
  for (const AgentId& agent : query.trajectory.agents) {
    if (agent == query.ego) continue;
    if (!others_actions.contains(agent)) {
      throw PredictionDecodeError("others_actions is missing agent '" +
                                  agent.name + "'");
    }
  }
  if (others_actions.contains(query.ego)) {
    throw PredictionDecodeError("others_actions must not contain the ego agent");
  }

  std::vector<std::string> lines;
  for (const auto& [agent, action] : others_actions) {
    lines.push_back(agent.name + ": " + action.raw);
  }
  std::string block;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) block += "\n";
    block += lines[i];
  }

  std::string prompt = prompts::swm_next_step_given_template();
  prompt = prompts::fill_slot(prompt, "history", serialized_history(query.trajectory));
  prompt = prompts::fill_slot(prompt, "ego", query.ego.name);
  prompt = prompts::fill_slot(prompt, "ego_action", query.ego_action->raw);
  prompt = prompts::fill_slot(prompt, "others_actions", block);
  prompt = prompts::fill_slot(prompt, "format_instructions", step_format_instructions());

  const std::string raw = completion(*backend_, prompt, true);
  return decode_prediction(query, raw, &others_actions);
}

std::string LlmSwm::identity() const { return "llm-swm:" + backend_->identity(); }

std::vector<SimulationStep> rollout(SocialWorldModel& model,
                                    const Trajectory& trajectory,
                                    const AgentId& ego,
                                    const ActionSampler& policy, int n) {
  if (n < 0) throw BoundsError("rollout length must be >= 0");
  std::vector<SimulationStep> out;
  Trajectory cur = trajectory;
  if (n == 0) return out;
  AgentAction cur_act = policy(cur);
  for (int i = 0; i < n; ++i) {
    SwmQuery query{cur, ego, cur_act};
    NextStepPrediction prediction = model.predict_next_step(query);
    cur = append_step(cur, prediction.next_step);
    out.push_back(cur.steps.back());
    if (i + 1 < n) cur_act = policy(cur);
  }
  return out;
}

}  // namespace s3ap
