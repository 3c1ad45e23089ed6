#include "s3ap/agent.hpp"

#include <algorithm>

#include "s3ap/parser.hpp"
#include "s3ap/prompts.hpp"
#include "s3ap/schema.hpp"

namespace s3ap {

void ActionSpace::validate() const {
  if (kind == Kind::Enumerated) {
    if (options.empty()) {
      throw S3apError("enumerated action space must have options");
    }
    for (std::size_t i = 0; i < options.size(); ++i) {
      for (std::size_t j = i + 1; j < options.size(); ++j) {
        if (options[i].raw == options[j].raw) {
          throw S3apError("duplicate action option '" + options[i].raw + "'");
        }
      }
    }
  }
}

bool ActionSpace::contains(const AgentAction& action) const {
  if (kind != Kind::Enumerated) return true;
  return std::any_of(options.begin(), options.end(), [&](const AgentAction& o) {
    return o.raw == action.raw;
  });
}

void Goal::validate() const {
  if (trim(description).empty()) throw S3apError("goal description must be nonempty");
}

void ForeseeConfig::validate() const {
  if (max_iterations < 1) throw S3apError("max_iterations must be >= 1");
}

void GoalScore::validate() const {
  if (value < 0.0 || value > 10.0) {
    throw S3apError("goal score must be within [0, 10]");
  }
}

namespace {

AgentAction enforce_closure(const ActionSpace& space, AgentAction action,
                            const char* origin) {
  if (space.kind == ActionSpace::Kind::Enumerated && !space.contains(action)) {
    throw ActionDecodeError(std::string(origin) + " produced an action outside "
                            "the space: '" + action.raw + "'");
  }
  if (trim(action.raw).empty()) {
    throw ActionDecodeError(std::string(origin) + " produced an empty action");
  }
  return action;
}

}  // namespace

AgentAction sample_action(Policy& policy, const ActionSpace& space,
                          const Trajectory& state, const Goal& goal) {
  space.validate();
  goal.validate();
  return enforce_closure(space, policy.sample_action(space, state, goal),
                         "policy");
}

AgentAction act_from_sim(const ActionSpace& space,
                         const std::vector<SimulationStep>& sim_states,
                         const Trajectory& original_state, const Goal& goal,
                         const AgentAction& intended, Refiner& refiner) {
  if (sim_states.empty()) {
    throw BoundsError("act_from_sim needs at least one simulated state");
  }
  return enforce_closure(
      space, refiner.refine(space, sim_states, original_state, goal, intended),
      "refiner");
}

AgentAction foresee_and_act(const ActionSpace& space, const Goal& goal,
                            const Trajectory& state, const ForeseeConfig& cfg,
                            SocialWorldModel& swm_model, Policy& policy,
                            const AgentId& ego, Refiner& refiner,
                            ForeseeTrace* trace) {
  cfg.validate();
  Trajectory cur = state;
  AgentAction cur_act = sample_action(policy, space, cur, goal);
  int samples = 1;
  if (trace) trace->initial_sample = cur_act;

  std::vector<SimulationStep> sim_s;
  for (int i = 1; i <= cfg.max_iterations; ++i) {
    SwmQuery query{cur, ego, cur_act};
    NextStepPrediction prediction = swm_model.predict_next_step(query);
    cur = append_step(cur, prediction.next_step);
    sim_s.push_back(cur.steps.back());
    cur_act = sample_action(policy, space, cur, goal);
    ++samples;
  }

  AgentAction refined = act_from_sim(space, sim_s, state, goal, cur_act, refiner);
  if (trace) {
    trace->sim_states = sim_s;
    trace->intended = cur_act;
    trace->refined = refined;
    trace->swm_calls = cfg.max_iterations;
    trace->sample_calls = samples;
  }
  return refined;
}

std::string action_format_instructions(const ActionSpace& space) {
  std::string text =
      "{\"action_type\": \"<the action>\", \"argument\": \"<its parameter, or "
      "empty>\"}";
  if (space.kind == ActionSpace::Kind::Enumerated) {
    text += "\nThe action (type plus argument, joined by a space) must be one "
            "of:\n";
    for (const AgentAction& option : space.options) {
      text += "- " + option.raw + "\n";
    }
  } else if (!space.format_instructions.empty()) {
    text += "\n" + space.format_instructions;
  }
  return text;
}

AgentAction decode_action_response(const std::string& raw) {
  auto doc = extract_first_json(raw);
  if (!doc || !doc->is_object()) {
    throw ActionDecodeError("no action object in response: " + raw);
  }
  std::string type;
  std::string argument;
  if (doc->contains("action_type") && (*doc)["action_type"].is_string()) {
    type = (*doc)["action_type"].get<std::string>();
  } else if (doc->contains("action") && (*doc)["action"].is_string()) {
    type = (*doc)["action"].get<std::string>();
  } else {
    throw ActionDecodeError("response lacks an action_type field: " + raw);
  }
  if (doc->contains("argument") && (*doc)["argument"].is_string()) {
    argument = (*doc)["argument"].get<std::string>();
  }
  std::string text = trim(type);
  if (!trim(argument).empty()) text += " " + trim(argument);
  if (text.empty()) throw ActionDecodeError("decoded action is empty: " + raw);
  return AgentAction{text};
}

namespace {

std::string run_completion(CompletionBackend& backend, const std::string& prompt) {
  CompletionRequest request;
  request.model_id = backend.default_model();
  request.messages.push_back({"user", prompt});
  request.temperature = 0.0;
  return backend.complete(request);
}

std::string serialize_sim_states(const std::vector<SimulationStep>& sim_states) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const SimulationStep& step : sim_states) {
    arr.push_back(encode_step_json(step, WireForm::StringList));
  }
  return arr.dump(2);
}

}  // namespace

AgentAction LlmPolicy::sample_action(const ActionSpace& space,
                                     const Trajectory& state, const Goal& goal) {
  std::string prompt = prompts::sample_action_template();
  prompt = prompts::fill_slot(prompt, "agent", ego_.name);
  prompt = prompts::fill_slot(prompt, "goal", goal.description);
  prompt = prompts::fill_slot(prompt, "history",
                              encode_trajectory(state, WireForm::StringList));
  prompt = prompts::fill_slot(prompt, "format_instructions",
                              action_format_instructions(space));
  return decode_action_response(run_completion(*backend_, prompt));
}

std::string LlmRefiner::build_prompt(const ActionSpace& space,
                                     const std::vector<SimulationStep>& sim_states,
                                     const Trajectory& original_state,
                                     const AgentAction& intended) const {
  std::string prompt = prompts::refine_template();
  prompt = prompts::fill_slot(prompt, "agent", ego_.name);
  prompt = prompts::fill_slot(prompt, "history",
                              encode_trajectory(original_state, WireForm::StringList));
  prompt = prompts::fill_slot(prompt, "intended_action", intended.raw);
  prompt = prompts::fill_slot(prompt, "socialized_context_info",
                              serialize_sim_states(sim_states));
  prompt = prompts::fill_slot(prompt, "format_instructions",
                              action_format_instructions(space));
  return prompt;
}

AgentAction LlmRefiner::refine(const ActionSpace& space,
                               const std::vector<SimulationStep>& sim_states,
                               const Trajectory& original_state, const Goal&,
                               const AgentAction& intended) {
  const std::string prompt =
      build_prompt(space, sim_states, original_state, intended);
  return decode_action_response(run_completion(*backend_, prompt));
}

}  // namespace s3ap
