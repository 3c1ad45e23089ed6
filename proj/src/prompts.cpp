#include "s3ap/prompts.hpp"

namespace s3ap::prompts {

const std::string& parse_template() {
  static const std::string text =
      "Please analyze the following narrative/context.\n"
      "\n"
      "#### Context: {context}\n"
      "\n"
      "#### Task specific instructions: {task_specific_instructions}\n"
      "\n"
      "Example analysis: {example_analysis}\n"
      "\n"
      "Previous attempt had these issues. \n"
      "Please fix them based on the previous attempt and feedback below:\n"
      "{feedback}\n"
      "\n"
      "Follow these format instructions:\n"
      "{format_instructions}\n";
  return text;
}

const std::string& tomi_instructions() {
  static const std::string text =
      "You are dissecting the TOMI scenarios. The assumptions are that the "
      "characters can perceive every scene in their location but not scenes "
      "occurring elsewhere. If the agent leaves the location, they cannot "
      "perceive the scene in that location anymore. In the agent's "
      "observation, remember to include the objects' locations if the agents "
      "are in the same location as the object.";
  return text;
}

const std::string& hitom_instructions() {
  static const std::string text =
      "You are dissecting the HITOM scenarios. You should assume the "
      "following: (1) An agent witnesses everything and every movements "
      "before exiting a location. (2) An agent A can infer another agent B's "
      "mental state only if A and B have been in the same location, or have "
      "private or public interactions. (3) Note that every agent tend to "
      "lie. What a character tells others doesn't affect his actual belief. "
      "(4) Agents in private communications know that others won't hear "
      "them, but they know that anyone can hear any public claims. In the "
      "agent's observation, remember to include the objects' locations if "
      "the agents are in the same location as the object.";
  return text;
}

const std::string& fantom_instructions() {
  static const std::string text =
      "You are analyzing a social conversation and need to answer a question "
      "about it. When the agents leave the conversation, they cannot "
      "perceive the conversation anymore untill they join the conversation "
      "again. For convenience, you can use <same_as_last_action /> in the "
      "state field to indicate that the state is the same as the last "
      "action.";
  return text;
}

const std::string& mmtom_instructions() {
  static const std::string text =
      "You are dissecting the MMToM scenarios. The assumptions are that "
      "agents can perceive objects and events only in their current "
      "location. When an agent moves to a new location, they can no longer "
      "perceive what happens in previous locations. Importantly, agents "
      "should not have knowledge about the contents of containers (like "
      "fridges, cabinets, etc.) until they directly observe inside them, "
      "unless explicitly stated in their prior knowledge. In mental states, "
      "clearly represent the agent's goals, beliefs about object locations, "
      "and how these beliefs are updated through observations. In the "
      "agent's observation, include objects' locations when the agent is in "
      "the same location as the objects, but only after the agent has "
      "actually observed them.";
  return text;
}

const std::string& confaide_instructions() {
  static const std::string text =
      "For convenience, you can use <same_as_last_action /> in the state "
      "field to indicate that the state is the same as the last action.";
  return text;
}

const std::string& example_analysis() {
  static const std::string text = R"example({
  "agents": ["Sally", "Anne"],
  "steps": [
    {
      "timestep": "0",
      "state": "Sally is in the kitchen. Anne is in the kitchen. The basket is in the kitchen. The box is in the kitchen. The marble is in the basket.",
      "observations": {
        "Sally": "<same_as_state /> <mental_state>believes the marble is in the basket</mental_state>",
        "Anne": "<same_as_state /> <mental_state>believes the marble is in the basket</mental_state>"
      },
      "actions": {
        "Sally": "exited the kitchen",
        "Anne": "none"
      }
    },
    {
      "timestep": "1",
      "state": "Sally is away. Anne is in the kitchen. The basket is in the kitchen. The box is in the kitchen. The marble is in the basket.",
      "observations": {
        "Sally": "none",
        "Anne": "Anne is in the kitchen. The basket is in the kitchen. The box is in the kitchen. The marble is in the basket. <mental_state>believes the marble is in the basket; thinks Sally believes the marble is in the basket</mental_state>"
      },
      "actions": {
        "Sally": "none",
        "Anne": "moved the marble to the box"
      }
    }
  ]
})example";
  return text;
}

const std::string& qa_template() {
  static const std::string text =
      "## Context\n"
      "{context}\n"
      "## Extra Info\n"
      "(to help you better understand the meeting)\n"
      "{extra_info}\n"
      "## Task\n"
      "{question}";
  return text;
}

const std::string& refine_template() {
  static const std::string text =
      "You are {agent}.\n"
      "Here is the interaction history between you and the other agent so far:\n"
      "{history}\n"
      "\n"
      "Here is your intended action:\n"
      "{intended_action}\n"
      "\n"
      "Here is the predicted mental states after you take the intended action \n"
      "(you should use them to generate better actions for achieving your goal):\n"
      "{socialized_context_info}\n"
      "\n"
      "Please generate a refined action \n"
      "so that you can achieve your (i.e., {agent}'s) goal better.\n"
      "\n"
      "Please only generate a JSON string \n"
      "including the action type and the argument.\n"
      "Your action should follow the given format:\n"
      "{format_instructions}";
  return text;
}

const std::string& swm_next_step_template() {
  static const std::string text =
      "You are a social world model tracking a multi-agent interaction.\n"
      "Here is the interaction history so far:\n"
      "{history}\n"
      "\n"
      "{ego} now takes this action:\n"
      "{ego_action}\n"
      "\n"
      "Predict the next simulation step: the resulting state, every agent's "
      "observation (including mental states inside <mental_state> tags), and "
      "the other agents' next actions.\n"
      "\n"
      "Follow these format instructions:\n"
      "{format_instructions}";
  return text;
}

const std::string& sample_action_template() {
  static const std::string text =
      "You are {agent}.\n"
      "Your goal: {goal}\n"
      "Here is the interaction history between you and the other agent so far:\n"
      "{history}\n"
      "\n"
      "Choose your next action.\n"
      "\n"
      "Please only generate a JSON string \n"
      "including the action type and the argument.\n"
      "Your action should follow the given format:\n"
      "{format_instructions}";
  return text;
}

const std::string& swm_next_step_given_template() {
  static const std::string text =
      "You are a social world model tracking a multi-agent interaction.\n"
      "Here is the interaction history so far:\n"
      "{history}\n"
      "\n"
      "{ego} now takes this action:\n"
      "{ego_action}\n"
      "\n"
      "The other agents take these actions:\n"
      "{others_actions}\n"
      "\n"
      "Predict the next simulation step: the resulting state and every agent's "
      "observation (including mental states inside <mental_state> tags), "
      "consistent with the actions above.\n"
      "\n"
      "Follow these format instructions:\n"
      "{format_instructions}";
  return text;
}

const std::string& swm_others_actions_template() {
  static const std::string text =
      "You are a social world model tracking a multi-agent interaction.\n"
      "Here is the interaction history so far:\n"
      "{history}\n"
      "\n"
      "Predict the next action of every agent except {ego}, one per line, in "
      "the form 'agent_name: action'. Use 'none' when an agent would not "
      "act.";
  return text;
}

std::string fill_slot(std::string text, const std::string& name,
                      const std::string& value) {
  const std::string slot = "{" + name + "}";
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

}  // namespace s3ap::prompts
