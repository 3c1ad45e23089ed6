#pragma once

#include <string>
#include <vector>

namespace s3ap::prompts {

// Narrative-to-structure prompt. Slots: {context},
// {task_specific_instructions}, {example_analysis}, {feedback},
// {format_instructions}.
const std::string& parse_template();

// Task-specific instruction blocks for the parse prompt.
const std::string& tomi_instructions();      // also used for the paraphrased variant
const std::string& hitom_instructions();
const std::string& fantom_instructions();
const std::string& mmtom_instructions();
const std::string& confaide_instructions();

// One worked example fed into the {example_analysis} slot.
const std::string& example_analysis();

// Question answering. Slots: {context}, {extra_info}, {question}.
const std::string& qa_template();

// Action refinement for the lookahead agent. Slots: {agent}, {history},
// {intended_action}, {socialized_context_info}, {format_instructions}.
const std::string& refine_template();

const std::string& sample_action_template();

// Social world model queries. Slots: {ego}, {history}, {ego_action},
// {format_instructions}.
const std::string& swm_next_step_template();

// Joint form: conditions on the other agents' actions as well.
const std::string& swm_next_step_given_template();
// Slots: {ego}, {history}.
const std::string& swm_others_actions_template();

// Replaces every occurrence of "{name}" with value.
std::string fill_slot(std::string text, const std::string& name,
                      const std::string& value);

}  // namespace s3ap::prompts
