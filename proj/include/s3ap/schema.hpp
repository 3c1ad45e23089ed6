#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "s3ap/core.hpp"

namespace s3ap {

// The two wire forms: observations/actions as a JSON object keyed by agent
// name, or as a list of "agent_name: payload" strings.
enum class WireForm { ObjectMap, StringList };

enum class IssueCode {
  ParseError,
  MissingField,
  BadEntryFormat,
  AgentSetMismatch,
  MalformedTag,
  EmptyValue,
  NonObjectStep,
};

std::string issue_code_name(IssueCode code);

struct ValidationIssue {
  std::string path;
  IssueCode code{};
  std::string message;

  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

// The wire-format schema document, verbatim. Also used as the
// {format_instructions} prompt slot.
const std::string& embedded_schema();

struct StepDecodeResult {
  std::optional<SimulationStep> step;
  std::vector<ValidationIssue> issues;
};

struct TrajectoryDecodeResult {
  std::optional<Trajectory> trajectory;
  std::vector<ValidationIssue> issues;
};

// Decodes one step document. With no explicit form, picks StringList when
// "observations" is an array. All issues are collected; no fail-fast.
StepDecodeResult decode_step(const std::string& document,
                             std::optional<WireForm> form = std::nullopt);
StepDecodeResult decode_step_json(const nlohmann::ordered_json& doc,
                                  std::optional<WireForm> form,
                                  const std::string& path);

std::string encode_step(const SimulationStep& step, WireForm form);
nlohmann::ordered_json encode_step_json(const SimulationStep& step, WireForm form);

// Accepts {"agents": [...], "steps": [...], "metadata": {...}}, a bare array
// of steps, or a single step object.
TrajectoryDecodeResult decode_trajectory(const std::string& document,
                                         std::optional<WireForm> form = std::nullopt);
std::string encode_trajectory(const Trajectory& traj, WireForm form);

Trajectory load_trajectory_file(const std::string& path);
void save_trajectory_file(const Trajectory& traj, const std::string& path,
                          WireForm form = WireForm::ObjectMap);

// Numbered, path-annotated feedback block for the retry prompt.
std::string issues_to_feedback(const std::vector<ValidationIssue>& issues);

}  // namespace s3ap
