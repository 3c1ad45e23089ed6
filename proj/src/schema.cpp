#include "s3ap/schema.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace s3ap {

using nlohmann::ordered_json;

std::string issue_code_name(IssueCode code) {
  switch (code) {
    case IssueCode::ParseError: return "ParseError";
    case IssueCode::MissingField: return "MissingField";
    case IssueCode::BadEntryFormat: return "BadEntryFormat";
    case IssueCode::AgentSetMismatch: return "AgentSetMismatch";
    case IssueCode::MalformedTag: return "MalformedTag";
    case IssueCode::EmptyValue: return "EmptyValue";
    case IssueCode::NonObjectStep: return "NonObjectStep";
  }
  return "Unknown";
}

const std::string& embedded_schema() {
  static const std::string schema = R"s3apschema({
  "$schema": "http://json-schema.org/draft-07/schema#",
  "title": "SocializedStructure",
  "type": "object",
  "properties": {
    "timestep": {
      "type": "string",
      "description": "The timestep of the current socialized structure, it could be a integer number or a description of the time of the state."
    },
    "state": {
      "type": "string",
      "description": "The current state of the world (including all the agents) at this timestep. Important note: this is the state before the action is taken (e.g., the initial state could be 'none' at the beginning if there are no prior contexts before the interaction starts)."
    },
    "observations": {
      "type": "object",
      "additionalProperties": {
        "type": "string"
      },
      "description": "The observations for each agent in the social world at this timestep. Note that the different agents may have different observations. 1. The special tag '<same_as_state />' indicates the observation covers the current state. 2. The special tag '<same_as_last_action_x />' indicates the observation covers the last timestep agents' actions, x means the index of the agents. If no x provided, it means the observation covers the last timestep agents' actions. 3. The special tag '<mental_state>...</mental_state>' indicates the mental state of the agent. 4. 'none' means the agent does not observe anything at this timestep. Important note: this is the observation before the action is taken (e.g., the observation could be 'none' at the beginning if there are no prior contexts before the interaction starts)."
    },
    "actions": {
      "type": "object",
      "additionalProperties": {
        "type": "string"
      },
      "description": "The actions for each agent in the social world at this timestep. 'none' represents that the agent does not take any action at this timestep."
    }
  },
  "required": ["timestep", "state", "observations", "actions"],
  "definitions": {
    "SocializedStructureForModel": {
      "type": "object",
      "properties": {
        "timestep": {
          "type": "string",
          "description": "The timestep of the current socialized structure, it could be a integer number or a description of the time of the state."
        },
        "state": {
          "type": "string",
          "description": "The current state of the world (including all the agents) at this timestep. Important note: this is the state before the action is taken (e.g., the initial state could be 'none' at the beginning if there are no prior contexts before the interaction starts)."
        },
        "observations": {
          "type": "array",
          "items": {
            "type": "string"
          },
          "description": "The observations for each agent in the social world at this timestep. Note that the different agents may have different observations. The observation would go into corresponding agent's memory, so make sure the observation is clear for the agent to understand (first person perspective narrative is preferred). 1. If the observation covers the current state, use the special tag '<same_as_state />' to indicate that. 2. If the observation covers last timestep agents' actions, use '<same_as_last_action_x />' to cover that, x means the index of the agents (just use <same_as_last_action /> if only one agent acts at the last timestep). 3. For the internal thoughts, beliefs, or emotions of the agent that is not directly observable by other agents, use the special tag '<mental_state>...</mental_state>' to indicate the internal observation. You can of course combine these tags and add extra information after the tags (seperated by space). 4. Put 'none' if the agent does not observe anything at this timestep. Important note: this is the observation before the action is taken (e.g., the observation could be 'none' at the beginning if there are no prior contexts before the interaction starts). The format for each entry in the list is: 'agent_name: observation'"
        },
        "actions": {
          "type": "array",
          "items": {
            "type": "string"
          },
          "description": "The actions for each agent in the social world at this timestep. The length of the list should be the same as the number of agents. Put 'none' if the agent does not take any action at this timestep. The format for each entry in the list is: 'agent_name: action'"
        }
      },
      "required": ["timestep", "state", "observations", "actions"]
    }
  }
}
)s3apschema";
  return schema;
}

namespace {

void add_issue(std::vector<ValidationIssue>& issues, std::string path,
               IssueCode code, std::string message) {
  issues.push_back(ValidationIssue{std::move(path), code, std::move(message)});
}

std::string field_path(const std::string& base, const std::string& field) {
  return base.empty() ? field : base + "." + field;
}

// Checks an agent name; returns false (with an issue) when unusable.
bool check_agent_name(const std::string& name, const std::string& path,
                      std::vector<ValidationIssue>& issues) {
  if (trim(name).empty()) {
    add_issue(issues, path, IssueCode::EmptyValue, "agent name is empty");
    return false;
  }
  if (is_none_text(name)) {
    add_issue(issues, path, IssueCode::BadEntryFormat,
              "agent name 'none' is reserved for the null sentinel");
    return false;
  }
  return true;
}

// Decodes observations/actions in either wire form into an AgentMap of raw
// strings. `what` is "observations" or "actions".
AgentMap<std::string> decode_entries(const ordered_json& node,
                                     std::optional<WireForm> form,
                                     const std::string& path,
                                     const std::string& what,
                                     std::vector<ValidationIssue>& issues) {
  AgentMap<std::string> out;
  WireForm effective;
  if (form.has_value()) {
    effective = *form;
  } else {
    effective = node.is_array() ? WireForm::StringList : WireForm::ObjectMap;
  }

  if (effective == WireForm::ObjectMap) {
    if (!node.is_object()) {
      add_issue(issues, path, IssueCode::BadEntryFormat,
                what + " must be a JSON object mapping agent names to strings, got " +
                    std::string(node.type_name()));
      return out;
    }
    for (const auto& [key, value] : node.items()) {
      std::string entry_path = path + "." + key;
      if (!check_agent_name(key, entry_path, issues)) continue;
      if (!value.is_string()) {
        add_issue(issues, entry_path, IssueCode::BadEntryFormat,
                  what + " entry for agent '" + key + "' must be a string, got " +
                      std::string(value.type_name()));
        continue;
      }
      std::string payload = value.get<std::string>();
      if (trim(payload).empty()) {
        add_issue(issues, entry_path, IssueCode::EmptyValue,
                  "empty " + what + " entry for agent '" + key +
                      "'; use 'none' when the agent has nothing here");
        continue;
      }
      AgentId id{trim(key)};
      if (out.contains(id)) {
        add_issue(issues, entry_path, IssueCode::BadEntryFormat,
                  "duplicate agent '" + id.name + "' in " + what);
        continue;
      }
      out.set(std::move(id), std::move(payload));
    }
    return out;
  }

  if (!node.is_array()) {
    add_issue(issues, path, IssueCode::BadEntryFormat,
              what + " must be a JSON array of 'agent_name: " +
                  (what == "actions" ? std::string("action") : std::string("observation")) +
                  "' strings, got " + std::string(node.type_name()));
    return out;
  }
  for (std::size_t i = 0; i < node.size(); ++i) {
    std::string entry_path = path + "[" + std::to_string(i) + "]";
    const ordered_json& value = node[i];
    if (!value.is_string()) {
      add_issue(issues, entry_path, IssueCode::BadEntryFormat,
                what + " list entries must be strings, got " +
                    std::string(value.type_name()));
      continue;
    }
    std::string entry = value.get<std::string>();
    std::size_t sep = entry.find(": ");
    if (sep == std::string::npos) {
      add_issue(issues, entry_path, IssueCode::BadEntryFormat,
                "entry \"" + entry + "\" is not in 'agent_name: " +
                    (what == "actions" ? std::string("action") : std::string("observation")) +
                    "' form (no ': ' separator)");
      continue;
    }
    std::string name = trim(entry.substr(0, sep));
    std::string payload = entry.substr(sep + 2);
    if (!check_agent_name(name, entry_path, issues)) continue;
    if (trim(payload).empty()) {
      add_issue(issues, entry_path, IssueCode::EmptyValue,
                "empty " + what + " payload for agent '" + name +
                    "'; use 'none' when the agent has nothing here");
      continue;
    }
    AgentId id{std::move(name)};
    if (out.contains(id)) {
      add_issue(issues, entry_path, IssueCode::BadEntryFormat,
                "duplicate agent '" + id.name + "' in " + what);
      continue;
    }
    out.set(std::move(id), std::move(payload));
  }
  return out;
}

std::string joined_names(const std::vector<AgentId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i].name;
  }
  return out;
}

}  // namespace

StepDecodeResult decode_step_json(const ordered_json& doc,
                                  std::optional<WireForm> form,
                                  const std::string& path) {
  StepDecodeResult result;
  auto& issues = result.issues;
  if (!doc.is_object()) {
    add_issue(issues, path.empty() ? "step" : path, IssueCode::NonObjectStep,
              "simulation step must be a JSON object, got " +
                  std::string(doc.type_name()));
    return result;
  }

  for (const char* field : {"timestep", "state", "observations", "actions"}) {
    if (!doc.contains(field)) {
      add_issue(issues, path.empty() ? "step" : path, IssueCode::MissingField,
                std::string("missing required field '") + field + "'");
    }
  }
  if (!issues.empty()) return result;

  SimulationStep step;

  const ordered_json& ts = doc["timestep"];
  if (ts.is_string()) {
    step.timestep.raw = ts.get<std::string>();
  } else if (ts.is_number_integer()) {
    step.timestep.raw = std::to_string(ts.get<long long>());
  } else {
    add_issue(issues, field_path(path, "timestep"), IssueCode::BadEntryFormat,
              "timestep must be a string (or integer), got " +
                  std::string(ts.type_name()));
  }
  if (ts.is_string() && trim(step.timestep.raw).empty()) {
    add_issue(issues, field_path(path, "timestep"), IssueCode::EmptyValue,
              "timestep text is empty");
  }

  const ordered_json& st = doc["state"];
  if (!st.is_string()) {
    add_issue(issues, field_path(path, "state"), IssueCode::BadEntryFormat,
              "state must be a string, got " + std::string(st.type_name()));
  } else {
    step.state = st.get<std::string>();
    if (trim(step.state).empty()) {
      add_issue(issues, field_path(path, "state"), IssueCode::EmptyValue,
                "state is empty; use 'none' as the empty-context sentinel");
    }
  }

  AgentMap<std::string> obs = decode_entries(doc["observations"], form,
                                             field_path(path, "observations"),
                                             "observations", issues);
  AgentMap<std::string> act = decode_entries(doc["actions"], form,
                                             field_path(path, "actions"),
                                             "actions", issues);

  for (const auto& [id, raw] : obs) {
    if (auto problem = lint_observation_tags(raw)) {
      add_issue(issues, field_path(path, "observations") + "." + id.name,
                IssueCode::MalformedTag, *problem);
    }
    step.observations.set(id, ObservationExpr{raw});
  }
  for (const auto& [id, raw] : act) {
    step.actions.set(id, AgentAction{raw});
  }

  if (!same_keys(step.observations, step.actions)) {
    std::vector<AgentId> a = step.observations.keys();
    std::vector<AgentId> b = step.actions.keys();
    std::vector<AgentId> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) {
      add_issue(issues, path.empty() ? "step" : path, IssueCode::AgentSetMismatch,
                "observations cover {" + joined_names(a) + "} but actions cover {" +
                    joined_names(b) + "}");
    } else {
      // Same set, different order: normalize actions to observation order.
      AgentMap<AgentAction> reordered;
      for (const AgentId& id : a) reordered.set(id, step.actions.at(id));
      step.actions = std::move(reordered);
    }
  }

  if (issues.empty()) result.step = std::move(step);
  return result;
}

StepDecodeResult decode_step(const std::string& document,
                             std::optional<WireForm> form) {
  ordered_json doc = ordered_json::parse(document, nullptr, false);
  if (doc.is_discarded()) {
    StepDecodeResult result;
    add_issue(result.issues, "step", IssueCode::ParseError,
              "document is not well-formed JSON");
    return result;
  }
  return decode_step_json(doc, form, "");
}

nlohmann::ordered_json encode_step_json(const SimulationStep& step, WireForm form) {
  ordered_json doc;
  doc["timestep"] = step.timestep.raw;
  doc["state"] = step.state;
  if (form == WireForm::ObjectMap) {
    ordered_json obs = ordered_json::object();
    for (const auto& [id, expr] : step.observations) obs[id.name] = expr.raw;
    ordered_json act = ordered_json::object();
    for (const auto& [id, action] : step.actions) act[id.name] = action.raw;
    doc["observations"] = std::move(obs);
    doc["actions"] = std::move(act);
  } else {
    ordered_json obs = ordered_json::array();
    for (const auto& [id, expr] : step.observations) obs.push_back(id.name + ": " + expr.raw);
    ordered_json act = ordered_json::array();
    for (const auto& [id, action] : step.actions) act.push_back(id.name + ": " + action.raw);
    doc["observations"] = std::move(obs);
    doc["actions"] = std::move(act);
  }
  return doc;
}

std::string encode_step(const SimulationStep& step, WireForm form) {
  return encode_step_json(step, form).dump(2) + "\n";
}

TrajectoryDecodeResult decode_trajectory(const std::string& document,
                                         std::optional<WireForm> form) {
  TrajectoryDecodeResult result;
  auto& issues = result.issues;

  ordered_json doc = ordered_json::parse(document, nullptr, false);
  if (doc.is_discarded()) {
    add_issue(issues, "document", IssueCode::ParseError,
              "document is not well-formed JSON");
    return result;
  }

  Trajectory traj;
  const ordered_json* steps_node = nullptr;
  ordered_json wrapped;

  if (doc.is_array()) {
    steps_node = &doc;
  } else if (doc.is_object() && doc.contains("steps")) {
    if (!doc["steps"].is_array()) {
      add_issue(issues, "steps", IssueCode::BadEntryFormat,
                "'steps' must be an array, got " +
                    std::string(doc["steps"].type_name()));
      return result;
    }
    steps_node = &doc["steps"];

    if (doc.contains("agents")) {
      const ordered_json& agents = doc["agents"];
      if (!agents.is_array()) {
        add_issue(issues, "agents", IssueCode::BadEntryFormat,
                  "'agents' must be an array of names, got " +
                      std::string(agents.type_name()));
      } else {
        for (std::size_t i = 0; i < agents.size(); ++i) {
          std::string apath = "agents[" + std::to_string(i) + "]";
          if (!agents[i].is_string()) {
            add_issue(issues, apath, IssueCode::BadEntryFormat,
                      "agent name must be a string, got " +
                          std::string(agents[i].type_name()));
            continue;
          }
          std::string name = agents[i].get<std::string>();
          if (!check_agent_name(name, apath, issues)) continue;
          AgentId id{trim(name)};
          if (traj.has_agent(id)) {
            add_issue(issues, apath, IssueCode::BadEntryFormat,
                      "duplicate agent '" + id.name + "' in agent list");
            continue;
          }
          traj.agents.push_back(std::move(id));
        }
      }
    }
    if (doc.contains("metadata")) {
      const ordered_json& meta = doc["metadata"];
      if (!meta.is_object()) {
        add_issue(issues, "metadata", IssueCode::BadEntryFormat,
                  "'metadata' must be an object, got " +
                      std::string(meta.type_name()));
      } else {
        for (const auto& [key, value] : meta.items()) {
          traj.metadata[key] =
              value.is_string() ? value.get<std::string>() : value.dump();
        }
      }
    }
    for (const auto& [key, value] : doc.items()) {
      if (key == "steps" || key == "agents" || key == "metadata") continue;
      traj.metadata[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  } else if (doc.is_object()) {
    // A bare step document; wrap it.
    wrapped = ordered_json::array({doc});
    steps_node = &wrapped;
  } else {
    add_issue(issues, "document", IssueCode::NonObjectStep,
              "document must be a trajectory object, a step array, or a step "
              "object, got " + std::string(doc.type_name()));
    return result;
  }

  std::vector<SimulationStep> decoded;
  for (std::size_t i = 0; i < steps_node->size(); ++i) {
    std::string spath = "steps[" + std::to_string(i) + "]";
    StepDecodeResult one = decode_step_json((*steps_node)[i], form, spath);
    for (auto& issue : one.issues) issues.push_back(std::move(issue));
    if (one.step) decoded.push_back(std::move(*one.step));
  }
  if (!issues.empty()) return result;

  if (traj.agents.empty() && !decoded.empty()) {
    traj.agents = decoded.front().observations.keys();
  }

  for (std::size_t i = 0; i < decoded.size(); ++i) {
    SimulationStep& step = decoded[i];
    std::string spath = "steps[" + std::to_string(i) + "]";
    std::vector<AgentId> sa = step.observations.keys();
    std::vector<AgentId> sb = traj.agents;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) {
      add_issue(issues, spath, IssueCode::AgentSetMismatch,
                "step agents {" + joined_names(step.observations.keys()) +
                    "} do not match the trajectory agents {" +
                    joined_names(traj.agents) + "}");
      continue;
    }
    step.timestep.ordinal = i;
    if (trim(step.timestep.raw).empty()) step.timestep.raw = std::to_string(i);
    SimulationStep norm;
    norm.timestep = step.timestep;
    norm.state = step.state;
    for (const AgentId& id : traj.agents) {
      norm.observations.set(id, step.observations.at(id));
      norm.actions.set(id, step.actions.at(id));
    }
    traj.steps.push_back(std::move(norm));
  }
  if (!issues.empty()) return result;

  // Context-dependent tag checks: last-action tags at the origin, agent
  // indices out of range.
  for (std::size_t i = 0; i < traj.steps.size(); ++i) {
    for (const AgentId& id : traj.agents) {
      try {
        resolve_tags(traj.steps[i], traj, id);
      } catch (const S3apError& e) {
        add_issue(issues,
                  "steps[" + std::to_string(i) + "].observations." + id.name,
                  IssueCode::MalformedTag, e.what());
      }
    }
  }
  if (!issues.empty()) return result;

  result.trajectory = std::move(traj);
  return result;
}

std::string encode_trajectory(const Trajectory& traj, WireForm form) {
  ordered_json doc;
  ordered_json agents = ordered_json::array();
  for (const AgentId& id : traj.agents) agents.push_back(id.name);
  doc["agents"] = std::move(agents);
  ordered_json steps = ordered_json::array();
  for (const SimulationStep& step : traj.steps) {
    steps.push_back(encode_step_json(step, form));
  }
  doc["steps"] = std::move(steps);
  ordered_json meta = ordered_json::object();
  for (const auto& [k, v] : traj.metadata) meta[k] = v;
  doc["metadata"] = std::move(meta);
  return doc.dump(2) + "\n";
}

Trajectory load_trajectory_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw S3apError("cannot read trajectory file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  TrajectoryDecodeResult result = decode_trajectory(buf.str());
  if (!result.trajectory) {
    throw S3apError("invalid trajectory file '" + path + "':\n" +
                    issues_to_feedback(result.issues));
  }
  return std::move(*result.trajectory);
}

void save_trajectory_file(const Trajectory& traj, const std::string& path,
                          WireForm form) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw S3apError("cannot write trajectory file '" + path + "'");
  out << encode_trajectory(traj, form);
  if (!out.good()) throw S3apError("short write to '" + path + "'");
}

std::string issues_to_feedback(const std::vector<ValidationIssue>& issues) {
  if (issues.empty()) {
    throw S3apError("issues_to_feedback requires a nonempty issue list");
  }
  std::vector<ValidationIssue> sorted = issues;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const ValidationIssue& a, const ValidationIssue& b) {
                     return a.path < b.path;
                   });
  std::ostringstream out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out << (i + 1) << ". " << sorted[i].path << ": " << sorted[i].message;
    if (i + 1 < sorted.size()) out << "\n";
  }
  return out.str();
}

}  // namespace s3ap
