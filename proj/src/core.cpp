#include "s3ap/core.hpp"

#include <algorithm>
#include <cctype>

namespace s3ap {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool is_none_text(std::string_view s) {
  std::string t = trim(s);
  if (t.size() != 4) return false;
  for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return t == "none";
}

bool Trajectory::has_agent(const AgentId& id) const {
  return std::find(agents.begin(), agents.end(), id) != agents.end();
}

namespace {

constexpr std::string_view kStateTag = "same_as_state";
constexpr std::string_view kLastActionTag = "same_as_last_action";
constexpr std::string_view kMentalTag = "mental_state";

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::size_t skip_ws(const std::string& s, std::size_t i) {
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return i;
}

// After the tag name: optional ws, '/', optional ws, '>'.
std::size_t expect_self_close(const std::string& raw, std::size_t i,
                              const std::string& name) {
  i = skip_ws(raw, i);
  if (i >= raw.size() || raw[i] != '/') {
    throw MalformedTagError("tag <" + name + "> must be self-closing ('<" +
                            name + " />')");
  }
  i = skip_ws(raw, i + 1);
  if (i >= raw.size() || raw[i] != '>') {
    throw MalformedTagError("unterminated tag <" + name + " />");
  }
  return i + 1;
}

// Finds "</mental_state>" (whitespace-tolerant) at or after i; returns
// {content_end, index_past_close}.
std::pair<std::size_t, std::size_t> find_mental_close(const std::string& raw,
                                                      std::size_t i) {
  for (std::size_t p = i; p < raw.size(); ++p) {
    if (raw[p] != '<') continue;
    std::size_t q = skip_ws(raw, p + 1);
    if (q >= raw.size() || raw[q] != '/') continue;
    q = skip_ws(raw, q + 1);
    if (raw.compare(q, kMentalTag.size(), kMentalTag) != 0) continue;
    q = skip_ws(raw, q + kMentalTag.size());
    if (q < raw.size() && raw[q] == '>') return {p, q + 1};
  }
  throw MalformedTagError("<mental_state> tag is never closed");
}

struct TagEvent {
  enum class Kind { State, LastAll, LastIdx, Mental };
  Kind kind{};
  std::size_t index = 0;    // LastIdx, 1-based
  std::string content;      // Mental
};

// Walks `raw` left to right, reporting free-text runs and special tags in
// order. Throws MalformedTagError on broken tag syntax; text that merely
// contains '<' without a reserved tag name passes through as text.
template <typename OnText, typename OnTag>
void scan_observation(const std::string& raw, OnText&& on_text, OnTag&& on_tag) {
  std::string text;
  auto flush = [&] {
    std::string t = trim(text);
    if (!t.empty()) on_text(std::move(t));
    text.clear();
  };

  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw[i] != '<') {
      text += raw[i++];
      continue;
    }
    std::size_t j = skip_ws(raw, i + 1);
    bool closing = false;
    if (j < raw.size() && raw[j] == '/') {
      closing = true;
      j = skip_ws(raw, j + 1);
    }
    std::size_t name_end = j;
    while (name_end < raw.size() && is_name_char(raw[name_end])) ++name_end;
    std::string name = raw.substr(j, name_end - j);

    const bool reserved = name.rfind("same_as_", 0) == 0 || name == kMentalTag;
    if (!reserved) {
      text += raw[i++];
      continue;
    }
    if (closing) {
      throw MalformedTagError("closing tag </" + name + "> without an opener");
    }
    flush();

    if (name == kStateTag) {
      i = expect_self_close(raw, name_end, name);
      on_tag(TagEvent{TagEvent::Kind::State, 0, ""});
    } else if (name == kLastActionTag) {
      i = expect_self_close(raw, name_end, name);
      on_tag(TagEvent{TagEvent::Kind::LastAll, 0, ""});
    } else if (name.rfind(std::string(kLastActionTag) + "_", 0) == 0) {
      std::string suffix = name.substr(kLastActionTag.size() + 1);
      if (suffix.empty() ||
          !std::all_of(suffix.begin(), suffix.end(), [](char c) {
            return std::isdigit(static_cast<unsigned char>(c));
          })) {
        throw MalformedTagError("bad agent index in tag <" + name + " />");
      }
      std::size_t x = 0;
      for (char c : suffix) x = x * 10 + static_cast<std::size_t>(c - '0');
      if (x == 0) {
        throw MalformedTagError("agent index in <" + name + " /> must be positive");
      }
      i = expect_self_close(raw, name_end, name);
      on_tag(TagEvent{TagEvent::Kind::LastIdx, x, ""});
    } else if (name == kMentalTag) {
      std::size_t k = skip_ws(raw, name_end);
      if (k >= raw.size() || raw[k] != '>') {
        throw MalformedTagError("malformed <mental_state> opening tag");
      }
      auto [content_end, next] = find_mental_close(raw, k + 1);
      std::string content = trim(raw.substr(k + 1, content_end - (k + 1)));
      if (content.empty()) {
        throw MalformedTagError("<mental_state> tag has empty content");
      }
      on_tag(TagEvent{TagEvent::Kind::Mental, 0, std::move(content)});
      i = next;
    } else {
      throw MalformedTagError("unknown special tag <" + name + ">");
    }
  }
  flush();
}

const SimulationStep& previous_step(const Trajectory& history,
                                    std::size_t ordinal) {
  if (ordinal == 0) {
    throw TagAtOriginError("a last-action tag cannot appear at ordinal 0");
  }
  if (ordinal - 1 >= history.steps.size()) {
    throw BoundsError("history is missing the step at ordinal " +
                      std::to_string(ordinal - 1));
  }
  return history.steps[ordinal - 1];
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::optional<std::string> lint_observation_tags(const std::string& raw) {
  if (is_none_text(raw)) return std::nullopt;
  try {
    scan_observation(raw, [](std::string&&) {}, [](TagEvent&&) {});
  } catch (const MalformedTagError& e) {
    return std::string(e.what());
  }
  return std::nullopt;
}

ResolvedObservation resolve_tags(const SimulationStep& step,
                                 const Trajectory& history,
                                 const AgentId& agent) {
  const ObservationExpr* expr = step.observations.find(agent);
  if (!expr) {
    throw UnknownAgentError("agent '" + agent.name +
                            "' has no observation in this step");
  }
  const std::string& raw = expr->raw;
  if (is_none_text(raw)) return ResolvedObservation{"", std::nullopt, true};

  const std::size_t ordinal = step.timestep.ordinal;
  std::vector<AgentId> order = history.agents;

  std::vector<std::string> pieces;
  std::vector<std::string> mentals;

  scan_observation(
      raw,
      [&](std::string&& t) { pieces.push_back(std::move(t)); },
      [&](TagEvent&& tag) {
        switch (tag.kind) {
          case TagEvent::Kind::State: {
            std::string state = trim(step.state);
            if (!state.empty()) pieces.push_back(std::move(state));
            break;
          }
          case TagEvent::Kind::LastAll: {
            const SimulationStep& prev = previous_step(history, ordinal);
            if (order.empty()) order = prev.actions.keys();
            std::vector<std::string> acted;
            for (const AgentId& a : order) {
              const AgentAction& act = prev.actions.at(a);
              if (!act.is_none()) acted.push_back(a.name + ": " + trim(act.raw));
            }
            std::string joined = join(acted, "; ");
            if (!joined.empty()) pieces.push_back(std::move(joined));
            break;
          }
          case TagEvent::Kind::LastIdx: {
            const SimulationStep& prev = previous_step(history, ordinal);
            if (order.empty()) order = prev.actions.keys();
            if (tag.index > order.size()) {
              throw UnknownAgentIndexError(
                  "agent index " + std::to_string(tag.index) +
                  " exceeds the agent count " + std::to_string(order.size()));
            }
            const AgentId& target = order[tag.index - 1];
            const AgentAction& act = prev.actions.at(target);
            pieces.push_back(target.name + ": " + trim(act.raw));
            break;
          }
          case TagEvent::Kind::Mental:
            mentals.push_back(std::move(tag.content));
            break;
        }
      });

  ResolvedObservation out;
  out.external = join(pieces, " ");
  if (!mentals.empty()) out.mental = join(mentals, "; ");
  out.is_none = false;
  return out;
}

AgentMemory reconstruct_memory(const Trajectory& traj, const AgentId& agent,
                               std::size_t t) {
  if (!traj.has_agent(agent)) {
    throw UnknownAgentError("agent '" + agent.name + "' is not in this trajectory");
  }
  if (t > traj.steps.size()) {
    throw BoundsError("memory horizon " + std::to_string(t) +
                      " exceeds trajectory length " +
                      std::to_string(traj.steps.size()));
  }
  AgentMemory memory;
  memory.owner = agent;
  memory.upto = t;
  memory.entries.reserve(2 * t);
  for (std::size_t k = 0; k < t; ++k) {
    const SimulationStep& step = traj.steps[k];
    memory.entries.push_back(
        MemoryEntry{k, MemoryKind::Observation, resolve_tags(step, traj, agent)});
    memory.entries.push_back(
        MemoryEntry{k, MemoryKind::Action, step.actions.at(agent)});
  }
  return memory;
}

std::pair<AgentMemory, ResolvedObservation> agent_view(const Trajectory& traj,
                                                       const AgentId& agent,
                                                       std::size_t t) {
  if (t >= traj.steps.size()) {
    throw BoundsError("no step at ordinal " + std::to_string(t));
  }
  AgentMemory memory = reconstruct_memory(traj, agent, t);
  ResolvedObservation now = resolve_tags(traj.steps[t], traj, agent);
  return {std::move(memory), std::move(now)};
}

Trajectory append_step(const Trajectory& traj, SimulationStep step) {
  if (!same_keys(step.observations, step.actions)) {
    throw AgentSetMismatchError("observation and action agent sets differ");
  }
  Trajectory out = traj;
  std::vector<AgentId> keys = step.observations.keys();
  if (out.agents.empty() && out.steps.empty()) {
    out.agents = keys;
  } else {
    std::vector<AgentId> a = keys;
    std::vector<AgentId> b = out.agents;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) {
      throw AgentSetMismatchError(
          "step agents do not match the trajectory's agent set");
    }
  }
  if (trim(step.state).empty()) {
    throw S3apError("step state must be nonempty ('none' is the empty-context sentinel)");
  }

  SimulationStep norm;
  norm.timestep.ordinal = out.steps.size();
  norm.timestep.raw = trim(step.timestep.raw).empty()
                          ? std::to_string(norm.timestep.ordinal)
                          : step.timestep.raw;
  norm.state = step.state;
  for (const AgentId& a : out.agents) {
    norm.observations.set(a, step.observations.at(a));
    norm.actions.set(a, step.actions.at(a));
  }
  out.steps.push_back(std::move(norm));
  return out;
}

}  // namespace s3ap
