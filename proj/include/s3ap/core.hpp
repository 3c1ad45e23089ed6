#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "s3ap/errors.hpp"

namespace s3ap {

// Text helpers shared across the library.
std::string trim(std::string_view s);
bool is_none_text(std::string_view s);  // trimmed, case-insensitive "none"

struct AgentId {
  std::string name;

  friend bool operator==(const AgentId&, const AgentId&) = default;
  friend auto operator<=>(const AgentId&, const AgentId&) = default;
};

struct Timestep {
  std::string raw;        // display text, may be a number or a description
  std::size_t ordinal{};  // zero-based position in the trajectory
};

// Observation text as it appears on the wire; may contain special tags.
struct ObservationExpr {
  std::string raw;

  friend bool operator==(const ObservationExpr&, const ObservationExpr&) = default;
};

// Observation after tag resolution. `external` is tag-free; `mental` holds
// the introspective part extracted from <mental_state> tags.
struct ResolvedObservation {
  std::string external;
  std::optional<std::string> mental;
  bool is_none = false;
};

struct AgentAction {
  std::string raw;

  bool is_none() const { return is_none_text(raw); }

  friend bool operator==(const AgentAction&, const AgentAction&) = default;
};

// Insertion-ordered agent map. Agent order is meaningful (1-based tag
// indices, canonical encoding), so std::map/unordered_map will not do.
template <typename T>
class AgentMap {
 public:
  using Entry = std::pair<AgentId, T>;

  void set(AgentId id, T value) {
    for (auto& e : entries_) {
      if (e.first == id) {
        e.second = std::move(value);
        return;
      }
    }
    entries_.emplace_back(std::move(id), std::move(value));
  }

  const T* find(const AgentId& id) const {
    for (const auto& e : entries_) {
      if (e.first == id) return &e.second;
    }
    return nullptr;
  }

  const T& at(const AgentId& id) const {
    if (const T* v = find(id)) return *v;
    throw UnknownAgentError("unknown agent '" + id.name + "'");
  }

  bool contains(const AgentId& id) const { return find(id) != nullptr; }

  std::vector<AgentId> keys() const {
    std::vector<AgentId> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.first);
    return out;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  friend bool operator==(const AgentMap&, const AgentMap&) = default;

 private:
  std::vector<Entry> entries_;
};

template <typename A, typename B>
bool same_keys(const AgentMap<A>& a, const AgentMap<B>& b) {
  if (a.size() != b.size()) return false;
  auto ia = a.begin();
  auto ib = b.begin();
  for (; ia != a.end(); ++ia, ++ib) {
    if (!(ia->first == ib->first)) return false;
  }
  return true;
}

struct SimulationStep {
  Timestep timestep;
  std::string state;  // pre-action environment state
  AgentMap<ObservationExpr> observations;
  AgentMap<AgentAction> actions;
};

struct Trajectory {
  std::vector<SimulationStep> steps;
  std::vector<AgentId> agents;
  std::map<std::string, std::string> metadata;

  bool has_agent(const AgentId& id) const;
};

enum class MemoryKind { Observation, Action };

struct MemoryEntry {
  std::size_t ordinal{};
  MemoryKind kind{};
  std::variant<ResolvedObservation, AgentAction> value;
};

// M_i^t: the owner's observations and actions for ordinals 0..t-1,
// observation before action within each ordinal. Null records are kept.
struct AgentMemory {
  AgentId owner;
  std::size_t upto{};
  std::vector<MemoryEntry> entries;
};

// Syntax-only tag check for raw observation text; returns a problem
// description when the tag grammar is violated, nullopt when clean.
std::optional<std::string> lint_observation_tags(const std::string& raw);

// Resolves the special tags of one observation against the step's state and
// the previous step's actions. `history` must contain every step with
// ordinal < step.timestep.ordinal; agent order is taken from history.agents.
ResolvedObservation resolve_tags(const SimulationStep& step,
                                 const Trajectory& history,
                                 const AgentId& agent);

AgentMemory reconstruct_memory(const Trajectory& traj, const AgentId& agent,
                               std::size_t t);

std::pair<AgentMemory, ResolvedObservation> agent_view(const Trajectory& traj,
                                                       const AgentId& agent,
                                                       std::size_t t);

// Returns a copy of `traj` with `step` appended and its ordinal normalized.
// An empty trajectory adopts the step's agent key order.
Trajectory append_step(const Trajectory& traj, SimulationStep step);

}  // namespace s3ap
