#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "s3ap/core.hpp"

namespace s3ap::oracle {

// Belief semantics implemented here (fixed, documented rule set):
// - physical evidence: an agent sees an object's placement when co-located
//   with its container (initially, on entering the room, and on witnessing a
//   move); joint attention grants every belief chain over the co-present
//   agents the same update.
// - testimony: a claim updates hearers' beliefs to the stated container
//   ("last evidence wins"), including their models of the speaker and of
//   fellow hearers; the speaker's own entries never change.
// - exits reveal nothing; the exiting agent witnesses everything up to and
//   including its own exit step.
// - chains are capped at order 4 and never repeat an agent consecutively;
//   an agent with no grounds has no entry (queries answer "unknown").

inline constexpr std::size_t kMaxBeliefOrder = 4;

enum class EventKind { Enter, Exit, MoveObject, PublicClaim, PrivateTell };

struct Event {
  EventKind kind{};
  AgentId actor;
  std::string location;   // Enter target
  std::string object;     // MoveObject / claims
  std::string container;  // MoveObject destination / claimed container
  AgentId recipient;      // PrivateTell

  friend bool operator==(const Event&, const Event&) = default;
};

struct OracleScenario {
  std::vector<std::string> locations;
  // Pair vectors keep deterministic document order.
  std::vector<std::pair<std::string, std::string>> containers;  // name -> location
  std::vector<std::pair<std::string, std::string>> objects;     // name -> initial container
  std::vector<std::pair<AgentId, std::string>> agents;          // agent -> initial location ("" = away)
  std::vector<Event> events;

  // Throws InvalidEventError / UnknownEntityError on inconsistencies that do
  // not require replay (existence checks); replay-dependent rules are
  // enforced by simulate().
  void validate() const;

  std::optional<std::string> container_location(const std::string& container) const;
  std::optional<std::string> initial_placement(const std::string& object) const;
  bool has_location(const std::string& name) const;
  bool has_container(const std::string& name) const;
  bool has_object(const std::string& name) const;
  bool has_agent(const AgentId& id) const;

  nlohmann::ordered_json to_json() const;
  static OracleScenario from_json(const nlohmann::ordered_json& doc);
  static OracleScenario load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

class BeliefStore {
 public:
  // chain: [holder, about, about-of-about, ...]; empty chain is invalid here
  // (zeroth order is the world state, not a belief).
  std::optional<std::string> get(const std::vector<AgentId>& chain,
                                 const std::string& object) const;
  void set(const std::vector<AgentId>& chain, const std::string& object,
           const std::string& container);

  friend bool operator==(const BeliefStore&, const BeliefStore&) = default;

 private:
  static std::vector<std::string> key_of(const std::vector<AgentId>& chain);
  std::map<std::pair<std::vector<std::string>, std::string>, std::string> entries_;
};

struct WorldSnapshot {
  std::size_t time{};  // snapshots[t] = state after events 0..t-1
  std::vector<std::pair<AgentId, std::optional<std::string>>> agent_locations;
  std::vector<std::pair<std::string, std::string>> object_placements;
  BeliefStore beliefs;
  std::vector<Event> event_log;

  std::optional<std::string> location_of(const AgentId& id) const;
  std::string placement_of(const std::string& object) const;
};

// Applies events in order; snapshot 0 is the initial world. Throws
// InvalidEventError (with event index) when an event breaks the physical
// rules (enter while inside, exit while away, move without co-location).
std::vector<WorldSnapshot> simulate(const OracleScenario& scenario);

// Empty chain returns the true placement. Returns nullopt for "unknown".
std::optional<std::string> query_belief(const std::vector<WorldSnapshot>& snapshots,
                                        const std::vector<AgentId>& chain,
                                        const std::string& object,
                                        std::size_t t);

// One SimulationStep per event (a single sentinel step when there are no
// events). State text is the full pre-event world; observations carry the
// perceived slice, a last-action tag for witnessed previous events, and
// order-1/2 beliefs inside <mental_state>.
Trajectory ground_truth_trajectory(const OracleScenario& scenario);

// Deterministic English narrative: placement paragraph plus one sentence per
// event. With paraphrase=true, surface forms are drawn from a seeded
// variant bank; the content is unchanged.
std::string render_narrative(const OracleScenario& scenario,
                             bool paraphrase = false,
                             std::uint64_t paraphrase_seed = 0);

struct GenParams {
  int n_agents = 2;
  int n_locations = 2;
  int n_containers = 2;
  int n_events = 4;
  bool force_false_belief = false;
};

OracleScenario generate_scenario(std::uint64_t seed, const GenParams& params);

// Surface-form templates used by render_narrative, exposed so the inverse
// parser stays in lockstep with the renderer. Slots: {A} actor, {L} location,
// {O} object, {C} container, {R} recipient.
struct SentenceBanks {
  std::vector<std::string> enter;
  std::vector<std::string> exit;
  std::vector<std::string> move_object;
  std::vector<std::string> public_claim;
  std::vector<std::string> private_tell;
};
const SentenceBanks& sentence_banks();

// Rendering primitives shared with the trajectory builder and the inverse
// parser.
std::string state_text(const OracleScenario& scenario, const WorldSnapshot& snap);
std::string perceived_state_text(const OracleScenario& scenario,
                                 const WorldSnapshot& snap, const AgentId& agent);
std::string event_action_text(const OracleScenario& scenario, const Event& event,
                              const WorldSnapshot& pre);
std::string mental_text(const OracleScenario& scenario, const WorldSnapshot& snap,
                        const AgentId& agent);
// Agents that perceive the event applied to `pre` (the snapshot it acts on).
std::vector<AgentId> event_perceivers(const OracleScenario& scenario,
                                      const Event& event, const WorldSnapshot& pre);

}  // namespace s3ap::oracle
