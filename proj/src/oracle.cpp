#include "s3ap/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

namespace s3ap::oracle {

using nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::optional<std::string> OracleScenario::container_location(
    const std::string& container) const {
  for (const auto& [name, loc] : containers) {
    if (name == container) return loc;
  }
  return std::nullopt;
}

std::optional<std::string> OracleScenario::initial_placement(
    const std::string& object) const {
  for (const auto& [name, cont] : objects) {
    if (name == object) return cont;
  }
  return std::nullopt;
}

bool OracleScenario::has_location(const std::string& name) const {
  return std::find(locations.begin(), locations.end(), name) != locations.end();
}

bool OracleScenario::has_container(const std::string& name) const {
  return container_location(name).has_value();
}

bool OracleScenario::has_object(const std::string& name) const {
  return initial_placement(name).has_value();
}

bool OracleScenario::has_agent(const AgentId& id) const {
  for (const auto& [agent, loc] : agents) {
    if (agent == id) return true;
  }
  return false;
}

void OracleScenario::validate() const {
  std::vector<std::string> seen;
  auto claim_name = [&](const std::string& name, const char* what) {
    if (trim(name).empty()) {
      throw UnknownEntityError(std::string(what) + " with empty name");
    }
    if (is_none_text(name)) {
      throw UnknownEntityError(std::string(what) + " cannot be named 'none'");
    }
    if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
      throw UnknownEntityError("entity name '" + name +
                               "' is used more than once (" + what + ")");
    }
    seen.push_back(name);
  };

  for (const std::string& l : locations) claim_name(l, "location");
  for (const auto& [c, loc] : containers) {
    claim_name(c, "container");
    if (!has_location(loc)) {
      throw UnknownEntityError("container '" + c + "' placed in unknown location '" + loc + "'");
    }
  }
  for (const auto& [o, cont] : objects) {
    claim_name(o, "object");
    if (!has_container(cont)) {
      throw UnknownEntityError("object '" + o + "' placed in unknown container '" + cont + "'");
    }
  }
  for (const auto& [a, loc] : agents) {
    claim_name(a.name, "agent");
    if (!loc.empty() && !has_location(loc)) {
      throw UnknownEntityError("agent '" + a.name + "' starts in unknown location '" + loc + "'");
    }
  }

  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& ev = events[i];
    const std::string at = "event " + std::to_string(i) + ": ";
    if (!has_agent(ev.actor)) {
      throw InvalidEventError(at + "unknown actor '" + ev.actor.name + "'");
    }
    switch (ev.kind) {
      case EventKind::Enter:
        if (!has_location(ev.location)) {
          throw InvalidEventError(at + "unknown location '" + ev.location + "'");
        }
        break;
      case EventKind::Exit:
        break;
      case EventKind::MoveObject:
        if (!has_object(ev.object)) {
          throw InvalidEventError(at + "unknown object '" + ev.object + "'");
        }
        if (!has_container(ev.container)) {
          throw InvalidEventError(at + "unknown container '" + ev.container + "'");
        }
        break;
      case EventKind::PublicClaim:
        if (!has_object(ev.object)) {
          throw InvalidEventError(at + "unknown object '" + ev.object + "'");
        }
        if (!has_container(ev.container)) {
          throw InvalidEventError(at + "unknown container '" + ev.container + "'");
        }
        break;
      case EventKind::PrivateTell:
        if (!has_object(ev.object)) {
          throw InvalidEventError(at + "unknown object '" + ev.object + "'");
        }
        if (!has_container(ev.container)) {
          throw InvalidEventError(at + "unknown container '" + ev.container + "'");
        }
        if (!has_agent(ev.recipient)) {
          throw InvalidEventError(at + "unknown recipient '" + ev.recipient.name + "'");
        }
        if (ev.recipient == ev.actor) {
          throw InvalidEventError(at + "agent '" + ev.actor.name + "' cannot privately tell themself");
        }
        break;
    }
  }
}

std::vector<std::string> BeliefStore::key_of(const std::vector<AgentId>& chain) {
  std::vector<std::string> key;
  key.reserve(chain.size());
  for (const AgentId& a : chain) key.push_back(a.name);
  return key;
}

std::optional<std::string> BeliefStore::get(const std::vector<AgentId>& chain,
                                            const std::string& object) const {
  auto it = entries_.find({key_of(chain), object});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void BeliefStore::set(const std::vector<AgentId>& chain,
                      const std::string& object, const std::string& container) {
  if (chain.empty() || chain.size() > kMaxBeliefOrder) {
    throw S3apError("belief chain length must be 1.." +
                    std::to_string(kMaxBeliefOrder));
  }
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (chain[i] == chain[i - 1]) {
      throw S3apError("belief chain repeats agent '" + chain[i].name +
                      "' consecutively");
    }
  }
  entries_[{key_of(chain), object}] = container;
}

std::optional<std::string> WorldSnapshot::location_of(const AgentId& id) const {
  for (const auto& [agent, loc] : agent_locations) {
    if (agent == id) return loc;
  }
  throw UnknownEntityError("unknown agent '" + id.name + "'");
}

std::string WorldSnapshot::placement_of(const std::string& object) const {
  for (const auto& [name, cont] : object_placements) {
    if (name == object) return cont;
  }
  throw UnknownEntityError("unknown object '" + object + "'");
}

namespace {

std::vector<AgentId> agents_in(const OracleScenario& sc,
                               const WorldSnapshot& snap,
                               const std::string& location) {
  std::vector<AgentId> out;
  for (const auto& [agent, _] : sc.agents) {
    std::optional<std::string> loc = snap.location_of(agent);
    if (loc && *loc == location) out.push_back(agent);
  }
  return out;
}

// All chains over `members` up to kMaxBeliefOrder with no immediate repeats,
// filtered by an acceptance predicate on the head.
template <typename HeadOk, typename Apply>
void for_each_chain(const std::vector<AgentId>& members, HeadOk&& head_ok,
                    Apply&& apply) {
  std::vector<AgentId> chain;
  auto recurse = [&](auto&& self) -> void {
    if (!chain.empty()) apply(chain);
    if (chain.size() == kMaxBeliefOrder) return;
    for (const AgentId& next : members) {
      if (!chain.empty() && chain.back() == next) continue;
      if (chain.empty() && !head_ok(next)) continue;
      chain.push_back(next);
      self(self);
      chain.pop_back();
    }
  };
  recurse(recurse);
}

// Joint attention: every chain over the co-present agents learns the
// placement.
void sight_update(BeliefStore& beliefs, const std::vector<AgentId>& present,
                  const std::string& object, const std::string& container) {
  for_each_chain(
      present, [](const AgentId&) { return true; },
      [&](const std::vector<AgentId>& chain) {
        beliefs.set(chain, object, container);
      });
}

// Testimony: every chain over the participants headed by a hearer adopts the
// stated container. The speaker's own entries are untouched.
void claim_update(BeliefStore& beliefs, const std::vector<AgentId>& members,
                  const AgentId& speaker, const std::string& object,
                  const std::string& container) {
  for_each_chain(
      members, [&](const AgentId& head) { return !(head == speaker); },
      [&](const std::vector<AgentId>& chain) {
        beliefs.set(chain, object, container);
      });
}

void reveal_room(const OracleScenario& sc, WorldSnapshot& snap,
                 const std::string& location) {
  std::vector<AgentId> present = agents_in(sc, snap, location);
  if (present.empty()) return;
  for (const auto& [object, _] : sc.objects) {
    const std::string placement = snap.placement_of(object);
    std::optional<std::string> cloc = sc.container_location(placement);
    if (cloc && *cloc == location) {
      sight_update(snap.beliefs, present, object, placement);
    }
  }
}

void set_agent_location(WorldSnapshot& snap, const AgentId& id,
                        std::optional<std::string> loc) {
  for (auto& [agent, l] : snap.agent_locations) {
    if (agent == id) {
      l = std::move(loc);
      return;
    }
  }
  throw UnknownEntityError("unknown agent '" + id.name + "'");
}

void set_placement(WorldSnapshot& snap, const std::string& object,
                   const std::string& container) {
  for (auto& [name, cont] : snap.object_placements) {
    if (name == object) {
      cont = container;
      return;
    }
  }
  throw UnknownEntityError("unknown object '" + object + "'");
}

void apply_event(const OracleScenario& sc, WorldSnapshot& snap,
                 const Event& ev, std::size_t index) {
  const std::string at = "event " + std::to_string(index) + ": ";
  switch (ev.kind) {
    case EventKind::Enter: {
      if (snap.location_of(ev.actor).has_value()) {
        throw InvalidEventError(at + "'" + ev.actor.name +
                                "' must exit their current location before entering another");
      }
      set_agent_location(snap, ev.actor, ev.location);
      reveal_room(sc, snap, ev.location);
      break;
    }
    case EventKind::Exit: {
      if (!snap.location_of(ev.actor).has_value()) {
        throw InvalidEventError(at + "'" + ev.actor.name +
                                "' is not in any location to exit from");
      }
      set_agent_location(snap, ev.actor, std::nullopt);
      break;
    }
    case EventKind::MoveObject: {
      std::optional<std::string> aloc = snap.location_of(ev.actor);
      if (!aloc) {
        throw InvalidEventError(at + "'" + ev.actor.name +
                                "' cannot move anything while away");
      }
      const std::string current = snap.placement_of(ev.object);
      std::optional<std::string> oloc = sc.container_location(current);
      if (!oloc || *oloc != *aloc) {
        throw InvalidEventError(at + "'" + ev.actor.name + "' is not with the " +
                                ev.object + " (it is in the " + current + ")");
      }
      std::optional<std::string> dloc = sc.container_location(ev.container);
      if (!dloc || *dloc != *aloc) {
        throw InvalidEventError(at + "destination container '" + ev.container +
                                "' is not in the " + *aloc);
      }
      set_placement(snap, ev.object, ev.container);
      std::vector<AgentId> present = agents_in(sc, snap, *aloc);
      sight_update(snap.beliefs, present, ev.object, ev.container);
      break;
    }
    case EventKind::PublicClaim: {
      std::vector<AgentId> everyone;
      for (const auto& [agent, _] : sc.agents) everyone.push_back(agent);
      claim_update(snap.beliefs, everyone, ev.actor, ev.object, ev.container);
      break;
    }
    case EventKind::PrivateTell: {
      std::vector<AgentId> pair;
      for (const auto& [agent, _] : sc.agents) {
        if (agent == ev.actor || agent == ev.recipient) pair.push_back(agent);
      }
      claim_update(snap.beliefs, pair, ev.actor, ev.object, ev.container);
      break;
    }
  }
}

}  // namespace

std::vector<WorldSnapshot> simulate(const OracleScenario& scenario) {
  scenario.validate();
  WorldSnapshot snap;
  snap.time = 0;
  for (const auto& [agent, loc] : scenario.agents) {
    snap.agent_locations.emplace_back(
        agent, loc.empty() ? std::nullopt : std::make_optional(loc));
  }
  for (const auto& [object, container] : scenario.objects) {
    snap.object_placements.emplace_back(object, container);
  }
  for (const std::string& location : scenario.locations) {
    reveal_room(scenario, snap, location);
  }

  std::vector<WorldSnapshot> snapshots;
  snapshots.reserve(scenario.events.size() + 1);
  snapshots.push_back(snap);
  for (std::size_t i = 0; i < scenario.events.size(); ++i) {
    WorldSnapshot next = snapshots.back();
    next.time = i + 1;
    apply_event(scenario, next, scenario.events[i], i);
    next.event_log.push_back(scenario.events[i]);
    snapshots.push_back(std::move(next));
  }
  return snapshots;
}

std::optional<std::string> query_belief(
    const std::vector<WorldSnapshot>& snapshots,
    const std::vector<AgentId>& chain, const std::string& object,
    std::size_t t) {
  if (snapshots.empty()) throw BoundsError("no snapshots to query");
  if (t >= snapshots.size()) {
    throw BoundsError("time " + std::to_string(t) + " is outside 0.." +
                      std::to_string(snapshots.size() - 1));
  }
  if (chain.size() > kMaxBeliefOrder) {
    throw BoundsError("belief order " + std::to_string(chain.size()) +
                      " exceeds the supported maximum " +
                      std::to_string(kMaxBeliefOrder));
  }
  const WorldSnapshot& snap = snapshots[t];
  snap.placement_of(object);                       // existence check
  for (const AgentId& a : chain) snap.location_of(a);  // existence check
  if (chain.empty()) return snap.placement_of(object);
  return snap.beliefs.get(chain, object);
}

std::string state_text(const OracleScenario& scenario,
                       const WorldSnapshot& snap) {
  std::vector<std::string> parts;
  for (const auto& [agent, _] : scenario.agents) {
    std::optional<std::string> loc = snap.location_of(agent);
    parts.push_back(loc ? agent.name + " is in the " + *loc + "."
                        : agent.name + " is away.");
  }
  for (const auto& [container, location] : scenario.containers) {
    parts.push_back("The " + container + " is in the " + location + ".");
  }
  for (const auto& [object, _] : scenario.objects) {
    parts.push_back("The " + object + " is in the " + snap.placement_of(object) + ".");
  }
  return join(parts, " ");
}

std::string perceived_state_text(const OracleScenario& scenario,
                                 const WorldSnapshot& snap,
                                 const AgentId& agent) {
  std::optional<std::string> where = snap.location_of(agent);
  if (!where) return "";
  std::vector<std::string> parts;
  for (const auto& [other, _] : scenario.agents) {
    std::optional<std::string> loc = snap.location_of(other);
    if (loc && *loc == *where) {
      parts.push_back(other.name + " is in the " + *loc + ".");
    }
  }
  for (const auto& [container, location] : scenario.containers) {
    if (location == *where) {
      parts.push_back("The " + container + " is in the " + location + ".");
    }
  }
  for (const auto& [object, _] : scenario.objects) {
    const std::string placement = snap.placement_of(object);
    std::optional<std::string> cloc = scenario.container_location(placement);
    if (cloc && *cloc == *where) {
      parts.push_back("The " + object + " is in the " + placement + ".");
    }
  }
  return join(parts, " ");
}

std::string mental_text(const OracleScenario& scenario,
                        const WorldSnapshot& snap, const AgentId& agent) {
  std::vector<std::string> parts;
  for (const auto& [object, _] : scenario.objects) {
    if (auto c = snap.beliefs.get({agent}, object)) {
      parts.push_back("believes the " + object + " is in the " + *c);
    }
  }
  for (const auto& [other, _2] : scenario.agents) {
    if (other == agent) continue;
    for (const auto& [object, _3] : scenario.objects) {
      if (auto c = snap.beliefs.get({agent, other}, object)) {
        parts.push_back("thinks " + other.name + " believes the " + object +
                        " is in the " + *c);
      }
    }
  }
  return join(parts, "; ");
}

std::string event_action_text(const OracleScenario& scenario, const Event& event,
                              const WorldSnapshot& pre) {
  (void)scenario;
  switch (event.kind) {
    case EventKind::Enter:
      return "entered the " + event.location;
    case EventKind::Exit: {
      std::optional<std::string> loc = pre.location_of(event.actor);
      return "exited the " + (loc ? *loc : std::string("scene"));
    }
    case EventKind::MoveObject:
      return "moved the " + event.object + " to the " + event.container;
    case EventKind::PublicClaim:
      return "publicly claimed that the " + event.object + " is in the " +
             event.container;
    case EventKind::PrivateTell:
      return "privately told " + event.recipient.name + " that the " +
             event.object + " is in the " + event.container;
  }
  return "none";
}

std::vector<AgentId> event_perceivers(const OracleScenario& scenario,
                                      const Event& event,
                                      const WorldSnapshot& pre) {
  std::vector<AgentId> out;
  switch (event.kind) {
    case EventKind::Enter: {
      for (const auto& [agent, _] : scenario.agents) {
        std::optional<std::string> loc = pre.location_of(agent);
        if ((loc && *loc == event.location) || agent == event.actor) {
          out.push_back(agent);
        }
      }
      break;
    }
    case EventKind::Exit:
    case EventKind::MoveObject: {
      std::optional<std::string> where = pre.location_of(event.actor);
      if (!where) break;
      out = agents_in(scenario, pre, *where);
      break;
    }
    case EventKind::PublicClaim: {
      for (const auto& [agent, _] : scenario.agents) out.push_back(agent);
      break;
    }
    case EventKind::PrivateTell: {
      for (const auto& [agent, _] : scenario.agents) {
        if (agent == event.actor || agent == event.recipient) out.push_back(agent);
      }
      break;
    }
  }
  return out;
}

namespace {

std::size_t agent_index(const OracleScenario& sc, const AgentId& id) {
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    if (sc.agents[i].first == id) return i;
  }
  throw UnknownEntityError("unknown agent '" + id.name + "'");
}

SimulationStep build_step(const OracleScenario& sc,
                          const std::vector<WorldSnapshot>& snaps,
                          std::size_t t, const Event* event) {
  const WorldSnapshot& pre = snaps[t];
  SimulationStep step;
  step.timestep.raw = std::to_string(t);
  step.timestep.ordinal = t;
  step.state = state_text(sc, pre);
  const std::string full = step.state;

  std::vector<AgentId> prev_witnesses;
  std::size_t prev_actor_index = 0;
  if (t > 0) {
    const Event& prev = sc.events[t - 1];
    prev_witnesses = event_perceivers(sc, prev, snaps[t - 1]);
    prev_actor_index = agent_index(sc, prev.actor);
  }

  for (const auto& [agent, _] : sc.agents) {
    std::string raw;
    if (!pre.location_of(agent).has_value()) {
      raw = "none";
    } else {
      std::vector<std::string> parts;
      if (t > 0 && std::find(prev_witnesses.begin(), prev_witnesses.end(),
                             agent) != prev_witnesses.end()) {
        parts.push_back("<same_as_last_action_" +
                        std::to_string(prev_actor_index + 1) + " />");
      }
      const std::string perceived = perceived_state_text(sc, pre, agent);
      parts.push_back(perceived == full ? "<same_as_state />" : perceived);
      const std::string mental = mental_text(sc, pre, agent);
      if (!mental.empty()) {
        parts.push_back("<mental_state>" + mental + "</mental_state>");
      }
      raw = join(parts, " ");
    }
    step.observations.set(agent, ObservationExpr{raw});
    const bool acts = event && event->actor == agent;
    step.actions.set(agent, AgentAction{
        acts ? event_action_text(sc, *event, pre) : std::string("none")});
  }
  return step;
}

}  // namespace

Trajectory ground_truth_trajectory(const OracleScenario& scenario) {
  std::vector<WorldSnapshot> snaps = simulate(scenario);
  Trajectory traj;
  for (const auto& [agent, _] : scenario.agents) traj.agents.push_back(agent);

  if (scenario.events.empty()) {
    traj.steps.push_back(build_step(scenario, snaps, 0, nullptr));
    return traj;
  }
  for (std::size_t t = 0; t < scenario.events.size(); ++t) {
    traj.steps.push_back(build_step(scenario, snaps, t, &scenario.events[t]));
  }
  return traj;
}

const SentenceBanks& sentence_banks() {
  static const SentenceBanks banks = {
      {
          "{A} entered the {L}.",
          "{A} walked into the {L}.",
          "{A} came into the {L}.",
      },
      {
          "{A} exited the {L}.",
          "{A} left the {L}.",
          "{A} walked out of the {L}.",
      },
      {
          "{A} moved the {O} to the {C}.",
          "{A} put the {O} into the {C}.",
          "{A} transferred the {O} to the {C}.",
      },
      {
          "{A} publicly claimed that the {O} is in the {C}.",
          "{A} announced to everyone that the {O} is in the {C}.",
      },
      {
          "{A} privately told {R} that the {O} is in the {C}.",
          "{A} whispered to {R} that the {O} is in the {C}.",
      },
  };
  return banks;
}

namespace {

std::string fill(std::string text, const std::string& slot,
                 const std::string& value) {
  std::size_t pos = text.find(slot);
  while (pos != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos = text.find(slot, pos + value.size());
  }
  return text;
}

std::string event_sentence(const OracleScenario& sc, const Event& ev,
                           const WorldSnapshot& pre, std::size_t variant) {
  (void)sc;
  const SentenceBanks& banks = sentence_banks();
  const std::vector<std::string>* bank = nullptr;
  switch (ev.kind) {
    case EventKind::Enter: bank = &banks.enter; break;
    case EventKind::Exit: bank = &banks.exit; break;
    case EventKind::MoveObject: bank = &banks.move_object; break;
    case EventKind::PublicClaim: bank = &banks.public_claim; break;
    case EventKind::PrivateTell: bank = &banks.private_tell; break;
  }
  std::string s = (*bank)[variant % bank->size()];
  s = fill(s, "{A}", ev.actor.name);
  if (ev.kind == EventKind::Enter) {
    s = fill(s, "{L}", ev.location);
  } else if (ev.kind == EventKind::Exit) {
    std::optional<std::string> loc = pre.location_of(ev.actor);
    s = fill(s, "{L}", loc ? *loc : std::string("scene"));
  }
  s = fill(s, "{R}", ev.recipient.name);
  s = fill(s, "{O}", ev.object);
  return fill(s, "{C}", ev.container);
}

}  // namespace

std::string render_narrative(const OracleScenario& scenario, bool paraphrase,
                             std::uint64_t paraphrase_seed) {
  std::vector<WorldSnapshot> snaps = simulate(scenario);

  std::vector<std::string> placement;
  for (const auto& [container, location] : scenario.containers) {
    placement.push_back("The " + container + " is in the " + location + ".");
  }
  for (const auto& [object, container] : scenario.objects) {
    placement.push_back("The " + object + " is in the " + container + ".");
  }
  for (const auto& [agent, location] : scenario.agents) {
    placement.push_back(location.empty()
                            ? agent.name + " is away."
                            : agent.name + " is in the " + location + ".");
  }

  std::mt19937_64 rng(paraphrase_seed);
  std::vector<std::string> sentences;
  for (std::size_t i = 0; i < scenario.events.size(); ++i) {
    std::size_t variant = paraphrase ? static_cast<std::size_t>(rng() % 64) : 0;
    sentences.push_back(
        event_sentence(scenario, scenario.events[i], snaps[i], variant));
  }

  std::string out = join(placement, " ");
  if (!sentences.empty()) out += "\n\n" + join(sentences, "\n");
  return out;
}

OracleScenario generate_scenario(std::uint64_t seed, const GenParams& params) {
  static const std::vector<std::string> kAgents = {
      "Sally", "Anne", "Mark", "Emma", "Liam", "Olivia",
      "Noah",  "Ava",  "Ethan", "Mia", "Lucas", "Chloe"};
  static const std::vector<std::string> kLocations = {
      "kitchen", "garden", "hallway", "pantry", "attic", "cellar", "porch", "study"};
  static const std::vector<std::string> kContainers = {
      "basket", "box", "drawer", "crate", "jar", "chest", "bag", "cupboard"};
  static const std::vector<std::string> kObjects = {
      "marble", "apple", "book", "key", "coin"};

  if (params.n_agents < 1 || params.n_locations < 1 ||
      params.n_containers < 1 || params.n_events < 0) {
    throw InfeasibleParamsError("scenario parameters must be positive");
  }
  if (params.n_agents > static_cast<int>(kAgents.size()) ||
      params.n_locations > static_cast<int>(kLocations.size()) ||
      params.n_containers > static_cast<int>(kContainers.size())) {
    throw InfeasibleParamsError("scenario parameters exceed the name pools");
  }
  if (params.force_false_belief) {
    if (params.n_agents < 2) {
      throw InfeasibleParamsError("false-belief scenarios need at least 2 agents");
    }
    if (params.n_containers < 2) {
      throw InfeasibleParamsError("false-belief scenarios need at least 2 containers");
    }
    if (params.n_events < 2) {
      throw InfeasibleParamsError("false-belief scenarios need at least 2 events");
    }
  }

  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  OracleScenario sc;
  for (int i = 0; i < params.n_locations; ++i) sc.locations.push_back(kLocations[i]);
  for (int i = 0; i < params.n_containers; ++i) {
    std::string loc;
    if (params.force_false_belief && i < 2) {
      loc = sc.locations[0];
    } else {
      loc = sc.locations[pick(sc.locations.size())];
    }
    sc.containers.emplace_back(kContainers[i], loc);
  }
  const std::string object = kObjects[pick(kObjects.size())];
  const std::string initial_container =
      params.force_false_belief ? sc.containers[0].first
                                : sc.containers[pick(sc.containers.size())].first;
  sc.objects.emplace_back(object, initial_container);

  for (int i = 0; i < params.n_agents; ++i) {
    std::string loc;
    if (params.force_false_belief && i < 2) {
      loc = sc.locations[0];
    } else {
      loc = sc.locations[pick(sc.locations.size())];
    }
    sc.agents.emplace_back(AgentId{kAgents[i]}, loc);
  }

  // Lightweight replay state for candidate enumeration.
  std::vector<std::optional<std::string>> agent_loc;
  for (const auto& [_, loc] : sc.agents) {
    agent_loc.push_back(loc.empty() ? std::nullopt : std::make_optional(loc));
  }
  std::string placement = initial_container;
  auto loc_of_container = [&](const std::string& c) {
    return *sc.container_location(c);
  };

  const AgentId victim = sc.agents[0].first;
  const AgentId mover = params.n_agents > 1 ? sc.agents[1].first : sc.agents[0].first;

  auto apply_local = [&](const Event& ev) {
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      if (!(sc.agents[i].first == ev.actor)) continue;
      if (ev.kind == EventKind::Enter) agent_loc[i] = ev.location;
      if (ev.kind == EventKind::Exit) agent_loc[i] = std::nullopt;
    }
    if (ev.kind == EventKind::MoveObject) placement = ev.container;
  };

  auto enumerate_candidates = [&](bool restricted) {
    std::vector<Event> candidates;
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      const AgentId& actor = sc.agents[i].first;
      const bool pinned = restricted && (actor == victim || actor == mover);
      if (!agent_loc[i]) {
        if (!pinned) {
          for (const std::string& L : sc.locations) {
            candidates.push_back(Event{EventKind::Enter, actor, L, "", "", {}});
          }
        }
        continue;
      }
      if (!pinned) {
        candidates.push_back(Event{EventKind::Exit, actor, "", "", "", {}});
      }
      // Moves never relocate anyone, so pinned agents may move things.
      if (loc_of_container(placement) == *agent_loc[i]) {
        for (const auto& [container, cloc] : sc.containers) {
          if (cloc == *agent_loc[i] && container != placement) {
            candidates.push_back(
                Event{EventKind::MoveObject, actor, "", object, container, {}});
          }
        }
      }
    }
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
      const AgentId& speaker = sc.agents[i].first;
      if (!restricted || speaker == victim) {
        for (const auto& [container, _] : sc.containers) {
          candidates.push_back(
              Event{EventKind::PublicClaim, speaker, "", object, container, {}});
        }
      }
      for (std::size_t j = 0; j < sc.agents.size(); ++j) {
        if (i == j) continue;
        const AgentId& recipient = sc.agents[j].first;
        if (restricted && recipient == victim) continue;
        for (const auto& [container, _] : sc.containers) {
          candidates.push_back(Event{EventKind::PrivateTell, speaker, "", object,
                                     container, recipient});
        }
      }
    }
    return candidates;
  };

  const int scripted = params.force_false_belief ? 2 : 0;
  for (int i = 0; i < params.n_events - scripted; ++i) {
    std::vector<Event> candidates = enumerate_candidates(params.force_false_belief);
    if (candidates.empty()) break;
    Event ev = candidates[pick(candidates.size())];
    apply_local(ev);
    sc.events.push_back(std::move(ev));
  }

  if (params.force_false_belief) {
    sc.events.push_back(Event{EventKind::Exit, victim, "", "", "", {}});
    std::vector<std::string> destinations;
    for (const auto& [container, cloc] : sc.containers) {
      if (cloc == sc.locations[0] && container != placement) {
        destinations.push_back(container);
      }
    }
    if (destinations.empty()) {
      throw InfeasibleParamsError("no destination container for the false-belief move");
    }
    sc.events.push_back(Event{EventKind::MoveObject, mover, "", object,
                              destinations[pick(destinations.size())], {}});
  }

  sc.validate();
  if (params.force_false_belief) {
    std::vector<WorldSnapshot> snaps = simulate(sc);
    std::optional<std::string> belief =
        query_belief(snaps, {victim}, object, snaps.size() - 1);
    std::optional<std::string> truth =
        query_belief(snaps, {}, object, snaps.size() - 1);
    if (!belief || !truth || *belief == *truth) {
      throw S3apError("internal: false-belief construction failed for seed " +
                      std::to_string(seed));
    }
  }
  return sc;
}

namespace {

const char* event_kind_name(EventKind kind) {
  switch (kind) {
    case EventKind::Enter: return "enter";
    case EventKind::Exit: return "exit";
    case EventKind::MoveObject: return "move_object";
    case EventKind::PublicClaim: return "public_claim";
    case EventKind::PrivateTell: return "private_tell";
  }
  return "unknown";
}

EventKind event_kind_from(const std::string& name) {
  if (name == "enter") return EventKind::Enter;
  if (name == "exit") return EventKind::Exit;
  if (name == "move_object") return EventKind::MoveObject;
  if (name == "public_claim") return EventKind::PublicClaim;
  if (name == "private_tell") return EventKind::PrivateTell;
  throw InvalidEventError("unknown event kind '" + name + "'");
}

}  // namespace

ordered_json OracleScenario::to_json() const {
  ordered_json doc;
  doc["locations"] = locations;
  ordered_json conts = ordered_json::object();
  for (const auto& [c, l] : containers) conts[c] = l;
  doc["containers"] = std::move(conts);
  ordered_json objs = ordered_json::object();
  for (const auto& [o, c] : objects) objs[o] = c;
  doc["objects"] = std::move(objs);
  ordered_json ags = ordered_json::object();
  for (const auto& [a, l] : agents) ags[a.name] = l;
  doc["agents"] = std::move(ags);
  ordered_json evs = ordered_json::array();
  for (const Event& ev : events) {
    ordered_json e;
    e["kind"] = event_kind_name(ev.kind);
    e["actor"] = ev.actor.name;
    switch (ev.kind) {
      case EventKind::Enter:
        e["location"] = ev.location;
        break;
      case EventKind::Exit:
        break;
      case EventKind::MoveObject:
        e["object"] = ev.object;
        e["container"] = ev.container;
        break;
      case EventKind::PublicClaim:
        e["object"] = ev.object;
        e["container"] = ev.container;
        break;
      case EventKind::PrivateTell:
        e["recipient"] = ev.recipient.name;
        e["object"] = ev.object;
        e["container"] = ev.container;
        break;
    }
    evs.push_back(std::move(e));
  }
  doc["events"] = std::move(evs);
  return doc;
}

OracleScenario OracleScenario::from_json(const ordered_json& doc) {
  OracleScenario sc;
  if (!doc.is_object()) throw UnknownEntityError("scenario document must be a JSON object");
  for (const auto& l : doc.value("locations", ordered_json::array())) {
    sc.locations.push_back(l.get<std::string>());
  }
  if (doc.contains("containers")) {
    for (const auto& [c, l] : doc["containers"].items()) {
      sc.containers.emplace_back(c, l.get<std::string>());
    }
  }
  if (doc.contains("objects")) {
    for (const auto& [o, c] : doc["objects"].items()) {
      sc.objects.emplace_back(o, c.get<std::string>());
    }
  }
  if (doc.contains("agents")) {
    for (const auto& [a, l] : doc["agents"].items()) {
      sc.agents.emplace_back(AgentId{a}, l.get<std::string>());
    }
  }
  for (const auto& e : doc.value("events", ordered_json::array())) {
    Event ev;
    ev.kind = event_kind_from(e.value("kind", ""));
    ev.actor = AgentId{e.value("actor", "")};
    ev.location = e.value("location", "");
    ev.object = e.value("object", "");
    ev.container = e.value("container", "");
    ev.recipient = AgentId{e.value("recipient", "")};
    sc.events.push_back(std::move(ev));
  }
  sc.validate();
  return sc;
}

OracleScenario OracleScenario::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw S3apError("cannot read scenario file '" + path + "'");
  ordered_json doc = ordered_json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw S3apError("scenario file '" + path + "' is not valid JSON");
  }
  return from_json(doc);
}

void OracleScenario::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw S3apError("cannot write scenario file '" + path + "'");
  out << to_json().dump(2) << "\n";
}

}  // namespace s3ap::oracle
