#include "s3ap/envs.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "s3ap/errors.hpp"

namespace s3ap::envs {

using nlohmann::ordered_json;

namespace {

std::optional<int> int_after(const std::string& text, const std::string& marker) {
  std::size_t pos = text.find(marker);
  if (pos == std::string::npos) return std::nullopt;
  pos += marker.size();
  std::size_t end = pos;
  while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) {
    ++end;
  }
  if (end == pos) return std::nullopt;
  return std::stoi(text.substr(pos, end - pos));
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i > 0) out += ", ";
    out += names[i];
  }
  return out;
}

std::string observation_raw(const std::string& mental) {
  return "<same_as_state /> <mental_state>" + mental + "</mental_state>";
}

// Last step's state with its recorded actions folded in; the convention for
// reading the decision-point state off a trajectory that may end in either a
// pending step (all actions "none") or a predicted step with responses.
std::string effective_state(const ToyEnv& env, const Trajectory& traj) {
  if (traj.steps.empty()) return env.initial_state();
  const SimulationStep& last = traj.steps.back();
  return env.apply_actions(last.state, last);
}

ordered_json load_json_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw S3apError(std::string("cannot read ") + what + " file '" + path + "'");
  }
  ordered_json doc = ordered_json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    throw S3apError(std::string(what) + " file '" + path +
                    "' is not valid JSON");
  }
  return doc;
}

}  // namespace

std::string ToyEnv::apply_actions(const std::string& state,
                                  const SimulationStep& step) const {
  std::string out = state;
  for (const AgentId& agent : agents()) {
    const AgentAction* action = step.actions.find(agent);
    if (action == nullptr || action->is_none()) continue;
    out = transition_or_forfeit(out, agent, *action);
  }
  return out;
}

std::string ToyEnv::transition_or_forfeit(const std::string& state,
                                          const AgentId& actor,
                                          const AgentAction& action) const {
  if (!legal(state, actor, action)) return state;
  return transition(state, actor, action);
}

void NegotiationConfig::validate() const {
  if (concession < 1) {
    throw InfeasibleParamsError("concession must be at least 1");
  }
  if (seller_reservation < 1) {
    throw InfeasibleParamsError("seller reservation must be at least 1");
  }
  if (initial_ask <= seller_reservation) {
    throw InfeasibleParamsError(
        "initial ask must exceed the seller reservation");
  }
  if ((initial_ask - seller_reservation) % concession != 0) {
    throw InfeasibleParamsError(
        "the ask must reach the reservation in whole concessions");
  }
  if (buyer_value <= seller_reservation) {
    throw InfeasibleParamsError("buyer value must exceed the seller reservation");
  }
  if (buyer_accept_limit < 1) {
    throw InfeasibleParamsError("buyer accept limit must be at least 1");
  }
  if (max_turns < 0) {
    throw InfeasibleParamsError("max_turns must be non-negative");
  }
}

ordered_json NegotiationConfig::to_json() const {
  return ordered_json{{"initial_ask", initial_ask},
                      {"concession", concession},
                      {"seller_reservation", seller_reservation},
                      {"buyer_value", buyer_value},
                      {"buyer_accept_limit", buyer_accept_limit},
                      {"max_turns", max_turns}};
}

NegotiationConfig NegotiationConfig::from_json(const ordered_json& doc) {
  if (!doc.is_object()) {
    throw S3apError("negotiation config must be a JSON object");
  }
  NegotiationConfig cfg;
  cfg.initial_ask = doc.value("initial_ask", cfg.initial_ask);
  cfg.concession = doc.value("concession", cfg.concession);
  cfg.seller_reservation = doc.value("seller_reservation", cfg.seller_reservation);
  cfg.buyer_value = doc.value("buyer_value", cfg.buyer_value);
  cfg.buyer_accept_limit = doc.value("buyer_accept_limit", cfg.buyer_accept_limit);
  cfg.max_turns = doc.value("max_turns", cfg.max_turns);
  cfg.validate();
  return cfg;
}

NegotiationConfig NegotiationConfig::load_file(const std::string& path) {
  return from_json(load_json_file(path, "negotiation config"));
}

NegotiationEnv::NegotiationEnv(NegotiationConfig config)
    : config_(std::move(config)), agents_{AgentId{"Buyer"}, AgentId{"Seller"}} {
  config_.validate();
}

std::string NegotiationEnv::initial_state() const {
  State s;
  s.ask = config_.initial_ask;
  return render_state(s);
}

std::string NegotiationEnv::render_state(const State& s) const {
  if (s.deal) {
    return "The Buyer and the Seller agreed on a price of " +
           std::to_string(s.price) + ". The final asking price was " +
           std::to_string(s.ask) + ".";
  }
  std::string out = "The Seller asks " + std::to_string(s.ask) + " for the item.";
  if (s.offered.has_value()) {
    out += " The Buyer has offered " + std::to_string(*s.offered) + ".";
  }
  out += " No deal has been made.";
  return out;
}

NegotiationEnv::State NegotiationEnv::parse_state(const std::string& state) const {
  State s;
  if (state.rfind("The Buyer and the Seller agreed on a price of ", 0) == 0) {
    std::optional<int> price = int_after(state, "agreed on a price of ");
    std::optional<int> ask = int_after(state, "The final asking price was ");
    if (!price || !ask) {
      throw EnvRuleError("negotiation: unrecognized state '" + state + "'");
    }
    s.deal = true;
    s.price = *price;
    s.ask = *ask;
    return s;
  }
  std::optional<int> ask = int_after(state, "The Seller asks ");
  if (state.rfind("The Seller asks ", 0) != 0 || !ask ||
      state.find(" for the item.") == std::string::npos ||
      state.find("No deal has been made.") == std::string::npos) {
    throw EnvRuleError("negotiation: unrecognized state '" + state + "'");
  }
  s.ask = *ask;
  s.offered = int_after(state, "The Buyer has offered ");
  return s;
}

bool NegotiationEnv::is_terminal(const std::string& state) const {
  return parse_state(state).deal;
}

bool NegotiationEnv::legal(const std::string& state, const AgentId& actor,
                           const AgentAction& action) const {
  State s = parse_state(state);
  if (action.is_none()) return true;
  if (s.deal) return false;
  std::string r = trim(action.raw);
  if (actor == buyer()) {
    if (r == "accept the offer of " + std::to_string(s.ask)) return true;
    std::optional<int> x = int_after(r, "counter at ");
    return x.has_value() && r == "counter at " + std::to_string(*x) && *x >= 1 &&
           *x < s.ask;
  }
  if (actor == seller()) {
    if (s.offered.has_value() &&
        r == "accept the offer of " + std::to_string(*s.offered)) {
      return true;
    }
    std::optional<int> a = int_after(r, "ask ");
    return a.has_value() && r == "ask " + std::to_string(*a) && *a >= 1 &&
           *a <= s.ask;
  }
  throw UnknownAgentError("unknown agent '" + actor.name + "'");
}

std::string NegotiationEnv::transition(const std::string& state,
                                       const AgentId& actor,
                                       const AgentAction& action) const {
  if (!legal(state, actor, action)) {
    throw EnvRuleError("negotiation: illegal action '" + action.raw + "' by " +
                       actor.name + " at state '" + state + "'");
  }
  if (action.is_none()) return state;
  State s = parse_state(state);
  std::string r = trim(action.raw);
  if (r.rfind("accept the offer of ", 0) == 0) {
    State done;
    done.deal = true;
    done.price = actor == buyer() ? s.ask : *s.offered;
    done.ask = s.ask;
    return render_state(done);
  }
  if (actor == buyer()) {
    s.offered = *int_after(r, "counter at ");
  } else {
    s.ask = *int_after(r, "ask ");
    s.offered.reset();
  }
  return render_state(s);
}

AgentAction NegotiationEnv::scripted_action(const std::string& state,
                                            const AgentId& actor) const {
  State s = parse_state(state);
  if (s.deal) return AgentAction{"none"};
  if (actor == buyer()) {
    if (s.ask <= config_.buyer_accept_limit) {
      return AgentAction{"accept the offer of " + std::to_string(s.ask)};
    }
    return AgentAction{"counter at " + std::to_string(config_.buyer_accept_limit)};
  }
  if (actor == seller()) {
    if (s.offered.has_value() && *s.offered >= s.ask) {
      return AgentAction{"accept the offer of " + std::to_string(*s.offered)};
    }
    int next = std::max(config_.seller_reservation, s.ask - config_.concession);
    return AgentAction{"ask " + std::to_string(std::min(s.ask, next))};
  }
  throw UnknownAgentError("unknown agent '" + actor.name + "'");
}

std::string NegotiationEnv::mental(const std::string& state,
                                   const AgentId& agent) const {
  State s = parse_state(state);
  if (agent == buyer()) {
    return "I would love a bargain, but I am willing to pay up to " +
           std::to_string(config_.buyer_accept_limit) + ".";
  }
  if (agent == seller()) {
    int settle = std::max(config_.seller_reservation, s.ask - config_.concession);
    return "I want a good price for the item, but I am willing to settle near " +
           std::to_string(settle) + ".";
  }
  throw UnknownAgentError("unknown agent '" + agent.name + "'");
}

GoalScore NegotiationEnv::score_of(const std::string& final_state,
                                   const AgentId& agent) const {
  State s = parse_state(final_state);
  if (!(agent == buyer()) && !(agent == seller())) {
    throw UnknownAgentError("unknown agent '" + agent.name + "'");
  }
  if (!s.deal) return GoalScore{0.0};
  double value;
  if (agent == buyer()) {
    value = 10.0 * (config_.buyer_value - s.price) /
            (config_.buyer_value - config_.seller_reservation);
  } else {
    value = 10.0 * (s.price - config_.seller_reservation) /
            (config_.initial_ask - config_.seller_reservation);
  }
  return GoalScore{std::clamp(value, 0.0, 10.0)};
}

ActionSpace NegotiationEnv::action_space(const AgentId& actor,
                                         const std::string& state) const {
  State s = parse_state(state);
  ActionSpace space;
  space.kind = ActionSpace::Kind::FreeTextWithFormat;
  if (s.deal) {
    space.format_instructions = "The negotiation is over; the only action is \"none\".";
    return space;
  }
  if (actor == buyer()) {
    space.format_instructions =
        "One of: \"accept the offer of " + std::to_string(s.ask) +
        "\", \"counter at {amount}\" with an amount from 1 to " +
        std::to_string(s.ask - 1) + ", or \"none\".";
  } else if (actor == seller()) {
    std::string accept = s.offered.has_value()
                             ? "\"accept the offer of " +
                                   std::to_string(*s.offered) + "\", "
                             : "";
    space.format_instructions =
        "One of: " + accept + "\"ask {amount}\" with an amount from 1 to " +
        std::to_string(s.ask) + ", or \"none\".";
  } else {
    throw UnknownAgentError("unknown agent '" + actor.name + "'");
  }
  return space;
}

Goal NegotiationEnv::goal_of(const AgentId& agent) const {
  if (agent == buyer()) {
    return Goal{"Buy the item for the lowest price you can get.",
                "negotiation-buyer"};
  }
  if (agent == seller()) {
    return Goal{"Sell the item for the highest price you can get.",
                "negotiation-seller"};
  }
  throw UnknownAgentError("unknown agent '" + agent.name + "'");
}

void MutualFriendConfig::validate() const {
  if (max_turns < 0) {
    throw InfeasibleParamsError("max_turns must be non-negative");
  }
  for (const std::vector<std::string>* list : {&ego_friends, &partner_friends}) {
    if (list->empty()) {
      throw InfeasibleParamsError("friend lists must be nonempty");
    }
    for (std::size_t i = 0; i < list->size(); ++i) {
      const std::string& name = (*list)[i];
      if (name.empty() || name.find_first_of(",().") != std::string::npos) {
        throw InfeasibleParamsError("invalid friend name '" + name + "'");
      }
      for (std::size_t j = i + 1; j < list->size(); ++j) {
        if (name == (*list)[j]) {
          throw InfeasibleParamsError("duplicate friend name '" + name + "'");
        }
      }
    }
  }
}

ordered_json MutualFriendConfig::to_json() const {
  return ordered_json{{"ego_friends", ego_friends},
                      {"partner_friends", partner_friends},
                      {"max_turns", max_turns}};
}

MutualFriendConfig MutualFriendConfig::from_json(const ordered_json& doc) {
  if (!doc.is_object()) {
    throw S3apError("mutual-friend config must be a JSON object");
  }
  MutualFriendConfig cfg;
  cfg.ego_friends =
      doc.value("ego_friends", std::vector<std::string>{});
  cfg.partner_friends =
      doc.value("partner_friends", std::vector<std::string>{});
  cfg.max_turns = doc.value("max_turns", cfg.max_turns);
  cfg.validate();
  return cfg;
}

MutualFriendConfig MutualFriendConfig::load_file(const std::string& path) {
  return from_json(load_json_file(path, "mutual-friend config"));
}

MutualFriendEnv::MutualFriendEnv(MutualFriendConfig config)
    : config_(std::move(config)), agents_{AgentId{"Riley"}, AgentId{"Jordan"}} {
  config_.validate();
}

const std::vector<std::string>& MutualFriendEnv::list_of(const AgentId& agent) const {
  if (agent == ego()) return config_.ego_friends;
  if (agent == partner()) return config_.partner_friends;
  throw UnknownAgentError("unknown agent '" + agent.name + "'");
}

std::vector<std::string> MutualFriendEnv::intersection() const {
  std::vector<std::string> out;
  for (const std::string& name : config_.ego_friends) {
    if (std::find(config_.partner_friends.begin(), config_.partner_friends.end(),
                  name) != config_.partner_friends.end()) {
      out.push_back(name);
    }
  }
  return out;
}

std::string MutualFriendEnv::initial_state() const {
  return render_state(State{});
}

std::string MutualFriendEnv::render_state(const State& s) const {
  std::string out = "Riley and Jordan are looking for a mutual friend.";
  if (s.mentions.empty()) {
    out += " No names have been mentioned.";
  } else {
    out += " Mentioned so far: ";
    for (std::size_t i = 0; i < s.mentions.size(); ++i) {
      if (i > 0) out += ", ";
      out += s.mentions[i].first + " (by " + s.mentions[i].second + ")";
    }
    out += ".";
  }
  if (!s.identified.empty()) {
    out += " Identified mutual friends: " + join_names(s.identified) + ".";
  }
  if (s.wrong.has_value()) {
    out += " The claim that " + *s.wrong + " is a mutual friend was wrong.";
  } else if (s.complete) {
    out += " Every mutual friend has been identified.";
  }
  return out;
}

MutualFriendEnv::State MutualFriendEnv::parse_state(const std::string& state) const {
  const std::string prefix = "Riley and Jordan are looking for a mutual friend.";
  if (state.rfind(prefix, 0) != 0) {
    throw EnvRuleError("mutual-friend: unrecognized state '" + state + "'");
  }
  auto section = [&](const std::string& marker) -> std::optional<std::string> {
    std::size_t pos = state.find(marker);
    if (pos == std::string::npos) return std::nullopt;
    pos += marker.size();
    std::size_t end = state.find('.', pos);
    if (end == std::string::npos) {
      throw EnvRuleError("mutual-friend: unrecognized state '" + state + "'");
    }
    return state.substr(pos, end - pos);
  };
  auto split = [](const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t comma = text.find(", ", start);
      if (comma == std::string::npos) {
        parts.push_back(text.substr(start));
        break;
      }
      parts.push_back(text.substr(start, comma - start));
      start = comma + 2;
    }
    return parts;
  };

  State s;
  if (std::optional<std::string> mentioned = section(" Mentioned so far: ")) {
    for (const std::string& entry : split(*mentioned)) {
      std::size_t by = entry.find(" (by ");
      if (by == std::string::npos || entry.back() != ')') {
        throw EnvRuleError("mutual-friend: unrecognized state '" + state + "'");
      }
      std::string name = entry.substr(0, by);
      std::string agent = entry.substr(by + 5, entry.size() - by - 6);
      s.mentions.emplace_back(name, agent);
    }
  } else if (state.find(" No names have been mentioned.") == std::string::npos) {
    throw EnvRuleError("mutual-friend: unrecognized state '" + state + "'");
  }
  if (std::optional<std::string> found = section(" Identified mutual friends: ")) {
    s.identified = split(*found);
  }
  std::size_t wrong = state.find(" The claim that ");
  if (wrong != std::string::npos) {
    std::size_t tail = state.find(" is a mutual friend was wrong.");
    if (tail == std::string::npos) {
      throw EnvRuleError("mutual-friend: unrecognized state '" + state + "'");
    }
    s.wrong = state.substr(wrong + 16, tail - wrong - 16);
  }
  s.complete =
      state.find(" Every mutual friend has been identified.") != std::string::npos;
  return s;
}

bool MutualFriendEnv::is_terminal(const std::string& state) const {
  State s = parse_state(state);
  return s.wrong.has_value() || s.complete;
}

bool MutualFriendEnv::legal(const std::string& state, const AgentId& actor,
                            const AgentAction& action) const {
  State s = parse_state(state);
  if (action.is_none()) return true;
  if (s.wrong.has_value() || s.complete) return false;
  const std::vector<std::string>& mine = list_of(actor);
  std::string r = trim(action.raw);
  std::string name;
  if (r.rfind("mention ", 0) == 0 || r.rfind("declare ", 0) == 0) {
    name = r.substr(8);
  } else {
    return false;
  }
  if (std::find(mine.begin(), mine.end(), name) == mine.end()) return false;
  return std::find(s.identified.begin(), s.identified.end(), name) ==
         s.identified.end();
}

std::string MutualFriendEnv::transition(const std::string& state,
                                        const AgentId& actor,
                                        const AgentAction& action) const {
  if (!legal(state, actor, action)) {
    throw EnvRuleError("mutual-friend: illegal action '" + action.raw + "' by " +
                       actor.name + " at state '" + state + "'");
  }
  if (action.is_none()) return state;
  State s = parse_state(state);
  std::string r = trim(action.raw);
  std::string name = r.substr(8);
  if (r.rfind("mention ", 0) == 0) {
    s.mentions.emplace_back(name, actor.name);
    return render_state(s);
  }
  std::vector<std::string> mutual = intersection();
  if (std::find(mutual.begin(), mutual.end(), name) == mutual.end()) {
    s.wrong = name;
    return render_state(s);
  }
  s.identified.push_back(name);
  if (s.identified.size() == mutual.size()) s.complete = true;
  return render_state(s);
}

AgentAction MutualFriendEnv::scripted_action(const std::string& state,
                                             const AgentId& actor) const {
  State s = parse_state(state);
  if (s.wrong.has_value() || s.complete) return AgentAction{"none"};
  const std::vector<std::string>& mine = list_of(actor);
  auto identified = [&](const std::string& name) {
    return std::find(s.identified.begin(), s.identified.end(), name) !=
           s.identified.end();
  };
  for (const auto& [name, by] : s.mentions) {
    if (by == actor.name || identified(name)) continue;
    if (std::find(mine.begin(), mine.end(), name) != mine.end()) {
      return AgentAction{"declare " + name};
    }
  }
  for (const std::string& name : mine) {
    if (identified(name)) continue;
    bool said = false;
    for (const auto& [mentioned, by] : s.mentions) {
      if (mentioned == name && by == actor.name) {
        said = true;
        break;
      }
    }
    if (!said) return AgentAction{"mention " + name};
  }
  return AgentAction{"none"};
}

std::string MutualFriendEnv::mental(const std::string& state,
                                    const AgentId& agent) const {
  (void)state;
  return "My friends are " + join_names(list_of(agent)) + ".";
}

GoalScore MutualFriendEnv::score_of(const std::string& final_state,
                                    const AgentId& agent) const {
  list_of(agent);  // agent existence check
  State s = parse_state(final_state);
  std::vector<std::string> mutual = intersection();
  if (mutual.empty()) return GoalScore{0.0};
  double fraction =
      static_cast<double>(s.identified.size()) / static_cast<double>(mutual.size());
  return GoalScore{std::clamp(10.0 * fraction, 0.0, 10.0)};
}

ActionSpace MutualFriendEnv::action_space(const AgentId& actor,
                                          const std::string& state) const {
  State s = parse_state(state);
  ActionSpace space;
  space.kind = ActionSpace::Kind::Enumerated;
  if (!s.wrong.has_value() && !s.complete) {
    for (const char* verb : {"mention ", "declare "}) {
      for (const std::string& name : list_of(actor)) {
        if (std::find(s.identified.begin(), s.identified.end(), name) !=
            s.identified.end()) {
          continue;
        }
        space.options.push_back(AgentAction{verb + name});
      }
    }
  }
  space.options.push_back(AgentAction{"none"});
  return space;
}

Goal MutualFriendEnv::goal_of(const AgentId& agent) const {
  list_of(agent);  // agent existence check
  return Goal{"Identify every mutual friend you share with your partner.",
              "mutual-friend"};
}

AgentMap<AgentAction> EnvOracleSwm::predict_others_actions(const SwmQuery& query) {
  query.validate();
  if (query.ego_action.has_value()) {
    throw S3apError("predict_others_actions takes a query without ego_action");
  }
  std::string state = effective_state(*env_, query.trajectory);
  AgentMap<AgentAction> out;
  for (const AgentId& agent : env_->agents()) {
    if (agent == query.ego) continue;
    AgentAction action = env_->scripted_action(state, agent);
    out.set(agent, action);
    state = env_->transition_or_forfeit(state, agent, action);
  }
  return out;
}

NextStepPrediction EnvOracleSwm::predict_next_step(const SwmQuery& query) {
  query.validate();
  if (!query.ego_action.has_value()) {
    throw S3apError("predict_next_step takes a query with ego_action");
  }
  return build_prediction(query, nullptr);
}

NextStepPrediction EnvOracleSwm::predict_next_step_given(
    const SwmQuery& query, const AgentMap<AgentAction>& others_actions) {
  query.validate();
  if (!query.ego_action.has_value()) {
    throw S3apError("predict_next_step_given takes a query with ego_action");
  }
  for (const AgentId& agent : env_->agents()) {
    if (agent == query.ego) continue;
    if (!others_actions.contains(agent)) {
      throw PredictionDecodeError("others_actions is missing agent '" +
                                  agent.name + "'");
    }
  }
  if (others_actions.contains(query.ego)) {
    throw PredictionDecodeError("others_actions must not contain the ego agent");
  }
  return build_prediction(query, &others_actions);
}

NextStepPrediction EnvOracleSwm::build_prediction(
    const SwmQuery& query, const AgentMap<AgentAction>* given) {
  std::string state = effective_state(*env_, query.trajectory);
  state = env_->transition_or_forfeit(state, query.ego, *query.ego_action);

  NextStepPrediction prediction;
  std::string run = state;
  for (const AgentId& agent : env_->agents()) {
    if (agent == query.ego) continue;
    AgentAction action =
        given != nullptr ? given->at(agent) : env_->scripted_action(run, agent);
    prediction.others_actions.set(agent, action);
    run = env_->transition_or_forfeit(run, agent, action);
  }

  SimulationStep step;
  std::size_t ordinal = query.trajectory.steps.size();
  step.timestep = Timestep{std::to_string(ordinal), ordinal};
  step.state = state;
  for (const AgentId& agent : env_->agents()) {
    step.observations.set(
        agent, ObservationExpr{observation_raw(env_->mental(state, agent))});
    if (agent == query.ego) {
      step.actions.set(agent, AgentAction{"none"});
    } else {
      step.actions.set(agent, prediction.others_actions.at(agent));
    }
  }
  prediction.next_step = std::move(step);
  return prediction;
}

AgentAction ScriptedEnvPolicy::sample_action(const ActionSpace& space,
                                             const Trajectory& state,
                                             const Goal& goal) {
  (void)space;
  (void)goal;
  return env_->scripted_action(effective_state(*env_, state), self_);
}

AgentAction NegotiationForesightRefiner::refine(
    const ActionSpace& space, const std::vector<SimulationStep>& sim_states,
    const Trajectory& original_state, const Goal& goal,
    const AgentAction& intended) {
  (void)space;
  (void)goal;
  if (original_state.steps.empty() || sim_states.empty()) return intended;
  NegotiationEnv::State now =
      env_->parse_state(effective_state(*env_, original_state));
  if (now.deal) return intended;

  const AgentId other = self_ == env_->buyer() ? env_->seller() : env_->buyer();
  const SimulationStep& last = sim_states.back();
  const ObservationExpr* obs = last.observations.find(other);
  if (obs == nullptr) return intended;
  std::optional<int> settle = int_after(obs->raw, "willing to settle near ");
  if (!settle.has_value()) return intended;

  int taken = static_cast<int>(original_state.steps.size()) - 1;
  int remaining = env_->config().max_turns - taken;
  if (now.ask - *settle >= 1 && remaining >= 3) {
    return AgentAction{"counter at " + std::to_string(*settle)};
  }
  if (now.ask <= env_->config().buyer_accept_limit) {
    return AgentAction{"accept the offer of " + std::to_string(now.ask)};
  }
  return intended;
}

AgentAction MutualFriendForesightRefiner::refine(
    const ActionSpace& space, const std::vector<SimulationStep>& sim_states,
    const Trajectory& original_state, const Goal& goal,
    const AgentAction& intended) {
  (void)space;
  (void)goal;
  if (original_state.steps.empty()) return intended;
  MutualFriendEnv::State now =
      env_->parse_state(effective_state(*env_, original_state));
  if (now.wrong.has_value() || now.complete) return intended;

  const std::vector<std::string>& mine = env_->list_of(self_);
  for (const SimulationStep& step : sim_states) {
    for (const auto& [agent, action] : step.actions) {
      if (agent == self_ || action.is_none()) continue;
      std::string r = trim(action.raw);
      if (r.rfind("mention ", 0) != 0 && r.rfind("declare ", 0) != 0) continue;
      std::string name = r.substr(8);
      if (std::find(mine.begin(), mine.end(), name) == mine.end()) continue;
      if (std::find(now.identified.begin(), now.identified.end(), name) !=
          now.identified.end()) {
        continue;
      }
      return AgentAction{"declare " + name};
    }
  }
  return intended;
}

SimulationStep pending_step(const ToyEnv& env, const std::string& state,
                            std::size_t t) {
  SimulationStep step;
  step.timestep = Timestep{std::to_string(t), t};
  step.state = state;
  for (const AgentId& agent : env.agents()) {
    step.observations.set(
        agent, ObservationExpr{observation_raw(env.mental(state, agent))});
    step.actions.set(agent, AgentAction{"none"});
  }
  return step;
}

EpisodeResult run_episode(const ToyEnv& env, const AgentMap<AgentSetup>& setups,
                          int max_turns) {
  const std::vector<AgentId>& order = env.agents();
  if (setups.size() != order.size()) {
    throw S3apError("episode needs a setup for exactly the env agents");
  }
  for (const AgentId& agent : order) {
    const AgentSetup* setup = setups.find(agent);
    if (setup == nullptr) {
      throw UnknownAgentError("no setup for agent '" + agent.name + "'");
    }
    if (setup->policy == nullptr) {
      throw S3apError("agent '" + agent.name + "' has no policy");
    }
    if (setup->foresee &&
        (setup->swm == nullptr || setup->refiner == nullptr)) {
      throw S3apError("agent '" + agent.name +
                      "' foresees but lacks a world model or refiner");
    }
  }

  EpisodeResult result;
  result.log.agents = order;
  std::string state = env.initial_state();
  int taken = 0;
  for (int t = 0; t < max_turns && !env.is_terminal(state); ++t) {
    const AgentId& actor = order[static_cast<std::size_t>(t) % order.size()];
    const AgentSetup& setup = *setups.find(actor);
    result.log = append_step(result.log, pending_step(env, state, static_cast<std::size_t>(t)));
    ActionSpace space = env.action_space(actor, state);
    Goal goal = env.goal_of(actor);
    AgentAction chosen =
        setup.foresee
            ? foresee_and_act(space, goal, result.log, setup.cfg, *setup.swm,
                              *setup.policy, actor, *setup.refiner)
            : sample_action(*setup.policy, space, result.log, goal);
    if (!env.legal(state, actor, chosen)) {
      chosen = AgentAction{"none"};
      ++result.forfeits;
    }
    result.log.steps.back().actions.set(actor, chosen);
    state = env.transition(state, actor, chosen);
    ++taken;
  }
  if (result.log.steps.empty()) {
    result.log = append_step(result.log, pending_step(env, state, 0));
  }
  result.final_state = state;
  for (const AgentId& agent : order) {
    result.scores.set(agent, env.score_of(state, agent));
  }
  result.log.metadata["env"] = env.name();
  result.log.metadata["final_state"] = state;
  result.log.metadata["turns"] = std::to_string(taken);
  result.log.metadata["forfeits"] = std::to_string(result.forfeits);
  return result;
}

NegotiationConfig negotiation_suite_config(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  NegotiationConfig cfg;
  int reservation = 40 + 5 * static_cast<int>(rng() % 7);
  int concession = 5 * (1 + static_cast<int>(rng() % 3));
  int rounds = 2 + static_cast<int>(rng() % 4);
  cfg.seller_reservation = reservation;
  cfg.concession = concession;
  cfg.initial_ask = reservation + rounds * concession;
  cfg.buyer_value = cfg.initial_ask + concession;
  switch (seed % 5) {
    case 0:
    case 1:
    case 2:
      cfg.buyer_accept_limit =
          reservation + concession * (1 + static_cast<int>(rng() % (rounds - 1)));
      cfg.max_turns = 2 * rounds + 1 + static_cast<int>(rng() % 2);
      break;
    case 3: {
      int shortfall = 1 + static_cast<int>(rng() % (rounds - 1));
      cfg.buyer_accept_limit = cfg.initial_ask;
      cfg.max_turns = 2 * (rounds - shortfall) + 1;
      break;
    }
    default:
      cfg.buyer_accept_limit = reservation - 5;
      cfg.max_turns = 2 * rounds + 1;
      break;
  }
  cfg.validate();
  return cfg;
}

MutualFriendConfig mutual_friend_suite_config(std::uint64_t seed) {
  static const std::vector<std::string> pool = {
      "Avery",  "Blake",  "Casey",  "Devon", "Ellis",  "Finley", "Gray",
      "Harper", "Indigo", "Jules",  "Kai",   "Logan",  "Morgan", "Noel",
      "Oakley", "Parker", "Quinn",  "Reese", "Sky",    "Tatum"};
  std::mt19937_64 rng(seed);
  int mine = 3 + static_cast<int>(rng() % 3);
  int theirs = 3 + static_cast<int>(rng() % 3);
  int i;
  int j;
  if (seed % 3 == 0) {
    i = static_cast<int>(rng() % mine);
    j = static_cast<int>(rng() % theirs);
  } else {
    j = static_cast<int>(rng() % std::min(theirs, mine - 1));
    i = j + 1 + static_cast<int>(rng() % (mine - j - 1));
  }

  std::vector<std::string> names = pool;
  int needed = mine + theirs - 1;
  for (int t = 0; t < needed; ++t) {
    std::size_t pick = static_cast<std::size_t>(t) +
                       rng() % (names.size() - static_cast<std::size_t>(t));
    std::swap(names[static_cast<std::size_t>(t)], names[pick]);
  }

  MutualFriendConfig cfg;
  cfg.ego_friends.assign(names.begin(), names.begin() + mine);
  cfg.partner_friends.assign(names.begin() + mine, names.begin() + needed);
  cfg.partner_friends.insert(cfg.partner_friends.begin() + j,
                             cfg.ego_friends[static_cast<std::size_t>(i)]);
  cfg.max_turns = seed % 3 == 0
                      ? std::min(2 * i + 1, 2 * j + 2) + 1 +
                            static_cast<int>(rng() % 2)
                      : 2 * j + 1;
  cfg.validate();
  return cfg;
}

}  // namespace s3ap::envs
