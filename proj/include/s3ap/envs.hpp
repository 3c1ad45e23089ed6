#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "s3ap/agent.hpp"
#include "s3ap/core.hpp"
#include "s3ap/swm.hpp"

namespace s3ap::envs {

// Deterministic two-agent turn-taking environment. All dynamics are keyed on
// the state text, so a world model backed by env rules is a pure function of
// the trajectory.
class ToyEnv {
 public:
  virtual ~ToyEnv() = default;

  virtual std::string name() const = 0;
  // Turn order; agents()[0] moves first and is the evaluated ego by default.
  virtual const std::vector<AgentId>& agents() const = 0;
  virtual std::string initial_state() const = 0;
  virtual bool is_terminal(const std::string& state) const = 0;
  virtual bool legal(const std::string& state, const AgentId& actor,
                     const AgentAction& action) const = 0;
  // EnvRuleError on illegal actions; "none" is the identity everywhere.
  virtual std::string transition(const std::string& state, const AgentId& actor,
                                 const AgentAction& action) const = 0;
  // Deterministic scripted line for any agent (partner play, myopic ego play).
  virtual AgentAction scripted_action(const std::string& state,
                                      const AgentId& actor) const = 0;
  virtual std::string mental(const std::string& state,
                             const AgentId& agent) const = 0;
  virtual GoalScore score_of(const std::string& final_state,
                             const AgentId& agent) const = 0;
  virtual ActionSpace action_space(const AgentId& actor,
                                   const std::string& state) const = 0;
  virtual Goal goal_of(const AgentId& agent) const = 0;
  virtual int max_turns() const = 0;

  // Folds a step's recorded actions into its pre-action state, in turn order.
  std::string apply_actions(const std::string& state,
                            const SimulationStep& step) const;
  std::string transition_or_forfeit(const std::string& state,
                                    const AgentId& actor,
                                    const AgentAction& action) const;
};

struct NegotiationConfig {
  int initial_ask = 85;
  int concession = 10;
  int seller_reservation = 65;
  int buyer_value = 95;
  int buyer_accept_limit = 75;
  int max_turns = 9;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static NegotiationConfig from_json(const nlohmann::ordered_json& doc);
  static NegotiationConfig load_file(const std::string& path);
};

// Price negotiation against a scripted seller: asks descend by `concession`
// per round down to the reservation; the seller accepts any offer meeting
// the current ask. Buyer score is linear in surplus, seller score linear in
// price over reservation, both clipped to [0, 10]; no deal scores 0.
class NegotiationEnv : public ToyEnv {
 public:
  explicit NegotiationEnv(NegotiationConfig config);

  std::string name() const override { return "negotiation"; }
  const std::vector<AgentId>& agents() const override { return agents_; }
  std::string initial_state() const override;
  bool is_terminal(const std::string& state) const override;
  bool legal(const std::string& state, const AgentId& actor,
             const AgentAction& action) const override;
  std::string transition(const std::string& state, const AgentId& actor,
                         const AgentAction& action) const override;
  AgentAction scripted_action(const std::string& state,
                              const AgentId& actor) const override;
  std::string mental(const std::string& state, const AgentId& agent) const override;
  GoalScore score_of(const std::string& final_state,
                     const AgentId& agent) const override;
  ActionSpace action_space(const AgentId& actor,
                           const std::string& state) const override;
  Goal goal_of(const AgentId& agent) const override;
  int max_turns() const override { return config_.max_turns; }

  const NegotiationConfig& config() const { return config_; }
  AgentId buyer() const { return agents_[0]; }
  AgentId seller() const { return agents_[1]; }

  struct State {
    bool deal = false;
    int price = 0;          // deal price when deal
    int ask = 0;            // current ask (deal: final asking price)
    std::optional<int> offered;  // outstanding buyer offer
  };
  State parse_state(const std::string& state) const;
  std::string render_state(const State& s) const;

 private:
  NegotiationConfig config_;
  std::vector<AgentId> agents_;
};

struct MutualFriendConfig {
  std::vector<std::string> ego_friends;
  std::vector<std::string> partner_friends;
  int max_turns = 8;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static MutualFriendConfig from_json(const nlohmann::ordered_json& doc);
  static MutualFriendConfig load_file(const std::string& path);
};

// Cooperative search for the friends both agents share. Agents alternate
// mentioning names from their private lists and declaring suspected mutual
// friends. Both agents score the identified fraction of the intersection
// times ten; a wrong declaration ends the episode early.
class MutualFriendEnv : public ToyEnv {
 public:
  explicit MutualFriendEnv(MutualFriendConfig config);

  std::string name() const override { return "mutual-friend"; }
  const std::vector<AgentId>& agents() const override { return agents_; }
  std::string initial_state() const override;
  bool is_terminal(const std::string& state) const override;
  bool legal(const std::string& state, const AgentId& actor,
             const AgentAction& action) const override;
  std::string transition(const std::string& state, const AgentId& actor,
                         const AgentAction& action) const override;
  AgentAction scripted_action(const std::string& state,
                              const AgentId& actor) const override;
  std::string mental(const std::string& state, const AgentId& agent) const override;
  GoalScore score_of(const std::string& final_state,
                     const AgentId& agent) const override;
  ActionSpace action_space(const AgentId& actor,
                           const std::string& state) const override;
  Goal goal_of(const AgentId& agent) const override;
  int max_turns() const override { return config_.max_turns; }

  const MutualFriendConfig& config() const { return config_; }
  AgentId ego() const { return agents_[0]; }
  AgentId partner() const { return agents_[1]; }
  const std::vector<std::string>& list_of(const AgentId& agent) const;

  std::vector<std::string> intersection() const;

  struct State {
    std::vector<std::pair<std::string, std::string>> mentions;  // name, by
    std::vector<std::string> identified;
    std::optional<std::string> wrong;
    bool complete = false;
  };
  State parse_state(const std::string& state) const;
  std::string render_state(const State& s) const;

 private:
  MutualFriendConfig config_;
  std::vector<AgentId> agents_;
};

// Exact world model backed by env rules and the scripted partner line.
// Folds the last step's recorded actions into its state, applies the ego
// action, and predicts the other agents' responses from the resulting state.
class EnvOracleSwm : public SocialWorldModel {
 public:
  explicit EnvOracleSwm(const ToyEnv& env) : env_(&env) {}

  AgentMap<AgentAction> predict_others_actions(const SwmQuery& query) override;
  NextStepPrediction predict_next_step(const SwmQuery& query) override;
  NextStepPrediction predict_next_step_given(
      const SwmQuery& query, const AgentMap<AgentAction>& others_actions) override;
  std::string identity() const override { return "oracle-swm:" + env_->name(); }

 private:
  NextStepPrediction build_prediction(const SwmQuery& query,
                                      const AgentMap<AgentAction>* given);
  const ToyEnv* env_;
};

// Plays the env's scripted line for one agent; ignores the goal.
class ScriptedEnvPolicy : public Policy {
 public:
  ScriptedEnvPolicy(const ToyEnv& env, AgentId self)
      : env_(&env), self_(std::move(self)) {}

  AgentAction sample_action(const ActionSpace& space, const Trajectory& state,
                            const Goal& goal) override;
  std::string identity() const override { return "scripted:" + env_->name(); }

 private:
  const ToyEnv* env_;
  AgentId self_;
};

// Holds out for the revealed willingness when the predicted descent shows a
// strictly better price and enough turns remain to close on it.
class NegotiationForesightRefiner : public Refiner {
 public:
  NegotiationForesightRefiner(const NegotiationEnv& env, AgentId self)
      : env_(&env), self_(std::move(self)) {}

  AgentAction refine(const ActionSpace& space,
                     const std::vector<SimulationStep>& sim_states,
                     const Trajectory& original_state, const Goal& goal,
                     const AgentAction& intended) override;
  std::string identity() const override { return "foresight:negotiation"; }

 private:
  const NegotiationEnv* env_;
  AgentId self_;
};

// Declares a mutual friend as soon as the predicted partner move reveals one.
class MutualFriendForesightRefiner : public Refiner {
 public:
  MutualFriendForesightRefiner(const MutualFriendEnv& env, AgentId self)
      : env_(&env), self_(std::move(self)) {}

  AgentAction refine(const ActionSpace& space,
                     const std::vector<SimulationStep>& sim_states,
                     const Trajectory& original_state, const Goal& goal,
                     const AgentAction& intended) override;
  std::string identity() const override { return "foresight:mutual-friend"; }

 private:
  const MutualFriendEnv* env_;
  AgentId self_;
};

struct AgentSetup {
  Policy* policy = nullptr;
  bool foresee = false;
  ForeseeConfig cfg{};
  SocialWorldModel* swm = nullptr;  // required when foresee
  Refiner* refiner = nullptr;       // required when foresee
};

struct EpisodeResult {
  AgentMap<GoalScore> scores;
  Trajectory log;          // full episode in protocol form
  std::string final_state;
  int forfeits = 0;
};

// The step skeleton an episode records before the turn's actor moves: the
// pre-action state, per-agent mental observations, and all-"none" actions.
SimulationStep pending_step(const ToyEnv& env, const std::string& state,
                            std::size_t t);

// Alternating turns up to max_turns or a terminal state. Illegal actions
// forfeit the turn (recorded as "none" and counted). Deterministic when all
// components are.
EpisodeResult run_episode(const ToyEnv& env, const AgentMap<AgentSetup>& setups,
                          int max_turns);

// Seeded parameter suites for the benchmark episodes.
NegotiationConfig negotiation_suite_config(std::uint64_t seed);
MutualFriendConfig mutual_friend_suite_config(std::uint64_t seed);

}  // namespace s3ap::envs
