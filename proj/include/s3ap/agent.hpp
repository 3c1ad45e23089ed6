#pragma once

#include <optional>
#include <string>
#include <vector>

#include "s3ap/backend.hpp"
#include "s3ap/core.hpp"
#include "s3ap/swm.hpp"

namespace s3ap {

struct ActionSpace {
  enum class Kind { Enumerated, FreeTextWithFormat };
  Kind kind = Kind::Enumerated;
  std::vector<AgentAction> options;   // Enumerated: nonempty, distinct
  std::string format_instructions;    // FreeTextWithFormat

  void validate() const;
  bool contains(const AgentAction& action) const;  // Enumerated membership
};

struct Goal {
  std::string description;
  std::string scorer;  // scoring rule id

  void validate() const;  // description nonempty
};

struct ForeseeConfig {
  int max_iterations = 1;  // N

  void validate() const;  // N >= 1
};

struct GoalScore {
  double value = 0.0;  // in [0, 10]

  void validate() const;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual AgentAction sample_action(const ActionSpace& space,
                                    const Trajectory& state,
                                    const Goal& goal) = 0;
  virtual std::string identity() const = 0;
};

class Refiner {
 public:
  virtual ~Refiner() = default;
  virtual AgentAction refine(const ActionSpace& space,
                             const std::vector<SimulationStep>& sim_states,
                             const Trajectory& original_state, const Goal& goal,
                             const AgentAction& intended) = 0;
  virtual std::string identity() const = 0;
};

// Samples an action and enforces space closure: Enumerated results must be
// members, free-text results must be nonempty. ActionDecodeError otherwise.
AgentAction sample_action(Policy& policy, const ActionSpace& space,
                          const Trajectory& state, const Goal& goal);

// Refinement step. Scripted refiners bypass prompting entirely; the LLM
// refiner fills the refinement template. The result is closure-checked.
AgentAction act_from_sim(const ActionSpace& space,
                         const std::vector<SimulationStep>& sim_states,
                         const Trajectory& original_state, const Goal& goal,
                         const AgentAction& intended, Refiner& refiner);

struct ForeseeTrace {
  AgentAction initial_sample;
  std::vector<SimulationStep> sim_states;
  AgentAction intended;  // final loop sample, shown to the refiner
  AgentAction refined;
  int swm_calls = 0;
  int sample_calls = 0;
};

// Lookahead loop: one initial sample, then N rounds of predict-and-resample,
// then one refinement that receives the original state (never the rolled
// forward one). Exactly N SWM calls, N+1 samples, 1 refinement.
AgentAction foresee_and_act(const ActionSpace& space, const Goal& goal,
                            const Trajectory& state, const ForeseeConfig& cfg,
                            SocialWorldModel& swm_model, Policy& policy,
                            const AgentId& ego, Refiner& refiner,
                            ForeseeTrace* trace = nullptr);

// Action wire format shared by the LLM policy and refiner: a JSON object
// {"action_type": ..., "argument": ...}. The decoded action text is the type
// followed by the argument (single space), or the type alone.
std::string action_format_instructions(const ActionSpace& space);
AgentAction decode_action_response(const std::string& raw);

class LlmPolicy : public Policy {
 public:
  LlmPolicy(CompletionBackend& backend, AgentId ego)
      : backend_(&backend), ego_(std::move(ego)) {}

  AgentAction sample_action(const ActionSpace& space, const Trajectory& state,
                            const Goal& goal) override;
  std::string identity() const override { return "llm-policy:" + backend_->identity(); }

 private:
  CompletionBackend* backend_;
  AgentId ego_;
};

class LlmRefiner : public Refiner {
 public:
  LlmRefiner(CompletionBackend& backend, AgentId ego)
      : backend_(&backend), ego_(std::move(ego)) {}

  AgentAction refine(const ActionSpace& space,
                     const std::vector<SimulationStep>& sim_states,
                     const Trajectory& original_state, const Goal& goal,
                     const AgentAction& intended) override;
  std::string identity() const override { return "llm-refiner:" + backend_->identity(); }

  // Exposed for prompt inspection in tooling.
  std::string build_prompt(const ActionSpace& space,
                           const std::vector<SimulationStep>& sim_states,
                           const Trajectory& original_state,
                           const AgentAction& intended) const;

 private:
  CompletionBackend* backend_;
  AgentId ego_;
};

// Refiner that returns the intended action unchanged.
class PassThroughRefiner : public Refiner {
 public:
  AgentAction refine(const ActionSpace&, const std::vector<SimulationStep>&,
                     const Trajectory&, const Goal&,
                     const AgentAction& intended) override {
    return intended;
  }
  std::string identity() const override { return "pass-through"; }
};

}  // namespace s3ap
