#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "s3ap/backend.hpp"
#include "s3ap/core.hpp"

namespace s3ap {

struct SwmQuery {
  Trajectory trajectory;               // S_t
  AgentId ego;                         // agent i
  std::optional<AgentAction> ego_action;  // a_t^i

  void validate() const;  // UnknownAgentError when ego is not in the trajectory
};

struct NextStepPrediction {
  AgentMap<AgentAction> others_actions;  // A_t^{-i}, never contains ego
  SimulationStep next_step;              // S_{t+1}
  std::optional<std::string> confidence_note;
};

// Predicts the other agents' actions and the next simulation step from the
// trajectory so far. Distributions are represented by a single sampled mode.
class SocialWorldModel {
 public:
  virtual ~SocialWorldModel() = default;

  // Requires query.ego_action to be absent.
  virtual AgentMap<AgentAction> predict_others_actions(const SwmQuery& query) = 0;
  // Requires query.ego_action to be present; the others' actions are resolved
  // inside the model.
  virtual NextStepPrediction predict_next_step(const SwmQuery& query) = 0;
  // Joint form: conditions on an explicit action map for the other agents.
  virtual NextStepPrediction predict_next_step_given(
      const SwmQuery& query, const AgentMap<AgentAction>& others_actions) = 0;

  virtual std::string identity() const = 0;
};

// Prompt-driven implementation over any completion backend. Histories are
// serialized in the model-facing string-list wire form.
class LlmSwm : public SocialWorldModel {
 public:
  explicit LlmSwm(CompletionBackend& backend) : backend_(&backend) {}

  AgentMap<AgentAction> predict_others_actions(const SwmQuery& query) override;
  NextStepPrediction predict_next_step(const SwmQuery& query) override;
  NextStepPrediction predict_next_step_given(
      const SwmQuery& query, const AgentMap<AgentAction>& others_actions) override;
  std::string identity() const override;

 private:
  NextStepPrediction decode_prediction(const SwmQuery& query,
                                       const std::string& raw,
                                       const AgentMap<AgentAction>* given);
  CompletionBackend* backend_;
};

using ActionSampler = std::function<AgentAction(const Trajectory&)>;

// Exactly n predicted steps, each produced from the trajectory extended with
// every prior prediction; the input trajectory is never mutated. The sampler
// supplies the ego action for each query (original trajectory first).
std::vector<SimulationStep> rollout(SocialWorldModel& model,
                                    const Trajectory& trajectory,
                                    const AgentId& ego,
                                    const ActionSampler& policy, int n);

}  // namespace s3ap
