#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "s3ap/envs.hpp"
#include "s3ap/schema.hpp"

using namespace s3ap;
using namespace s3ap::envs;

TEST_SUITE_BEGIN("envs");

namespace {

NegotiationEnv default_negotiation() { return NegotiationEnv(NegotiationConfig{}); }

MutualFriendConfig small_mf_config() {
  MutualFriendConfig cfg;
  cfg.ego_friends = {"Avery", "Blake", "Casey"};
  cfg.partner_friends = {"Blake", "Devon"};
  cfg.max_turns = 8;
  return cfg;
}

class ConstantPolicy : public Policy {
 public:
  explicit ConstantPolicy(std::string raw) : raw_(std::move(raw)) {}
  AgentAction sample_action(const ActionSpace&, const Trajectory&,
                            const Goal&) override {
    return AgentAction{raw_};
  }
  std::string identity() const override { return "constant"; }

 private:
  std::string raw_;
};

}  // namespace

TEST_CASE("negotiation config rejects inconsistent parameters") {
  CHECK_NOTHROW(NegotiationConfig{}.validate());

  NegotiationConfig cfg;
  cfg.concession = 0;
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  cfg = NegotiationConfig{};
  cfg.initial_ask = cfg.seller_reservation;
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  cfg = NegotiationConfig{};
  cfg.initial_ask = cfg.seller_reservation + 7;  // not a whole concession
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  cfg = NegotiationConfig{};
  cfg.buyer_value = cfg.seller_reservation;
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);
}

TEST_CASE("negotiation config round-trips through json") {
  NegotiationConfig cfg;
  cfg.initial_ask = 70;
  cfg.concession = 5;
  cfg.seller_reservation = 50;
  NegotiationConfig back = NegotiationConfig::from_json(cfg.to_json());
  CHECK(back.initial_ask == 70);
  CHECK(back.concession == 5);
  CHECK(back.seller_reservation == 50);
  CHECK(back.max_turns == cfg.max_turns);

  NegotiationConfig partial =
      NegotiationConfig::from_json(nlohmann::ordered_json{{"initial_ask", 95}});
  CHECK(partial.initial_ask == 95);
  CHECK(partial.concession == NegotiationConfig{}.concession);

  CHECK_THROWS_AS(NegotiationConfig::load_file("/nonexistent/cfg.json"),
                  S3apError);
}

TEST_CASE("negotiation states render and parse losslessly") {
  NegotiationEnv env = default_negotiation();
  CHECK(env.initial_state() ==
        "The Seller asks 85 for the item. No deal has been made.");

  NegotiationEnv::State s = env.parse_state(env.initial_state());
  CHECK(s.ask == 85);
  CHECK_FALSE(s.deal);
  CHECK_FALSE(s.offered.has_value());

  s.offered = 70;
  NegotiationEnv::State with_offer = env.parse_state(env.render_state(s));
  CHECK(with_offer.offered == 70);

  NegotiationEnv::State deal;
  deal.deal = true;
  deal.price = 72;
  deal.ask = 75;
  NegotiationEnv::State parsed = env.parse_state(env.render_state(deal));
  CHECK(parsed.deal);
  CHECK(parsed.price == 72);
  CHECK(parsed.ask == 75);
  CHECK(env.is_terminal(env.render_state(deal)));

  CHECK_THROWS_AS(env.parse_state("gibberish"), EnvRuleError);
}

TEST_CASE("negotiation legality follows the posted alphabet") {
  NegotiationEnv env = default_negotiation();
  const std::string start = env.initial_state();
  const AgentId buyer = env.buyer();
  const AgentId seller = env.seller();

  CHECK(env.legal(start, buyer, AgentAction{"none"}));
  CHECK(env.legal(start, buyer, AgentAction{"accept the offer of 85"}));
  CHECK_FALSE(env.legal(start, buyer, AgentAction{"accept the offer of 80"}));
  CHECK(env.legal(start, buyer, AgentAction{"counter at 1"}));
  CHECK(env.legal(start, buyer, AgentAction{"counter at 84"}));
  CHECK_FALSE(env.legal(start, buyer, AgentAction{"counter at 85"}));
  CHECK_FALSE(env.legal(start, buyer, AgentAction{"counter at 0"}));
  CHECK_FALSE(env.legal(start, buyer, AgentAction{"steal the item"}));

  CHECK_FALSE(env.legal(start, seller, AgentAction{"accept the offer of 70"}));
  const std::string offered = env.transition(start, buyer, AgentAction{"counter at 70"});
  CHECK(env.legal(offered, seller, AgentAction{"accept the offer of 70"}));
  CHECK(env.legal(offered, seller, AgentAction{"ask 80"}));
  CHECK_FALSE(env.legal(offered, seller, AgentAction{"ask 86"}));

  const std::string done =
      env.transition(offered, seller, AgentAction{"accept the offer of 70"});
  CHECK(env.is_terminal(done));
  CHECK_FALSE(env.legal(done, buyer, AgentAction{"counter at 10"}));
  CHECK(env.legal(done, buyer, AgentAction{"none"}));
}

TEST_CASE("negotiation transitions update the board") {
  NegotiationEnv env = default_negotiation();
  const std::string start = env.initial_state();

  CHECK(env.transition(start, env.buyer(), AgentAction{"none"}) == start);
  CHECK_THROWS_AS(env.transition(start, env.buyer(), AgentAction{"counter at 99"}),
                  EnvRuleError);
  CHECK(env.transition_or_forfeit(start, env.buyer(),
                                  AgentAction{"counter at 99"}) == start);

  std::string s = env.transition(start, env.buyer(), AgentAction{"counter at 70"});
  CHECK(env.parse_state(s).offered == 70);
  s = env.transition(s, env.seller(), AgentAction{"ask 75"});
  CHECK(env.parse_state(s).ask == 75);
  CHECK_FALSE(env.parse_state(s).offered.has_value());
  s = env.transition(s, env.buyer(), AgentAction{"accept the offer of 75"});
  CHECK(env.parse_state(s).deal);
  CHECK(env.parse_state(s).price == 75);
}

TEST_CASE("the scripted negotiation line is concession driven") {
  NegotiationEnv env = default_negotiation();
  const std::string start = env.initial_state();
  CHECK(env.scripted_action(start, env.buyer()).raw == "counter at 75");

  NegotiationEnv::State low;
  low.ask = 70;
  CHECK(env.scripted_action(env.render_state(low), env.buyer()).raw ==
        "accept the offer of 70");

  NegotiationEnv::State offered;
  offered.ask = 85;
  offered.offered = 85;
  CHECK(env.scripted_action(env.render_state(offered), env.seller()).raw ==
        "accept the offer of 85");
  CHECK(env.scripted_action(start, env.seller()).raw == "ask 75");

  NegotiationEnv::State floor;
  floor.ask = 65;
  CHECK(env.scripted_action(env.render_state(floor), env.seller()).raw ==
        "ask 65");

  NegotiationEnv::State deal;
  deal.deal = true;
  deal.price = 70;
  deal.ask = 70;
  CHECK(env.scripted_action(env.render_state(deal), env.buyer()).is_none());
}

TEST_CASE("negotiation scores are linear in the surplus") {
  NegotiationEnv env = default_negotiation();
  CHECK(env.score_of(env.initial_state(), env.buyer()).value == 0.0);

  NegotiationEnv::State deal;
  deal.deal = true;
  deal.ask = 75;
  deal.price = 65;
  const std::string at_reservation = env.render_state(deal);
  CHECK(env.score_of(at_reservation, env.buyer()).value == doctest::Approx(10.0));
  CHECK(env.score_of(at_reservation, env.seller()).value == doctest::Approx(0.0));

  deal.price = 85;
  const std::string at_ask = env.render_state(deal);
  CHECK(env.score_of(at_ask, env.seller()).value == doctest::Approx(10.0));
  CHECK(env.score_of(at_ask, env.buyer()).value ==
        doctest::Approx(10.0 / 3.0));

  CHECK_THROWS_AS(env.score_of(at_ask, AgentId{"Zed"}), UnknownAgentError);
}

TEST_CASE("negotiation action spaces are free text with live numbers") {
  NegotiationEnv env = default_negotiation();
  ActionSpace space = env.action_space(env.buyer(), env.initial_state());
  CHECK(space.kind == ActionSpace::Kind::FreeTextWithFormat);
  CHECK(space.format_instructions.find("accept the offer of 85") !=
        std::string::npos);
  CHECK(space.format_instructions.find("counter at") != std::string::npos);

  NegotiationEnv::State deal;
  deal.deal = true;
  deal.price = 70;
  deal.ask = 70;
  CHECK(env.action_space(env.buyer(), env.render_state(deal))
            .format_instructions.find("negotiation is over") !=
        std::string::npos);
}

TEST_CASE("a myopic default episode settles at the buyer limit") {
  NegotiationEnv env = default_negotiation();
  ScriptedEnvPolicy buyer_policy(env, env.buyer());
  ScriptedEnvPolicy seller_policy(env, env.seller());
  AgentMap<AgentSetup> setups;
  setups.set(env.buyer(), AgentSetup{&buyer_policy, false, {}, nullptr, nullptr});
  setups.set(env.seller(), AgentSetup{&seller_policy, false, {}, nullptr, nullptr});

  EpisodeResult result = run_episode(env, setups, env.max_turns());
  NegotiationEnv::State final = env.parse_state(result.final_state);
  CHECK(final.deal);
  CHECK(final.price == 75);
  CHECK(result.forfeits == 0);
  CHECK(result.log.metadata.at("env") == "negotiation");
  CHECK(result.log.metadata.at("turns") == "3");
  CHECK(result.scores.at(env.buyer()).value == doctest::Approx(20.0 / 3.0));
  CHECK(result.scores.at(env.seller()).value == doctest::Approx(5.0));

  EpisodeResult again = run_episode(env, setups, env.max_turns());
  CHECK(encode_trajectory(again.log, WireForm::ObjectMap) ==
        encode_trajectory(result.log, WireForm::ObjectMap));
}

TEST_CASE("a foreseeing buyer holds out for the revealed floor") {
  NegotiationEnv env = default_negotiation();
  ScriptedEnvPolicy buyer_policy(env, env.buyer());
  ScriptedEnvPolicy seller_policy(env, env.seller());
  EnvOracleSwm swm(env);
  NegotiationForesightRefiner refiner(env, env.buyer());

  AgentMap<AgentSetup> setups;
  setups.set(env.buyer(),
             AgentSetup{&buyer_policy, true, ForeseeConfig{1}, &swm, &refiner});
  setups.set(env.seller(), AgentSetup{&seller_policy, false, {}, nullptr, nullptr});

  EpisodeResult result = run_episode(env, setups, env.max_turns());
  NegotiationEnv::State final = env.parse_state(result.final_state);
  CHECK(final.deal);
  CHECK(final.price == 65);
  CHECK(result.scores.at(env.buyer()).value == doctest::Approx(10.0));
}

TEST_CASE("illegal choices forfeit the turn instead of crashing") {
  NegotiationEnv env = default_negotiation();
  ConstantPolicy wild("counter at 999");
  ScriptedEnvPolicy seller_policy(env, env.seller());
  AgentMap<AgentSetup> setups;
  setups.set(env.buyer(), AgentSetup{&wild, false, {}, nullptr, nullptr});
  setups.set(env.seller(), AgentSetup{&seller_policy, false, {}, nullptr, nullptr});

  EpisodeResult result = run_episode(env, setups, 3);
  CHECK(result.forfeits == 2);
  CHECK_FALSE(env.parse_state(result.final_state).deal);
  CHECK(result.scores.at(env.buyer()).value == 0.0);
  CHECK(result.log.steps[0].actions.at(env.buyer()).is_none());
}

TEST_CASE("run_episode rejects incomplete setups") {
  NegotiationEnv env = default_negotiation();
  ScriptedEnvPolicy policy(env, env.buyer());
  AgentMap<AgentSetup> setups;
  setups.set(env.buyer(), AgentSetup{&policy, false, {}, nullptr, nullptr});
  CHECK_THROWS_AS(run_episode(env, setups, 3), S3apError);

  setups.set(env.seller(), AgentSetup{nullptr, false, {}, nullptr, nullptr});
  CHECK_THROWS_AS(run_episode(env, setups, 3), S3apError);

  ScriptedEnvPolicy seller_policy(env, env.seller());
  setups.set(env.seller(),
             AgentSetup{&seller_policy, true, {}, nullptr, nullptr});
  CHECK_THROWS_AS(run_episode(env, setups, 3), S3apError);
}

TEST_CASE("pending steps carry state, mental notes, and none actions") {
  NegotiationEnv env = default_negotiation();
  SimulationStep step = pending_step(env, env.initial_state(), 4);
  CHECK(step.timestep.ordinal == 4);
  CHECK(step.state == env.initial_state());
  for (const AgentId& agent : env.agents()) {
    CHECK(step.actions.at(agent).is_none());
    const std::string raw = step.observations.at(agent).raw;
    CHECK(raw.find("<same_as_state />") != std::string::npos);
    CHECK(raw.find("<mental_state>") != std::string::npos);
  }
  CHECK(step.observations.at(env.buyer()).raw.find("willing to pay up to 75") !=
        std::string::npos);
  CHECK(step.observations.at(env.seller()).raw.find("willing to settle near 75") !=
        std::string::npos);
}

TEST_CASE("the env oracle swm folds, applies, and scripts responses") {
  NegotiationEnv env = default_negotiation();
  EnvOracleSwm swm(env);
  CHECK(swm.identity() == "oracle-swm:negotiation");

  Trajectory traj;
  traj.agents = env.agents();
  traj = append_step(traj, pending_step(env, env.initial_state(), 0));

  SwmQuery query{traj, env.buyer(), AgentAction{"counter at 70"}};
  NextStepPrediction pred = swm.predict_next_step(query);
  NegotiationEnv::State predicted = env.parse_state(pred.next_step.state);
  CHECK(predicted.offered == 70);
  CHECK(pred.others_actions.at(env.seller()).raw == "ask 75");
  CHECK(pred.next_step.actions.at(env.buyer()).is_none());
  CHECK(pred.next_step.timestep.ordinal == 1);

  AgentMap<AgentAction> others =
      swm.predict_others_actions(SwmQuery{traj, env.buyer(), std::nullopt});
  CHECK(others.at(env.seller()).raw == "ask 75");

  CHECK_THROWS_AS(
      swm.predict_others_actions(SwmQuery{traj, env.buyer(), AgentAction{"x"}}),
      S3apError);
  CHECK_THROWS_AS(swm.predict_next_step(SwmQuery{traj, env.buyer(), std::nullopt}),
                  S3apError);

  AgentMap<AgentAction> forced;
  forced.set(env.seller(), AgentAction{"ask 80"});
  NextStepPrediction given = swm.predict_next_step_given(query, forced);
  CHECK(given.next_step.actions.at(env.seller()).raw == "ask 80");
}

TEST_CASE("mutual friend config validation is strict about names") {
  CHECK_NOTHROW(small_mf_config().validate());

  MutualFriendConfig cfg;
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  cfg = small_mf_config();
  cfg.ego_friends.push_back("Avery");
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  cfg = small_mf_config();
  cfg.partner_friends.push_back("We, irdo");
  CHECK_THROWS_AS(cfg.validate(), InfeasibleParamsError);

  MutualFriendConfig back = MutualFriendConfig::from_json(small_mf_config().to_json());
  CHECK(back.ego_friends == small_mf_config().ego_friends);
  CHECK(back.partner_friends == small_mf_config().partner_friends);
}

TEST_CASE("mutual friend states round-trip every section") {
  MutualFriendEnv env(small_mf_config());
  CHECK(env.intersection() == std::vector<std::string>{"Blake"});
  CHECK(env.initial_state().find("No names have been mentioned.") !=
        std::string::npos);

  MutualFriendEnv::State s;
  s.mentions = {{"Avery", "Riley"}, {"Blake", "Jordan"}};
  s.identified = {"Blake"};
  s.complete = true;
  MutualFriendEnv::State back = env.parse_state(env.render_state(s));
  CHECK(back.mentions == s.mentions);
  CHECK(back.identified == s.identified);
  CHECK(back.complete);
  CHECK_FALSE(back.wrong.has_value());

  MutualFriendEnv::State bad;
  bad.wrong = "Casey";
  back = env.parse_state(env.render_state(bad));
  CHECK(back.wrong == "Casey");
  CHECK(env.is_terminal(env.render_state(bad)));

  CHECK_THROWS_AS(env.parse_state("who now?"), EnvRuleError);
}

TEST_CASE("mutual friend rules gate mentions and declarations") {
  MutualFriendEnv env(small_mf_config());
  const std::string start = env.initial_state();
  const AgentId riley = env.ego();

  CHECK(env.legal(start, riley, AgentAction{"mention Avery"}));
  CHECK_FALSE(env.legal(start, riley, AgentAction{"mention Devon"}));  // not hers
  CHECK(env.legal(start, riley, AgentAction{"declare Casey"}));
  CHECK_FALSE(env.legal(start, riley, AgentAction{"wave hello"}));

  std::string s = env.transition(start, riley, AgentAction{"mention Avery"});
  CHECK(env.parse_state(s).mentions ==
        std::vector<std::pair<std::string, std::string>>{{"Avery", "Riley"}});

  // A declaration outside the intersection ends the search as wrong.
  std::string failed = env.transition(start, riley, AgentAction{"declare Casey"});
  CHECK(env.parse_state(failed).wrong == "Casey");
  CHECK(env.is_terminal(failed));
  CHECK(env.score_of(failed, riley).value == 0.0);

  std::string won = env.transition(start, riley, AgentAction{"declare Blake"});
  CHECK(env.parse_state(won).identified == std::vector<std::string>{"Blake"});
  CHECK(env.parse_state(won).complete);
  CHECK(env.score_of(won, riley).value == doctest::Approx(10.0));
  CHECK_FALSE(env.legal(won, riley, AgentAction{"declare Blake"}));
}

TEST_CASE("the scripted mutual friend line shares then confirms") {
  MutualFriendEnv env(small_mf_config());
  ScriptedEnvPolicy riley_policy(env, env.ego());
  ScriptedEnvPolicy jordan_policy(env, env.partner());
  AgentMap<AgentSetup> setups;
  setups.set(env.ego(), AgentSetup{&riley_policy, false, {}, nullptr, nullptr});
  setups.set(env.partner(),
             AgentSetup{&jordan_policy, false, {}, nullptr, nullptr});

  EpisodeResult result = run_episode(env, setups, env.max_turns());
  MutualFriendEnv::State final = env.parse_state(result.final_state);
  CHECK(final.complete);
  CHECK(final.identified == std::vector<std::string>{"Blake"});
  CHECK(result.log.metadata.at("turns") == "3");
  CHECK(result.scores.at(env.ego()).value == doctest::Approx(10.0));
  CHECK(result.scores.at(env.partner()).value == doctest::Approx(10.0));
}

TEST_CASE("the mutual friend refiner declares from predicted mentions") {
  MutualFriendEnv env(small_mf_config());
  ScriptedEnvPolicy riley_policy(env, env.ego());
  ScriptedEnvPolicy jordan_policy(env, env.partner());
  EnvOracleSwm swm(env);
  MutualFriendForesightRefiner refiner(env, env.ego());

  AgentMap<AgentSetup> setups;
  setups.set(env.ego(),
             AgentSetup{&riley_policy, true, ForeseeConfig{1}, &swm, &refiner});
  setups.set(env.partner(),
             AgentSetup{&jordan_policy, false, {}, nullptr, nullptr});

  // With lookahead the ego sees Jordan's "mention Blake" one turn early, so a
  // two-turn budget that starves the myopic line still completes.
  EpisodeResult foreseen = run_episode(env, setups, 2);
  CHECK(env.parse_state(foreseen.final_state).complete);
  CHECK(foreseen.scores.at(env.ego()).value == doctest::Approx(10.0));

  AgentMap<AgentSetup> myopic;
  myopic.set(env.ego(), AgentSetup{&riley_policy, false, {}, nullptr, nullptr});
  myopic.set(env.partner(),
             AgentSetup{&jordan_policy, false, {}, nullptr, nullptr});
  EpisodeResult starved = run_episode(env, myopic, 2);
  CHECK_FALSE(env.parse_state(starved.final_state).complete);
  CHECK(starved.scores.at(env.ego()).value == 0.0);
}

TEST_CASE("suite configs are deterministic and always valid") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    NegotiationConfig a = negotiation_suite_config(seed);
    NegotiationConfig b = negotiation_suite_config(seed);
    CHECK(a.to_json() == b.to_json());
    CHECK_NOTHROW(a.validate());

    MutualFriendConfig ma = mutual_friend_suite_config(seed);
    MutualFriendConfig mb = mutual_friend_suite_config(seed);
    CHECK(ma.to_json() == mb.to_json());
    CHECK_NOTHROW(ma.validate());
    CHECK_FALSE(MutualFriendEnv(ma).intersection().empty());
  }
  CHECK(negotiation_suite_config(1).to_json() !=
        negotiation_suite_config(2).to_json());
}

TEST_SUITE_END();
