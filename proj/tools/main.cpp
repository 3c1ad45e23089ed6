#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "s3ap/agent.hpp"
#include "s3ap/bench.hpp"
#include "s3ap/core.hpp"
#include "s3ap/envs.hpp"
#include "s3ap/oracle.hpp"
#include "s3ap/parser.hpp"
#include "s3ap/schema.hpp"
#include "s3ap/swm.hpp"

namespace envs = s3ap::envs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitPipeline = 2;
constexpr int kExitBackend = 3;

// Flag validation problems and unusable inputs; mapped to exit code 1.
struct CliUsageError : std::runtime_error {
  explicit CliUsageError(const std::string& what) : std::runtime_error(what) {}
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliUsageError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw s3ap::S3apError("cannot write '" + path + "'");
  out << text;
  if (!out.good()) throw s3ap::S3apError("short write to '" + path + "'");
}

std::string two_places(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value ? value : fallback;
}

// Backend specs: "rule-reader", "mock:FILE" (JSON array of responses),
// "http:PROFILE". Only http backends touch the network and only they are
// wrapped with the disk cache.
std::shared_ptr<s3ap::CompletionBackend> make_backend(const std::string& spec,
                                                      const std::string& config_path,
                                                      const std::string& cache_dir) {
  if (spec == "rule-reader") {
    return std::make_shared<s3ap::bench::RuleReaderBackend>();
  }
  if (spec.rfind("mock:", 0) == 0) {
    const std::string path = spec.substr(5);
    nlohmann::ordered_json doc =
        nlohmann::ordered_json::parse(slurp(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_array()) {
      throw CliUsageError("mock script '" + path + "' must be a JSON array");
    }
    std::vector<std::string> script;
    for (const auto& entry : doc) {
      if (!entry.is_string()) {
        throw CliUsageError("mock script '" + path + "' must hold strings");
      }
      script.push_back(entry.get<std::string>());
    }
    const std::string name =
        "mock:" + std::filesystem::path(path).filename().string();
    return std::make_shared<s3ap::ScriptedMockBackend>(std::move(script), name);
  }
  if (spec.rfind("http:", 0) == 0) {
    s3ap::HttpChatConfig config =
        s3ap::http_config_from_env(spec.substr(5), config_path);
    std::shared_ptr<s3ap::CompletionBackend> inner =
        std::make_shared<s3ap::HttpChatBackend>(config);
    const std::string dir =
        cache_dir.empty() ? env_or("S3AP_CACHE_DIR", "") : cache_dir;
    if (dir.empty()) return inner;
    return std::make_shared<s3ap::CachedBackend>(inner, s3ap::ResponseCache(dir));
  }
  throw CliUsageError("unknown backend '" + spec + "'");
}

struct EnvBundle {
  std::unique_ptr<envs::ToyEnv> env;
  std::function<std::unique_ptr<s3ap::Refiner>(const s3ap::AgentId&)> refiner;
};

EnvBundle make_env(const std::string& name, const std::string& config_path) {
  try {
    if (name == "negotiation") {
      envs::NegotiationConfig config;
      if (!config_path.empty()) {
        config = envs::NegotiationConfig::load_file(config_path);
      }
      config.validate();
      auto env = std::make_unique<envs::NegotiationEnv>(config);
      const envs::NegotiationEnv* raw = env.get();
      return {std::move(env), [raw](const s3ap::AgentId& self) {
                return std::unique_ptr<s3ap::Refiner>(
                    new envs::NegotiationForesightRefiner(*raw, self));
              }};
    }
    if (name == "mutual-friend") {
      envs::MutualFriendConfig config = envs::mutual_friend_suite_config(0);
      if (!config_path.empty()) {
        config = envs::MutualFriendConfig::load_file(config_path);
      }
      config.validate();
      auto env = std::make_unique<envs::MutualFriendEnv>(config);
      const envs::MutualFriendEnv* raw = env.get();
      return {std::move(env), [raw](const s3ap::AgentId& self) {
                return std::unique_ptr<s3ap::Refiner>(
                    new envs::MutualFriendForesightRefiner(*raw, self));
              }};
    }
  } catch (const s3ap::S3apError& e) {
    throw CliUsageError(e.what());
  }
  throw CliUsageError("unknown env '" + name + "' (negotiation, mutual-friend)");
}

envs::EpisodeResult run_mode(const EnvBundle& bundle, bool foresee, int n,
                             int turns) {
  const envs::ToyEnv& env = *bundle.env;
  const std::vector<s3ap::AgentId>& order = env.agents();
  std::vector<std::unique_ptr<envs::ScriptedEnvPolicy>> policies;
  std::unique_ptr<envs::EnvOracleSwm> swm;
  std::unique_ptr<s3ap::Refiner> refiner;
  s3ap::AgentMap<envs::AgentSetup> setups;
  for (const s3ap::AgentId& agent : order) {
    policies.push_back(std::make_unique<envs::ScriptedEnvPolicy>(env, agent));
    envs::AgentSetup setup;
    setup.policy = policies.back().get();
    if (foresee && agent == order.front()) {
      swm = std::make_unique<envs::EnvOracleSwm>(env);
      refiner = bundle.refiner(agent);
      setup.foresee = true;
      setup.cfg.max_iterations = n;
      setup.swm = swm.get();
      setup.refiner = refiner.get();
    }
    setups.set(agent, setup);
  }
  return envs::run_episode(env, setups, turns);
}

void print_episode(const std::string& label, const envs::EpisodeResult& result) {
  std::cout << label << ": final \"" << result.final_state << "\" turns="
            << result.log.metadata.at("turns") << " forfeits=" << result.forfeits
            << "\n";
  for (const s3ap::AgentId& agent : result.scores.keys()) {
    std::cout << "  " << agent.name << ": "
              << two_places(result.scores.at(agent).value) << "\n";
  }
}

// parse

struct ParseArgs {
  std::string task = "generic";
  std::string input;
  std::string backend;
  std::string config_path;
  std::string cache_dir;
  int max_retries = 2;
  std::string out;
};

int cmd_parse(const ParseArgs& args) {
  if (!std::filesystem::exists(args.input)) {
    throw CliUsageError("input file '" + args.input + "' not found");
  }
  std::optional<s3ap::TaskKind> kind = s3ap::task_kind_from(args.task);
  if (!kind) throw CliUsageError("unknown task '" + args.task + "'");
  const std::string narrative = slurp(args.input);
  const std::string out = args.out.empty() ? args.input + ".s3ap.json" : args.out;

  s3ap::Trajectory traj;
  std::size_t attempts = 1;
  if (args.backend == "reference") {
    traj = s3ap::reference_parse(narrative);
  } else {
    std::shared_ptr<s3ap::CompletionBackend> backend =
        make_backend(args.backend, args.config_path, args.cache_dir);
    s3ap::ParseResult result = s3ap::parse_narrative(
        narrative, s3ap::ParseTask::builtin(*kind), *backend, args.max_retries);
    traj = std::move(result.trajectory);
    attempts = result.attempts.size();
  }
  s3ap::save_trajectory_file(traj, out);
  std::cout << "parsed in " << attempts << " attempt(s); wrote " << out << "\n";
  return kExitOk;
}

// validate

int cmd_validate(const std::string& input) {
  if (!std::filesystem::exists(input)) {
    throw CliUsageError("input file '" + input + "' not found");
  }
  s3ap::TrajectoryDecodeResult result = s3ap::decode_trajectory(slurp(input));
  if (result.issues.empty() && result.trajectory) {
    std::cout << "OK: " << result.trajectory->steps.size() << " step(s), "
              << result.trajectory->agents.size() << " agent(s)\n";
    return kExitOk;
  }
  for (const s3ap::ValidationIssue& issue : result.issues) {
    std::cout << issue.path << ": " << issue.message << "\n";
  }
  std::cout << result.issues.size() << " issue(s)\n";
  return kExitPipeline;
}

// simulate

struct SimulateArgs {
  std::string scenario;
  std::string out;
  bool narrative = false;
};

int cmd_simulate(const SimulateArgs& args) {
  if (!std::filesystem::exists(args.scenario)) {
    throw CliUsageError("scenario file '" + args.scenario + "' not found");
  }
  s3ap::oracle::OracleScenario sc =
      s3ap::oracle::OracleScenario::load_file(args.scenario);
  sc.validate();
  std::vector<s3ap::oracle::WorldSnapshot> snaps = s3ap::oracle::simulate(sc);
  const std::size_t t = snaps.size() - 1;
  std::cout << "simulated " << sc.events.size() << " event(s), " << sc.agents.size()
            << " agent(s)\n";
  for (const auto& [object, initial] : sc.objects) {
    std::optional<std::string> truth = s3ap::oracle::query_belief(snaps, {}, object, t);
    std::cout << "the " << object << ": in the " << (truth ? *truth : "?") << "\n";
    for (const auto& [agent, home] : sc.agents) {
      std::optional<std::string> belief =
          s3ap::oracle::query_belief(snaps, {agent}, object, t);
      std::cout << "  " << agent.name << " believes: "
                << (belief ? "in the " + *belief : std::string("unknown")) << "\n";
    }
  }
  if (args.narrative) std::cout << s3ap::oracle::render_narrative(sc) << "\n";
  if (!args.out.empty()) {
    s3ap::save_trajectory_file(s3ap::oracle::ground_truth_trajectory(sc), args.out);
    std::cout << "wrote " << args.out << "\n";
  }
  return kExitOk;
}

// rollout

struct RolloutArgs {
  std::string input;
  std::string ego;
  int n = 1;
  std::string swm = "oracle:negotiation";
  std::string env_config;
  std::string config_path;
  std::string cache_dir;
  std::string ego_action = "none";
  std::string out;
};

int cmd_rollout(const RolloutArgs& args) {
  if (!std::filesystem::exists(args.input)) {
    throw CliUsageError("input file '" + args.input + "' not found");
  }
  s3ap::Trajectory traj = s3ap::load_trajectory_file(args.input);
  const s3ap::AgentId ego{args.ego};
  if (!traj.has_agent(ego)) {
    throw CliUsageError("agent '" + args.ego + "' is not in the trajectory");
  }

  std::unique_ptr<EnvBundle> bundle;
  std::shared_ptr<s3ap::CompletionBackend> backend;
  std::unique_ptr<s3ap::SocialWorldModel> model;
  if (args.swm.rfind("oracle:", 0) == 0) {
    bundle = std::make_unique<EnvBundle>(make_env(args.swm.substr(7), args.env_config));
    model = std::make_unique<envs::EnvOracleSwm>(*bundle->env);
  } else if (args.swm.rfind("mock:", 0) == 0) {
    backend = make_backend(args.swm, args.config_path, args.cache_dir);
    model = std::make_unique<s3ap::LlmSwm>(*backend);
  } else {
    throw CliUsageError("unknown swm '" + args.swm + "' (oracle:ENV, mock:FILE)");
  }

  s3ap::ActionSampler sampler;
  if (args.ego_action == "scripted") {
    if (!bundle) throw CliUsageError("scripted ego actions need an oracle swm");
    const envs::ToyEnv* env = bundle->env.get();
    sampler = [env, ego](const s3ap::Trajectory& cur) {
      std::string state = cur.steps.empty()
                              ? env->initial_state()
                              : env->apply_actions(cur.steps.back().state,
                                                   cur.steps.back());
      return env->scripted_action(state, ego);
    };
  } else {
    const s3ap::AgentAction fixed{args.ego_action};
    sampler = [fixed](const s3ap::Trajectory&) { return fixed; };
  }

  std::vector<s3ap::SimulationStep> steps =
      s3ap::rollout(*model, traj, ego, sampler, args.n);
  for (const s3ap::SimulationStep& step : steps) {
    std::cout << "t=" << step.timestep.raw << " state: " << step.state << "\n";
    for (const s3ap::AgentId& agent : step.actions.keys()) {
      const s3ap::AgentAction& action = step.actions.at(agent);
      if (!action.is_none()) {
        std::cout << "  " << agent.name << ": " << action.raw << "\n";
      }
    }
    traj = s3ap::append_step(traj, step);
  }
  if (!args.out.empty()) {
    s3ap::save_trajectory_file(traj, args.out);
    std::cout << "wrote " << args.out << "\n";
  }
  return kExitOk;
}

// foresee

struct ForeseeArgs {
  std::string env = "negotiation";
  std::string env_config;
  std::string agent;
  int n = 1;
};

int cmd_foresee(const ForeseeArgs& args) {
  if (args.n < 1) throw CliUsageError("--n must be at least 1");
  EnvBundle bundle = make_env(args.env, args.env_config);
  const envs::ToyEnv& env = *bundle.env;
  const s3ap::AgentId ego =
      args.agent.empty() ? env.agents().front() : s3ap::AgentId{args.agent};
  if (std::find(env.agents().begin(), env.agents().end(), ego) ==
      env.agents().end()) {
    throw CliUsageError("agent '" + ego.name + "' is not in env '" + args.env + "'");
  }

  const std::string state = env.initial_state();
  s3ap::Trajectory traj;
  traj.agents = env.agents();
  traj = s3ap::append_step(traj, envs::pending_step(env, state, 0));

  envs::EnvOracleSwm swm(env);
  envs::ScriptedEnvPolicy policy(env, ego);
  std::unique_ptr<s3ap::Refiner> refiner = bundle.refiner(ego);
  s3ap::ForeseeConfig cfg;
  cfg.max_iterations = args.n;
  s3ap::ForeseeTrace trace;
  s3ap::AgentAction refined =
      s3ap::foresee_and_act(env.action_space(ego, state), env.goal_of(ego), traj,
                            cfg, swm, policy, ego, *refiner, &trace);

  std::cout << "ego " << ego.name << " at \"" << state << "\"\n";
  std::cout << "initial sample: " << trace.initial_sample.raw << "\n";
  for (std::size_t i = 0; i < trace.sim_states.size(); ++i) {
    std::cout << "sim step " << i + 1 << ": " << trace.sim_states[i].state << "\n";
    for (const s3ap::AgentId& agent : trace.sim_states[i].actions.keys()) {
      const s3ap::AgentAction& action = trace.sim_states[i].actions.at(agent);
      if (!action.is_none()) {
        std::cout << "  predicted " << agent.name << ": " << action.raw << "\n";
      }
    }
  }
  std::cout << "intended: " << trace.intended.raw << "\n";
  std::cout << "refined: " << refined.raw << "\n";
  std::cout << "swm calls: " << trace.swm_calls
            << ", sample calls: " << trace.sample_calls << "\n";
  return kExitOk;
}

// episode

struct EpisodeArgs {
  std::string env = "negotiation";
  std::string env_config;
  std::string mode = "both";
  int n = 1;
  int max_turns = -1;
  int suite = 0;
  std::string out_prefix;
};

int cmd_episode(const EpisodeArgs& args) {
  if (args.n < 1) throw CliUsageError("--n must be at least 1");
  if (args.mode != "myopic" && args.mode != "foresight" && args.mode != "both") {
    throw CliUsageError("unknown mode '" + args.mode + "'");
  }

  if (args.suite > 0) {
    double myopic_sum = 0;
    double foresight_sum = 0;
    int strict = 0;
    int regressions = 0;
    for (int seed = 0; seed < args.suite; ++seed) {
      EnvBundle bundle;
      if (args.env == "negotiation") {
        auto env = std::make_unique<envs::NegotiationEnv>(
            envs::negotiation_suite_config(static_cast<std::uint64_t>(seed)));
        const envs::NegotiationEnv* raw = env.get();
        bundle.env = std::move(env);
        bundle.refiner = [raw](const s3ap::AgentId& self) {
          return std::unique_ptr<s3ap::Refiner>(
              new envs::NegotiationForesightRefiner(*raw, self));
        };
      } else if (args.env == "mutual-friend") {
        auto env = std::make_unique<envs::MutualFriendEnv>(
            envs::mutual_friend_suite_config(static_cast<std::uint64_t>(seed)));
        const envs::MutualFriendEnv* raw = env.get();
        bundle.env = std::move(env);
        bundle.refiner = [raw](const s3ap::AgentId& self) {
          return std::unique_ptr<s3ap::Refiner>(
              new envs::MutualFriendForesightRefiner(*raw, self));
        };
      } else {
        throw CliUsageError("unknown env '" + args.env + "'");
      }
      const int turns = bundle.env->max_turns();
      const s3ap::AgentId ego = bundle.env->agents().front();
      const double myopic =
          run_mode(bundle, false, args.n, turns).scores.at(ego).value;
      const double foresight =
          run_mode(bundle, true, args.n, turns).scores.at(ego).value;
      myopic_sum += myopic;
      foresight_sum += foresight;
      if (foresight > myopic) ++strict;
      if (foresight < myopic) ++regressions;
    }
    const double denom = args.suite;
    std::cout << args.env << " suite, " << args.suite << " seed(s), N=" << args.n
              << "\n";
    std::cout << "  mean foresight " << two_places(foresight_sum / denom)
              << "  mean myopic " << two_places(myopic_sum / denom) << "\n";
    std::cout << "  strict improvements " << strict << "/" << args.suite
              << ", regressions " << regressions << "/" << args.suite << "\n";
    return kExitOk;
  }

  EnvBundle bundle = make_env(args.env, args.env_config);
  const int turns =
      args.max_turns >= 0 ? args.max_turns : bundle.env->max_turns();
  for (const std::string mode : {std::string("myopic"), std::string("foresight")}) {
    if (args.mode != "both" && args.mode != mode) continue;
    envs::EpisodeResult result =
        run_mode(bundle, mode == "foresight", args.n, turns);
    print_episode(mode, result);
    if (!args.out_prefix.empty()) {
      const std::string path = args.out_prefix + "." + mode + ".s3ap.json";
      s3ap::save_trajectory_file(result.log, path);
      std::cout << "  wrote " << path << "\n";
    }
  }
  return kExitOk;
}

// gen

struct GenArgs {
  std::uint64_t seed = 0;
  int count = 10;
  std::string out_dir;
  int agents = 2;
  int locations = 2;
  int containers = 2;
  int events = 4;
  bool force_false_belief = false;
  bool paraphrase = false;
};

int cmd_gen(const GenArgs& args) {
  if (args.count < 0) throw CliUsageError("--count must be nonnegative");
  std::filesystem::create_directories(args.out_dir);

  s3ap::oracle::GenParams params;
  params.n_agents = args.agents;
  params.n_locations = args.locations;
  params.n_containers = args.containers;
  params.n_events = args.events;
  params.force_false_belief = args.force_false_belief;

  nlohmann::ordered_json manifest;
  manifest["base_seed"] = args.seed;
  manifest["count"] = args.count;
  manifest["params"] = {{"agents", params.n_agents},
                        {"locations", params.n_locations},
                        {"containers", params.n_containers},
                        {"events", params.n_events},
                        {"force_false_belief", params.force_false_belief},
                        {"paraphrase", args.paraphrase}};
  manifest["entries"] = nlohmann::ordered_json::array();

  std::vector<s3ap::bench::QAItem> all_items;
  std::uint64_t seed = args.seed;
  int accepted = 0;
  std::uint64_t tried = 0;
  const std::uint64_t budget =
      static_cast<std::uint64_t>(args.count) * 20 + 100;
  while (accepted < args.count) {
    if (tried++ >= budget) {
      throw s3ap::InfeasibleParamsError(
          "could not generate enough scenarios within the seed budget");
    }
    s3ap::oracle::OracleScenario sc;
    try {
      sc = s3ap::oracle::generate_scenario(seed, params);
    } catch (const s3ap::InfeasibleParamsError&) {
      ++seed;
      continue;
    }
    const std::string id = "gen-" + std::to_string(seed);
    const std::string narrative =
        s3ap::oracle::render_narrative(sc, args.paraphrase, seed) + "\n";
    const std::string scenario_text = sc.to_json().dump(2) + "\n";
    const std::string trajectory_text = s3ap::encode_trajectory(
        s3ap::oracle::ground_truth_trajectory(sc), s3ap::WireForm::ObjectMap);

    char tag[16];
    std::snprintf(tag, sizeof(tag), "%04d", accepted);
    const std::string scenario_file = std::string("scenario_") + tag + ".json";
    const std::string narrative_file = std::string("narrative_") + tag + ".txt";
    const std::string trajectory_file =
        std::string("trajectory_") + tag + ".s3ap.json";
    spill(args.out_dir + "/" + scenario_file, scenario_text);
    spill(args.out_dir + "/" + narrative_file, narrative);
    spill(args.out_dir + "/" + trajectory_file, trajectory_text);

    std::vector<s3ap::bench::QAItem> items = s3ap::bench::synthesize_qa(
        sc, id, s3ap::oracle::render_narrative(sc, args.paraphrase, seed));
    all_items.insert(all_items.end(), items.begin(), items.end());

    nlohmann::ordered_json entry;
    entry["seed"] = seed;
    entry["context_id"] = id;
    entry["questions"] = items.size();
    entry["files"] = {{scenario_file, s3ap::sha256_hex(scenario_text)},
                      {narrative_file, s3ap::sha256_hex(narrative)},
                      {trajectory_file, s3ap::sha256_hex(trajectory_text)}};
    manifest["entries"].push_back(std::move(entry));
    ++accepted;
    ++seed;
  }

  s3ap::bench::save_dataset(all_items, args.out_dir + "/qa.jsonl");
  manifest["qa"] = {{"file", "qa.jsonl"},
                    {"items", all_items.size()},
                    {"digest", s3ap::sha256_hex(slurp(args.out_dir + "/qa.jsonl"))}};
  spill(args.out_dir + "/manifest.json", manifest.dump(2) + "\n");
  std::cout << "generated " << accepted << " scenario(s), " << all_items.size()
            << " QA item(s) in " << args.out_dir << "\n";
  return kExitOk;
}

// bench

struct BenchArgs {
  std::string data;
  std::string format = "synthetic";
  std::string task = "synthetic";
  std::string condition = "both";
  std::string answer_backend = "rule-reader";
  std::string parser = "reference";
  std::string parse_backend;
  std::string config_path;
  std::string cache_dir;
  int parallelism = 4;
  int max_retries = 2;
  std::string report_dir = "bench-report";
  double min_accuracy = -1.0;
};

int cmd_bench(const BenchArgs& args) {
  std::optional<s3ap::bench::DatasetFormat> format =
      s3ap::bench::dataset_format_from(args.format);
  if (!format) throw CliUsageError("unknown format '" + args.format + "'");
  if (args.task != "synthetic" && !s3ap::task_kind_from(args.task)) {
    throw CliUsageError("unknown task '" + args.task + "'");
  }
  if (!std::filesystem::exists(args.data)) {
    throw CliUsageError("dataset '" + args.data + "' not found");
  }

  std::vector<s3ap::bench::Condition> conditions;
  if (args.condition == "both") {
    conditions = {s3ap::bench::Condition::Baseline,
                  s3ap::bench::Condition::WithS3ap};
  } else if (std::optional<s3ap::bench::Condition> one =
                 s3ap::bench::condition_from(args.condition)) {
    conditions = {*one};
  } else {
    throw CliUsageError("unknown condition '" + args.condition + "'");
  }

  std::vector<s3ap::bench::QAItem> items =
      s3ap::bench::load_dataset(args.data, *format);
  std::shared_ptr<s3ap::CompletionBackend> answers =
      make_backend(args.answer_backend, args.config_path, args.cache_dir);

  s3ap::bench::ParserConfig parser;
  std::shared_ptr<s3ap::CompletionBackend> parse_backend;
  if (args.parser == "reference") {
    parser.kind = s3ap::bench::ParserConfig::Kind::Reference;
  } else if (args.parser == "llm") {
    if (args.parse_backend.empty()) {
      throw CliUsageError("--parser llm needs --parse-backend");
    }
    parser.kind = s3ap::bench::ParserConfig::Kind::Llm;
    parser.task = s3ap::ParseTask::builtin(
        args.task == "synthetic" ? s3ap::TaskKind::Generic
                                 : *s3ap::task_kind_from(args.task));
    parse_backend = make_backend(args.parse_backend, args.config_path, args.cache_dir);
    parser.backend = parse_backend.get();
    parser.max_retries = args.max_retries;
  } else {
    throw CliUsageError("unknown parser '" + args.parser + "' (reference, llm)");
  }

  std::vector<s3ap::bench::RunReport> reports;
  for (s3ap::bench::Condition condition : conditions) {
    reports.push_back(s3ap::bench::run_benchmark(
        items, condition, parser, *answers, args.parallelism, args.task));
  }
  s3ap::bench::write_reports(reports, args.report_dir);
  std::cout << s3ap::bench::render_report_markdown(reports);
  std::cout << "wrote " << args.report_dir << "/report.json and report.md\n";

  if (args.min_accuracy >= 0.0) {
    for (const s3ap::bench::RunReport& report : reports) {
      if (report.accuracy < args.min_accuracy) {
        std::cout << "threshold missed: " << report.condition << " accuracy "
                  << report.accuracy << " < " << args.min_accuracy << "\n";
        return kExitPipeline;
      }
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"S3AP toolkit: protocol encoding, simulation, lookahead agents, "
               "and benchmark pipelines"};
  app.require_subcommand(1);

  ParseArgs parse_args;
  CLI::App* parse_cmd =
      app.add_subcommand("parse", "Parse a narrative into a trajectory");
  parse_cmd->add_option("--task", parse_args.task, "Task family")
      ->capture_default_str();
  parse_cmd->add_option("--input", parse_args.input, "Narrative text file")
      ->required();
  parse_cmd
      ->add_option("--backend", parse_args.backend,
                   "reference | mock:FILE | http:PROFILE")
      ->required();
  parse_cmd->add_option("--max-retries", parse_args.max_retries, "Repair retries")
      ->capture_default_str();
  parse_cmd->add_option("--out", parse_args.out, "Output path (.s3ap.json)");
  parse_cmd->add_option("--config", parse_args.config_path, "Backend profiles file");
  parse_cmd->add_option("--cache-dir", parse_args.cache_dir, "Response cache dir");

  std::string validate_input;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Validate a trajectory document");
  validate_cmd->add_option("--input", validate_input, "Trajectory JSON file")
      ->required();

  SimulateArgs simulate_args;
  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "Run the symbolic oracle on a scenario");
  simulate_cmd->add_option("--scenario", simulate_args.scenario, "Scenario JSON")
      ->required();
  simulate_cmd->add_option("--out", simulate_args.out,
                           "Write the ground-truth trajectory here");
  simulate_cmd->add_flag("--narrative", simulate_args.narrative,
                         "Print the rendered narrative");

  RolloutArgs rollout_args;
  CLI::App* rollout_cmd =
      app.add_subcommand("rollout", "Roll a world model forward n steps");
  rollout_cmd->add_option("--input", rollout_args.input, "Trajectory JSON file")
      ->required();
  rollout_cmd->add_option("--ego", rollout_args.ego, "Ego agent name")->required();
  rollout_cmd->add_option("--n", rollout_args.n, "Steps to predict")
      ->capture_default_str();
  rollout_cmd
      ->add_option("--swm", rollout_args.swm, "oracle:ENV | mock:FILE")
      ->capture_default_str();
  rollout_cmd->add_option("--env-config", rollout_args.env_config,
                          "Env config for oracle swm");
  rollout_cmd->add_option("--ego-action", rollout_args.ego_action,
                          "Fixed ego action per round, or 'scripted'")
      ->capture_default_str();
  rollout_cmd->add_option("--out", rollout_args.out, "Write extended trajectory");
  rollout_cmd->add_option("--config", rollout_args.config_path,
                          "Backend profiles file");
  rollout_cmd->add_option("--cache-dir", rollout_args.cache_dir,
                          "Response cache dir");

  ForeseeArgs foresee_args;
  CLI::App* foresee_cmd = app.add_subcommand(
      "foresee", "Run one Foresee-and-Act decision with the oracle world model");
  foresee_cmd->add_option("--env", foresee_args.env, "negotiation | mutual-friend")
      ->capture_default_str();
  foresee_cmd->add_option("--env-config", foresee_args.env_config,
                          "Env config JSON");
  foresee_cmd->add_option("--agent", foresee_args.agent,
                          "Acting agent (default: env ego)");
  foresee_cmd->add_option("--n", foresee_args.n, "Lookahead iterations")
      ->capture_default_str();

  EpisodeArgs episode_args;
  CLI::App* episode_cmd =
      app.add_subcommand("episode", "Play scripted episodes, myopic vs foresight");
  episode_cmd->add_option("--env", episode_args.env, "negotiation | mutual-friend")
      ->capture_default_str();
  episode_cmd->add_option("--env-config", episode_args.env_config,
                          "Env config JSON");
  episode_cmd->add_option("--mode", episode_args.mode, "myopic | foresight | both")
      ->capture_default_str();
  episode_cmd->add_option("--n", episode_args.n, "Lookahead iterations")
      ->capture_default_str();
  episode_cmd->add_option("--max-turns", episode_args.max_turns,
                          "Turn budget override");
  episode_cmd->add_option("--suite", episode_args.suite,
                          "Run the seeded suite with this many seeds");
  episode_cmd->add_option("--out", episode_args.out_prefix,
                          "Episode log path prefix");

  GenArgs gen_args;
  CLI::App* gen_cmd =
      app.add_subcommand("gen", "Generate scenarios, narratives, and QA data");
  gen_cmd->add_option("--seed", gen_args.seed, "Base seed")->capture_default_str();
  gen_cmd->add_option("--count", gen_args.count, "Scenario count")
      ->capture_default_str();
  gen_cmd->add_option("--out-dir", gen_args.out_dir, "Output directory")
      ->required();
  gen_cmd->add_option("--agents", gen_args.agents, "Agents per scenario")
      ->capture_default_str();
  gen_cmd->add_option("--locations", gen_args.locations, "Locations per scenario")
      ->capture_default_str();
  gen_cmd->add_option("--containers", gen_args.containers,
                      "Containers per scenario")
      ->capture_default_str();
  gen_cmd->add_option("--events", gen_args.events, "Events per scenario")
      ->capture_default_str();
  gen_cmd->add_flag("--force-false-belief", gen_args.force_false_belief,
                    "Guarantee a first-order false belief");
  gen_cmd->add_flag("--paraphrase", gen_args.paraphrase,
                    "Vary event sentence surface forms");

  BenchArgs bench_args;
  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Run a QA benchmark with or without S3AP");
  bench_cmd->add_option("--data", bench_args.data, "Dataset JSONL")->required();
  bench_cmd->add_option("--format", bench_args.format, "synthetic | generic")
      ->capture_default_str();
  bench_cmd->add_option("--task", bench_args.task, "Task label")
      ->capture_default_str();
  bench_cmd
      ->add_option("--condition", bench_args.condition,
                   "baseline | with-s3ap | both")
      ->capture_default_str();
  bench_cmd
      ->add_option("--answer-backend", bench_args.answer_backend,
                   "rule-reader | mock:FILE | http:PROFILE")
      ->capture_default_str();
  bench_cmd->add_option("--parser", bench_args.parser, "reference | llm")
      ->capture_default_str();
  bench_cmd->add_option("--parse-backend", bench_args.parse_backend,
                        "Backend for --parser llm");
  bench_cmd->add_option("--parallelism", bench_args.parallelism, "Worker bound")
      ->capture_default_str();
  bench_cmd->add_option("--max-retries", bench_args.max_retries, "Parse retries")
      ->capture_default_str();
  bench_cmd->add_option("--report", bench_args.report_dir, "Report directory")
      ->capture_default_str();
  bench_cmd->add_option("--min-accuracy", bench_args.min_accuracy,
                        "Fail the run under this accuracy");
  bench_cmd->add_option("--config", bench_args.config_path,
                        "Backend profiles file");
  bench_cmd->add_option("--cache-dir", bench_args.cache_dir, "Response cache dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (parse_cmd->parsed()) return cmd_parse(parse_args);
    if (validate_cmd->parsed()) return cmd_validate(validate_input);
    if (simulate_cmd->parsed()) return cmd_simulate(simulate_args);
    if (rollout_cmd->parsed()) return cmd_rollout(rollout_args);
    if (foresee_cmd->parsed()) return cmd_foresee(foresee_args);
    if (episode_cmd->parsed()) return cmd_episode(episode_args);
    if (gen_cmd->parsed()) return cmd_gen(gen_args);
    if (bench_cmd->parsed()) return cmd_bench(bench_args);
    return kExitUsage;
  } catch (const CliUsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const s3ap::ParseFailedError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const s3ap::ParseAttempt& attempt : e.attempts()) {
      std::cerr << "attempt " << attempt.attempt_index + 1 << ": "
                << attempt.issues.size() << " issue(s)\n";
      for (const s3ap::ValidationIssue& issue : attempt.issues) {
        std::cerr << "  " << issue.path << ": " << issue.message << "\n";
      }
    }
    return kExitPipeline;
  } catch (const s3ap::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPipeline;
  }
}
