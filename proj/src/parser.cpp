#include "s3ap/parser.hpp"

#include <algorithm>
#include <map>

#include "s3ap/prompts.hpp"

namespace s3ap {

using nlohmann::ordered_json;

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::ToMi: return "ToMi";
    case TaskKind::ParaToMi: return "ParaToMi";
    case TaskKind::HiToM: return "HiToM";
    case TaskKind::FANToM: return "FANToM";
    case TaskKind::MMToMQA: return "MMToMQA";
    case TaskKind::ConfAIde: return "ConfAIde";
    case TaskKind::Generic: return "Generic";
  }
  return "Generic";
}

std::optional<TaskKind> task_kind_from(const std::string& name) {
  static const std::map<std::string, TaskKind> table = {
      {"tomi", TaskKind::ToMi},       {"paratomi", TaskKind::ParaToMi},
      {"hitom", TaskKind::HiToM},     {"fantom", TaskKind::FANToM},
      {"mmtomqa", TaskKind::MMToMQA}, {"confaide", TaskKind::ConfAIde},
      {"generic", TaskKind::Generic},
  };
  std::string key;
  for (char c : name) key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto it = table.find(key);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

ParseTask ParseTask::builtin(TaskKind kind) {
  ParseTask task;
  task.name = kind;
  task.exemplar = prompts::example_analysis();
  switch (kind) {
    case TaskKind::ToMi:
    case TaskKind::ParaToMi:
      task.instructions = prompts::tomi_instructions();
      break;
    case TaskKind::HiToM:
      task.instructions = prompts::hitom_instructions();
      break;
    case TaskKind::FANToM:
      task.instructions = prompts::fantom_instructions();
      break;
    case TaskKind::MMToMQA:
      task.instructions = prompts::mmtom_instructions();
      break;
    case TaskKind::ConfAIde:
      task.instructions = prompts::confaide_instructions();
      break;
    case TaskKind::Generic:
      task.instructions = "";
      break;
  }
  return task;
}

namespace {

std::string format_instructions() {
  return "The output must be a single JSON document: an object with \"agents\" "
         "(the list of agent names) and \"steps\" (an array of step objects, one "
         "per timestep, earliest first). Every step object must conform to this "
         "JSON schema. Output only the JSON document.\n" +
         embedded_schema();
}

}  // namespace

std::string build_parse_prompt(const std::string& narrative, const ParseTask& task,
                               const std::optional<std::string>& feedback) {
  if (trim(narrative).empty()) {
    throw S3apError("narrative must be nonempty");
  }
  std::string text = prompts::parse_template();
  static const std::string feedback_section =
      "Previous attempt had these issues. \n"
      "Please fix them based on the previous attempt and feedback below:\n"
      "{feedback}\n"
      "\n";
  if (feedback.has_value()) {
    text = prompts::fill_slot(text, "feedback", *feedback);
  } else {
    std::size_t pos = text.find(feedback_section);
    if (pos != std::string::npos) text.erase(pos, feedback_section.size());
  }
  text = prompts::fill_slot(text, "context", narrative);
  text = prompts::fill_slot(text, "task_specific_instructions", task.instructions);
  text = prompts::fill_slot(text, "example_analysis", task.exemplar);
  text = prompts::fill_slot(text, "format_instructions", format_instructions());
  return text;
}

std::optional<ordered_json> extract_first_json(const std::string& text) {
  auto try_parse = [](const std::string& candidate) -> std::optional<ordered_json> {
    ordered_json doc = ordered_json::parse(candidate, nullptr, false);
    if (doc.is_discarded()) return std::nullopt;
    return doc;
  };

  std::size_t fence = text.find("```");
  while (fence != std::string::npos) {
    std::size_t body = text.find('\n', fence);
    if (body == std::string::npos) break;
    std::size_t close = text.find("```", body);
    if (close == std::string::npos) break;
    if (auto doc = try_parse(text.substr(body + 1, close - body - 1))) return doc;
    fence = text.find("```", close + 3);
  }

  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    const char open = text[i];
    const char shut = open == '{' ? '}' : ']';
    int depth = 0;
    bool in_string = false;
    for (std::size_t j = i; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (c == '\\') {
          ++j;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == open) {
        ++depth;
      } else if (c == shut) {
        --depth;
        if (depth == 0) {
          if (auto doc = try_parse(text.substr(i, j - i + 1))) return doc;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

ParseResult parse_narrative(const std::string& narrative, const ParseTask& task,
                            CompletionBackend& backend, int max_retries) {
  if (max_retries < 0) throw S3apError("max_retries must be >= 0");

  std::vector<ParseAttempt> attempts;
  std::optional<std::string> feedback;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    ParseAttempt record;
    record.attempt_index = static_cast<std::size_t>(attempt);
    record.prompt = build_parse_prompt(narrative, task, feedback);

    CompletionRequest request;
    request.model_id = backend.default_model();
    request.messages.push_back({"user", record.prompt});
    request.temperature = 0.0;
    if (backend.supports_constrained_output()) {
      request.constrained_schema = embedded_schema();
    }
    try {
      record.raw_response = backend.complete(request);
    } catch (const BackendError& e) {
      throw BackendError(e.kind, std::string(e.what()) + " (parse attempt " +
                                     std::to_string(attempt) + ")");
    }

    TrajectoryDecodeResult decoded;
    if (auto doc = extract_first_json(record.raw_response)) {
      decoded = decode_trajectory(doc->dump());
    } else {
      decoded.issues.push_back(ValidationIssue{
          "response", IssueCode::ParseError,
          "no JSON value found in the completion"});
    }
    record.issues = decoded.issues;
    attempts.push_back(record);

    if (decoded.trajectory.has_value()) {
      Trajectory traj = std::move(*decoded.trajectory);
      traj.metadata["source_narrative"] = narrative;
      traj.metadata["task"] = task_kind_name(task.name);
      traj.metadata["backend"] = backend.identity();
      traj.metadata["attempts"] = std::to_string(attempts.size());
      return ParseResult{std::move(traj), std::move(attempts)};
    }
    feedback = issues_to_feedback(decoded.issues);
  }
  const std::size_t n_attempts = attempts.size();
  throw ParseFailedError(
      "narrative parse failed after " + std::to_string(n_attempts) +
          " attempt(s)",
      std::move(attempts));
}

std::optional<std::map<std::string, std::string>> match_template(
    const std::string& tpl, const std::string& sentence) {
  std::vector<std::pair<bool, std::string>> parts;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      std::size_t j = tpl.find('}', i);
      if (j == std::string::npos) return std::nullopt;
      parts.emplace_back(true, tpl.substr(i + 1, j - i - 1));
      i = j + 1;
    } else {
      std::size_t j = tpl.find('{', i);
      if (j == std::string::npos) j = tpl.size();
      parts.emplace_back(false, tpl.substr(i, j - i));
      i = j;
    }
  }

  std::map<std::string, std::string> slots;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& [is_slot, piece] = parts[k];
    if (!is_slot) {
      if (pos + piece.size() > sentence.size() ||
          sentence.compare(pos, piece.size(), piece) != 0) {
        return std::nullopt;
      }
      pos += piece.size();
    } else if (k + 1 == parts.size()) {
      if (pos > sentence.size()) return std::nullopt;
      slots[piece] = sentence.substr(pos);
      pos = sentence.size();
    } else {
      const std::string& next = parts[k + 1].second;
      std::size_t j = sentence.find(next, pos);
      if (j == std::string::npos) return std::nullopt;
      slots[piece] = sentence.substr(pos, j - pos);
      pos = j;
    }
  }
  if (pos != sentence.size()) return std::nullopt;
  for (const auto& [name, value] : slots) {
    if (value.empty()) return std::nullopt;
  }
  return slots;
}

namespace {

using oracle::Event;
using oracle::EventKind;
using oracle::OracleScenario;

std::optional<Event> invert_sentence(const OracleScenario& sc,
                                     const std::string& sentence) {
  const oracle::SentenceBanks& banks = oracle::sentence_banks();
  auto agent_ok = [&](const std::string& n) { return sc.has_agent(AgentId{n}); };

  for (const std::string& tpl : banks.enter) {
    auto m = match_template(tpl, sentence);
    if (m && agent_ok((*m)["A"]) && sc.has_location((*m)["L"])) {
      return Event{EventKind::Enter, AgentId{(*m)["A"]}, (*m)["L"], "", "", {}};
    }
  }
  for (const std::string& tpl : banks.exit) {
    auto m = match_template(tpl, sentence);
    if (m && agent_ok((*m)["A"]) && sc.has_location((*m)["L"])) {
      // The stated location is checked against replay by the caller.
      return Event{EventKind::Exit, AgentId{(*m)["A"]}, (*m)["L"], "", "", {}};
    }
  }
  for (const std::string& tpl : banks.move_object) {
    auto m = match_template(tpl, sentence);
    if (m && agent_ok((*m)["A"]) && sc.has_object((*m)["O"]) &&
        sc.has_container((*m)["C"])) {
      return Event{EventKind::MoveObject, AgentId{(*m)["A"]}, "", (*m)["O"],
                   (*m)["C"], {}};
    }
  }
  for (const std::string& tpl : banks.public_claim) {
    auto m = match_template(tpl, sentence);
    if (m && agent_ok((*m)["A"]) && sc.has_object((*m)["O"]) &&
        sc.has_container((*m)["C"])) {
      return Event{EventKind::PublicClaim, AgentId{(*m)["A"]}, "", (*m)["O"],
                   (*m)["C"], {}};
    }
  }
  for (const std::string& tpl : banks.private_tell) {
    auto m = match_template(tpl, sentence);
    if (m && agent_ok((*m)["A"]) && agent_ok((*m)["R"]) && sc.has_object((*m)["O"]) &&
        sc.has_container((*m)["C"])) {
      return Event{EventKind::PrivateTell, AgentId{(*m)["A"]}, "", (*m)["O"],
                   (*m)["C"], AgentId{(*m)["R"]}};
    }
  }
  return std::nullopt;
}

}  // namespace

Trajectory reference_parse(const std::string& narrative,
                           const OracleScenario& scenario) {
  OracleScenario inventory = scenario;
  inventory.events.clear();

  const std::string expected_placement = oracle::render_narrative(inventory);
  std::size_t split = narrative.find("\n\n");
  const std::string placement =
      split == std::string::npos ? narrative : narrative.substr(0, split);
  if (placement != expected_placement) {
    throw TemplateMismatchError(
        "placement paragraph does not match the scenario inventory");
  }

  std::vector<std::string> sentences;
  if (split != std::string::npos) {
    std::size_t start = split + 2;
    while (start <= narrative.size()) {
      std::size_t eol = narrative.find('\n', start);
      if (eol == std::string::npos) eol = narrative.size();
      std::string line = narrative.substr(start, eol - start);
      if (!trim(line).empty()) sentences.push_back(line);
      start = eol + 1;
    }
  }

  // Replay agent locations to verify stated exit locations.
  std::vector<std::pair<AgentId, std::string>> locs(inventory.agents.begin(),
                                                    inventory.agents.end());
  auto loc_of = [&](const AgentId& a) -> std::string& {
    for (auto& [agent, l] : locs) {
      if (agent == a) return l;
    }
    throw UnknownAgentError("unknown agent '" + a.name + "'");
  };

  for (std::size_t i = 0; i < sentences.size(); ++i) {
    std::optional<Event> ev = invert_sentence(inventory, sentences[i]);
    if (!ev) {
      throw TemplateMismatchError("sentence " + std::to_string(i) +
                                  " does not match the rendering grammar: '" +
                                  sentences[i] + "'");
    }
    if (ev->kind == EventKind::Exit) {
      std::string& where = loc_of(ev->actor);
      if (where != ev->location) {
        throw TemplateMismatchError(
            "sentence " + std::to_string(i) + " says " + ev->actor.name +
            " exited the " + ev->location + " but they are " +
            (where.empty() ? "away" : "in the " + where));
      }
      where.clear();
      ev->location.clear();
    } else if (ev->kind == EventKind::Enter) {
      loc_of(ev->actor) = ev->location;
    }
    inventory.events.push_back(std::move(*ev));
  }

  return oracle::ground_truth_trajectory(inventory);
}

Trajectory reference_parse(const std::string& narrative) {
  std::size_t split = narrative.find("\n\n");
  const std::string placement =
      split == std::string::npos ? narrative : narrative.substr(0, split);

  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < placement.size(); ++i) {
    if (placement[i] != '.') continue;
    if (i + 1 == placement.size() || placement[i + 1] == ' ') {
      std::string s = trim(placement.substr(start, i + 1 - start));
      if (!s.empty()) sentences.push_back(s);
      start = i + 2;
    }
  }

  OracleScenario inventory;
  auto add_location = [&](const std::string& loc) {
    if (!inventory.has_location(loc)) inventory.locations.push_back(loc);
  };

  for (const std::string& s : sentences) {
    if (auto m = match_template("The {X} is in the {Y}.", s)) {
      if (inventory.has_container((*m)["Y"])) {
        inventory.objects.emplace_back((*m)["X"], (*m)["Y"]);
      } else {
        inventory.containers.emplace_back((*m)["X"], (*m)["Y"]);
        add_location((*m)["Y"]);
      }
      continue;
    }
    if (auto m = match_template("{A} is away.", s)) {
      inventory.agents.emplace_back(AgentId{(*m)["A"]}, "");
      continue;
    }
    if (auto m = match_template("{A} is in the {L}.", s)) {
      inventory.agents.emplace_back(AgentId{(*m)["A"]}, (*m)["L"]);
      add_location((*m)["L"]);
      continue;
    }
    throw TemplateMismatchError(
        "placement sentence does not match the rendering grammar: '" + s + "'");
  }

  if (split != std::string::npos) {
    const oracle::SentenceBanks& banks = oracle::sentence_banks();
    std::size_t at = split + 2;
    while (at <= narrative.size()) {
      std::size_t eol = narrative.find('\n', at);
      if (eol == std::string::npos) eol = narrative.size();
      const std::string line = trim(narrative.substr(at, eol - at));
      at = eol + 1;
      if (line.empty()) continue;
      for (const std::string& tpl : banks.enter) {
        auto m = match_template(tpl, line);
        if (m && inventory.has_agent(AgentId{(*m)["A"]})) {
          add_location((*m)["L"]);
          break;
        }
      }
    }
  }

  return reference_parse(narrative, inventory);
}

}  // namespace s3ap
