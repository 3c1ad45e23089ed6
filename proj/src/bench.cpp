#include "s3ap/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "s3ap/prompts.hpp"
#include "s3ap/schema.hpp"

namespace s3ap::bench {

using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& text) {
  std::size_t a = text.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = text.find_last_not_of(" \t\r\n");
  return text.substr(a, b - a + 1);
}

// Lowercase, punctuation stripped, whitespace collapsed.
std::string normalize_piece(const std::string& text) {
  std::string out;
  for (char c : text) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      out += static_cast<char>(std::tolower(u));
    } else if (std::isspace(u) || std::ispunct(u)) {
      if (!out.empty() && out.back() != ' ') out += ' ';
    }
  }
  return trim(out);
}

std::set<std::string> normalized_set(const std::vector<std::string>& pieces) {
  std::set<std::string> out;
  for (const std::string& piece : pieces) {
    std::string norm = normalize_piece(piece);
    if (!norm.empty()) out.insert(norm);
  }
  return out;
}

std::vector<std::string> split_on(const std::string& text, const std::string& seps) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (seps.find(c) != std::string::npos) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<int> extract_choice(const std::string& response, std::size_t n_options) {
  std::size_t i = 0;
  while (i < response.size()) {
    unsigned char u = static_cast<unsigned char>(response[i]);
    if (!std::isalnum(u)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < response.size() &&
           std::isalnum(static_cast<unsigned char>(response[j]))) {
      ++j;
    }
    const std::string token = response.substr(i, j - i);
    i = j;
    if (token.size() == 1 && std::isalpha(static_cast<unsigned char>(token[0]))) {
      int idx = std::tolower(static_cast<unsigned char>(token[0])) - 'a';
      if (idx >= 0 && idx < static_cast<int>(n_options)) return idx;
    } else if (std::all_of(token.begin(), token.end(), [](char c) {
                 return std::isdigit(static_cast<unsigned char>(c));
               })) {
      if (token.size() <= 6) {
        long v = std::stol(token);
        if (v >= 1 && v <= static_cast<long>(n_options)) return static_cast<int>(v - 1);
      }
    }
  }
  return std::nullopt;
}

std::string option_letter(std::size_t index) {
  if (index >= 26) throw InfeasibleParamsError("more than 26 options");
  return std::string(1, static_cast<char>('A' + index));
}

ordered_json answer_to_json(const AnswerSpec& spec) {
  ordered_json doc;
  if (const auto* mc = std::get_if<MultipleChoice>(&spec)) {
    doc["type"] = "multiple_choice";
    doc["options"] = mc->options;
    doc["gold_index"] = mc->gold_index;
  } else if (const auto* la = std::get_if<ListAnswer>(&spec)) {
    doc["type"] = "list";
    doc["gold"] = la->gold_set;
  } else {
    doc["type"] = "exact";
    doc["gold"] = std::get<ExactText>(spec).gold;
  }
  return doc;
}

std::vector<std::string> string_array(const ordered_json& doc, const char* key,
                                      int line) {
  if (!doc.contains(key) || !doc[key].is_array()) {
    throw DatasetFormatError(std::string("'") + key + "' must be an array", line);
  }
  std::vector<std::string> out;
  for (const auto& entry : doc[key]) {
    if (!entry.is_string()) {
      throw DatasetFormatError(std::string("'") + key + "' must hold strings", line);
    }
    out.push_back(entry.get<std::string>());
  }
  return out;
}

AnswerSpec answer_from_object(const ordered_json& doc, int line) {
  if (!doc.contains("type") || !doc["type"].is_string()) {
    throw DatasetFormatError("answer object needs a string 'type'", line);
  }
  const std::string type = doc["type"].get<std::string>();
  if (type == "multiple_choice") {
    MultipleChoice mc;
    mc.options = string_array(doc, "options", line);
    if (mc.options.empty()) {
      throw DatasetFormatError("multiple_choice needs options", line);
    }
    if (!doc.contains("gold_index") || !doc["gold_index"].is_number_integer()) {
      throw DatasetFormatError("multiple_choice needs an integer gold_index", line);
    }
    mc.gold_index = doc["gold_index"].get<int>();
    if (mc.gold_index < 0 || mc.gold_index >= static_cast<int>(mc.options.size())) {
      throw DatasetFormatError("gold_index out of range", line);
    }
    return mc;
  }
  if (type == "list") return ListAnswer{string_array(doc, "gold", line)};
  if (type == "exact") {
    if (!doc.contains("gold") || !doc["gold"].is_string()) {
      throw DatasetFormatError("exact answer needs a string 'gold'", line);
    }
    return ExactText{doc["gold"].get<std::string>()};
  }
  throw DatasetFormatError("unknown answer type '" + type + "'", line);
}

QAItem item_from_json(const ordered_json& doc, DatasetFormat format, int line) {
  auto need_string = [&](const char* key) -> std::string {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw DatasetFormatError(std::string("missing string field '") + key + "'",
                               line);
    }
    return doc[key].get<std::string>();
  };

  QAItem item;
  item.context = need_string("context");
  item.question = need_string("question");
  if (format == DatasetFormat::S3apSynthetic) {
    item.context_id = need_string("context_id");
  } else if (doc.contains("context_id") && doc["context_id"].is_string()) {
    item.context_id = doc["context_id"].get<std::string>();
  } else {
    item.context_id = "ctx-" + sha256_hex(item.context).substr(0, 12);
  }
  if (doc.contains("group_id")) {
    if (!doc["group_id"].is_string()) {
      throw DatasetFormatError("group_id must be a string", line);
    }
    item.group_id = doc["group_id"].get<std::string>();
  }

  if (doc.contains("answer") && doc["answer"].is_object()) {
    item.answer_spec = answer_from_object(doc["answer"], line);
  } else if (format == DatasetFormat::S3apSynthetic) {
    throw DatasetFormatError("missing 'answer' object", line);
  } else if (doc.contains("options")) {
    MultipleChoice mc;
    mc.options = string_array(doc, "options", line);
    if (mc.options.empty()) throw DatasetFormatError("empty options", line);
    if (!doc.contains("gold_index") || !doc["gold_index"].is_number_integer()) {
      throw DatasetFormatError("options need an integer gold_index", line);
    }
    mc.gold_index = doc["gold_index"].get<int>();
    if (mc.gold_index < 0 || mc.gold_index >= static_cast<int>(mc.options.size())) {
      throw DatasetFormatError("gold_index out of range", line);
    }
    item.answer_spec = mc;
  } else if (doc.contains("gold_set")) {
    item.answer_spec = ListAnswer{string_array(doc, "gold_set", line)};
  } else if (doc.contains("gold") && doc["gold"].is_string()) {
    item.answer_spec = ExactText{doc["gold"].get<std::string>()};
  } else {
    throw DatasetFormatError("no recognizable answer fields", line);
  }
  return item;
}

std::string format_fraction(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", value);
  return buf;
}

}  // namespace

ordered_json QAItem::to_json() const {
  ordered_json doc;
  doc["context_id"] = context_id;
  doc["context"] = context;
  doc["question"] = question;
  doc["answer"] = answer_to_json(answer_spec);
  if (group_id) doc["group_id"] = *group_id;
  return doc;
}

std::optional<DatasetFormat> dataset_format_from(const std::string& name) {
  if (name == "synthetic" || name == "s3ap-synthetic") {
    return DatasetFormat::S3apSynthetic;
  }
  if (name == "jsonl" || name == "generic" || name == "generic-jsonl") {
    return DatasetFormat::GenericJsonl;
  }
  return std::nullopt;
}

std::vector<QAItem> load_dataset(const std::string& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw S3apError("cannot open dataset '" + path + "'");
  std::vector<QAItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    ordered_json doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
      throw DatasetFormatError("not a JSON object", lineno);
    }
    items.push_back(item_from_json(doc, format, lineno));
  }
  return items;
}

void save_dataset(const std::vector<QAItem>& items, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw S3apError("cannot write dataset '" + path + "'");
  for (const QAItem& item : items) out << item.to_json().dump() << "\n";
}

std::string build_qa_prompt(const std::string& context,
                            const std::optional<std::string>& extra_info,
                            const std::string& question) {
  if (trim(context).empty()) throw S3apError("context must be nonempty");
  if (trim(question).empty()) throw S3apError("question must be nonempty");
  std::string text = prompts::qa_template();
  text = prompts::fill_slot(text, "context", context);
  text = prompts::fill_slot(text, "extra_info",
                            extra_info ? *extra_info : std::string("(none)"));
  text = prompts::fill_slot(text, "question", question);
  return text;
}

bool score_answer(const QAItem& item, const std::string& response) {
  if (const auto* mc = std::get_if<MultipleChoice>(&item.answer_spec)) {
    std::optional<int> pick = extract_choice(response, mc->options.size());
    return pick && *pick == mc->gold_index;
  }
  if (const auto* la = std::get_if<ListAnswer>(&item.answer_spec)) {
    return normalized_set(split_on(response, ",\n")) == normalized_set(la->gold_set);
  }
  const auto& exact = std::get<ExactText>(item.answer_spec);
  const std::string norm = normalize_piece(response);
  return !norm.empty() && norm == normalize_piece(exact.gold);
}

double all_qs_score(const std::vector<ItemRecord>& records) {
  std::map<std::string, bool> groups;
  for (const ItemRecord& rec : records) {
    if (!rec.group_id) {
      throw MissingGroupError("record without group_id in All-Qs scoring");
    }
    auto [it, inserted] = groups.emplace(*rec.group_id, true);
    it->second = it->second && rec.correct;
  }
  if (groups.empty()) return 0.0;
  std::size_t full = 0;
  for (const auto& [group, all_correct] : groups) full += all_correct ? 1 : 0;
  return static_cast<double>(full) / static_cast<double>(groups.size());
}

std::string condition_name(Condition condition) {
  return condition == Condition::Baseline ? "baseline" : "with-s3ap";
}

std::optional<Condition> condition_from(const std::string& name) {
  if (name == "baseline") return Condition::Baseline;
  if (name == "with-s3ap" || name == "s3ap") return Condition::WithS3ap;
  return std::nullopt;
}

ordered_json RunReport::to_json() const {
  ordered_json doc;
  doc["task"] = task;
  doc["condition"] = condition;
  doc["accuracy"] = accuracy;
  if (all_qs) doc["all_qs"] = *all_qs;
  ordered_json cfg = ordered_json::object();
  for (const auto& [key, value] : config) cfg[key] = value;
  doc["config"] = cfg;
  ordered_json recs = ordered_json::array();
  for (const ItemRecord& rec : records) {
    ordered_json r;
    r["context_id"] = rec.context_id;
    if (rec.group_id) r["group_id"] = *rec.group_id;
    r["prompt_digest"] = rec.prompt_digest;
    r["answer"] = rec.answer;
    r["correct"] = rec.correct;
    if (!rec.note.empty()) r["note"] = rec.note;
    recs.push_back(std::move(r));
  }
  doc["records"] = recs;
  return doc;
}

RunReport run_benchmark(const std::vector<QAItem>& items, Condition condition,
                        const ParserConfig& parser, CompletionBackend& answers,
                        int parallelism, const std::string& task) {
  if (parallelism < 1) throw S3apError("parallelism must be at least 1");
  if (condition == Condition::WithS3ap &&
      parser.kind == ParserConfig::Kind::Llm && parser.backend == nullptr) {
    throw S3apError("with-s3ap runs need a parser backend");
  }

  // One parse per distinct context_id, in first-appearance order. Baseline
  // never reaches this block.
  std::map<std::string, std::string> parsed;
  std::map<std::string, std::string> parse_notes;
  int parser_calls = 0;
  if (condition == Condition::WithS3ap) {
    for (const QAItem& item : items) {
      if (parsed.count(item.context_id) || parse_notes.count(item.context_id)) {
        continue;
      }
      ++parser_calls;
      try {
        Trajectory traj =
            parser.kind == ParserConfig::Kind::Reference
                ? reference_parse(item.context)
                : parse_narrative(item.context, parser.task, *parser.backend,
                                  parser.max_retries)
                      .trajectory;
        parsed[item.context_id] = encode_trajectory(traj, WireForm::ObjectMap);
      } catch (const std::exception& e) {
        parse_notes[item.context_id] = std::string("parse failed: ") + e.what();
      }
    }
  }

  std::vector<ItemRecord> records(items.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= items.size()) break;
      const QAItem& item = items[i];
      ItemRecord rec;
      rec.context_id = item.context_id;
      rec.group_id = item.group_id;
      try {
        std::optional<std::string> extra;
        if (condition == Condition::WithS3ap) {
          auto it = parsed.find(item.context_id);
          if (it != parsed.end()) {
            extra = it->second;
          } else {
            rec.note = parse_notes.at(item.context_id);
          }
        }
        const std::string prompt = build_qa_prompt(item.context, extra, item.question);
        rec.prompt_digest = sha256_hex(prompt);
        if (rec.note.empty()) {
          CompletionRequest request;
          request.model_id = answers.default_model();
          request.messages = {{"user", prompt}};
          rec.answer = answers.complete(request);
          rec.correct = score_answer(item, rec.answer);
        }
      } catch (const std::exception& e) {
        rec.correct = false;
        if (rec.note.empty()) rec.note = std::string("answer failed: ") + e.what();
      }
      records[i] = std::move(rec);
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                            std::max<std::size_t>(items.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w + 1 < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  RunReport report;
  report.task = task;
  report.condition = condition_name(condition);
  report.records = std::move(records);
  std::size_t n_correct = 0;
  bool all_grouped = !report.records.empty();
  for (const ItemRecord& rec : report.records) {
    n_correct += rec.correct ? 1 : 0;
    all_grouped = all_grouped && rec.group_id.has_value();
  }
  report.accuracy = report.records.empty()
                        ? 0.0
                        : static_cast<double>(n_correct) /
                              static_cast<double>(report.records.size());
  if (all_grouped) report.all_qs = all_qs_score(report.records);
  report.config = {
      {"task", task},
      {"condition", report.condition},
      {"items", std::to_string(items.size())},
      {"answer_backend", answers.identity()},
      {"parser", condition == Condition::Baseline ? "none"
       : parser.kind == ParserConfig::Kind::Reference
           ? "reference"
           : "llm:" + parser.backend->identity()},
      {"parser_calls", std::to_string(parser_calls)},
      {"parallelism", std::to_string(parallelism)},
  };
  return report;
}

std::string render_report_markdown(const std::vector<RunReport>& reports) {
  std::vector<std::string> tasks;
  for (const RunReport& report : reports) {
    if (std::find(tasks.begin(), tasks.end(), report.task) == tasks.end()) {
      tasks.push_back(report.task);
    }
  }
  auto find = [&](const std::string& task, const char* condition) -> const RunReport* {
    for (const RunReport& report : reports) {
      if (report.task == task && report.condition == condition) return &report;
    }
    return nullptr;
  };
  auto acc = [&](const RunReport* report) {
    return report ? format_fraction(report->accuracy) : std::string("n/a");
  };
  auto allq = [&](const RunReport* report) {
    return report && report->all_qs ? format_fraction(*report->all_qs)
                                    : std::string("n/a");
  };

  std::string md = "# Benchmark report\n\n";
  md += "| task | items | baseline | with-s3ap | baseline all-qs | with-s3ap all-qs |\n";
  md += "| --- | --- | --- | --- | --- | --- |\n";
  for (const std::string& task : tasks) {
    const RunReport* base = find(task, "baseline");
    const RunReport* with = find(task, "with-s3ap");
    const RunReport* any = with ? with : base;
    md += "| " + task + " | " + std::to_string(any->records.size()) + " | " +
          acc(base) + " | " + acc(with) + " | " + allq(base) + " | " + allq(with) +
          " |\n";
  }
  return md;
}

void write_reports(const std::vector<RunReport>& reports, const std::string& dir) {
  std::filesystem::create_directories(dir);
  ordered_json doc;
  doc["runs"] = ordered_json::array();
  for (const RunReport& report : reports) doc["runs"].push_back(report.to_json());

  const std::string json_path = dir + "/report.json";
  std::ofstream json_out(json_path, std::ios::binary);
  if (!json_out) throw S3apError("cannot write '" + json_path + "'");
  json_out << doc.dump(2) << "\n";

  const std::string md_path = dir + "/report.md";
  std::ofstream md_out(md_path, std::ios::binary);
  if (!md_out) throw S3apError("cannot write '" + md_path + "'");
  md_out << render_report_markdown(reports);
}

std::vector<QAItem> synthesize_qa(const oracle::OracleScenario& scenario,
                                  const std::string& context_id,
                                  const std::string& context) {
  const std::vector<oracle::WorldSnapshot> snaps = oracle::simulate(scenario);
  const oracle::WorldSnapshot& final_snap = snaps.back();
  const std::size_t t = snaps.size() - 1;

  std::vector<std::string> options;
  for (const auto& [container, location] : scenario.containers) {
    options.push_back(container);
  }

  std::vector<QAItem> items;
  auto base_item = [&]() {
    QAItem item;
    item.context_id = context_id;
    item.context = context;
    item.group_id = context_id;
    return item;
  };
  auto push_mc = [&](const std::string& stem, const std::string& gold) {
    auto at = std::find(options.begin(), options.end(), gold);
    if (at == options.end()) return;
    QAItem item = base_item();
    item.question = stem;
    for (std::size_t k = 0; k < options.size(); ++k) {
      item.question += "\n(" + option_letter(k) + ") " + options[k];
    }
    item.answer_spec = MultipleChoice{
        options, static_cast<int>(std::distance(options.begin(), at))};
    items.push_back(std::move(item));
  };

  for (const auto& [object, initial] : scenario.objects) {
    const std::optional<std::string> truth = oracle::query_belief(snaps, {}, object, t);
    if (truth) push_mc("Where is the " + object + "?", *truth);
    for (const auto& [agent, home] : scenario.agents) {
      if (auto belief = oracle::query_belief(snaps, {agent}, object, t)) {
        push_mc("Where will " + agent.name + " look for the " + object + "?",
                *belief);
      }
      for (const auto& [other, other_home] : scenario.agents) {
        if (other == agent) continue;
        if (auto belief = oracle::query_belief(snaps, {agent, other}, object, t)) {
          push_mc("Where does " + agent.name + " think that " + other.name +
                      " will look for the " + object + "?",
                  *belief);
        }
      }
    }
    if (truth) {
      for (const auto& [container, location] : scenario.containers) {
        QAItem item = base_item();
        item.question =
            "Is the " + object + " in the " + container + "? Answer yes or no.";
        item.answer_spec = ExactText{*truth == container ? "yes" : "no"};
        items.push_back(std::move(item));
      }
    }
  }

  for (const std::string& location : scenario.locations) {
    std::vector<std::string> present;
    for (const auto& [agent, home] : scenario.agents) {
      std::optional<std::string> where = final_snap.location_of(agent);
      if (where && *where == location) present.push_back(agent.name);
    }
    if (present.empty()) continue;
    QAItem item = base_item();
    item.question = "Which agents are in the " + location + "?";
    item.answer_spec = ListAnswer{present};
    items.push_back(std::move(item));
  }
  return items;
}

oracle::OracleScenario scenario_from_trajectory(const Trajectory& traj) {
  if (traj.steps.empty()) {
    throw TemplateMismatchError("trajectory has no steps");
  }
  oracle::OracleScenario sc;
  for (const AgentId& agent : traj.agents) sc.agents.emplace_back(agent, "");
  auto is_agent = [&](const std::string& name) {
    return sc.has_agent(AgentId{name});
  };
  auto set_agent = [&](const std::string& name, const std::string& location) {
    for (auto& [agent, home] : sc.agents) {
      if (agent.name == name) home = location;
    }
  };
  auto add_location = [&](const std::string& location) {
    if (!sc.has_location(location)) sc.locations.push_back(location);
  };

  // Step-0 state text: agent sentences, then containers, then objects.
  const std::string& state = traj.steps.front().state;
  std::size_t start = 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] != '.') continue;
    if (i + 1 != state.size() && state[i + 1] != ' ') continue;
    const std::string sentence = trim(state.substr(start, i + 1 - start));
    start = i + 2;
    if (sentence.empty()) continue;
    if (auto m = match_template("{A} is away.", sentence);
        m && is_agent((*m)["A"])) {
      set_agent((*m)["A"], "");
      continue;
    }
    if (auto m = match_template("{A} is in the {L}.", sentence);
        m && is_agent((*m)["A"])) {
      set_agent((*m)["A"], (*m)["L"]);
      add_location((*m)["L"]);
      continue;
    }
    if (auto m = match_template("The {X} is in the {Y}.", sentence)) {
      if (sc.has_container((*m)["Y"])) {
        sc.objects.emplace_back((*m)["X"], (*m)["Y"]);
      } else {
        sc.containers.emplace_back((*m)["X"], (*m)["Y"]);
        add_location((*m)["Y"]);
      }
      continue;
    }
    throw TemplateMismatchError(
        "state sentence does not match the rendering grammar: '" + sentence + "'");
  }

  for (const SimulationStep& step : traj.steps) {
    for (const AgentId& agent : traj.agents) {
      const AgentAction* action = step.actions.find(agent);
      if (!action || action->is_none()) continue;
      const std::string& text = action->raw;
      if (auto m = match_template("entered the {L}", text)) {
        add_location((*m)["L"]);
        sc.events.push_back(
            {oracle::EventKind::Enter, agent, (*m)["L"], "", "", {}});
      } else if (match_template("exited the {L}", text)) {
        sc.events.push_back({oracle::EventKind::Exit, agent, "", "", "", {}});
      } else if (auto m2 = match_template("moved the {O} to the {C}", text)) {
        sc.events.push_back({oracle::EventKind::MoveObject, agent, "",
                             (*m2)["O"], (*m2)["C"], {}});
      } else if (auto m3 = match_template(
                     "publicly claimed that the {O} is in the {C}", text)) {
        sc.events.push_back({oracle::EventKind::PublicClaim, agent, "",
                             (*m3)["O"], (*m3)["C"], {}});
      } else if (auto m4 = match_template(
                     "privately told {R} that the {O} is in the {C}", text)) {
        sc.events.push_back({oracle::EventKind::PrivateTell, agent, "",
                             (*m4)["O"], (*m4)["C"], AgentId{(*m4)["R"]}});
      } else {
        throw TemplateMismatchError(
            "action does not match the rendering grammar: '" + text + "'");
      }
    }
  }
  sc.validate();
  return sc;
}

namespace {

struct QaSections {
  std::string context;
  std::string extra;
  std::string question;
};

std::optional<QaSections> split_qa_prompt(const std::string& prompt) {
  const std::string context_header = "## Context\n";
  const std::string extra_header =
      "\n## Extra Info\n(to help you better understand the meeting)\n";
  const std::string task_header = "\n## Task\n";
  if (prompt.rfind(context_header, 0) != 0) return std::nullopt;
  const std::size_t extra_at = prompt.find(extra_header);
  if (extra_at == std::string::npos) return std::nullopt;
  const std::size_t extra_body = extra_at + extra_header.size();
  const std::size_t task_at = prompt.find(task_header, extra_body);
  if (task_at == std::string::npos) return std::nullopt;
  QaSections out;
  out.context = prompt.substr(context_header.size(), extra_at - context_header.size());
  out.extra = prompt.substr(extra_body, task_at - extra_body);
  out.question = prompt.substr(task_at + task_header.size());
  return out;
}

std::string answer_question(const oracle::OracleScenario& sc,
                            const std::vector<oracle::WorldSnapshot>& snaps,
                            const std::string& question) {
  const std::size_t eol = question.find('\n');
  const std::string stem =
      eol == std::string::npos ? question : question.substr(0, eol);

  std::vector<std::pair<std::string, std::string>> options;  // letter, text
  std::size_t at = eol;
  while (at != std::string::npos && at < question.size()) {
    std::size_t next = question.find('\n', at + 1);
    const std::string line = question.substr(
        at + 1, (next == std::string::npos ? question.size() : next) - at - 1);
    if (line.size() >= 5 && line[0] == '(' && line[2] == ')' && line[3] == ' ') {
      options.emplace_back(std::string(1, line[1]), line.substr(4));
    }
    at = next;
  }
  const std::size_t t = snaps.size() - 1;
  auto mc_answer = [&](const std::optional<std::string>& belief) -> std::string {
    if (!belief) return "unknown";
    for (const auto& [letter, text] : options) {
      if (text == *belief) return "(" + letter + ") " + text;
    }
    return "unknown";
  };

  if (auto m = match_template("Where is the {O}?", stem)) {
    return mc_answer(oracle::query_belief(snaps, {}, (*m)["O"], t));
  }
  if (auto m = match_template("Where will {A} look for the {O}?", stem)) {
    return mc_answer(
        oracle::query_belief(snaps, {AgentId{(*m)["A"]}}, (*m)["O"], t));
  }
  if (auto m = match_template(
          "Where does {A} think that {B} will look for the {O}?", stem)) {
    return mc_answer(oracle::query_belief(
        snaps, {AgentId{(*m)["A"]}, AgentId{(*m)["B"]}}, (*m)["O"], t));
  }
  if (auto m = match_template("Which agents are in the {L}?", stem)) {
    std::vector<std::string> present;
    for (const auto& [agent, home] : sc.agents) {
      std::optional<std::string> where = snaps.back().location_of(agent);
      if (where && *where == (*m)["L"]) present.push_back(agent.name);
    }
    if (present.empty()) return "none";
    std::string joined = present.front();
    for (std::size_t k = 1; k < present.size(); ++k) joined += ", " + present[k];
    return joined;
  }
  if (auto m = match_template("Is the {O} in the {C}? Answer yes or no.", stem)) {
    std::optional<std::string> truth =
        oracle::query_belief(snaps, {}, (*m)["O"], t);
    if (!truth) return "unknown";
    return *truth == (*m)["C"] ? "yes" : "no";
  }
  return "unknown";
}

}  // namespace

std::string RuleReaderBackend::complete(const CompletionRequest& request) {
  const std::string* prompt = nullptr;
  for (const Message& message : request.messages) {
    if (message.role == "user") prompt = &message.content;
  }
  if (!prompt) throw S3apError("rule reader needs a user message");
  std::optional<QaSections> sections = split_qa_prompt(*prompt);
  if (!sections) throw S3apError("rule reader expects the QA prompt layout");
  if (sections->extra == "(none)") return "(A)";
  try {
    TrajectoryDecodeResult decoded = decode_trajectory(sections->extra);
    if (!decoded.trajectory) return "unknown";
    oracle::OracleScenario sc = scenario_from_trajectory(*decoded.trajectory);
    std::vector<oracle::WorldSnapshot> snaps = oracle::simulate(sc);
    return answer_question(sc, snaps, sections->question);
  } catch (const std::exception&) {
    return "unknown";
  }
}

const std::string& RuleReaderBackend::identity() const {
  static const std::string id = "rule-reader";
  return id;
}

}  // namespace s3ap::bench
