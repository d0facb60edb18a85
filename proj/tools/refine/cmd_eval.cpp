#include <fstream>
#include <iostream>
#include <map>

#include "commands.hpp"
#include "refine/gavie.hpp"
#include "refine/mmhal.hpp"
#include "refine/parallel.hpp"
#include "refine/pope.hpp"
#include "refine/report.hpp"

namespace refine::cli {

namespace {

struct EvalArgs {
  std::string items;
  std::string responses;
  std::string judge_backend;
  std::string report;
  std::string templates;
  std::size_t parallel = 1;
  int max_rating = 5;
};

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

std::string id_of(const json& j) {
  const auto& id = j.contains("id") ? j.at("id") : j.at("query_id");
  return id.is_string() ? id.get<std::string>() : id.dump();
}

// Accepts {id, response}, {id, text}, or a revision transcript line.
std::string response_text(const json& j) {
  if (j.contains("response")) return j.at("response").get<std::string>();
  if (j.contains("text")) return j.at("text").get<std::string>();
  if (j.contains("final")) return j.at("final").at("text").get<std::string>();
  throw std::runtime_error("response record '" + id_of(j) + "' has no response/text/final field");
}

std::map<std::string, json> index_responses(const std::string& path) {
  std::map<std::string, json> out;
  for (auto& j : read_jsonl(path)) out.emplace(id_of(j), std::move(j));
  return out;
}

const json& lookup(const std::map<std::string, json>& responses, const std::string& id) {
  auto it = responses.find(id);
  if (it == responses.end()) {
    throw EvalError(EvalError::Kind::missing_response, "no response for item '" + id + "'");
  }
  return it->second;
}

void write_report(const std::string& path, const json& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << dump_report(report);
}

TemplateSet load_templates(const EvalArgs& a) {
  return a.templates.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(a.templates);
}

void run_pope(const EvalArgs& a) {
  std::vector<PopeItem> items;
  for (const auto& j : read_jsonl(a.items)) items.push_back(j.get<PopeItem>());
  const auto responses = index_responses(a.responses);
  std::vector<std::string> texts;
  for (const auto& it : items) texts.push_back(response_text(lookup(responses, it.id)));
  const auto report = score_pope(items, texts);
  write_report(a.report, to_json(report));
  std::cerr << "POPE overall: acc " << report.overall.accuracy.value() << ", f1 " << report.overall.f1.value()
            << ", yes " << report.overall.yes_ratio.value() << "\n";
}

void run_mmhal(const EvalArgs& a) {
  std::vector<MMHalItem> items;
  for (const auto& j : read_jsonl(a.items)) items.push_back(j.get<MMHalItem>());
  const auto responses = index_responses(a.responses);

  std::vector<MMHalScoredItem> scored(items.size());
  std::vector<std::size_t> to_judge;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& r = lookup(responses, items[i].id);
    if (r.contains("score")) {
      scored[i] = {items[i].id, items[i].category, r.at("score").get<int>(), r.value("judge_text", std::string{})};
    } else {
      to_judge.push_back(i);
    }
  }
  if (!to_judge.empty()) {
    if (a.judge_backend.empty()) {
      throw std::runtime_error(std::to_string(to_judge.size()) + " items have no score; pass --judge-backend");
    }
    auto judge = make_backend(a.judge_backend);
    const auto templates = load_templates(a);
    std::vector<MMHalItem> pending;
    std::vector<std::string> texts;
    for (auto i : to_judge) {
      pending.push_back(items[i]);
      texts.push_back(response_text(lookup(responses, items[i].id)));
    }
    auto judged = judge_mmhal_batch(judge.get(), pending, texts, effective_parallelism(judge, a.parallel), templates,
                                    a.max_rating);
    for (std::size_t k = 0; k < to_judge.size(); ++k) scored[to_judge[k]] = std::move(judged[k]);
  }
  const auto report = score_mmhal(scored, a.max_rating);
  write_report(a.report, to_json(report));
  std::cerr << "MMHal: score " << report.overall_mean << ", hallucination rate " << report.hallucination_rate.value()
            << "\n";
}

void run_gavie(const EvalArgs& a) {
  std::vector<GavieItem> items;
  const auto raw = read_jsonl(a.items);
  const bool prescored = !raw.empty() && raw.front().contains("accuracy_score");
  if (prescored) {
    for (const auto& j : raw) items.push_back(j.get<GavieItem>());
  } else {
    if (a.judge_backend.empty() || a.responses.empty()) {
      throw std::runtime_error("unscored GAVIE items need --responses and --judge-backend");
    }
    auto judge = make_backend(a.judge_backend);
    const auto templates = load_templates(a);
    const auto responses = index_responses(a.responses);
    items.resize(raw.size());
    parallel_for(raw.size(), effective_parallelism(judge, a.parallel), [&](std::size_t i) {
      const auto id = id_of(raw[i]);
      items[i] = judge_gavie(judge.get(), id, raw[i].at("question").get<std::string>(),
                             raw[i].value("image_content", std::string{}), response_text(lookup(responses, id)),
                             templates);
    });
  }
  const auto summary = score_gavie(items);
  write_report(a.report, to_json(summary));
  std::cerr << "GAVIE: acc " << summary.acc_mean << ", rel " << summary.rel_mean << ", avg " << summary.avg << "\n";
}

void add_common(CLI::App* cmd, EvalArgs& a, bool responses_required) {
  cmd->add_option("--items", a.items, "benchmark items JSONL")->required()->check(CLI::ExistingFile);
  auto* resp = cmd->add_option("--responses", a.responses, "responses JSONL ({id, response} or transcripts)");
  if (responses_required) resp->required();
  resp->check(CLI::ExistingFile);
  cmd->add_option("--judge-backend", a.judge_backend, "judge backend spec");
  cmd->add_option("--report", a.report, "output report JSON")->required();
  cmd->add_option("--templates", a.templates, "template directory with judge templates")
      ->check(CLI::ExistingDirectory);
  cmd->add_option("--parallel", a.parallel, "judge calls in flight")->capture_default_str();
}

}  // namespace

void add_eval_command(CLI::App& app) {
  auto* eval = app.add_subcommand("eval", "Score benchmark responses");
  eval->require_subcommand(1);

  auto pope_args = std::make_shared<EvalArgs>();
  auto* pope = eval->add_subcommand("pope", "POPE accuracy / precision / recall / F1 / yes-ratio per split");
  add_common(pope, *pope_args, true);
  pope->callback([pope_args] { run_pope(*pope_args); });

  auto mmhal_args = std::make_shared<EvalArgs>();
  auto* mmhal = eval->add_subcommand("mmhal", "MMHal-Bench judge scores and hallucination rate");
  add_common(mmhal, *mmhal_args, true);
  mmhal->add_option("--max-rating", mmhal_args->max_rating, "top of the judge rating scale")->capture_default_str();
  mmhal->callback([mmhal_args] { run_mmhal(*mmhal_args); });

  auto gavie_args = std::make_shared<EvalArgs>();
  auto* gavie = eval->add_subcommand("gavie", "GAVIE accuracy / relevancy means and their average");
  add_common(gavie, *gavie_args, false);
  gavie->callback([gavie_args] { run_gavie(*gavie_args); });
}

}  // namespace refine::cli
