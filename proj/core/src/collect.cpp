#include "refine/collect.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>

#include "refine/parallel.hpp"

namespace refine {

namespace {

void require_nonempty(const std::string& value, const char* field, const std::string& id) {
  if (value.empty()) throw ValidationError("item '" + id + "': " + field + " must be non-empty");
}

std::string strip_image_token(std::string text) {
  static constexpr std::string_view kToken = "<image>";
  for (auto pos = text.find(kToken); pos != std::string::npos; pos = text.find(kToken)) {
    text.erase(pos, kToken.size());
  }
  const auto b = text.find_first_not_of(" \t\r\n");
  const auto e = text.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string{} : text.substr(b, e - b + 1);
}

std::string dump_line(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

}  // namespace

void ImageInfoProxy::validate() const {
  if (captions.empty()) throw ValidationError("ImageInfoProxy: captions must be non-empty");
  for (const auto& o : objects) {
    if (!o.bbox) continue;
    for (double v : *o.bbox) {
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("object '" + o.name + "': bbox values must be in [0, 1]");
    }
  }
}

void CollectionItem::validate() const {
  query.validate();
  require_nonempty(initial_response, "initial_response", query.id);
  require_nonempty(gold_answer, "gold_answer", query.id);
  info.validate();
}

void FeedbackDatum::validate() const {
  require_nonempty(id, "id", id);
  require_nonempty(question, "question", id);
  require_nonempty(initial_response, "initial_response", id);
  require_nonempty(gold_answer, "gold_answer", id);
  require_nonempty(feedback, "feedback", id);
}

void to_json(json& j, const ObjectInfo& v) {
  j = json{{"name", v.name}};
  if (v.bbox) j["bbox"] = *v.bbox;
}

void from_json(const json& j, ObjectInfo& v) {
  if (j.is_string()) {
    v.name = j.get<std::string>();
    v.bbox.reset();
    return;
  }
  v.name = j.at("name").get<std::string>();
  if (j.contains("bbox") && !j.at("bbox").is_null()) {
    v.bbox = j.at("bbox").get<std::array<double, 4>>();
  } else {
    v.bbox.reset();
  }
}

void to_json(json& j, const ImageInfoProxy& v) { j = json{{"objects", v.objects}, {"captions", v.captions}}; }

void from_json(const json& j, ImageInfoProxy& v) {
  v.objects = j.value("objects", std::vector<ObjectInfo>{});
  v.captions = j.at("captions").get<std::vector<std::string>>();
}

void to_json(json& j, const FeedbackDatum& v) {
  j = json{{"id", v.id},
           {"image", v.image_ref},
           {"question", v.question},
           {"initial_response", v.initial_response},
           {"gold_answer", v.gold_answer},
           {"image_info", v.image_info},
           {"feedback", v.feedback}};
}

void from_json(const json& j, FeedbackDatum& v) {
  v.id = j.at("id").get<std::string>();
  v.image_ref = j.value("image", std::string{});
  v.question = j.at("question").get<std::string>();
  v.initial_response = j.at("initial_response").get<std::string>();
  v.gold_answer = j.at("gold_answer").get<std::string>();
  v.image_info = j.at("image_info").get<ImageInfoProxy>();
  v.feedback = j.at("feedback").get<std::string>();
}

void to_json(json& j, const RevisionDatum& v) {
  j = json{{"id", v.id},
           {"image", v.image_ref},
           {"question", v.question},
           {"initial_response", v.initial_response},
           {"feedback", v.feedback},
           {"target", v.target}};
}

void from_json(const json& j, RevisionDatum& v) {
  v.id = j.at("id").get<std::string>();
  v.image_ref = j.value("image", std::string{});
  v.question = j.at("question").get<std::string>();
  v.initial_response = j.at("initial_response").get<std::string>();
  v.feedback = j.at("feedback").get<std::string>();
  v.target = j.at("target").get<std::string>();
}

void to_json(json& j, const RejectRecord& v) { j = json{{"id", v.id}, {"stage", v.stage}, {"error", v.error}}; }

std::string format_objects(std::span<const ObjectInfo> objects) {
  if (objects.empty()) return {};
  std::string out = "Objects:\n";
  char buf[128];
  for (const auto& o : objects) {
    out += "- " + o.name;
    if (o.bbox) {
      const auto& b = *o.bbox;
      std::snprintf(buf, sizeof buf, " [%.2f, %.2f, %.2f, %.2f]", b[0], b[1], b[2], b[3]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string format_captions(std::span<const std::string> captions) {
  std::string out;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (i) out += '\n';
    out += "- " + captions[i];
  }
  return out;
}

GenerationRequest build_feedback_prompt(const ImageInfoProxy& info, const std::string& question,
                                        const std::string& initial_response, const std::string& gold_answer,
                                        const TemplateSet& templates, const DecodeOptions& decode) {
  info.validate();
  const Bindings bindings = {{"objects", format_objects(info.objects)},
                             {"captions", format_captions(info.captions)},
                             {"question", question},
                             {"best_response", initial_response},
                             {"gold_answer", gold_answer}};
  return render(templates.stage(Stage::collect_feedback), bindings, std::nullopt, decode);
}

CollectionItem ingest_record(const json& j) {
  CollectionItem item;
  item.query.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  item.query.image_ref = j.value("image", std::string{});
  if (j.contains("conversations")) {
    const auto& turns = j.at("conversations");
    // First turn only: the first human message and the reply right after it.
    for (std::size_t i = 0; i + 1 < turns.size(); ++i) {
      if (turns[i].value("from", std::string{}) == "human") {
        item.query.question = strip_image_token(turns[i].at("value").get<std::string>());
        item.gold_answer = turns[i + 1].at("value").get<std::string>();
        break;
      }
    }
  } else {
    item.query.question = j.at("question").get<std::string>();
    item.gold_answer = j.at("gold_answer").get<std::string>();
  }
  item.initial_response = j.value("initial_response", std::string{});
  item.info.objects = j.value("objects", std::vector<ObjectInfo>{});
  if (j.contains("captions")) {
    item.info.captions = j.at("captions").get<std::vector<std::string>>();
  } else if (j.contains("caption")) {
    item.info.captions = {j.at("caption").get<std::string>()};
  }
  return item;
}

std::vector<CollectionItem> read_collection_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open source file: " + path.string());
  std::vector<CollectionItem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(ingest_record(json::parse(line)));
  }
  return out;
}

CollectSummary collect_feedback(Backend& teacher, std::span<const CollectionItem> items,
                                const std::set<std::string>& done,
                                const std::function<void(const FeedbackDatum&)>& on_datum,
                                const std::function<void(const RejectRecord&)>& on_reject,
                                const TemplateSet& templates, const CollectOptions& opts) {
  CollectSummary summary;
  std::vector<const CollectionItem*> todo;
  for (const auto& item : items) {
    if (done.contains(item.query.id)) {
      ++summary.skipped;
    } else {
      todo.push_back(&item);
    }
  }

  std::mutex sink_mu;
  parallel_for(todo.size(), opts.parallelism, [&](std::size_t i) {
    const auto& item = *todo[i];
    std::string stage = "validate";
    try {
      item.validate();
      stage = "collect_feedback";
      auto req = build_feedback_prompt(item.info, item.query.question, item.initial_response, item.gold_answer,
                                       templates, opts.decode);
      req.timeout = opts.timeout;
      auto result = teacher.generate(req);
      FeedbackDatum datum{item.query.id,    item.query.image_ref, item.query.question,
                          item.initial_response, item.gold_answer, item.info,
                          trim_trailing(result.text)};
      if (datum.feedback.empty()) throw std::runtime_error("EmptyStageOutput: teacher returned empty feedback");
      std::lock_guard lock(sink_mu);
      on_datum(datum);
      ++summary.collected;
    } catch (const BackendError& e) {
      std::lock_guard lock(sink_mu);
      on_reject({item.query.id, stage, std::string(to_string(e.kind())) + ": " + e.detail()});
      ++summary.rejected;
    } catch (const std::exception& e) {
      std::lock_guard lock(sink_mu);
      on_reject({item.query.id, stage, e.what()});
      ++summary.rejected;
    }
  });
  return summary;
}

std::vector<FeedbackDatum> read_feedback_jsonl(const std::filesystem::path& path) {
  std::vector<FeedbackDatum> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    // A torn last line from an interrupted run is ignored; the item is
    // collected again.
    try {
      out.push_back(json::parse(line).get<FeedbackDatum>());
    } catch (const json::exception&) {
    }
  }
  return out;
}

CollectSummary collect_to_directory(Backend& teacher, std::span<const CollectionItem> items,
                                    const std::filesystem::path& out_dir, const TemplateSet& templates,
                                    const CollectOptions& opts) {
  std::filesystem::create_directories(out_dir);
  const auto feedback_path = out_dir / "feedback.jsonl";

  std::set<std::string> done;
  for (const auto& d : read_feedback_jsonl(feedback_path)) done.insert(d.id);

  std::ofstream feedback_out(feedback_path, std::ios::app);
  std::ofstream rejects_out(out_dir / "rejects.jsonl", std::ios::trunc);
  if (!feedback_out || !rejects_out) throw std::runtime_error("cannot write to " + out_dir.string());

  auto summary = collect_feedback(
      teacher, items, done,
      [&](const FeedbackDatum& d) {
        feedback_out << dump_line(json(d)) << '\n';
        feedback_out.flush();
      },
      [&](const RejectRecord& r) {
        rejects_out << dump_line(json(r)) << '\n';
        rejects_out.flush();
      },
      templates, opts);
  feedback_out.close();

  const auto all = read_feedback_jsonl(feedback_path);
  std::ofstream revision_out(out_dir / "revision.jsonl", std::ios::trunc);
  for (const auto& r : build_revision_records(all)) revision_out << dump_line(json(r)) << '\n';
  return summary;
}

RevisionDatum build_revision_record(const FeedbackDatum& d) {
  return RevisionDatum{d.id, d.image_ref, d.question, d.initial_response, d.feedback, d.gold_answer};
}

std::vector<RevisionDatum> build_revision_records(std::span<const FeedbackDatum> data) {
  std::vector<RevisionDatum> out;
  out.reserve(data.size());
  for (const auto& d : data) out.push_back(build_revision_record(d));
  return out;
}

}  // namespace refine
