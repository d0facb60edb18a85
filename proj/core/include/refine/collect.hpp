#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "refine/backend.hpp"
#include "refine/templates.hpp"
#include "refine/types.hpp"

namespace refine {

struct ObjectInfo {
  std::string name;
  std::optional<std::array<double, 4>> bbox;  // normalized x, y, w, h

  bool operator==(const ObjectInfo&) const = default;
};

// Text stand-in for an image, shown to a teacher model that cannot see it.
struct ImageInfoProxy {
  std::vector<ObjectInfo> objects;  // may be empty: caption-only fallback
  std::vector<std::string> captions;

  void validate() const;
  bool operator==(const ImageInfoProxy&) const = default;
};

struct CollectionItem {
  VisualQuery query;
  std::string initial_response;
  std::string gold_answer;
  ImageInfoProxy info;

  void validate() const;
};

struct FeedbackDatum {
  std::string id;
  std::string image_ref;
  std::string question;
  std::string initial_response;
  std::string gold_answer;
  ImageInfoProxy image_info;
  std::string feedback;

  void validate() const;
  bool operator==(const FeedbackDatum&) const = default;
};

struct RevisionDatum {
  std::string id;
  std::string image_ref;
  std::string question;
  std::string initial_response;
  std::string feedback;
  std::string target;

  bool operator==(const RevisionDatum&) const = default;
};

struct RejectRecord {
  std::string id;
  std::string stage;
  std::string error;
};

void to_json(json& j, const ObjectInfo& v);
void from_json(const json& j, ObjectInfo& v);
void to_json(json& j, const ImageInfoProxy& v);
void from_json(const json& j, ImageInfoProxy& v);
void to_json(json& j, const FeedbackDatum& v);
void from_json(const json& j, FeedbackDatum& v);
void to_json(json& j, const RevisionDatum& v);
void from_json(const json& j, RevisionDatum& v);
void to_json(json& j, const RejectRecord& v);

// "Objects:\n- name [x, y, w, h]\n..." with two-decimal coordinates, or ""
// when there are no objects.
std::string format_objects(std::span<const ObjectInfo> objects);
std::string format_captions(std::span<const std::string> captions);

// Text-only request for the teacher. The initial response is bound to
// {best_response}.
GenerationRequest build_feedback_prompt(const ImageInfoProxy& info, const std::string& question,
                                        const std::string& initial_response, const std::string& gold_answer,
                                        const TemplateSet& templates = TemplateSet::defaults(),
                                        const DecodeOptions& decode = {});

// Parses one source record. Accepts the flat schema {id, image, question,
// initial_response, gold_answer, objects?, captions} and the conversation
// schema {id, image, conversations: [{from, value}...], ...} from which
// only the first human/assistant turn is used.
CollectionItem ingest_record(const json& j);
std::vector<CollectionItem> read_collection_jsonl(const std::filesystem::path& path);

struct CollectOptions {
  std::size_t parallelism = 1;
  DecodeOptions decode;
  std::chrono::milliseconds timeout{60000};
};

struct CollectSummary {
  std::size_t collected = 0;
  std::size_t skipped = 0;  // already present from an earlier run
  std::size_t rejected = 0;
};

// Teacher feedback for each item whose id is not in `done`. Per-item
// failures go to on_reject and never abort the run. Callbacks are invoked
// under a single lock, one at a time.
CollectSummary collect_feedback(Backend& teacher, std::span<const CollectionItem> items,
                                const std::set<std::string>& done,
                                const std::function<void(const FeedbackDatum&)>& on_datum,
                                const std::function<void(const RejectRecord&)>& on_reject,
                                const TemplateSet& templates = TemplateSet::defaults(),
                                const CollectOptions& opts = {});

// File-backed run: appends to <out_dir>/feedback.jsonl (skipping ids already
// there), rewrites rejects.jsonl with this run's failures, and regenerates
// revision.jsonl from the full feedback file.
CollectSummary collect_to_directory(Backend& teacher, std::span<const CollectionItem> items,
                                    const std::filesystem::path& out_dir,
                                    const TemplateSet& templates = TemplateSet::defaults(),
                                    const CollectOptions& opts = {});

// Pure field mapping; target is the gold answer. No model calls.
RevisionDatum build_revision_record(const FeedbackDatum& d);
std::vector<RevisionDatum> build_revision_records(std::span<const FeedbackDatum> data);

std::vector<FeedbackDatum> read_feedback_jsonl(const std::filesystem::path& path);

}  // namespace refine
