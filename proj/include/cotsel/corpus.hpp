#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cotsel {

class ModelBackend;

enum class TaskKind { multiple_choice, open_ended };
enum class Split { train, test };

const char* task_kind_name(TaskKind kind);
TaskKind task_kind_from_name(const std::string& name);
const char* split_name(Split split);
Split split_from_name(const std::string& name);

/// One corpus item. Immutable after load; optional fields stay unset rather
/// than holding sentinel values.
struct Sample {
    std::string id;
    std::string question;
    std::vector<std::string> options;              // empty for open-ended
    std::optional<std::string> image_ref;
    std::optional<std::string> caption;
    std::string gold_answer;
    std::vector<std::string> gold_answers_multi;   // annotator answers, may be empty
    std::optional<std::string> rationale;
    std::vector<std::string> subdomain;
    Split split = Split::train;

    bool has_caption() const { return caption.has_value() && !caption->empty(); }
    bool has_rationale() const { return rationale.has_value() && !rationale->empty(); }
};

struct Corpus {
    std::string name;
    TaskKind task_kind = TaskKind::multiple_choice;
    std::vector<Sample> samples;

    const Sample* find(const std::string& id) const;
};

/// Index of the option matching gold_answer under canonical_text equality.
/// Guaranteed to exist for validated multiple-choice samples.
std::optional<int> gold_option_index(const Sample& sample);

Corpus load_corpus(const std::filesystem::path& path, TaskKind expected_kind);
Corpus parse_corpus(const std::string& text, TaskKind expected_kind, const std::string& name);

/// Canonical line-delimited form: fixed key order, one record per line,
/// absent optional fields omitted.
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

Corpus split_view(const Corpus& corpus, Split split);

struct CaptionConfig {
    std::string model_id;
    int max_tokens = 128;
    int parallelism = 1;
};

struct CaptionReport {
    int already_captioned = 0;
    int newly_captioned = 0;
    std::vector<std::pair<std::string, std::string>> failures; // (sample id, error)
};

/// Fills missing captions through the gateway. Samples that already carry a
/// caption are untouched; per-sample failures go to the report and the rest
/// of the corpus still gets captioned.
std::pair<Corpus, CaptionReport> attach_captions(const Corpus& corpus,
                                                 ModelBackend& captioner,
                                                 const CaptionConfig& config);

} // namespace cotsel
