#include "cotsel/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cotsel/errors.hpp"
#include "cotsel/modelgate.hpp"
#include "cotsel/util.hpp"
#include "json.hpp"

namespace cotsel {

using nlohmann::json;

const char* task_kind_name(TaskKind kind) {
    return kind == TaskKind::multiple_choice ? "multiple_choice" : "open_ended";
}

TaskKind task_kind_from_name(const std::string& name) {
    if (name == "multiple_choice") return TaskKind::multiple_choice;
    if (name == "open_ended") return TaskKind::open_ended;
    throw Error(ErrorCode::usage, "unknown task kind '" + name +
                                      "' (expected multiple_choice or open_ended)");
}

const char* split_name(Split split) {
    return split == Split::train ? "train" : "test";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "test") return Split::test;
    throw Error(ErrorCode::invariant_violation,
                "split must be one of {train, test}, got '" + name + "'");
}

const Sample* Corpus::find(const std::string& id) const {
    for (const auto& s : samples)
        if (s.id == id) return &s;
    return nullptr;
}

std::optional<int> gold_option_index(const Sample& sample) {
    const std::string gold = canonical_text(sample.gold_answer);
    for (size_t i = 0; i < sample.options.size(); ++i)
        if (canonical_text(sample.options[i]) == gold) return static_cast<int>(i);
    return std::nullopt;
}

namespace {

const std::set<std::string> kRecordKeys = {
    "id",         "question", "options",   "image_ref", "caption",
    "gold_answer", "gold_answers_multi", "rationale", "subdomain", "split"};

std::string require_string(const json& record, const char* key, size_t line_no) {
    auto it = record.find(key);
    if (it == record.end() || !it->is_string())
        throw Error(ErrorCode::parse_error,
                    "line " + std::to_string(line_no) + ": missing or non-string field '" +
                        key + "'");
    return it->get<std::string>();
}

std::vector<std::string> optional_string_list(const json& record, const char* key,
                                              size_t line_no) {
    auto it = record.find(key);
    if (it == record.end()) return {};
    if (!it->is_array())
        throw Error(ErrorCode::parse_error,
                    "line " + std::to_string(line_no) + ": field '" + key +
                        "' must be a list of strings");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string())
            throw Error(ErrorCode::parse_error,
                        "line " + std::to_string(line_no) + ": field '" + key +
                            "' must be a list of strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::optional<std::string> optional_string(const json& record, const char* key,
                                           size_t line_no) {
    auto it = record.find(key);
    if (it == record.end()) return std::nullopt;
    if (!it->is_string())
        throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) +
                                                ": field '" + key + "' must be a string");
    return it->get<std::string>();
}

Sample parse_record(const json& record, size_t line_no) {
    if (!record.is_object())
        throw Error(ErrorCode::parse_error,
                    "line " + std::to_string(line_no) + ": record is not an object");
    for (const auto& [key, value] : record.items()) {
        if (!kRecordKeys.count(key))
            throw Error(ErrorCode::parse_error,
                        "line " + std::to_string(line_no) + ": unknown field '" + key + "'");
        if (value.is_null())
            throw Error(ErrorCode::parse_error,
                        "line " + std::to_string(line_no) + ": field '" + key +
                            "' is null (absent fields must be omitted)");
    }

    Sample s;
    s.id = require_string(record, "id", line_no);
    s.question = require_string(record, "question", line_no);
    s.gold_answer = require_string(record, "gold_answer", line_no);
    s.options = optional_string_list(record, "options", line_no);
    s.image_ref = optional_string(record, "image_ref", line_no);
    s.caption = optional_string(record, "caption", line_no);
    s.gold_answers_multi = optional_string_list(record, "gold_answers_multi", line_no);
    s.rationale = optional_string(record, "rationale", line_no);
    s.subdomain = optional_string_list(record, "subdomain", line_no);
    s.split = split_from_name(require_string(record, "split", line_no));

    if (s.id.empty())
        throw Error(ErrorCode::invariant_violation,
                    "line " + std::to_string(line_no) + ": empty sample id");
    return s;
}

void validate_sample(const Sample& s, TaskKind kind) {
    if (kind == TaskKind::multiple_choice) {
        if (s.options.empty())
            throw Error(ErrorCode::kind_mismatch,
                        "sample '" + s.id + "' has no options in a multiple_choice corpus");
        if (!gold_option_index(s))
            throw Error(ErrorCode::invariant_violation,
                        "sample '" + s.id + "': gold_answer '" + s.gold_answer +
                            "' does not match any option");
    } else if (!s.options.empty()) {
        throw Error(ErrorCode::kind_mismatch,
                    "sample '" + s.id + "' has options in an open_ended corpus");
    }
}

json sample_to_json(const Sample& s) {
    json record;
    record["id"] = s.id;
    record["question"] = s.question;
    record["gold_answer"] = s.gold_answer;
    record["split"] = split_name(s.split);
    if (!s.options.empty()) record["options"] = s.options;
    if (s.image_ref) record["image_ref"] = *s.image_ref;
    if (s.caption) record["caption"] = *s.caption;
    if (!s.gold_answers_multi.empty()) record["gold_answers_multi"] = s.gold_answers_multi;
    if (s.rationale) record["rationale"] = *s.rationale;
    if (!s.subdomain.empty()) record["subdomain"] = s.subdomain;
    return record;
}

} // namespace

Corpus parse_corpus(const std::string& text, TaskKind expected_kind,
                    const std::string& name) {
    Corpus corpus;
    corpus.name = name;
    corpus.task_kind = expected_kind;

    std::set<std::string> seen_ids;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error,
                        "line " + std::to_string(line_no) + ": " + e.what());
        }
        Sample s = parse_record(record, line_no);
        if (!seen_ids.insert(s.id).second)
            throw Error(ErrorCode::invariant_violation,
                        "duplicate sample id '" + s.id + "' (line " +
                            std::to_string(line_no) + ")");
        validate_sample(s, expected_kind);
        corpus.samples.push_back(std::move(s));
    }
    if (corpus.samples.empty()) throw Error(ErrorCode::empty_corpus, "empty corpus");
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, TaskKind expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::storage_failure, "cannot open corpus file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_corpus(buffer.str(), expected_kind, path.stem().string());
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& s : corpus.samples) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::storage_failure, "cannot write corpus file " + path.string());
    out << serialize_corpus(corpus);
}

Corpus split_view(const Corpus& corpus, Split split) {
    Corpus view;
    view.name = corpus.name;
    view.task_kind = corpus.task_kind;
    for (const auto& s : corpus.samples)
        if (s.split == split) view.samples.push_back(s);
    return view;
}

std::pair<Corpus, CaptionReport> attach_captions(const Corpus& corpus,
                                                 ModelBackend& captioner,
                                                 const CaptionConfig& config) {
    Corpus out = corpus;
    CaptionReport report;

    std::vector<size_t> pending;
    for (size_t i = 0; i < out.samples.size(); ++i) {
        if (out.samples[i].has_caption())
            ++report.already_captioned;
        else
            pending.push_back(i);
    }

    struct CaptionOutcome {
        std::string caption;
        std::string error;
    };
    std::function<CaptionOutcome(size_t)> fetch = [&](size_t j) -> CaptionOutcome {
        const Sample& s = corpus.samples[pending[j]];
        if (!s.image_ref)
            return {"", "no image_ref and no caption"};
        GenerationRequest req;
        req.model_id = config.model_id;
        req.prompt = "Describe the image in one concise sentence.";
        req.image = *s.image_ref;
        req.temperature = 0.0;
        req.max_tokens = config.max_tokens;
        req.request_tag = "caption:" + s.id + "#1";
        try {
            Completion c = captioner.generate(req);
            if (trim(c.raw_text).empty()) return {"", "captioner returned empty output"};
            return {trim(c.raw_text), ""};
        } catch (const Error& e) {
            return {"", e.what()};
        }
    };
    auto outcomes = parallel_map<CaptionOutcome>(pending.size(), config.parallelism, fetch);

    for (size_t j = 0; j < pending.size(); ++j) {
        Sample& s = out.samples[pending[j]];
        if (outcomes[j].error.empty()) {
            s.caption = outcomes[j].caption;
            ++report.newly_captioned;
        } else {
            report.failures.emplace_back(s.id, outcomes[j].error);
        }
    }
    return {std::move(out), std::move(report)};
}

} // namespace cotsel
