#pragma once

#include <string>
#include <vector>

#include "cotsel/corpus.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

/// "(a) red; (b) blue" — shared by prompt assembly and text flattening.
inline std::string render_options(const std::vector<std::string>& options) {
    std::string out;
    for (size_t i = 0; i < options.size(); ++i) {
        if (i) out += "; ";
        out += "(";
        out += static_cast<char>('a' + i);
        out += ") ";
        out += squash_newlines(options[i]);
    }
    return out;
}

inline std::string render_question_block(const Sample& sample) {
    std::string out = "Question: " + squash_newlines(sample.question);
    if (!sample.options.empty()) out += "\nOptions: " + render_options(sample.options);
    return out;
}

inline std::string zero_shot_prompt(const Sample& sample) {
    return render_question_block(sample) + "\nAnswer: Let's think step by step.";
}

} // namespace cotsel
