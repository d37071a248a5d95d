#pragma once

namespace cotsel::templates {

// Versioned prompt assets. Bump the version suffix whenever wording changes;
// judge score caches key on it.
inline constexpr const char* kTemplateVersion = "v1";

// Rewrite templates; "{instruction}" is replaced with the input instruction.
inline constexpr const char* kEvolveAddConstraints =
    "Rewrite the instruction below into a more complex version by adding one "
    "explicit constraint or requirement that the answer must satisfy. Keep the "
    "rewritten instruction self-contained and answerable. Reply with the "
    "rewritten instruction only.\n\nInstruction:\n{instruction}";

inline constexpr const char* kEvolveSpecification =
    "Rewrite the instruction below into a more complex version by making it "
    "more specific: replace general concepts with concrete details, names, or "
    "quantities. Keep the rewritten instruction self-contained and answerable. "
    "Reply with the rewritten instruction only.\n\nInstruction:\n{instruction}";

inline constexpr const char* kEvolveIncreaseReasoningSteps =
    "Rewrite the instruction below into a more complex version that requires "
    "more reasoning steps to answer, for example by chaining dependent "
    "subquestions. Keep the rewritten instruction self-contained and "
    "answerable. Reply with the rewritten instruction only.\n\nInstruction:\n"
    "{instruction}";

// Judge rubric; "{text}" is replaced with the flattened sample text.
inline constexpr const char* kJudgeRubric =
    "Rate the intrinsic difficulty of the following question on a scale from "
    "1 (trivial recall) to 10 (long multi-step reasoning over several facts). "
    "Consider the number of reasoning steps, the amount of context that must "
    "be combined, and any required calculation. Reply with a single number "
    "and nothing else.\n\nText:\n{text}";

} // namespace cotsel::templates
