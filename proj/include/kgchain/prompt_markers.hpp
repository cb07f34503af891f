#pragma once

// Fixed anchors shared by the prompt templates and the mocks that read them.

namespace kgchain::prompts {

inline constexpr const char* kQuestionPrefix = "Question: ";
inline constexpr const char* kSubQuestionPrefix = "Sub-question: ";
inline constexpr const char* kDecomposeMarker = "Return the plan as JSON";
inline constexpr const char* kProgramFence = "```kgql";

}  // namespace kgchain::prompts
