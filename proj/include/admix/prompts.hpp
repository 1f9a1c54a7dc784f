#ifndef ADMIX_PROMPTS_HPP_
#define ADMIX_PROMPTS_HPP_

#include <string>
#include <string_view>

namespace admix {

// Standardized refusal emitted when a record lacks a recognizable subject or
// brand. Candidates equal to this text never reach the dataset.
extern const std::string_view kRefusalText;

// Shared grading rules embedded into every generation / verification prompt.
extern const std::string_view kAnnotationRules;

extern const std::string_view kSynthesisTemplate;
extern const std::string_view kQualityCheckTemplate;
extern const std::string_view kQualityWithReferenceTemplate;
extern const std::string_view kRelevanceCheckTemplate;

// Content hash of a template. Editing a prompt changes its version, which
// invalidates replay fixtures keyed on it.
std::string prompt_version(std::string_view template_text);

std::string render_synthesis_prompt(std::string_view asr, std::string_view ocr);
std::string render_quality_prompt(std::string_view asr, std::string_view ocr,
                                  std::string_view summary);
std::string render_quality_with_reference_prompt(std::string_view reference,
                                                 std::string_view summary);
std::string render_relevance_prompt(std::string_view query, int label,
                                    std::string_view summary);

}  // namespace admix

#endif  // ADMIX_PROMPTS_HPP_
