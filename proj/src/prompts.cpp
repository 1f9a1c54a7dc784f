#include "admix/prompts.hpp"

#include <array>

#include "admix/hash.hpp"

namespace admix {

namespace {

std::string replace_all(std::string text, std::string_view slot,
                        std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
  return text;
}

}  // namespace

const std::string_view kRefusalText = "Insufficient information for summarization";

const std::string_view kAnnotationRules = R"(Advertisement Video Summary Annotation Rules
For an advertisement video or multi-image, particular emphasis should be placed
on the systematic characterization of the primary ad subject.
Business Rules
- Ad subject name, Brand name
- Key features that constitute the overall ad subject, e.g., style configuration
  for apparel, feature integration for mobile apps, and narrative synopsis for
  movies/novels
- The selling points and pain points related to the ad must be revealed, with
  the objective of identifying precise targeted audience and latent user groups
  for the advertiser
Language Rules
Comprehensive coverage of the key ad elements mentioned above, while the
expression should be concise (within 40 words)
All content must strictly adhere to verifiable facts in the video material and
refrain from introducing imaginary elements not explicitly present
The summary should read smoothly and maintain consistency throughout)";

const std::string_view kSynthesisTemplate = R"(Instruction of Summary Synthesis
You are an expert in search advertising. Your task is to analyze the OCR/ASR
texts derived from an advertisement video and produce a distilled and
representative summary that encapsulates the core message of the corresponding
ad content. The summarization must adhere to the following operational
principles: {annotation_rules}

First, perform OCR/ASR analysis on the advertisement video to detect:
(1) advertising subject presence, and (2) brand name identification. If both
elements are present with adequate contextual information required in the above
rules, proceed accordingly. Otherwise, return the standardized response:
"Insufficient information for summarization".

Input Structure
- ASR: {asr_text}, OCR: {ocr_text}

Output Specification
- contain_subject_or_not: True/False
- subject_name: null if contain_subject_or_not is False
- contain_brand_or_not: True/False
- brand_name: null if contain_brand_or_not is False
- reason: reason to judge if the summarization can be done
- summary: "Insufficient information for summarization" if cannot be summarized)";

const std::string_view kQualityCheckTemplate = R"(Instruction for Summary Quality Verification
You are an expert in search advertising. Given the OCR/ASR texts derived from
an advertisement video and the corresponding video summary generated by an AI
assistant, your task is to conduct a systematic analysis of the summary's
quality. This analysis should methodically evaluate the summary's compliance
with each of the criteria outlined below: {annotation_rules}

After your analysis, you should make a final decision indicating the summary
can pass your quality check or not.

Input Structure
- ASR: {asr_text}, OCR: {ocr_text}, Summary: {summary_text}

Output Structure
- reason: reason to judge, pass: True/False)";

// Quality verification extended with a human-written reference; used when the
// judge scores rollout summaries against the annotated ground truth.
const std::string_view kQualityWithReferenceTemplate = R"(Instruction for Summary Quality Verification
You are an expert in search advertising. Given a video summary generated by an
AI assistant and a human-written summary of the same advertisement video for
reference, your task is to conduct a systematic analysis of the generated
summary's quality. Assess whether the generated summary sufficiently covers all
key points from the reference while complying with each of the criteria
outlined below: {annotation_rules}

After your analysis, output a confidence score between 0 and 1 and a final
pass/fail decision.

Input Structure
- Reference: {reference_text}, Summary: {summary_text}

Output Structure
- score: 0.0-1.0, pass: True/False, reason: reason to judge)";

const std::string_view kRelevanceCheckTemplate = R"(Instruction for Relevance Verification
You are an expert in search advertising. A user query and an advertisement
video summary are given, together with a human relevance label (1 = the ad is
relevant to the query, 0 = it is not). Judge whether the summary adequately
reflects that relevance judgment: a relevant ad's summary should support the
query intent, an irrelevant ad's summary should not.

Input Structure
- Query: {query_text}, Label: {label}, Summary: {summary_text}

Output Structure
- score: 0.0-1.0 agreement confidence, pass: True/False, reason: reason to judge)";

std::string prompt_version(std::string_view template_text) {
  return content_digest({"prompt", template_text}).substr(0, 16);
}

std::string render_synthesis_prompt(std::string_view asr,
                                    std::string_view ocr) {
  std::string text(kSynthesisTemplate);
  text = replace_all(std::move(text), "{annotation_rules}", kAnnotationRules);
  text = replace_all(std::move(text), "{asr_text}", asr);
  text = replace_all(std::move(text), "{ocr_text}", ocr);
  return text;
}

std::string render_quality_prompt(std::string_view asr, std::string_view ocr,
                                  std::string_view summary) {
  std::string text(kQualityCheckTemplate);
  text = replace_all(std::move(text), "{annotation_rules}", kAnnotationRules);
  text = replace_all(std::move(text), "{asr_text}", asr);
  text = replace_all(std::move(text), "{ocr_text}", ocr);
  text = replace_all(std::move(text), "{summary_text}", summary);
  return text;
}

std::string render_quality_with_reference_prompt(std::string_view reference,
                                                 std::string_view summary) {
  std::string text(kQualityWithReferenceTemplate);
  text = replace_all(std::move(text), "{annotation_rules}", kAnnotationRules);
  text = replace_all(std::move(text), "{reference_text}", reference);
  text = replace_all(std::move(text), "{summary_text}", summary);
  return text;
}

std::string render_relevance_prompt(std::string_view query, int label,
                                    std::string_view summary) {
  std::string text(kRelevanceCheckTemplate);
  text = replace_all(std::move(text), "{query_text}", query);
  text = replace_all(std::move(text), "{label}", label == 1 ? "1" : "0");
  text = replace_all(std::move(text), "{summary_text}", summary);
  return text;
}

}  // namespace admix
