#include "admix/curation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "admix/error.hpp"
#include "admix/hash.hpp"
#include "admix/prompts.hpp"
#include "admix/utf8.hpp"
#include "httplib.h"
#include "json.hpp"

namespace admix {

using nlohmann::json;

void AdRecord::validate() const {
  if (ad_id.empty()) throw Error("invalid_record", "empty ad_id");
  if (asr.empty() && ocr.empty() && visual_surrogate.empty()) {
    throw Error("invalid_record", ad_id + ": all modalities empty");
  }
}

AdRecord parse_ad_record(const std::string& json_line) {
  json j = json::parse(json_line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error("parse", "unparseable record");
  }
  AdRecord record;
  if (!j.contains("ad_id") || !j["ad_id"].is_string()) {
    throw Error("parse", "record missing ad_id");
  }
  record.ad_id = j["ad_id"].get<std::string>();
  auto opt_string = [&](const char* key) -> std::string {
    if (!j.contains(key)) return "";
    if (!j[key].is_string()) throw Error("parse", std::string(key) + " not a string");
    return j[key].get<std::string>();
  };
  record.asr = opt_string("asr");
  record.ocr = opt_string("ocr");
  record.visual_surrogate = opt_string("visual_surrogate");
  if (j.contains("metadata")) {
    if (!j["metadata"].is_object()) throw Error("parse", "metadata not an object");
    for (const auto& [key, value] : j["metadata"].items()) {
      if (!value.is_string()) throw Error("parse", "metadata values must be strings");
      record.metadata[key] = value.get<std::string>();
    }
  }
  record.validate();
  return record;
}

std::string ad_record_to_json(const AdRecord& record) {
  json j;
  j["ad_id"] = record.ad_id;
  j["asr"] = record.asr;
  j["ocr"] = record.ocr;
  j["visual_surrogate"] = record.visual_surrogate;
  j["metadata"] = record.metadata;
  return j.dump();
}

RelevanceSample parse_relevance_sample(const std::string& json_line) {
  json j = json::parse(json_line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("query") ||
      !j["query"].is_string() || !j.contains("ad_id") ||
      !j["ad_id"].is_string() || !j.contains("label") ||
      !j["label"].is_number_integer()) {
    throw Error("parse", "unparseable relevance sample");
  }
  RelevanceSample sample;
  sample.query = j["query"].get<std::string>();
  sample.ad_id = j["ad_id"].get<std::string>();
  sample.label = j["label"].get<int>();
  if (sample.label != 0 && sample.label != 1) {
    throw Error("parse", "label must be 0 or 1");
  }
  return sample;
}

AdRecord apply_mask(const AdRecord& record, const ModalityMask& mask) {
  AdRecord out = record;
  if (!mask.use_asr) out.asr.clear();
  if (!mask.use_ocr) out.ocr.clear();
  if (!mask.use_visual) out.visual_surrogate.clear();
  return out;
}

std::string serialize_record_text(const AdRecord& record,
                                  const ModalityMask& mask) {
  std::string out;
  auto section = [&](const char* tag, const std::string& body) {
    if (body.empty()) return;
    if (!out.empty()) out += '\n';
    out += tag;
    out += ": ";
    out += body;
  };
  if (mask.use_asr) section("ASR", record.asr);
  if (mask.use_ocr) section("OCR", record.ocr);
  if (mask.use_visual) section("VISUAL", record.visual_surrogate);
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string find_marker(const std::string& text, const std::string& marker) {
  const auto pos = text.find(marker);
  if (pos == std::string::npos) return "";
  auto end = text.find_first_of("|\n", pos + marker.size());
  if (end == std::string::npos) end = text.size();
  return trim(text.substr(pos + marker.size(), end - pos - marker.size()));
}

bool has_word_content(const std::string& token) {
  for (std::uint32_t cp : utf8_codepoints(token)) {
    const bool ascii_alnum = (cp >= 'a' && cp <= 'z') ||
                             (cp >= 'A' && cp <= 'Z') ||
                             (cp >= '0' && cp <= '9');
    if (ascii_alnum || is_cjk(cp) || cp > 0x7F) return true;
  }
  return false;
}

}  // namespace

std::string salient_text(const AdRecord& record, int max_tokens) {
  if (max_tokens < 1) return "";
  std::vector<std::string> picked;
  std::set<std::string> seen;
  auto take = [&](const std::string& token) {
    if (static_cast<int>(picked.size()) >= max_tokens) return;
    if (token == "Brand" || token == "Subject") return;
    if (!has_word_content(token)) return;
    if (!seen.insert(token).second) return;
    picked.push_back(token);
  };
  auto take_text = [&](const std::string& text) {
    for (const auto& tok : tokenize(text, Tokenizer::kUnicodeWord).tokens) {
      take(tok);
    }
  };

  for (const std::string& field : {record.ocr, record.asr}) {
    take_text(find_marker(field, "Brand:"));
  }
  for (const std::string& field : {record.ocr, record.asr}) {
    take_text(find_marker(field, "Subject:"));
  }
  take_text(record.visual_surrogate);
  take_text(record.asr);
  take_text(record.ocr);

  std::string out;
  for (const auto& tok : picked) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

std::string TemplateGenerator::generate(const AdRecord& record,
                                        double temperature) {
  const int budget =
      std::max(1L, std::lround(6.0 + 6.0 * std::max(0.0, temperature)));
  const std::string text = salient_text(record, budget);
  return text.empty() ? std::string(kRefusalText) : text;
}

namespace {

struct UrlParts {
  std::string base;
  std::string path;
};

UrlParts split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto path_start = url.find('/', host_start);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.base = url;
    parts.path = "/";
  } else {
    parts.base = url.substr(0, path_start);
    parts.path = url.substr(path_start);
  }
  return parts;
}

}  // namespace

RemoteGenerator::RemoteGenerator(std::string endpoint, int retries,
                                 int timeout_ms)
    : endpoint_(std::move(endpoint)), retries_(retries),
      timeout_ms_(timeout_ms) {
  if (endpoint_.empty()) {
    throw Error("invalid_config", "remote generator requires an endpoint");
  }
}

std::string RemoteGenerator::generate(const AdRecord& record,
                                      double temperature) {
  json payload;
  payload["prompt_version"] = prompt_version(kSynthesisTemplate);
  payload["prompt"] = render_synthesis_prompt(record.asr, record.ocr);
  payload["temperature"] = temperature;
  const std::string body = payload.dump();

  const UrlParts url = split_url(endpoint_);
  httplib::Client client(url.base);
  client.set_connection_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);
  client.set_read_timeout(timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000);

  std::string last_error = "no attempt";
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    auto res = client.Post(url.path, body, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error("generator_protocol",
                  "unexpected status " + std::to_string(res->status));
    }
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("summary") ||
        !parsed["summary"].is_string()) {
      throw Error("generator_protocol", "response missing summary");
    }
    return parsed["summary"].get<std::string>();
  }
  throw Error("generator_unavailable", endpoint_ + " (" + last_error + ")");
}

std::string ReplayGenerator::key_for(const std::string& ad_id,
                                     double temperature) {
  char temp[32];
  std::snprintf(temp, sizeof(temp), "%.6g", temperature);
  return content_digest(
      {ad_id, temp, prompt_version(kSynthesisTemplate)});
}

ReplayGenerator::ReplayGenerator(const std::string& fixture_path) {
  std::ifstream in(fixture_path);
  if (!in) {
    throw Error("invalid_config",
                "cannot open generator fixture: " + fixture_path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("key") || !j.contains("summary")) {
      throw Error("generator_protocol",
                  "bad fixture line " + std::to_string(line_no));
    }
    fixture_[j["key"].get<std::string>()] = j["summary"].get<std::string>();
  }
}

std::string ReplayGenerator::generate(const AdRecord& record,
                                      double temperature) {
  const std::string key = key_for(record.ad_id, temperature);
  auto it = fixture_.find(key);
  if (it == fixture_.end()) {
    throw Error("generator_unavailable", "no fixture candidate for " + key);
  }
  return it->second;
}

std::vector<CandidateSummary> synthesize_candidates(
    const AdRecord& record, Generator& generator,
    const std::vector<double>& temperatures) {
  std::vector<CandidateSummary> out;
  out.reserve(temperatures.size());
  for (double t : temperatures) {
    CandidateSummary candidate;
    candidate.temperature = t;
    try {
      candidate.text = generator.generate(record, t);
    } catch (const Error& e) {
      candidate.error = e.code();
    }
    out.push_back(std::move(candidate));
  }
  return out;
}

std::string quality_prompt_version() {
  return prompt_version(kQualityCheckTemplate);
}

std::string relevance_prompt_version(int label) {
  return prompt_version(kRelevanceCheckTemplate) + ":l" +
         std::to_string(label);
}

void linguistic_filter(std::vector<CandidateSummary>* candidates,
                       const AdRecord& record, JudgeClient& judge,
                       Tokenizer tokenizer, int max_tokens) {
  const std::string reference = salient_text(record, max_tokens);
  for (CandidateSummary& candidate : *candidates) {
    JudgeVerdict verdict;
    verdict.pass = false;
    if (!candidate.error.empty()) {
      verdict.reason = "generator_error";
    } else if (candidate.text.empty()) {
      verdict.reason = "empty";
    } else if (candidate.text == kRefusalText) {
      verdict.reason = "refusal";
    } else if (tokenize(candidate.text, tokenizer).tokens.size() >
               static_cast<std::size_t>(max_tokens)) {
      verdict.reason = "length";
    } else {
      JudgeRequest req;
      req.prompt_ver = quality_prompt_version();
      req.reference = reference;
      req.candidate = candidate.text;
      req.asr = record.asr;
      req.ocr = record.ocr;
      verdict = judge.judge(req);
    }
    candidate.linguistic = verdict;
  }
}

double relevance_confidence(const std::string& candidate_text,
                            const std::vector<RelevanceSample>& samples,
                            JudgeClient& judge) {
  if (samples.empty()) return 0.5;
  double total = 0.0;
  for (const RelevanceSample& sample : samples) {
    JudgeRequest req;
    req.prompt_ver = relevance_prompt_version(sample.label);
    req.reference = sample.query;
    req.candidate = candidate_text;
    req.relevance_label = sample.label;
    total += judge.judge(req).score;
  }
  return total / static_cast<double>(samples.size());
}

std::string_view curation_status_name(CurationStatus status) {
  switch (status) {
    case CurationStatus::kAccepted:
      return "accepted";
    case CurationStatus::kInsufficient:
      return "insufficient";
    case CurationStatus::kAllRejected:
      return "all_rejected";
  }
  return "all_rejected";
}

CurationOutcome select_best(const AdRecord& record,
                            const std::vector<CandidateSummary>& candidates) {
  CurationOutcome outcome;
  outcome.ad_id = record.ad_id;
  outcome.audit = candidates;

  if (candidates.empty()) {
    outcome.status = CurationStatus::kInsufficient;
    return outcome;
  }
  std::size_t refusals = 0;
  std::size_t errors = 0;
  for (const CandidateSummary& c : candidates) {
    if (!c.error.empty()) ++errors;
    else if (c.text == kRefusalText) ++refusals;
  }
  if (refusals >= 1 && refusals + errors == candidates.size()) {
    outcome.status = CurationStatus::kInsufficient;
    return outcome;
  }

  const CandidateSummary* best = nullptr;
  auto confidence = [](const CandidateSummary& c) {
    return c.relevance_confidence.value_or(0.5);
  };
  for (const CandidateSummary& c : candidates) {
    if (!c.linguistic || !c.linguistic->pass) continue;
    if (best == nullptr) {
      best = &c;
      continue;
    }
    const double cc = confidence(c);
    const double cb = confidence(*best);
    if (cc > cb ||
        (cc == cb && (c.temperature < best->temperature ||
                      (c.temperature == best->temperature &&
                       c.text < best->text)))) {
      best = &c;
    }
  }
  if (best == nullptr) {
    outcome.status = CurationStatus::kAllRejected;
    return outcome;
  }
  outcome.status = CurationStatus::kAccepted;
  outcome.summary = best->text;
  return outcome;
}

std::string_view generator_mode_name(GeneratorMode mode) {
  switch (mode) {
    case GeneratorMode::kTemplate:
      return "template";
    case GeneratorMode::kRemote:
      return "remote";
    case GeneratorMode::kReplay:
      return "replay";
  }
  return "template";
}

GeneratorMode generator_mode_from_name(std::string_view name) {
  if (name == "template") return GeneratorMode::kTemplate;
  if (name == "remote") return GeneratorMode::kRemote;
  if (name == "replay") return GeneratorMode::kReplay;
  throw Error("invalid_config", "unknown generator_mode: " + std::string(name));
}

void CurationConfig::validate() const {
  judge.validate();
  if (workers < 1) throw Error("invalid_config", "workers must be >= 1");
  if (max_summary_tokens < 1) {
    throw Error("invalid_config", "max_summary_tokens must be >= 1");
  }
  if (generator_mode == GeneratorMode::kRemote && generator_endpoint.empty()) {
    throw Error("invalid_config", "remote generator requires an endpoint");
  }
  if (generator_mode == GeneratorMode::kReplay &&
      generator_replay_path.empty()) {
    throw Error("invalid_config", "replay generator requires a fixture path");
  }
}

std::unique_ptr<Generator> make_generator(const CurationConfig& cfg) {
  switch (cfg.generator_mode) {
    case GeneratorMode::kTemplate:
      return std::make_unique<TemplateGenerator>();
    case GeneratorMode::kRemote:
      return std::make_unique<RemoteGenerator>(cfg.generator_endpoint,
                                               cfg.judge.judge_retries,
                                               cfg.judge.judge_timeout_ms);
    case GeneratorMode::kReplay:
      return std::make_unique<ReplayGenerator>(cfg.generator_replay_path);
  }
  return std::make_unique<TemplateGenerator>();
}

std::string curation_report_to_json(const CurationReport& report) {
  json j;
  j["records"] = report.records;
  j["malformed"] = report.malformed;
  j["accepted"] = report.accepted;
  j["insufficient"] = report.insufficient;
  j["all_rejected"] = report.all_rejected;
  j["confidence_histogram"] = report.confidence_histogram;
  j["linguistic_histogram"] = report.linguistic_histogram;
  return j.dump(2);
}

namespace {

int histogram_bin(double score) {
  const int bin = static_cast<int>(score * 10.0);
  return std::clamp(bin, 0, 9);
}

}  // namespace

CurationReport build_dataset(const std::string& records_path,
                             const std::string& relevance_path,
                             const std::string& out_dir,
                             const CurationConfig& cfg) {
  cfg.validate();
  CurationReport report;

  std::vector<AdRecord> records;
  {
    std::ifstream in(records_path);
    if (!in) throw Error("store_io", "cannot read " + records_path);
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        AdRecord record = parse_ad_record(line);
        if (!ids.insert(record.ad_id).second) {
          throw Error("parse", "duplicate ad_id " + record.ad_id);
        }
        records.push_back(std::move(record));
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: %s line %zu: %s\n",
                     records_path.c_str(), line_no, e.what());
        ++report.malformed;
      }
    }
  }

  std::map<std::string, std::vector<RelevanceSample>> relevance;
  if (!relevance_path.empty()) {
    std::ifstream in(relevance_path);
    if (!in) throw Error("store_io", "cannot read " + relevance_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        RelevanceSample sample = parse_relevance_sample(line);
        relevance[sample.ad_id].push_back(std::move(sample));
      } catch (const Error& e) {
        std::fprintf(stderr, "warning: %s line %zu: %s\n",
                     relevance_path.c_str(), line_no, e.what());
        ++report.malformed;
      }
    }
  }

  report.records = static_cast<int>(records.size());

  std::unique_ptr<Generator> generator = make_generator(cfg);
  JudgeClient judge(cfg.judge);
  // Recording interleaves across threads; keep fixture generation ordered.
  int workers = cfg.workers;
  if (!cfg.judge_record_path.empty()) {
    judge.record_to(cfg.judge_record_path);
    workers = 1;
  }
  workers = std::max(
      1, std::min(workers, static_cast<int>(records.empty() ? 1
                                                            : records.size())));

  std::vector<CurationOutcome> outcomes(records.size());
  std::atomic<std::size_t> next{0};
  std::vector<std::string> worker_errors(static_cast<std::size_t>(workers));
  auto work = [&](int worker_idx) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      try {
        const AdRecord masked = apply_mask(records[i], cfg.mask);
        std::vector<CandidateSummary> candidates =
            synthesize_candidates(masked, *generator, cfg.temperatures);
        linguistic_filter(&candidates, masked, judge, cfg.judge.tokenizer,
                          cfg.max_summary_tokens);
        auto samples = relevance.find(masked.ad_id);
        for (CandidateSummary& c : candidates) {
          if (!c.linguistic || !c.linguistic->pass) continue;
          c.relevance_confidence = relevance_confidence(
              c.text,
              samples == relevance.end() ? std::vector<RelevanceSample>{}
                                         : samples->second,
              judge);
        }
        outcomes[i] = select_best(masked, candidates);
      } catch (const Error& e) {
        worker_errors[static_cast<std::size_t>(worker_idx)] = e.what();
        return;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const std::string& err : worker_errors) {
    if (!err.empty()) throw Error("curation_failed", err);
  }

  std::sort(outcomes.begin(), outcomes.end(),
            [](const CurationOutcome& a, const CurationOutcome& b) {
              return a.ad_id < b.ad_id;
            });

  std::map<std::string, const AdRecord*> by_id;
  for (const AdRecord& r : records) by_id[r.ad_id] = &r;

  std::filesystem::create_directories(out_dir);
  const std::string sft_path = out_dir + "/sft.jsonl";
  std::ofstream sft(sft_path, std::ios::out | std::ios::trunc);
  if (!sft) throw Error("store_io", "cannot write " + sft_path);

  for (const CurationOutcome& outcome : outcomes) {
    switch (outcome.status) {
      case CurationStatus::kAccepted:
        ++report.accepted;
        break;
      case CurationStatus::kInsufficient:
        ++report.insufficient;
        break;
      case CurationStatus::kAllRejected:
        ++report.all_rejected;
        break;
    }
    for (const CandidateSummary& c : outcome.audit) {
      if (c.linguistic && c.error.empty() && !c.text.empty()) {
        ++report.linguistic_histogram[histogram_bin(c.linguistic->score)];
      }
      if (c.relevance_confidence) {
        ++report.confidence_histogram[histogram_bin(*c.relevance_confidence)];
      }
    }
    if (outcome.status == CurationStatus::kAccepted) {
      json rec;
      rec["prompt"] = serialize_record_text(
          apply_mask(*by_id.at(outcome.ad_id), cfg.mask));
      rec["response"] = *outcome.summary;
      sft << rec.dump() << "\n";
    }
  }
  if (!sft.flush()) throw Error("store_io", "short write: " + sft_path);

  const std::string report_path = out_dir + "/report.json";
  std::ofstream report_out(report_path, std::ios::out | std::ios::trunc);
  if (!report_out) throw Error("store_io", "cannot write " + report_path);
  report_out << curation_report_to_json(report) << "\n";
  if (!report_out.flush()) throw Error("store_io", "short write: " + report_path);
  return report;
}

}  // namespace admix
