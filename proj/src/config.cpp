#include "admix/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "admix/error.hpp"
#include "json.hpp"

namespace admix {
namespace {

using nlohmann::json;

json default_json() {
  const Config d;
  return json{
      {"seed", d.seed},
      {"workdir", d.workdir},
      {"tokenizer", d.tokenizer},
      {"embedding_dim", d.embedding_dim},
      {"reward",
       {{"gamma", d.reward.gamma},
        {"max_n", d.reward.max_n},
        {"judge_mode", std::string(judge_mode_name(d.reward.judge_mode))},
        {"judge_endpoint", d.reward.judge_endpoint},
        {"judge_replay_path", d.reward.judge_replay_path},
        {"judge_retries", d.reward.judge_retries},
        {"judge_timeout_ms", d.reward.judge_timeout_ms},
        {"judge_max_inflight", d.reward.judge_max_inflight},
        {"judge_send_context", d.reward.judge_send_context}}},
      {"grpo",
       {{"rollouts", d.grpo.rollouts},
        {"clip", d.grpo.clip},
        {"kl_beta", d.grpo.kl_beta},
        {"learning_rate", d.grpo.learning_rate},
        {"group_batch", d.grpo.group_batch},
        {"advantage_epsilon", d.grpo.advantage_epsilon},
        {"max_response_len", d.grpo.max_response_len},
        {"max_grad_norm", d.grpo.max_grad_norm}}},
      {"synthetic",
       {{"records", d.synthetic.records},
        {"keyword_vocab", d.synthetic.keyword_vocab},
        {"min_keywords", d.synthetic.min_keywords},
        {"max_keywords", d.synthetic.max_keywords},
        {"noise_repeats", d.synthetic.noise_repeats},
        {"sparse_fraction", d.synthetic.sparse_fraction}}},
      {"curation",
       {{"temperatures", d.curation.temperatures},
        {"generator_mode",
         std::string(generator_mode_name(d.curation.generator_mode))},
        {"generator_endpoint", d.curation.generator_endpoint},
        {"generator_replay_path", d.curation.generator_replay_path},
        {"workers", d.curation.workers},
        {"max_summary_tokens", d.curation.max_summary_tokens},
        {"use_asr", d.curation.mask.use_asr},
        {"use_ocr", d.curation.mask.use_ocr},
        {"use_visual", d.curation.mask.use_visual}}},
      {"serve", {{"host", d.serve.host}, {"port", d.serve.port}}},
  };
}

bool types_compatible(const json& skeleton, const json& value) {
  if (skeleton.is_number() && value.is_number()) return true;
  if (skeleton.is_array() && value.is_array()) return true;
  return skeleton.type() == value.type();
}

void check_against_skeleton(const json& skeleton, const json& value,
                            const std::string& prefix) {
  if (!value.is_object()) {
    throw Error("invalid_config", "expected an object at '" +
                                      (prefix.empty() ? "<root>" : prefix) +
                                      "'");
  }
  for (const auto& [key, sub] : value.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!skeleton.contains(key)) {
      throw Error("invalid_config", "unknown key '" + path + "'");
    }
    const json& skel = skeleton.at(key);
    if (skel.is_object()) {
      check_against_skeleton(skel, sub, path);
    } else if (!types_compatible(skel, sub)) {
      throw Error("invalid_config",
                  "key '" + path + "' expects " + std::string(skel.type_name()) +
                      ", got " + std::string(sub.type_name()));
    }
  }
}

void merge_into(json* base, const json& value) {
  for (const auto& [key, sub] : value.items()) {
    if (sub.is_object() && base->at(key).is_object()) {
      merge_into(&(*base)[key], sub);
    } else {
      (*base)[key] = sub;
    }
  }
}

void apply_override(json* doc, const json& skeleton, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw Error("invalid_config", "override '" + spec +
                                      "' is not of the form key=value");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) {
      throw Error("invalid_config", "override path '" + path + "' is malformed");
    }
    parts.push_back(part);
  }
  if (parts.empty()) {
    throw Error("invalid_config", "override path '" + path + "' is malformed");
  }

  const json* skel = &skeleton;
  json* target = doc;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!skel->is_object() || !skel->contains(parts[i])) {
      throw Error("invalid_config", "unknown key '" + path + "'");
    }
    skel = &skel->at(parts[i]);
    target = &(*target)[parts[i]];
  }
  if (skel->is_object()) {
    throw Error("invalid_config",
                "key '" + path + "' is a section, not a value");
  }
  if (!types_compatible(*skel, value)) {
    throw Error("invalid_config",
                "key '" + path + "' expects " + std::string(skel->type_name()) +
                    ", got " + std::string(value.type_name()));
  }
  *target = value;
}

template <typename T>
T field(const json& doc, const char* section, const char* key) {
  try {
    return doc.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string(section) + "." + key + ": " +
                                      e.what());
  }
}

Config extract(const json& doc) {
  Config cfg;
  try {
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    cfg.workdir = doc.at("workdir").get<std::string>();
    cfg.tokenizer = doc.at("tokenizer").get<std::string>();
    cfg.embedding_dim = doc.at("embedding_dim").get<int>();
  } catch (const json::exception& e) {
    throw Error("invalid_config", e.what());
  }

  cfg.reward.gamma = field<double>(doc, "reward", "gamma");
  cfg.reward.max_n = field<int>(doc, "reward", "max_n");
  cfg.reward.judge_mode =
      judge_mode_from_name(field<std::string>(doc, "reward", "judge_mode"));
  cfg.reward.judge_endpoint =
      field<std::string>(doc, "reward", "judge_endpoint");
  cfg.reward.judge_replay_path =
      field<std::string>(doc, "reward", "judge_replay_path");
  cfg.reward.judge_retries = field<int>(doc, "reward", "judge_retries");
  cfg.reward.judge_timeout_ms = field<int>(doc, "reward", "judge_timeout_ms");
  cfg.reward.judge_max_inflight =
      field<int>(doc, "reward", "judge_max_inflight");
  cfg.reward.judge_send_context =
      field<bool>(doc, "reward", "judge_send_context");

  cfg.grpo.rollouts = field<int>(doc, "grpo", "rollouts");
  cfg.grpo.clip = field<double>(doc, "grpo", "clip");
  cfg.grpo.kl_beta = field<double>(doc, "grpo", "kl_beta");
  cfg.grpo.learning_rate = field<double>(doc, "grpo", "learning_rate");
  cfg.grpo.group_batch = field<int>(doc, "grpo", "group_batch");
  cfg.grpo.advantage_epsilon =
      field<double>(doc, "grpo", "advantage_epsilon");
  cfg.grpo.max_response_len = field<int>(doc, "grpo", "max_response_len");
  cfg.grpo.max_grad_norm = field<double>(doc, "grpo", "max_grad_norm");

  cfg.synthetic.records = field<int>(doc, "synthetic", "records");
  cfg.synthetic.keyword_vocab = field<int>(doc, "synthetic", "keyword_vocab");
  cfg.synthetic.min_keywords = field<int>(doc, "synthetic", "min_keywords");
  cfg.synthetic.max_keywords = field<int>(doc, "synthetic", "max_keywords");
  cfg.synthetic.noise_repeats = field<int>(doc, "synthetic", "noise_repeats");
  cfg.synthetic.sparse_fraction =
      field<double>(doc, "synthetic", "sparse_fraction");

  cfg.curation.temperatures =
      field<std::vector<double>>(doc, "curation", "temperatures");
  cfg.curation.generator_mode = generator_mode_from_name(
      field<std::string>(doc, "curation", "generator_mode"));
  cfg.curation.generator_endpoint =
      field<std::string>(doc, "curation", "generator_endpoint");
  cfg.curation.generator_replay_path =
      field<std::string>(doc, "curation", "generator_replay_path");
  cfg.curation.workers = field<int>(doc, "curation", "workers");
  cfg.curation.max_summary_tokens =
      field<int>(doc, "curation", "max_summary_tokens");
  cfg.curation.mask.use_asr = field<bool>(doc, "curation", "use_asr");
  cfg.curation.mask.use_ocr = field<bool>(doc, "curation", "use_ocr");
  cfg.curation.mask.use_visual = field<bool>(doc, "curation", "use_visual");

  cfg.serve.host = field<std::string>(doc, "serve", "host");
  cfg.serve.port = field<int>(doc, "serve", "port");

  cfg.reward.tokenizer = tokenizer_from_name(cfg.tokenizer);
  cfg.grpo.seed = cfg.seed;
  cfg.synthetic.seed = cfg.seed;
  cfg.curation.judge = cfg.reward;
  return cfg;
}

}  // namespace

void Config::validate() const {
  tokenizer_from_name(tokenizer);
  if (embedding_dim < 8 || embedding_dim > 1 << 20) {
    throw Error("invalid_config", "embedding_dim out of range");
  }
  if (serve.port < 0 || serve.port > 65535) {
    throw Error("invalid_config", "serve.port out of range");
  }
  reward.validate();
  grpo.validate();
  synthetic.validate();
  curation.validate();
}

std::string Config::resolve(const std::string& path) const {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(workdir) / p).string();
}

Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides) {
  const json skeleton = default_json();
  json doc = skeleton;

  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error("invalid_config", "cannot open " + path);
    json user = json::parse(in, nullptr, false);
    if (user.is_discarded()) {
      throw Error("invalid_config", path + " is not valid JSON");
    }
    check_against_skeleton(skeleton, user, "");
    merge_into(&doc, user);
  }
  for (const auto& spec : overrides) apply_override(&doc, skeleton, spec);

  Config cfg = extract(doc);
  cfg.validate();
  return cfg;
}

std::string config_to_json(const Config& cfg) {
  json doc = default_json();
  doc["seed"] = cfg.seed;
  doc["workdir"] = cfg.workdir;
  doc["tokenizer"] = cfg.tokenizer;
  doc["embedding_dim"] = cfg.embedding_dim;

  json& reward = doc["reward"];
  reward["gamma"] = cfg.reward.gamma;
  reward["max_n"] = cfg.reward.max_n;
  reward["judge_mode"] = std::string(judge_mode_name(cfg.reward.judge_mode));
  reward["judge_endpoint"] = cfg.reward.judge_endpoint;
  reward["judge_replay_path"] = cfg.reward.judge_replay_path;
  reward["judge_retries"] = cfg.reward.judge_retries;
  reward["judge_timeout_ms"] = cfg.reward.judge_timeout_ms;
  reward["judge_max_inflight"] = cfg.reward.judge_max_inflight;
  reward["judge_send_context"] = cfg.reward.judge_send_context;

  json& grpo = doc["grpo"];
  grpo["rollouts"] = cfg.grpo.rollouts;
  grpo["clip"] = cfg.grpo.clip;
  grpo["kl_beta"] = cfg.grpo.kl_beta;
  grpo["learning_rate"] = cfg.grpo.learning_rate;
  grpo["group_batch"] = cfg.grpo.group_batch;
  grpo["advantage_epsilon"] = cfg.grpo.advantage_epsilon;
  grpo["max_response_len"] = cfg.grpo.max_response_len;
  grpo["max_grad_norm"] = cfg.grpo.max_grad_norm;

  json& synth = doc["synthetic"];
  synth["records"] = cfg.synthetic.records;
  synth["keyword_vocab"] = cfg.synthetic.keyword_vocab;
  synth["min_keywords"] = cfg.synthetic.min_keywords;
  synth["max_keywords"] = cfg.synthetic.max_keywords;
  synth["noise_repeats"] = cfg.synthetic.noise_repeats;
  synth["sparse_fraction"] = cfg.synthetic.sparse_fraction;

  json& curation = doc["curation"];
  curation["temperatures"] = cfg.curation.temperatures;
  curation["generator_mode"] =
      std::string(generator_mode_name(cfg.curation.generator_mode));
  curation["generator_endpoint"] = cfg.curation.generator_endpoint;
  curation["generator_replay_path"] = cfg.curation.generator_replay_path;
  curation["workers"] = cfg.curation.workers;
  curation["max_summary_tokens"] = cfg.curation.max_summary_tokens;
  curation["use_asr"] = cfg.curation.mask.use_asr;
  curation["use_ocr"] = cfg.curation.mask.use_ocr;
  curation["use_visual"] = cfg.curation.mask.use_visual;

  doc["serve"]["host"] = cfg.serve.host;
  doc["serve"]["port"] = cfg.serve.port;
  return doc.dump(2) + "\n";
}

}  // namespace admix
