#include "admix/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "admix/config.hpp"
#include "admix/curation.hpp"
#include "admix/error.hpp"
#include "admix/grpo.hpp"
#include "admix/reward.hpp"
#include "admix/serving.hpp"
#include "admix/synthetic.hpp"
#include "admix/textmetrics.hpp"
#include "admix/utf8.hpp"
#include "json.hpp"

namespace admix {
namespace {

using nlohmann::json;

// Usage-level failure (exit 2), as opposed to Error (exit 1) unless the
// Error code is invalid_config.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("store_io", "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

// A corpus line is either a bare JSON string or an object with "text".
std::string parse_text_line(const std::string& line, const std::string& path) {
  json doc = json::parse(line, nullptr, false);
  if (doc.is_discarded()) {
    throw Error("invalid_record", path + ": line is not valid JSON");
  }
  if (doc.is_string()) return doc.get<std::string>();
  if (doc.is_object() && doc.contains("text") && doc["text"].is_string()) {
    return doc["text"].get<std::string>();
  }
  throw Error("invalid_record",
              path + ": expected a JSON string or {\"text\": ...}");
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("store_io", "cannot write " + path);
  out << content;
  if (!out) throw Error("store_io", "short write to " + path);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void print_table(const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size() && c < widths.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += cells[c];
      out.append(widths[c] - cells[c].size(), ' ');
    }
    std::cout << out << "\n";
  };
  line(header);
  std::vector<std::string> rule;
  for (auto w : widths) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& row : rows) line(row);
}

RewardFn make_mixed_reward_fn(const RewardConfig& reward_cfg,
                              std::shared_ptr<JudgeClient> judge) {
  return [reward_cfg, judge](const std::string& response,
                             const std::string& reference) {
    return mixed_reward(response, reference, reward_cfg, *judge).total;
  };
}

// ---------------------------------------------------------------- metrics

int cmd_metrics(const Config& cfg, const std::string& hyp_path,
                const std::string& ref_path, const std::string& out_path) {
  const auto hyp_lines = read_lines(cfg.resolve(hyp_path));
  const auto ref_lines = read_lines(cfg.resolve(ref_path));
  if (hyp_lines.size() != ref_lines.size()) {
    throw UsageError("metrics: " + hyp_path + " has " +
                     std::to_string(hyp_lines.size()) + " items but " +
                     ref_path + " has " + std::to_string(ref_lines.size()));
  }

  const Tokenizer tok = tokenizer_from_name(cfg.tokenizer);
  std::vector<TokenSeq> hyps, refs;
  for (std::size_t i = 0; i < hyp_lines.size(); ++i) {
    hyps.push_back(tokenize(parse_text_line(hyp_lines[i], hyp_path), tok));
    refs.push_back(tokenize(parse_text_line(ref_lines[i], ref_path), tok));
  }

  std::vector<double> cider_items;
  bool has_cider = hyps.size() >= 2;
  double cider_mean = 0.0;
  if (has_cider) {
    std::vector<std::vector<TokenSeq>> ref_sets;
    for (const auto& r : refs) ref_sets.push_back({r});
    const CiderResult c = cider(hyps, ref_sets, cfg.reward.max_n);
    cider_items = c.per_item;
    cider_mean = c.mean;
  }

  json items = json::array();
  json corpus = json::object();
  std::map<std::string, double> sums;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const double b = bleu(hyps[i], {refs[i]}, cfg.reward.max_n);
    const RougeScore r1 = rouge_n(hyps[i], refs[i], 1);
    const RougeScore r2 = rouge_n(hyps[i], refs[i], 2);
    const RougeScore rl = rouge_l(hyps[i], refs[i]);
    const double sem = fallback_token_f1(detokenize(refs[i]),
                                         detokenize(hyps[i]));
    json item{{"index", i},
              {"bleu", b},
              {"rouge1_f1", r1.f1},
              {"rouge2_f1", r2.f1},
              {"rougeL_f1", rl.f1},
              {"reward_sem", sem}};
    if (has_cider) item["cider"] = cider_items[i];
    items.push_back(item);
    sums["bleu"] += b;
    sums["rouge1_f1"] += r1.f1;
    sums["rouge2_f1"] += r2.f1;
    sums["rougeL_f1"] += rl.f1;
    sums["reward_sem"] += sem;
  }
  const double n = hyps.empty() ? 1.0 : static_cast<double>(hyps.size());
  for (const auto& [key, sum] : sums) corpus[key] = sum / n;
  if (has_cider) corpus["cider"] = cider_mean;

  json report{{"count", hyps.size()}, {"corpus", corpus}, {"items", items}};

  std::vector<std::vector<std::string>> rows;
  for (const auto& [key, sum] : sums) {
    rows.push_back({key, fmt(sum / n)});
  }
  if (has_cider) rows.push_back({"cider", fmt(cider_mean)});
  print_table({"metric", "corpus_mean"}, rows);
  std::cout << "items: " << hyps.size() << "\n";

  if (!out_path.empty()) {
    write_text_file(cfg.resolve(out_path), report.dump(2) + "\n");
  } else {
    std::cout << report["corpus"].dump() << "\n";
  }
  return 0;
}

// ------------------------------------------------------------- grpo-train

int cmd_grpo_train(const Config& cfg, int steps, const std::string& out_dir) {
  const std::string dir = cfg.resolve(out_dir);
  std::filesystem::create_directories(dir);

  const RlTask task = make_rl_task(cfg.synthetic);
  TabularPolicy policy(task.policy_vocab, 1);

  RewardConfig reward_cfg = cfg.reward;
  reward_cfg.tokenizer = Tokenizer::kWhitespace;
  auto judge = std::make_shared<JudgeClient>(reward_cfg);

  TrainIo io;
  io.run_log_path = dir + "/run.jsonl";
  io.checkpoint_path = dir + "/checkpoint.json";
  const TrainResult result = train(policy, task.examples, cfg.grpo,
                                   make_mixed_reward_fn(reward_cfg, judge),
                                   steps, io);

  std::ostringstream csv;
  csv << "step,mean_reward,mean_len,clip_frac,mean_kl\n";
  for (const auto& s : result.steps) {
    csv << s.step << "," << json(s.mean_reward).dump() << ","
        << json(s.mean_len).dump() << "," << json(s.clip_fraction).dump()
        << "," << json(s.mean_kl).dump() << "\n";
  }
  write_text_file(dir + "/curve.csv", csv.str());

  if (!result.steps.empty()) {
    const auto& first = result.steps.front();
    const auto& last = result.steps.back();
    std::cout << "steps: " << result.steps.size() << "\n"
              << "mean_reward: " << fmt(first.mean_reward) << " -> "
              << fmt(last.mean_reward) << "\n"
              << "mean_kl(final): " << fmt(last.mean_kl) << "\n";
  } else {
    std::cout << "steps: 0\n";
  }
  std::cout << "run log: " << io.run_log_path << "\n"
            << "checkpoint: " << io.checkpoint_path << "\n";
  return 0;
}

// ----------------------------------------------------------------- curate

int cmd_curate(const Config& cfg, const std::string& records,
               const std::string& relevance, const std::string& out_dir,
               const std::string& judge_mode, const std::string& generator,
               const std::string& generator_replay,
               const std::string& record_judge) {
  CurationConfig cur = cfg.curation;
  if (!judge_mode.empty()) cur.judge.judge_mode = judge_mode_from_name(judge_mode);
  if (!generator.empty()) cur.generator_mode = generator_mode_from_name(generator);
  if (!generator_replay.empty()) {
    cur.generator_replay_path = cfg.resolve(generator_replay);
  }
  if (!record_judge.empty()) cur.judge_record_path = cfg.resolve(record_judge);
  if (!cur.judge.judge_replay_path.empty()) {
    cur.judge.judge_replay_path = cfg.resolve(cur.judge.judge_replay_path);
  }
  cur.validate();

  const CurationReport report = build_dataset(
      cfg.resolve(records), cfg.resolve(relevance), cfg.resolve(out_dir), cur);

  print_table({"outcome", "count"},
              {{"records", std::to_string(report.records)},
               {"malformed", std::to_string(report.malformed)},
               {"accepted", std::to_string(report.accepted)},
               {"insufficient", std::to_string(report.insufficient)},
               {"all_rejected", std::to_string(report.all_rejected)}});
  std::cout << "wrote " << cfg.resolve(out_dir) << "/sft.jsonl and report.json\n";
  return 0;
}

// ------------------------------------------------------------------ index

std::vector<std::pair<std::string, std::string>> load_doc_file(
    const std::string& path) {
  std::vector<std::pair<std::string, std::string>> docs;
  for (const auto& line : read_lines(path)) {
    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() || !doc.contains("id") ||
        !doc.contains("text")) {
      throw Error("invalid_record", path + ": expected {\"id\",\"text\"} lines");
    }
    docs.emplace_back(doc["id"].get<std::string>(),
                      doc["text"].get<std::string>());
  }
  return docs;
}

int cmd_index_build(const Config& cfg, const std::string& docs_path,
                    const std::string& snapshot_path,
                    const std::string& out_path) {
  const HashedNgramEmbedder embedder(cfg.embedding_dim);
  RetrievalIndex index;
  if (!snapshot_path.empty()) {
    const SummaryStore store =
        SummaryStore::load_snapshot(cfg.resolve(snapshot_path));
    index = RetrievalIndex::build(store, embedder);
  } else {
    index = RetrievalIndex::build(load_doc_file(cfg.resolve(docs_path)),
                                  embedder);
  }
  index.save(cfg.resolve(out_path));
  std::cout << "indexed " << index.size() << " documents (dim " << index.dim()
            << ") -> " << cfg.resolve(out_path) << "\n";
  return 0;
}

int cmd_index_query(const Config& cfg, const std::string& index_path,
                    const std::string& query, int k) {
  const HashedNgramEmbedder embedder(cfg.embedding_dim);
  const RetrievalIndex index = RetrievalIndex::load(cfg.resolve(index_path));
  const auto hits = index.query_topk(query, k, embedder);
  json out = json::array();
  for (const auto& h : hits) {
    out.push_back({{"ad_id", h.ad_id}, {"score", h.score}});
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------- eval

int cmd_eval_retrieval(const Config& cfg, const std::string& run_path,
                       const std::string& qrels_path, std::vector<int> ks,
                       const std::string& out_path) {
  EvalRun run;
  load_run_file(cfg.resolve(run_path), &run);
  load_qrels_file(cfg.resolve(qrels_path), &run);
  if (ks.empty()) ks = {10, 100};
  std::sort(ks.begin(), ks.end());

  json report{{"queries", run.rankings.size()}};
  std::vector<std::vector<std::string>> rows;
  for (int k : ks) {
    int skipped = 0;
    const double h = hit_at_k(run, k, &skipped);
    report["hit_at_" + std::to_string(k)] = h;
    report["skipped_queries"] = skipped;
    rows.push_back({"hit@" + std::to_string(k), fmt(h)});
  }
  print_table({"metric", "value"}, rows);
  if (!out_path.empty()) {
    write_text_file(cfg.resolve(out_path), report.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval_relevance(const Config& cfg, const std::string& run_path,
                       const std::string& qrels_path, double precision,
                       const std::string& out_path) {
  EvalRun run;
  load_run_file(cfg.resolve(run_path), &run);
  load_qrels_file(cfg.resolve(qrels_path), &run);

  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& [qid, ranking] : run.rankings) {
    const auto qit = run.qrels.find(qid);
    if (qit == run.qrels.end()) continue;
    for (const auto& s : ranking) {
      const auto lit = qit->second.find(s.ad_id);
      if (lit == qit->second.end()) continue;
      scores.push_back(s.score);
      labels.push_back(lit->second);
    }
  }
  if (scores.empty()) {
    throw Error("invalid_record", "no (run, qrels) overlap to score");
  }
  const double auc = roc_auc(scores, labels);
  const double recall = recall_at_precision(scores, labels, precision);
  json report{{"pairs", scores.size()},
              {"roc_auc", auc},
              {"precision_target", precision},
              {"recall_at_precision", recall}};
  print_table({"metric", "value"},
              {{"roc_auc", fmt(auc)},
               {"recall@p=" + fmt(precision), fmt(recall)}});
  if (!out_path.empty()) {
    write_text_file(cfg.resolve(out_path), report.dump(2) + "\n");
  }
  return 0;
}

int cmd_eval_diversity(const Config& cfg, const std::string& index_path,
                       const std::string& queries_path, int k, int variants,
                       const std::string& out_path) {
  const HashedNgramEmbedder embedder(cfg.embedding_dim);
  const RetrievalIndex index = RetrievalIndex::load(cfg.resolve(index_path));
  std::vector<std::string> queries;
  for (const auto& line : read_lines(cfg.resolve(queries_path))) {
    queries.push_back(parse_text_line(line, queries_path));
  }
  const double div = diversity_ratio(index, queries, k, embedder);
  const auto dups = make_near_duplicate_queries(queries, variants);
  const double gran = granularity_ratio(index, dups, k, embedder);
  json report{{"queries", queries.size()},
              {"k", k},
              {"diversity_ratio", div},
              {"near_duplicate_queries", dups.size()},
              {"granularity_ratio", gran}};
  print_table({"metric", "value"},
              {{"diversity_ratio", fmt(div)},
               {"granularity_ratio", fmt(gran)}});
  if (!out_path.empty()) {
    write_text_file(cfg.resolve(out_path), report.dump(2) + "\n");
  }
  return 0;
}

// ----------------------------------------------------------------- ablate

struct MaskSpec {
  std::string name;
  ModalityMask mask;
};

json evaluate_masked_records(const Config& cfg,
                             const SyntheticData& data,
                             const ModalityMask& mask) {
  TemplateGenerator generator;
  RewardConfig judge_cfg = cfg.reward;
  judge_cfg.judge_mode = JudgeMode::kFallback;
  JudgeClient judge(judge_cfg);
  const Tokenizer tok = tokenizer_from_name(cfg.tokenizer);

  struct Split {
    std::vector<TokenSeq> hyps;
    std::vector<std::vector<TokenSeq>> refs;
    double sem_sum = 0.0;
    int count = 0;
  };
  std::map<std::string, Split> splits;  // "all", "rich", "sparse"

  for (const auto& record : data.records) {
    const auto ref_it = data.references.find(record.ad_id);
    if (ref_it == data.references.end()) continue;
    const AdRecord masked = apply_mask(record, mask);

    auto candidates = synthesize_candidates(masked, generator,
                                            cfg.curation.temperatures);
    linguistic_filter(&candidates, masked, judge, tok,
                      cfg.curation.max_summary_tokens);
    const CurationOutcome outcome = select_best(masked, candidates);
    const std::string summary =
        outcome.summary.has_value() ? *outcome.summary : "";

    const double sem = fallback_token_f1(ref_it->second, summary);
    const bool sparse =
        utf8_codepoints(record.asr).size() + utf8_codepoints(record.ocr).size() <
        10;
    for (const char* key : {"all", sparse ? "sparse" : "rich"}) {
      Split& s = splits[key];
      s.hyps.push_back(tokenize(summary, tok));
      s.refs.push_back({tokenize(ref_it->second, tok)});
      s.sem_sum += sem;
      s.count += 1;
    }
  }

  json out = json::object();
  for (auto& [name, split] : splits) {
    if (split.count == 0) continue;
    double bleu_sum = 0.0, rougel_sum = 0.0;
    for (std::size_t i = 0; i < split.hyps.size(); ++i) {
      bleu_sum += bleu(split.hyps[i], split.refs[i], cfg.reward.max_n);
      rougel_sum += rouge_l(split.hyps[i], split.refs[i][0]).f1;
    }
    json entry{{"count", split.count},
               {"bleu", bleu_sum / split.count},
               {"rougeL_f1", rougel_sum / split.count},
               {"reward_sem", split.sem_sum / split.count}};
    if (split.hyps.size() >= 2) {
      entry["cider"] = cider(split.hyps, split.refs, cfg.reward.max_n).mean;
    }
    out[name] = entry;
  }
  return out;
}

json run_reward_variant(const Config& cfg, const std::string& variant,
                        int steps) {
  const RlTask task = make_rl_task(cfg.synthetic);
  TabularPolicy policy(task.policy_vocab, 1);

  RewardConfig reward_cfg = cfg.reward;
  reward_cfg.judge_mode = JudgeMode::kFallback;
  reward_cfg.tokenizer = Tokenizer::kWhitespace;
  auto judge = std::make_shared<JudgeClient>(reward_cfg);

  RewardFn fn;
  if (variant == "lex") {
    fn = [reward_cfg](const std::string& response, const std::string& ref) {
      return reward_lex(tokenize(response, reward_cfg.tokenizer),
                        tokenize(ref, reward_cfg.tokenizer), reward_cfg);
    };
  } else if (variant == "sem") {
    fn = [reward_cfg, judge](const std::string& response,
                             const std::string& ref) {
      const RewardBreakdown b =
          mixed_reward(response, ref, reward_cfg, *judge);
      return b.penalty * b.semantic;
    };
  } else {
    fn = make_mixed_reward_fn(reward_cfg, judge);
  }

  train(policy, task.examples, cfg.grpo, fn, steps, {});

  // Shared measurement: mean mixed reward of greedy-ish samples under a
  // fixed evaluation seed, identical across variants.
  const RewardFn mixed_fn = make_mixed_reward_fn(reward_cfg, judge);
  double total = 0.0;
  for (std::size_t i = 0; i < task.examples.size(); ++i) {
    const auto sample = policy.sample(task.examples[i].prompt,
                                      cfg.grpo.max_response_len,
                                      cfg.seed ^ (0x51edULL + i));
    total += mixed_fn(response_text(sample), task.examples[i].reference);
  }
  const double mean =
      task.examples.empty() ? 0.0 : total / task.examples.size();
  return json{{"variant", variant},
              {"steps", steps},
              {"final_mixed_reward", mean}};
}

int cmd_ablate(const Config& cfg, int steps, const std::string& out_path) {
  const SyntheticData data = make_synthetic_records(cfg.synthetic);

  const std::vector<MaskSpec> masks = {
      {"multimodal", {true, true, true}},
      {"ocr_asr_only", {true, true, false}},
      {"visual_only", {false, false, true}},
  };

  json modality = json::object();
  std::vector<std::vector<std::string>> modality_rows;
  for (const auto& spec : masks) {
    const json result = evaluate_masked_records(cfg, data, spec.mask);
    modality[spec.name] = result;
    const json& all = result.value("all", json::object());
    modality_rows.push_back(
        {spec.name, fmt(all.value("bleu", 0.0)),
         fmt(all.value("rougeL_f1", 0.0)), fmt(all.value("reward_sem", 0.0)),
         all.contains("cider") ? fmt(all["cider"].get<double>()) : "-"});
  }

  json rewards = json::array();
  std::vector<std::vector<std::string>> reward_rows;
  for (const std::string variant : {"lex", "sem", "mixed"}) {
    const json r = run_reward_variant(cfg, variant, steps);
    rewards.push_back(r);
    reward_rows.push_back(
        {variant, fmt(r["final_mixed_reward"].get<double>())});
  }

  const json& multimodal = modality["multimodal"];
  json density = json::object();
  for (const std::string split : {"rich", "sparse"}) {
    if (multimodal.contains(split)) density[split] = multimodal[split];
  }

  json report{{"modality", modality},
              {"reward_variants", rewards},
              {"density", density},
              {"steps", steps},
              {"seed", cfg.seed}};

  std::cout << "modality ablation (template pipeline, " << data.records.size()
            << " records):\n";
  print_table({"input", "bleu", "rougeL_f1", "reward_sem", "cider"},
              modality_rows);
  std::cout << "\nreward ablation (" << steps << " training steps):\n";
  print_table({"reward", "final_mixed_reward"}, reward_rows);
  std::cout << "\ndensity split (multimodal):\n";
  std::vector<std::vector<std::string>> density_rows;
  for (const auto& [name, entry] : density.items()) {
    density_rows.push_back({name, std::to_string(entry["count"].get<int>()),
                            fmt(entry["bleu"].get<double>()),
                            fmt(entry["reward_sem"].get<double>())});
  }
  print_table({"split", "count", "bleu", "reward_sem"}, density_rows);

  if (!out_path.empty()) {
    write_text_file(cfg.resolve(out_path), report.dump(2) + "\n");
  }
  return 0;
}

// ------------------------------------------------------------------ serve

int cmd_serve(const Config& cfg, const std::string& snapshot_path,
              const std::string& docs_path) {
  SummaryStore store;
  if (!snapshot_path.empty()) {
    store = SummaryStore::load_snapshot(cfg.resolve(snapshot_path));
  } else if (!docs_path.empty()) {
    for (const auto& [id, text] : load_doc_file(cfg.resolve(docs_path))) {
      store.put(id, text);
    }
  } else {
    throw UsageError("serve: need --snapshot or --docs");
  }
  const HashedNgramEmbedder embedder(cfg.embedding_dim);
  const RetrievalIndex index = RetrievalIndex::build(store, embedder);
  SummaryService service(store, index, embedder);
  const int port = service.start(cfg.serve.host, cfg.serve.port);
  std::cout << "serving " << store.size() << " summaries on " << cfg.serve.host
            << ":" << port << "\n";
  service.wait();
  return 0;
}

// ------------------------------------------------------------------ synth

int cmd_synth_records(const Config& cfg, const std::string& out_dir) {
  const std::string dir = cfg.resolve(out_dir);
  std::filesystem::create_directories(dir);
  const SyntheticData data = make_synthetic_records(cfg.synthetic);

  std::ostringstream records, references, relevance;
  for (const auto& record : data.records) {
    records << ad_record_to_json(record) << "\n";
  }
  for (const auto& [ad_id, text] : data.references) {
    references << json{{"ad_id", ad_id}, {"text", text}}.dump() << "\n";
  }
  for (const auto& sample : data.relevance) {
    relevance << json{{"query", sample.query},
                      {"ad_id", sample.ad_id},
                      {"label", sample.label}}
                     .dump()
              << "\n";
  }
  write_text_file(dir + "/records.jsonl", records.str());
  write_text_file(dir + "/references.jsonl", references.str());
  write_text_file(dir + "/relevance.jsonl", relevance.str());
  std::cout << "wrote " << data.records.size() << " records, "
            << data.relevance.size() << " relevance samples to " << dir
            << "\n";
  return 0;
}

int cmd_synth_corpus(const Config& cfg, int docs, int queries,
                     const std::string& out_dir) {
  const std::string dir = cfg.resolve(out_dir);
  std::filesystem::create_directories(dir);
  const auto corpus = make_corpus(docs, cfg.seed);
  const auto query_list = make_corpus_queries(corpus, queries, cfg.seed);

  std::ostringstream docs_out, queries_out;
  for (const auto& [id, text] : corpus) {
    docs_out << json{{"id", id}, {"text", text}}.dump() << "\n";
  }
  for (const auto& q : query_list) {
    queries_out << json(q).dump() << "\n";
  }
  write_text_file(dir + "/corpus.jsonl", docs_out.str());
  write_text_file(dir + "/queries.jsonl", queries_out.str());
  std::cout << "wrote " << corpus.size() << " docs, " << query_list.size()
            << " queries to " << dir << "\n";
  return 0;
}

// ------------------------------------------------------------------- main

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"admix: ad summarization toolkit (metrics, GRPO, curation, "
               "retrieval serving)"};
  app.require_subcommand(1);

  std::string config_path, workdir;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", overrides, "dotted-path override, key=value");
  app.add_option("--workdir", workdir, "base directory for relative paths");

  auto load = [&]() {
    Config cfg = load_config(config_path, overrides);
    if (!workdir.empty()) cfg.workdir = workdir;
    return cfg;
  };

  // metrics
  auto* metrics = app.add_subcommand("metrics", "score hypotheses against references");
  std::string hyp_path, ref_path, metrics_out;
  metrics->add_option("--hyp", hyp_path, "hypothesis JSONL")->required();
  metrics->add_option("--ref", ref_path, "reference JSONL")->required();
  metrics->add_option("--out", metrics_out, "JSON report path");

  // grpo-train
  auto* grpo_train = app.add_subcommand("grpo-train", "train the toy policy");
  int train_steps = 500;
  std::string train_out = "grpo_out";
  grpo_train->add_option("--steps", train_steps, "training steps");
  grpo_train->add_option("--out", train_out, "output directory");

  // curate
  auto* curate = app.add_subcommand("curate", "build an SFT dataset");
  std::string records_path, relevance_path, curate_out = "curated";
  std::string judge_mode, generator_mode, generator_replay, record_judge;
  curate->add_option("--records", records_path, "ad records JSONL")->required();
  curate->add_option("--relevance", relevance_path, "relevance JSONL")
      ->required();
  curate->add_option("--judge-mode", judge_mode, "remote|replay|fallback");
  curate->add_option("--out", curate_out, "output directory")->required();
  curate->add_option("--generator", generator_mode, "template|remote|replay");
  curate->add_option("--generator-replay", generator_replay,
                     "generator replay fixture");
  curate->add_option("--record-judge", record_judge,
                     "record served verdicts to this JSONL");

  // index
  auto* index = app.add_subcommand("index", "build or query a retrieval index");
  index->require_subcommand(1);
  auto* index_build = index->add_subcommand("build", "embed documents");
  std::string docs_path, snapshot_path, index_out = "index.json";
  index_build->add_option("--docs", docs_path, "JSONL of {id,text}");
  index_build->add_option("--snapshot", snapshot_path, "summary store snapshot");
  index_build->add_option("--out", index_out, "index file");
  auto* index_query = index->add_subcommand("query", "top-k lookup");
  std::string index_path, query_text;
  int query_k = 10;
  index_query->add_option("--index", index_path, "index file")->required();
  index_query->add_option("--query", query_text, "query text")->required();
  index_query->add_option("--k", query_k, "results to return");

  // eval
  auto* eval = app.add_subcommand("eval", "offline evaluation reports");
  eval->require_subcommand(1);
  auto* eval_retrieval = eval->add_subcommand("retrieval", "hit@k from run+qrels");
  std::string run_path, qrels_path, eval_out;
  std::vector<int> ks;
  eval_retrieval->add_option("--run", run_path, "TREC-style run file")->required();
  eval_retrieval->add_option("--qrels", qrels_path, "qrels file")->required();
  eval_retrieval->add_option("--k", ks, "cutoffs (repeatable)");
  eval_retrieval->add_option("--out", eval_out, "JSON report path");
  auto* eval_relevance = eval->add_subcommand("relevance", "AUC and recall@precision");
  std::string rel_run, rel_qrels, rel_out;
  double precision_target = 0.90;
  eval_relevance->add_option("--run", rel_run, "TREC-style run file")->required();
  eval_relevance->add_option("--qrels", rel_qrels, "qrels file")->required();
  eval_relevance->add_option("--precision", precision_target, "precision target");
  eval_relevance->add_option("--out", rel_out, "JSON report path");
  auto* eval_diversity = eval->add_subcommand("diversity", "diversity and granularity");
  std::string div_index, div_queries, div_out;
  int div_k = 10, div_variants = 2;
  eval_diversity->add_option("--index", div_index, "index file")->required();
  eval_diversity->add_option("--queries", div_queries, "query JSONL")->required();
  eval_diversity->add_option("--k", div_k, "cutoff");
  eval_diversity->add_option("--variants", div_variants,
                             "near-duplicate variants per query");
  eval_diversity->add_option("--out", div_out, "JSON report path");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "modality and reward ablations");
  int ablate_steps = 60;
  std::string ablate_out;
  ablate->add_option("--steps", ablate_steps, "training steps per reward variant");
  ablate->add_option("--out", ablate_out, "JSON report path");

  // serve
  auto* serve = app.add_subcommand("serve", "HTTP summary/query service");
  std::string serve_snapshot, serve_docs;
  serve->add_option("--snapshot", serve_snapshot, "summary store snapshot");
  serve->add_option("--docs", serve_docs, "JSONL of {id,text}");

  // synth
  auto* synth = app.add_subcommand("synth", "emit synthetic datasets");
  synth->require_subcommand(1);
  auto* synth_records = synth->add_subcommand("records", "ad records + relevance");
  std::string synth_records_out = "synth";
  synth_records->add_option("--out", synth_records_out, "output directory");
  auto* synth_corpus = synth->add_subcommand("corpus", "retrieval corpus + queries");
  int corpus_docs = 1000, corpus_queries = 100;
  std::string synth_corpus_out = "synth";
  synth_corpus->add_option("--docs", corpus_docs, "document count");
  synth_corpus->add_option("--queries", corpus_queries, "query count");
  synth_corpus->add_option("--out", synth_corpus_out, "output directory");

  // config
  auto* config_cmd = app.add_subcommand("config", "print the effective config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const Config cfg = load();

  if (metrics->parsed()) return cmd_metrics(cfg, hyp_path, ref_path, metrics_out);
  if (grpo_train->parsed()) return cmd_grpo_train(cfg, train_steps, train_out);
  if (curate->parsed()) {
    return cmd_curate(cfg, records_path, relevance_path, curate_out,
                      judge_mode, generator_mode, generator_replay,
                      record_judge);
  }
  if (index->parsed()) {
    if (index_build->parsed()) {
      if (docs_path.empty() == snapshot_path.empty()) {
        throw UsageError("index build: need exactly one of --docs, --snapshot");
      }
      return cmd_index_build(cfg, docs_path, snapshot_path, index_out);
    }
    return cmd_index_query(cfg, index_path, query_text, query_k);
  }
  if (eval->parsed()) {
    if (eval_retrieval->parsed()) {
      return cmd_eval_retrieval(cfg, run_path, qrels_path, ks, eval_out);
    }
    if (eval_relevance->parsed()) {
      return cmd_eval_relevance(cfg, rel_run, rel_qrels, precision_target,
                                rel_out);
    }
    return cmd_eval_diversity(cfg, div_index, div_queries, div_k, div_variants,
                              div_out);
  }
  if (ablate->parsed()) return cmd_ablate(cfg, ablate_steps, ablate_out);
  if (serve->parsed()) return cmd_serve(cfg, serve_snapshot, serve_docs);
  if (synth->parsed()) {
    if (synth_records->parsed()) return cmd_synth_records(cfg, synth_records_out);
    return cmd_synth_corpus(cfg, corpus_docs, corpus_queries, synth_corpus_out);
  }
  if (config_cmd->parsed()) {
    std::cout << config_to_json(cfg);
    return 0;
  }
  return 2;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  try {
    return dispatch(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == "invalid_config" ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace admix
