// Regenerates the committed test fixtures that depend on library behavior:
// the recorded judge verdicts and the 100-record curation corpus. Hand-made
// fixtures (ir_*.txt, ir_*.jsonl) are not touched. Run from the repo root:
//
//   ./build/gen_fixtures tests/fixtures

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "admix/curation.hpp"
#include "admix/prompts.hpp"
#include "admix/reward.hpp"
#include "admix/synthetic.hpp"
#include "json.hpp"

using namespace admix;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<std::string, std::string>> kJudgePairs = {
    {"acme running shoes", "acme running shoes"},
    {"acme shoes", "acme running shoes"},
    {"running", "jogging"},
    {"夏季大促销", "夏季促销"},
    {"", ""},
    {"", "offer ends tonight"},
    {"iPhone15手机壳", "iphone 15 手机壳"},
    {"limited offer ends tonight", "offer ends"},
    {"buy one get one free", "buy two get two free"},
    {"solar garden lights", "garden solar lights"},
    {"a", "a"},
    {"a", "b"},
    {"the quick brown fox", "the quick brown fox jumps"},
    {"优惠 50% off", "優惠 50% off"},
    {"new summer sale", "summer sale now on"},
    {"waterproof hiking boots", "winter boots"},
    {"acme", "acme acme acme"},
    {"four score and seven", "seven and score four"},
    {"café latte", "cafe latte"},
    {"noise cancelling headphones", "noise cancelling headphones with case"},
};

void write_judge_fixtures(const fs::path& out_dir) {
  {
    std::ofstream pairs(out_dir / "judge_replay_pairs.jsonl",
                        std::ios::binary | std::ios::trunc);
    for (const auto& [o, y] : kJudgePairs) {
      pairs << json{{"o", o}, {"y", y}}.dump() << "\n";
    }
  }

  const fs::path replay = out_dir / "judge_replay.jsonl";
  fs::remove(replay);
  RewardConfig cfg;  // fallback judge
  JudgeClient judge(cfg);
  judge.record_to(replay.string());
  for (const auto& [o, y] : kJudgePairs) reward_sem(o, y, cfg, judge);
  std::printf("wrote %zu judge pairs + recorded verdicts\n",
              kJudgePairs.size());
}

void write_curation_fixtures(const fs::path& out_dir) {
  SyntheticConfig syn;
  syn.records = 98;
  syn.seed = 11;
  const SyntheticData data = make_synthetic_records(syn);

  AdRecord punct_a;
  punct_a.ad_id = "ad-900001";
  punct_a.asr = "!!! ??? ...";
  AdRecord punct_b;
  punct_b.ad_id = "ad-900002";
  punct_b.ocr = "-- ++ ~~";

  const fs::path records_path = out_dir / "curation_records.jsonl";
  {
    std::ofstream out(records_path, std::ios::binary | std::ios::trunc);
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (i == 50) out << "this line is not json\n";
      out << ad_record_to_json(data.records[i]) << "\n";
    }
    // 100 valid records in total; three malformed lines on top of them:
    // broken JSON above, plus a duplicate id and an all-empty record here.
    out << ad_record_to_json(punct_a) << "\n";
    out << ad_record_to_json(punct_b) << "\n";
    out << json{{"ad_id", data.records[1].ad_id},
                {"asr", "duplicate entry"}}
               .dump()
        << "\n";
    out << json{{"ad_id", "ad-900003"}}.dump() << "\n";
  }

  {
    std::ofstream out(out_dir / "curation_relevance.jsonl",
                      std::ios::binary | std::ios::trunc);
    for (const auto& sample : data.relevance) {
      out << json{{"query", sample.query},
                  {"ad_id", sample.ad_id},
                  {"label", sample.label}}
                 .dump()
          << "\n";
    }
  }

  const fs::path replay = out_dir / "curation_replay.jsonl";
  fs::remove(replay);
  CurationConfig cfg;  // fallback judge while recording
  cfg.judge_record_path = replay.string();
  const fs::path scratch = fs::temp_directory_path() / "admix_fixture_gen";
  fs::remove_all(scratch);
  const CurationReport report =
      build_dataset(records_path.string(),
                    (out_dir / "curation_relevance.jsonl").string(),
                    scratch.string(), cfg);
  std::printf(
      "recorded curation run: records %d malformed %d accepted %d "
      "insufficient %d all_rejected %d\n",
      report.records, report.malformed, report.accepted, report.insufficient,
      report.all_rejected);

  // Force a couple of fully rejected records so every outcome class shows up
  // in replay-driven runs.
  std::set<std::string> flip_keys;
  TemplateGenerator generator;
  for (const std::string& id : {"ad-000003", "ad-000050"}) {
    for (const AdRecord& record : data.records) {
      if (record.ad_id != id) continue;
      const std::string reference =
          salient_text(record, cfg.max_summary_tokens);
      for (double t : cfg.temperatures) {
        flip_keys.insert(JudgeClient::replay_key(
            generator.generate(record, t), reference,
            quality_prompt_version()));
      }
    }
  }
  std::vector<std::string> lines;
  {
    std::ifstream in(replay);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      if (flip_keys.count(j.at("key").get<std::string>())) {
        j["verdict"] = {{"score", 0.2}, {"pass", false}, {"reason", "flipped"}};
      }
      lines.push_back(j.dump());
    }
  }
  {
    std::ofstream out(replay, std::ios::binary | std::ios::trunc);
    for (const auto& line : lines) out << line << "\n";
  }
  std::printf("flipped %zu verdict keys for 2 ad ids\n", flip_keys.size());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out_dir = argc > 1 ? argv[1] : "tests/fixtures";
  fs::create_directories(out_dir);
  write_judge_fixtures(out_dir);
  write_curation_fixtures(out_dir);
  return 0;
}
