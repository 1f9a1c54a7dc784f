#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "admix/error.hpp"
#include "admix/grpo.hpp"
#include "doctest.h"

using namespace admix;

namespace {

std::vector<std::string> small_vocab() {
  return {kBosToken, kEosToken, "red", "blue", "green"};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("admix_grpo_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// Count-based toy reward: fraction of response words present in the prompt.
double overlap_reward(const std::string& response, const std::string& ref) {
  std::istringstream rs(response);
  std::istringstream os(ref);
  std::vector<std::string> r, o;
  std::string w;
  while (rs >> w) r.push_back(w);
  while (os >> w) o.push_back(w);
  if (r.empty()) return 0.0;
  int hits = 0;
  for (const auto& t : r) {
    for (const auto& u : o) {
      if (t == u) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(r.size());
}

}  // namespace

TEST_CASE("normalize_advantages frozen examples") {
  const auto a = normalize_advantages({1.0, 2.0, 3.0}, 1e-8);
  CHECK(a[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(a[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));

  const auto b = normalize_advantages({0.0, 1.0}, 1e-8);
  CHECK(b[0] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(b[1] == doctest::Approx(1.0).epsilon(1e-12));

  const auto c = normalize_advantages({0.7, 0.7, 0.7, 0.7}, 1e-8);
  for (double x : c) CHECK(x == 0.0);
}

TEST_CASE("normalize_advantages is mean-zero unit-variance on random groups") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(0.0, 2.0);
  for (int it = 0; it < 500; ++it) {
    std::vector<double> rewards;
    const int n = 2 + static_cast<int>(rng() % 14);
    for (int i = 0; i < n; ++i) rewards.push_back(dist(rng));
    bool degenerate = true;
    for (double r : rewards) degenerate &= (r == rewards[0]);
    if (degenerate) continue;
    const auto adv = normalize_advantages(rewards, 1e-8);
    double mean = 0.0, var = 0.0;
    for (double a : adv) mean += a;
    mean /= n;
    for (double a : adv) var += (a - mean) * (a - mean);
    var /= n;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("kl_k3 spot values and properties") {
  CHECK(kl_k3(-3.7, -3.7) == 0.0);
  // t = 2 and t = 0.5.
  CHECK(kl_k3(std::log(2.0), 0.0) ==
        doctest::Approx(2.0 - std::log(2.0) - 1.0).epsilon(1e-12));
  CHECK(kl_k3(std::log(0.5), 0.0) ==
        doctest::Approx(0.5 - std::log(0.5) - 1.0).epsilon(1e-12));
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-10.0, 10.0);
  for (int it = 0; it < 10000; ++it) {
    const double lr = dist(rng);
    const double lt = dist(rng);
    CHECK(kl_k3(lr, lt) >= 0.0);
  }
}

TEST_CASE("tabular policy softmax rows are proper distributions") {
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(3, 1.5);
  const std::vector<std::string> prompt = {"red", "blue"};
  double total = 0.0;
  for (const auto& tok : small_vocab()) {
    const auto lp = policy.token_log_probs(prompt, {tok});
    REQUIRE(lp.size() == 1);
    total += std::exp(lp[0]);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tabular policy rejects malformed vocabularies") {
  CHECK_THROWS_AS(TabularPolicy({kBosToken, kEosToken, "a", "a"}, 1), Error);
  CHECK_THROWS_AS(TabularPolicy({"a", "b"}, 1), Error);  // missing specials
  CHECK_THROWS_AS(TabularPolicy(small_vocab(), 0), Error);
  CHECK_THROWS_AS(TabularPolicy(small_vocab(), 3), Error);
}

TEST_CASE("oov prompt tokens map to bos, oov response tokens are errors") {
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(17, 1.0);
  const auto lp_oov = policy.token_log_probs({"unknown-word"}, {"red"});
  const auto lp_bos = policy.token_log_probs({kBosToken}, {"red"});
  CHECK(lp_oov[0] == lp_bos[0]);
  CHECK_THROWS_WITH_AS(policy.token_log_probs({"red"}, {"mystery"}),
                       doctest::Contains("oov_token"), Error);
}

TEST_CASE("sampling is deterministic per seed and respects max_len") {
  TabularPolicy policy(small_vocab(), 2);
  policy.randomize(11, 1.0);
  const std::vector<std::string> prompt = {"red"};
  const auto a = policy.sample(prompt, 12, 99);
  const auto b = policy.sample(prompt, 12, 99);
  CHECK(a == b);
  CHECK(a.size() <= 12);
  if (a.size() < 12) {
    REQUIRE(!a.empty());
    CHECK(a.back() == kEosToken);
  }
  bool any_diff = false;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    if (policy.sample(prompt, 12, seed) != a) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("uniform policy sft loss is len times log vocab") {
  TabularPolicy policy(small_vocab(), 1);  // zero logits -> uniform
  const double lnV = std::log(5.0);
  const SftResult r =
      sft_nll(policy, {{{kBosToken}, {"red", "blue", kEosToken}},
                       {{kBosToken}, {"green", kEosToken}}});
  CHECK(r.loss == doctest::Approx((3 * lnV + 2 * lnV) / 2.0).epsilon(1e-12));
}

TEST_CASE("sft gradient matches central finite differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    TabularPolicy policy(small_vocab(), 1);
    policy.randomize(rng(), 0.8);
    const std::vector<std::pair<std::vector<std::string>,
                                std::vector<std::string>>>
        batch = {{{"red"}, {"blue", kEosToken}},
                 {{"green", "blue"}, {"red", "red", kEosToken}}};
    const SftResult base = sft_nll(policy, batch);
    std::vector<double> params = policy.params();
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto probe = [&](double delta) {
        std::vector<double> p = params;
        p[k] += delta;
        TabularPolicy moved = policy;
        moved.set_params(p);
        return sft_nll(moved, batch).loss;
      };
      const double fd = (probe(h) - probe(-h)) / (2.0 * h);
      const double tol = 1e-4 * std::max({1.0, std::abs(fd),
                                          std::abs(base.grad[k])});
      CHECK(std::abs(fd - base.grad[k]) <= tol);
    }
  }
}

TEST_CASE("identical policies give zero objective and zero kl") {
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(31, 1.0);
  GrpoConfig cfg;
  cfg.rollouts = 6;
  const RolloutGroup group = rollout_group(
      policy, policy, {"red"}, "red blue", cfg,
      [](const std::string& response, const std::string& ref) {
        return overlap_reward(response, ref);
      },
      700);
  const GrpoEval eval = grpo_objective(group, cfg, policy);
  CHECK(std::abs(eval.objective) < 1e-12);
  CHECK(eval.mean_kl == 0.0);
  CHECK(eval.mean_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval.clip_fraction == 0.0);
}

TEST_CASE("clip dominance: large ratios contribute no policy gradient") {
  TabularPolicy policy(small_vocab(), 1);  // uniform
  GrpoConfig cfg;
  cfg.clip = 0.2;
  cfg.kl_beta = 0.0;

  RolloutGroup group;
  group.prompt = {kBosToken};
  group.reference = "red";
  const std::vector<std::string> winner = {"red", kEosToken};
  const std::vector<std::string> loser = {"blue", kEosToken};
  const double lp_w = total_log_prob(policy, group.prompt, winner);
  const double lp_l = total_log_prob(policy, group.prompt, loser);
  group.responses = {winner, loser};
  group.rewards = {1.0, 0.0};  // advantages normalize to +1, -1
  // Winner's ratio is forced to 1 + 2*clip; loser's stays at 1.
  group.logp_old = {lp_w - std::log(1.0 + 2.0 * cfg.clip), lp_l};
  group.logp_ref = {lp_w, lp_l};
  group.logp_theta = group.logp_old;

  const GrpoEval eval = grpo_objective(group, cfg, policy);
  CHECK(eval.objective ==
        doctest::Approx(((1.0 + cfg.clip) * 1.0 + (-1.0)) / 2.0)
            .epsilon(1e-12));
  CHECK(eval.clip_fraction == doctest::Approx(0.5).epsilon(1e-12));

  const std::vector<double> g_loser =
      policy.grad_log_prob(group.prompt, loser);
  REQUIRE(eval.grad.size() == g_loser.size());
  for (std::size_t k = 0; k < eval.grad.size(); ++k) {
    CHECK(eval.grad[k] ==
          doctest::Approx(-0.5 * g_loser[k]).epsilon(1e-9));
  }
}

TEST_CASE("grpo objective gradient matches central finite differences") {
  std::mt19937_64 rng(47);
  GrpoConfig cfg;
  cfg.rollouts = 6;
  cfg.clip = 0.2;
  cfg.kl_beta = 0.05;
  cfg.max_response_len = 6;
  int checked = 0;
  for (int trial = 0; trial < 12 && checked < 4; ++trial) {
    TabularPolicy sampler(small_vocab(), 1);
    sampler.randomize(rng(), 0.7);
    TabularPolicy ref(small_vocab(), 1);
    ref.randomize(rng(), 0.7);
    const RolloutGroup group = rollout_group(
        sampler, ref, {"blue"}, "blue green", cfg,
        [](const std::string& response, const std::string& reference) {
          return overlap_reward(response, reference);
        },
        rng());

    TabularPolicy policy(small_vocab(), 1);
    policy.randomize(rng(), 0.4);

    // Skip configurations near the clip boundary where the objective is
    // non-differentiable.
    bool near_boundary = false;
    for (std::size_t i = 0; i < group.responses.size(); ++i) {
      const double ratio = std::exp(
          total_log_prob(policy, group.prompt, group.responses[i]) -
          group.logp_old[i]);
      if (std::abs(ratio - (1.0 - cfg.clip)) < 5e-3 ||
          std::abs(ratio - (1.0 + cfg.clip)) < 5e-3) {
        near_boundary = true;
      }
    }
    if (near_boundary) continue;
    ++checked;

    const GrpoEval base = grpo_objective(group, cfg, policy);
    const std::vector<double> params = policy.params();
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto probe = [&](double delta) {
        std::vector<double> p = params;
        p[k] += delta;
        TabularPolicy moved = policy;
        moved.set_params(p);
        return grpo_objective(group, cfg, moved).objective;
      };
      const double fd = (probe(h) - probe(-h)) / (2.0 * h);
      const double tol =
          1e-4 * std::max({1.0, std::abs(fd), std::abs(base.grad[k])});
      CHECK(std::abs(fd - base.grad[k]) <= tol);
    }
  }
  CHECK(checked >= 3);
}

TEST_CASE("rollout groups are deterministic and rewards recompute") {
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(53, 1.0);
  TabularPolicy ref = policy;
  GrpoConfig cfg;
  cfg.rollouts = 8;
  const RewardFn fn = [](const std::string& response, const std::string& r) {
    return overlap_reward(response, r);
  };
  const RolloutGroup a = rollout_group(policy, ref, {"green"}, "green red",
                                       cfg, fn, 1234);
  const RolloutGroup b = rollout_group(policy, ref, {"green"}, "green red",
                                       cfg, fn, 1234);
  CHECK(a.responses == b.responses);
  CHECK(a.rewards == b.rewards);
  CHECK(a.logp_old == b.logp_old);
  for (std::size_t i = 0; i < a.responses.size(); ++i) {
    CHECK(a.rewards[i] ==
          doctest::Approx(fn(response_text(a.responses[i]), a.reference))
              .epsilon(1e-12));
    CHECK(a.logp_theta[i] == a.logp_old[i]);
  }
}

TEST_CASE("non-finite rewards are rejected at rollout time") {
  TabularPolicy policy(small_vocab(), 1);
  GrpoConfig cfg;
  cfg.rollouts = 2;
  CHECK_THROWS_AS(
      rollout_group(policy, policy, {"red"}, "red", cfg,
                    [](const std::string&, const std::string&) {
                      return std::nan("");
                    },
                    1),
      Error);
}

TEST_CASE("train with zero steps is a no-op that still checkpoints") {
  TempDir tmp;
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(61, 1.0);
  const std::vector<double> before = policy.params();
  GrpoConfig cfg;
  TrainIo io;
  io.run_log_path = tmp.file("run.jsonl");
  io.checkpoint_path = tmp.file("ckpt.json");
  const TrainResult result =
      train(policy, {{{kBosToken}, "red"}}, cfg, overlap_reward, 0, io);
  CHECK(result.steps.empty());
  CHECK(policy.params() == before);
  CHECK(read_file(io.run_log_path).empty());
  CHECK(!read_file(io.checkpoint_path).empty());
}

TEST_CASE("training improves the overlap toy reward and logs every step") {
  TempDir tmp;
  const std::vector<std::string> vocab = small_vocab();
  GrpoConfig cfg;
  cfg.rollouts = 6;
  cfg.group_batch = 8;
  cfg.max_response_len = 5;
  cfg.seed = 77;
  const std::vector<TrainExample> data = {{{kBosToken}, "red red red"}};

  TabularPolicy policy(vocab, 1);
  TrainIo io;
  io.run_log_path = tmp.file("run.jsonl");
  io.checkpoint_path = tmp.file("ckpt.json");
  const TrainResult result = train(policy, data, cfg, overlap_reward, 40, io);
  REQUIRE(result.steps.size() == 40);
  CHECK(result.steps.back().mean_reward > result.steps.front().mean_reward);

  std::ifstream log(io.run_log_path);
  int lines = 0;
  std::string line;
  std::string first_line;
  while (std::getline(log, line)) {
    if (lines == 0) first_line = line;
    ++lines;
  }
  CHECK(lines == 40);
  CHECK(first_line.rfind("{\"step\":0,\"mean_reward\":", 0) == 0);
}

TEST_CASE("training runs are bit-identical modulo wall time") {
  TempDir tmp;
  GrpoConfig cfg;
  cfg.rollouts = 4;
  cfg.group_batch = 4;
  cfg.max_response_len = 4;
  cfg.seed = 101;
  const std::vector<TrainExample> data = {{{kBosToken}, "blue green"},
                                          {{"red"}, "red"}};
  auto run_once = [&](const std::string& log_path) {
    TabularPolicy policy(small_vocab(), 1);
    TrainIo io;
    io.run_log_path = log_path;
    train(policy, data, cfg, overlap_reward, 12, io);
    return policy.params();
  };
  const auto p1 = run_once(tmp.file("a.jsonl"));
  const auto p2 = run_once(tmp.file("b.jsonl"));
  CHECK(p1 == p2);

  auto strip_wall = [](const std::string& text) {
    std::string out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto pos = line.find(",\"wall_ms\":");
      out += line.substr(0, pos);
      out += "\n";
    }
    return out;
  };
  CHECK(strip_wall(read_file(tmp.file("a.jsonl"))) ==
        strip_wall(read_file(tmp.file("b.jsonl"))));
}

TEST_CASE("checkpoints round-trip byte-identically") {
  TempDir tmp;
  TabularPolicy policy(small_vocab(), 2);
  policy.randomize(71, 1.3);
  policy.save(tmp.file("a.json"));
  TabularPolicy loaded = TabularPolicy::load(tmp.file("a.json"));
  CHECK(loaded.vocab() == policy.vocab());
  CHECK(loaded.context_order() == policy.context_order());
  CHECK(loaded.params() == policy.params());
  loaded.save(tmp.file("b.json"));
  CHECK(read_file(tmp.file("a.json")) == read_file(tmp.file("b.json")));

  CHECK_THROWS_AS(TabularPolicy::load(tmp.file("missing.json")), Error);
  {
    std::ofstream bad(tmp.file("bad.json"));
    bad << "{\"format_version\": 99}";
  }
  CHECK_THROWS_AS(TabularPolicy::load(tmp.file("bad.json")), Error);
}

TEST_CASE("mean_sequence_kl is zero for identical policies and positive after drift") {
  TabularPolicy policy(small_vocab(), 1);
  policy.randomize(81, 1.0);
  TabularPolicy ref = policy;
  GrpoConfig cfg;
  const std::vector<TrainExample> data = {{{"red"}, "red"},
                                          {{"blue"}, "blue"}};
  CHECK(mean_sequence_kl(policy, ref, data, cfg, 5) == 0.0);

  TabularPolicy drifted = policy;
  std::vector<double> p = drifted.params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += (i % 3 == 0) ? 0.4 : -0.2;
  drifted.set_params(p);
  CHECK(mean_sequence_kl(drifted, ref, data, cfg, 5) > 0.0);
}
