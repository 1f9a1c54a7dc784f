#ifndef ADMIX_CONFIG_HPP_
#define ADMIX_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "admix/curation.hpp"
#include "admix/grpo.hpp"
#include "admix/reward.hpp"
#include "admix/synthetic.hpp"

namespace admix {

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Whole-toolkit configuration. The JSON document mirrors this struct; unknown
// keys are rejected, and the top-level seed feeds every stochastic component.
struct Config {
  std::uint64_t seed = 17;
  std::string workdir = ".";
  std::string tokenizer = "unicode_word";
  int embedding_dim = 256;
  RewardConfig reward;
  GrpoConfig grpo;
  SyntheticConfig synthetic;
  CurationConfig curation;
  ServeConfig serve;

  void validate() const;

  // Joins relative paths onto workdir; absolute paths pass through.
  std::string resolve(const std::string& path) const;
};

// path may be empty (pure defaults). overrides are `dotted.key=value` pairs
// applied after the file; values parse as JSON scalars/arrays, falling back
// to strings.
Config load_config(const std::string& path,
                   const std::vector<std::string>& overrides = {});

std::string config_to_json(const Config& cfg);

}  // namespace admix

#endif  // ADMIX_CONFIG_HPP_
