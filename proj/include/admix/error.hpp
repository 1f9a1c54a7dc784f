#ifndef ADMIX_ERROR_HPP_
#define ADMIX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace admix {

// Runtime error carrying a stable machine-readable code ("judge_unavailable",
// "oov_token", "store_io", ...). The CLI maps the code to its exit message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace admix

#endif  // ADMIX_ERROR_HPP_
