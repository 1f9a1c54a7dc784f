#ifndef ADMIX_CLI_HPP_
#define ADMIX_CLI_HPP_

namespace admix {

// Full command-line front end. Returns the process exit code:
// 0 success, 2 usage/config error, 1 runtime error.
int run_cli(int argc, const char* const* argv);

}  // namespace admix

#endif  // ADMIX_CLI_HPP_
