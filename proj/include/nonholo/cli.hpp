#ifndef NONHOLO_CLI_HPP
#define NONHOLO_CLI_HPP

namespace nonholo {

// Exit codes: 0 ok, 1 check/verification failure, 2 usage/schema error,
// 3 numeric failure.
int cli_main(int argc, const char* const* argv);

} // namespace nonholo

#endif
