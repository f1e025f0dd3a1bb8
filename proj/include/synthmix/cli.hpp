#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace synthmix {

/// Exit codes: 0 success, 1 validation or usage error, 2 numerical divergence
/// (rho(Q) >= 1 where a limit was requested).
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitDivergence = 2;

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace synthmix
