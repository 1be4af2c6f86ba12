#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace rskelly::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 1,      ///< parse, validation or usage errors
  kNumericalError = 2,  ///< solver or quadrature failure
  kKktViolated = 3,     ///< kkt-check only
};

/// Runs one command line (args[0] is the program name). Tables go to `out` unless
/// --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Inclusive grid "a:b:step"; values are snapped to 1e-12 so 0:1:0.1 yields 0, 0.1, ..., 1.
std::vector<double> parse_rho_grid(std::string_view text);

/// Comma-separated reals, e.g. "0.6,0.4".
std::vector<double> parse_real_list(std::string_view text);

/// 12 significant digits, as written in every CSV table.
std::string format_number(double x);

}  // namespace rskelly::cli
