#ifndef RELAXHJB_CLI_HPP
#define RELAXHJB_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "relaxhjb/config.hpp"

namespace relaxhjb {

inline constexpr std::string_view kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitViolation = 2;  // a checked invariant failed

struct RunOptions {
  std::optional<std::string> out_dir;   // overrides [output] dir
  std::optional<std::uint64_t> seed;    // overrides seed
  std::optional<int> threads;           // overrides threads
  std::ostream* log = nullptr;          // diagnostics; std::cerr when null
};

// solve, sweep-eps, perturb, sensitivity, mc-verify, exact-reg, surface,
// eps-probe.
const std::vector<std::string>& subcommand_names();

// Runs one subcommand and writes its CSV tables plus manifest.json into the
// output directory. Returns kExitOk, kExitViolation or kExitError; errors
// are reported on the log stream rather than thrown.
int run(std::string_view subcommand, const ExperimentConfig& config,
        const RunOptions& options = {});

// Entropy and Zang generators for K = 3 on the simplex slice: for
// y = (i, j, N - i - j) / N the point x = span * (y - 1/3) is evaluated.
// Columns: y1,y2,y3,x1,x2,x3,H_en_gap,H_zang_gap,rho_en,rho_zang where the
// gaps are H(x) - max(x) and rho is evaluated at y.
std::string emit_surface(int points, double span);

// FNV-1a hash of the serialised config with the output directory blanked.
std::uint64_t config_hash(const ExperimentConfig& config);

// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace relaxhjb

#endif  // RELAXHJB_CLI_HPP
