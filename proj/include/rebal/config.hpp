#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rebal/market.hpp"
#include "rebal/rebalance.hpp"

namespace rebal {

enum class StrategyKind { Hitting, Equidistant, Both };

/**
 * Everything a convergence or frontier run needs.
 *
 * `entries` keeps the effective key/value pairs (defaults filled in,
 * whitespace removed); the config hash is taken over them in key order,
 * leaving out output.path so the hash does not depend on where results go.
 */
struct ExperimentConfig {
    ModelSpec model;
    std::size_t grid_G = 0;
    std::size_t paths = 1;
    std::uint64_t master_seed = 0;
    StrategyKind strategy = StrategyKind::Both;
    std::vector<double> epsilon_schedule;
    std::vector<double> target_rebalances;
    std::size_t pilot_paths = 32;
    std::size_t pilot_G = 1u << 14;
    std::vector<std::size_t> n_schedule;
    SharesMode shares = SharesMode::Oracle;
    double min_steps = 64.0;
    bool match_effort = true;
    std::string output_path;

    std::map<std::string, std::string> entries;

    bool runs_hitting() const noexcept { return strategy != StrategyKind::Equidistant; }
    bool runs_equidistant() const noexcept { return strategy != StrategyKind::Hitting; }

    /// Sorted "key=value" lines the hash is computed from.
    std::string canonical_text() const;
    std::uint64_t hash() const;
    /// 16 lowercase hex digits.
    std::string hash_hex() const;

    void set_master_seed(std::uint64_t seed);
};

/**
 * Parses the flat config format:
 *
 *     # comment
 *     model.d = 2
 *     model.Sigma = 0.04, 0.01; 0.01, 0.09
 *
 * Unknown or repeated keys, malformed values and failed validation throw
 * Error(ConfigError) with "<source>:<line>:" in front of the message.
 */
ExperimentConfig parse_config(std::string_view text, std::string_view source = "config");

/// Reads and parses a file.
ExperimentConfig load_config(const std::string& path);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::string_view to_string(StrategyKind kind) noexcept;
std::string_view to_string(SharesMode mode) noexcept;

} // namespace rebal
