#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bsdelab/fixtures.hpp"

namespace bsdelab {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    bool skipped = false;  // excluded by the fixture filter
    std::string detail;
    /// Named values behind the verdict, in a fixed order.
    std::vector<std::pair<std::string, double>> metrics;

    /// metric,value rows.
    std::string csv() const;
};

struct VerifyOptions {
    std::uint64_t seed = 1;
    /// Restricts fixture-bound criteria to this fixture; others still run.
    std::optional<std::string> fixture;
    /// Worker counts compared by the determinism criterion.
    std::size_t workers_low = 1;
    std::size_t workers_high = 4;
};

inline constexpr int kCriterionCount = 10;

std::string criterion_title(int id);

/// Runs a single criterion. Throws InvalidArgument for an id outside 1..10.
CriterionResult run_criterion(int id, const FixtureRegistry& registry,
                              const VerifyOptions& options);

/// Criteria 1-9 in order; criterion 10 reruns them at two worker counts and
/// compares every CSV byte for byte.
std::vector<CriterionResult> verify_all(const FixtureRegistry& registry,
                                        const VerifyOptions& options);

/// One "criterion N: PASS|FAIL  title  detail" line per result.
std::string verify_summary(const std::vector<CriterionResult>& results);

}  // namespace bsdelab
