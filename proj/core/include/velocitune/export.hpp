// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text formats: trajectory CSV, checkpoint-series CSV, fit and comparison
// reports. CSV numbers use shortest round-trip formatting; report numbers use
// six significant digits.

#pragma once

#include "velocitune/domain.hpp"
#include "velocitune/scaling.hpp"
#include "velocitune/sim.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace velocitune {

inline constexpr const char* kTrajectoryHeader = "step,domain,weight,eval_loss,velocity,alloc_tokens";
inline constexpr const char* kCheckpointCsvHeader = "domain,tokens,loss";

/// Shortest decimal that parses back to the same double.
[[nodiscard]] std::string format_shortest(double v);
/// Six significant digits, trailing zeros kept ("%#.6g").
[[nodiscard]] std::string format_sig6(double v);

void write_trajectory_csv(const Trajectory& traj, std::ostream& out);
[[nodiscard]] std::string trajectory_csv(const Trajectory& traj);

struct NamedSeries {
    std::string domain;
    CheckpointSeries series;
};

/// Domains appear in first-seen order. Throws Parse with the line number.
[[nodiscard]] std::vector<NamedSeries> read_checkpoint_csv(std::istream& in);
void write_checkpoint_csv(const std::vector<std::string>& domains, const std::vector<CheckpointSeries>& series,
                          std::ostream& out);

struct FitRecord {
    std::string domain;
    ScalingFit fit;
    double full_tokens = 0.0;
    double predicted_target = 0.0;
};

void write_fit_report(const std::vector<FitRecord>& records, std::ostream& out);
void write_comparison_report(const ComparisonReport& report, const std::vector<std::string>& domains,
                             std::ostream& out);

} // namespace velocitune
