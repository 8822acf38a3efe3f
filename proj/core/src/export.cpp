// Copyright (c) 2026, The Velocitune Authors
// SPDX-License-Identifier: Apache-2.0

#include "velocitune/export.hpp"
#include "velocitune/error.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace velocitune {

std::string format_shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_sig6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%#.6g", v);
    return buf;
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
    out << kTrajectoryHeader << '\n';
    for (const auto& r : traj.rows) {
        for (std::size_t i = 0; i < traj.domains.size(); ++i) {
            out << r.step << ',' << traj.domains[i] << ',' << format_shortest(r.weights[i]) << ','
                << format_shortest(r.eval_losses[i]) << ',';
            if (r.velocities) out << format_shortest((*r.velocities)[i]);
            out << ',' << r.alloc_tokens[i] << '\n';
        }
    }
}

std::string trajectory_csv(const Trajectory& traj) {
    std::ostringstream ss;
    write_trajectory_csv(traj, ss);
    return ss.str();
}

namespace {

std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
    return s.substr(b);
}

double parse_number(const std::string& field, std::size_t line, const char* what) {
    const std::string t = trim(field);
    double v = 0.0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
        throw Error(ErrorKind::Parse, "line " + std::to_string(line) + ": invalid " + what + " '" + t + "'");
    }
    return v;
}

} // namespace

std::vector<NamedSeries> read_checkpoint_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw Error(ErrorKind::Parse, "line 1: empty checkpoint file");
    ++lineno;
    if (trim(line) != kCheckpointCsvHeader) {
        throw Error(ErrorKind::Parse, std::string("line 1: expected header '") + kCheckpointCsvHeader + "'");
    }
    std::vector<std::string> order;
    std::vector<std::vector<CheckpointPoint>> points;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(t);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (cols.size() != 3) {
            throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": expected 3 columns, got " +
                                              std::to_string(cols.size()));
        }
        const std::string name = trim(cols[0]);
        if (name.empty()) throw Error(ErrorKind::Parse, "line " + std::to_string(lineno) + ": empty domain");
        const double tokens = parse_number(cols[1], lineno, "tokens");
        const double loss = parse_number(cols[2], lineno, "loss");
        std::size_t idx = 0;
        while (idx < order.size() && order[idx] != name) ++idx;
        if (idx == order.size()) {
            order.push_back(name);
            points.emplace_back();
        }
        points[idx].push_back({tokens, loss});
    }
    std::vector<NamedSeries> out;
    for (std::size_t i = 0; i < order.size(); ++i) {
        try {
            out.push_back({order[i], CheckpointSeries(std::move(points[i]))});
        } catch (const Error& e) {
            throw Error(e.kind(), "domain '" + order[i] + "': " + e.what());
        }
    }
    if (out.empty()) throw Error(ErrorKind::Parse, "checkpoint file has no data rows");
    return out;
}

void write_checkpoint_csv(const std::vector<std::string>& domains, const std::vector<CheckpointSeries>& series,
                          std::ostream& out) {
    out << kCheckpointCsvHeader << '\n';
    for (std::size_t i = 0; i < domains.size(); ++i) {
        for (const auto& p : series[i].points()) {
            out << domains[i] << ',' << format_shortest(p.tokens) << ',' << format_shortest(p.loss) << '\n';
        }
    }
}

void write_fit_report(const std::vector<FitRecord>& records, std::ostream& out) {
    out << "# velocitune fit report v1\n";
    for (const auto& r : records) {
        out << "domain=" << r.domain << " E=" << format_sig6(r.fit.E) << " B=" << format_sig6(r.fit.B)
            << " beta=" << format_sig6(r.fit.beta) << " fit_rmse=" << format_sig6(r.fit.fit_rmse)
            << " full_tokens=" << format_sig6(r.full_tokens) << " predicted_target=" << format_sig6(r.predicted_target)
            << '\n';
    }
}

namespace {

template <typename V>
std::string list6(const V& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += format_sig6(v[i]);
    }
    return s + "]";
}

} // namespace

void write_comparison_report(const ComparisonReport& report, const std::vector<std::string>& domains,
                             std::ostream& out) {
    out << "# velocitune comparison report v1\n";
    out << "domains=";
    for (std::size_t i = 0; i < domains.size(); ++i) out << (i ? "," : "") << domains[i];
    out << '\n';
    out << "init_losses=" << list6(report.pipeline.init_losses) << '\n';
    out << "target_losses=" << list6(report.pipeline.target_losses) << '\n';
    out << "stabilization_epsilon=" << format_sig6(report.stabilization_epsilon) << '\n';
    for (const auto& s : report.summaries) {
        const auto& last = s.trajectory.rows.back();
        out << "policy=" << s.label << " final_losses=" << list6(s.final_losses)
            << " final_velocity=" << list6(s.final_velocity) << " velocity_spread=" << format_sig6(s.velocity_spread)
            << " max_gap_to_target=" << format_sig6(s.max_gap_to_target) << " stabilization_step="
            << (s.stabilization ? std::to_string(*s.stabilization) : std::string("none"))
            << " final_weights=" << list6(last.weights) << " averaged_weights=" << list6(s.averaged_weights) << '\n';
    }
}

} // namespace velocitune
