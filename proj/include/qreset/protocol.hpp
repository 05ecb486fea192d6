#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "qreset/errors.hpp"

namespace qreset {

/// Gap samples on a local grid starting at 0; linear in between.
struct SampledGap {
    std::vector<double> ts;
    std::vector<double> lambdas;

    double duration() const { return ts.back(); }

    double at(double t) const {
        if (t <= ts.front()) return lambdas.front();
        if (t >= ts.back()) return lambdas.back();
        const auto it = std::upper_bound(ts.begin(), ts.end(), t);
        const std::size_t i = static_cast<std::size_t>(it - ts.begin()) - 1;
        const double w = (t - ts[i]) / (ts[i + 1] - ts[i]);
        return lambdas[i] + w * (lambdas[i + 1] - lambdas[i]);
    }
};

struct ConstantGap {
    double lambda = 0.0;
    double length = 0.0;

    double duration() const { return length; }
    double at(double) const { return lambda; }
};

/// Gap given by a callable on local time [0, length].
struct FunctionGap {
    std::function<double(double)> lambda;
    double length = 0.0;

    double duration() const { return length; }
    double at(double t) const { return lambda(t); }
};

using GapSegment = std::variant<SampledGap, ConstantGap, FunctionGap>;

/// Piecewise gap protocol lambda_H(t) on [0, tau]. With quench endpoints the
/// gap jumps instantaneously from 0 at t = 0- and back to 0 at t = tau+,
/// without changing the population.
struct ControlProtocol {
    std::vector<GapSegment> segments;
    bool quench_endpoints = true;

    double total_duration() const {
        double sum = 0.0;
        for (const auto& s : segments) {
            sum += std::visit([](const auto& g) { return g.duration(); }, s);
        }
        return sum;
    }

    /// Segment start times, plus the final time.
    std::vector<double> boundaries() const {
        std::vector<double> out{0.0};
        for (const auto& s : segments) {
            out.push_back(out.back() + std::visit([](const auto& g) { return g.duration(); }, s));
        }
        return out;
    }

    /// Gap at absolute time t; at a segment junction the later segment wins.
    double gap_at(double t) const {
        double start = 0.0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const double len = std::visit([](const auto& g) { return g.duration(); }, segments[i]);
            if (t < start + len || i + 1 == segments.size()) {
                return std::visit([&](const auto& g) { return g.at(t - start); }, segments[i]);
            }
            start += len;
        }
        return 0.0;
    }

    /// Times where the gap may have a kink: segment junctions and the nodes of
    /// sampled segments.
    std::vector<double> kinks() const {
        std::vector<double> out;
        double start = 0.0;
        for (const auto& s : segments) {
            if (const auto* sampled = std::get_if<SampledGap>(&s)) {
                for (double t : sampled->ts) out.push_back(start + t);
            }
            start += std::visit([](const auto& g) { return g.duration(); }, s);
            out.push_back(start);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    void validate() const {
        if (segments.empty()) {
            throw DomainError("ControlProtocol: no segments");
        }
        for (const auto& s : segments) {
            if (const auto* sampled = std::get_if<SampledGap>(&s)) {
                if (sampled->ts.size() < 2 || sampled->ts.size() != sampled->lambdas.size()) {
                    throw DomainError("ControlProtocol: sampled segment needs >= 2 aligned samples");
                }
                if (sampled->ts.front() != 0.0) {
                    throw DomainError("ControlProtocol: sampled segment must start at t = 0");
                }
                for (std::size_t i = 1; i < sampled->ts.size(); ++i) {
                    if (!(sampled->ts[i] > sampled->ts[i - 1])) {
                        throw DomainError("ControlProtocol: sample times must increase strictly");
                    }
                }
                for (std::size_t i = 0; i < sampled->lambdas.size(); ++i) {
                    const double l = sampled->lambdas[i];
                    // only the t = 0 sample may sit at the quench value 0
                    if (!std::isfinite(l) || l < 0.0 || (l == 0.0 && i != 0)) {
                        throw DomainError("ControlProtocol: gap must be > 0 in the interior");
                    }
                }
            } else if (const auto* constant = std::get_if<ConstantGap>(&s)) {
                if (!(constant->lambda > 0.0) || !(constant->length >= 0.0)) {
                    throw DomainError("ControlProtocol: constant segment needs gap > 0, length >= 0");
                }
            } else {
                const auto& fn = std::get<FunctionGap>(s);
                if (!fn.lambda || !(fn.length >= 0.0)) {
                    throw DomainError("ControlProtocol: function segment is empty");
                }
            }
        }
    }
};

} // namespace qreset
