#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

namespace lonesense {

struct Metrics {
    double mae = 0;
    double mbe = 0;
    std::size_t n = 0;
};

double mae(std::span<const double> pred, std::span<const double> truth);
double mbe(std::span<const double> pred, std::span<const double> truth);

// Computes both and enforces |MBE| <= MAE, which must hold for every pair by
// the triangle inequality on means.
Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth);

// (one - zero) / zero * 100; nullopt when the zero-shot value is 0.
std::optional<double> change_rate_pct(double zero_value, double one_value);

// signed, one decimal, with a trailing percent sign; empty for nullopt
std::string fmt_change_rate(std::optional<double> rate);

}  // namespace lonesense
