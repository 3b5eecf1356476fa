#include "lonesense/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "lonesense/core.hpp"
#include "lonesense/csv.hpp"

namespace lonesense {

namespace {
void check_sizes(std::span<const double> pred, std::span<const double> truth) {
    if (pred.empty() || truth.empty()) throw ValidationError("metrics: empty vectors");
    if (pred.size() != truth.size()) {
        throw ValidationError("metrics: size mismatch " + std::to_string(pred.size()) + " vs " +
                              std::to_string(truth.size()));
    }
}
}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_sizes(pred, truth);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += std::fabs(pred[i] - truth[i]);
    return sum / static_cast<double>(pred.size());
}

double mbe(std::span<const double> pred, std::span<const double> truth) {
    check_sizes(pred, truth);
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) sum += pred[i] - truth[i];
    return sum / static_cast<double>(pred.size());
}

Metrics compute_metrics(std::span<const double> pred, std::span<const double> truth) {
    Metrics m{mae(pred, truth), mbe(pred, truth), pred.size()};
    if (std::fabs(m.mbe) > m.mae + 1e-12) {
        throw std::logic_error("bias bound violated: |MBE| > MAE");
    }
    return m;
}

std::optional<double> change_rate_pct(double zero_value, double one_value) {
    if (zero_value == 0.0) return std::nullopt;
    return (one_value - zero_value) / zero_value * 100.0;
}

std::string fmt_change_rate(std::optional<double> rate) {
    if (!rate) return "";
    return fmt_fixed(*rate, 1) + "%";
}

}  // namespace lonesense
