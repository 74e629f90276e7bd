#pragma once

#include <optional>
#include <vector>

#include "common.hpp"
#include "tensor.hpp"

namespace vdiff {

// temporal_flicker: mean over consecutive frame pairs of the mean absolute
// difference; undefined (nullopt) for single-frame videos.
// first_frame_fidelity: mean absolute difference between frame 1 and the
// conditioning frame.
template <class T>
struct MetricsReport {
    std::optional<double> temporal_flicker;
    std::vector<double> flicker_series;  // N-1 per-pair values
    double first_frame_fidelity = 0.0;
    std::vector<double> fidelity_series;  // N per-frame values vs reference
};

template <class T>
double mean_abs_diff(const T* a, const T* b, i64 n) {
    double acc = 0;
    for (i64 i = 0; i < n; ++i) acc += std::abs(double(a[i]) - double(b[i]));
    return acc / double(n);
}

template <class T>
MetricsReport<T> compute_metrics(const Tensor<T>& video, const Tensor<T>& reference_frame) {
    check_arg(video.rank() == 4, "compute_metrics: video must be [N,C,H,W]");
    check_arg(reference_frame.rank() == 3, "compute_metrics: reference must be [C,H,W]");
    const i64 n = video.dim(0);
    const i64 per = video.dim(1) * video.dim(2) * video.dim(3);
    check_arg(per == reference_frame.size(), "compute_metrics: reference shape mismatch");
    check_arg(n >= 1, "compute_metrics: empty video");

    MetricsReport<T> report;
    for (i64 f = 0; f + 1 < n; ++f)
        report.flicker_series.push_back(
            mean_abs_diff(video.data() + f * per, video.data() + (f + 1) * per, per));
    if (!report.flicker_series.empty()) {
        double acc = 0;
        for (double v : report.flicker_series) acc += v;
        report.temporal_flicker = acc / double(report.flicker_series.size());
    }
    for (i64 f = 0; f < n; ++f)
        report.fidelity_series.push_back(
            mean_abs_diff(video.data() + f * per, reference_frame.data(), per));
    report.first_frame_fidelity = report.fidelity_series[0];
    return report;
}

}  // namespace vdiff
