#include "uscnn/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace uscnn {

FlowMetrics compute_metrics(const FlowField& estimate, const FlowField& truth) {
    if (!estimate.u.same_shape(truth.u)) {
        throw ShapeError("compute_metrics: extent mismatch, estimate " +
                         shape_string(estimate.u.shape) + " vs truth " + shape_string(truth.u.shape));
    }
    constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
    double epe_sum[2] = {0.0, 0.0};
    double ang_sum[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};

    for (std::size_t i = 0; i < truth.u.data.size(); ++i) {
        const double tu = truth.u.data[i], tv = truth.v.data[i];
        if (!std::isfinite(tu) || !std::isfinite(tv)) continue;  // invalid ground truth
        const double eu = estimate.u.data[i], ev = estimate.v.data[i];
        const double epe = std::hypot(eu - tu, ev - tv);
        double cosine = (eu * tu + ev * tv + 1.0) /
                        std::sqrt((eu * eu + ev * ev + 1.0) * (tu * tu + tv * tv + 1.0));
        cosine = std::clamp(cosine, -1.0, 1.0);
        const double angle = std::acos(cosine) * kRadToDeg;
        const int bucket = std::hypot(tu, tv) < 5.0 ? 0 : 1;
        epe_sum[bucket] += epe;
        ang_sum[bucket] += angle;
        count[bucket] += 1;
    }

    FlowMetrics m;
    m.count_lt5 = count[0];
    m.count_ge5 = count[1];
    m.aee_lt5 = count[0] ? epe_sum[0] / static_cast<double>(count[0]) : 0.0;
    m.aee_ge5 = count[1] ? epe_sum[1] / static_cast<double>(count[1]) : 0.0;
    m.aae_lt5 = count[0] ? ang_sum[0] / static_cast<double>(count[0]) : 0.0;
    m.aae_ge5 = count[1] ? ang_sum[1] / static_cast<double>(count[1]) : 0.0;
    const std::size_t total = count[0] + count[1];
    m.aee_tot = total ? (epe_sum[0] + epe_sum[1]) / static_cast<double>(total) : 0.0;
    m.aae_tot = total ? (ang_sum[0] + ang_sum[1]) / static_cast<double>(total) : 0.0;
    return m;
}

}  // namespace uscnn
