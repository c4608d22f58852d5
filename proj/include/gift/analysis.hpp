#pragma once

#include <functional>
#include <vector>

#include "gift/trainer.hpp"

namespace gift {

// Orthonormal frame for the plane through three parameter vectors, with the
// anchors' coordinates in that frame.
struct PlaneBasis {
    std::vector<double> origin; // W0
    std::vector<double> u1;
    std::vector<double> u2;
    double w1_x = 0;            // W1 = origin + w1_x * u1
    double w2_x = 0, w2_y = 0;  // W2 = origin + w2_x * u1 + w2_y * u2

    std::vector<double> point(double x, double y) const;
};

// Gram-Schmidt on (W1 - W0, W2 - W0). Collinear anchors (angle <= 1e-6 rad)
// are a degenerate plane.
PlaneBasis plane_basis(const std::vector<double>& w0, const std::vector<double>& w1,
                       const std::vector<double>& w2);

using LossClosure = std::function<double(const std::vector<double>&)>;

struct LandscapeGrid {
    std::vector<double> xs;
    std::vector<double> ys;
    Tensor loss; // ys.size() rows x xs.size() cols
};

LandscapeGrid landscape_slice(const PlaneBasis& basis, const LossClosure& loss,
                              double x0, double x1, double y0, double y1,
                              int resolution_x, int resolution_y);

// Distillation cross-entropy series across the task sequence, with
// task-boundary markers and the series value at every task start.
struct TraceReport {
    struct Point {
        long global_step;
        int task;
        int step;
        double distill_xent;
    };
    std::vector<Point> series;
    std::vector<std::pair<int, double>> task_start_values;
};

TraceReport distill_trace_report(const std::vector<TaskTrace>& traces);

} // namespace gift
