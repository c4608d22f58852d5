#include "gift/analysis.hpp"

#include <cmath>

#include "gift/errors.hpp"
#include "gift/kernels.hpp"

namespace gift {

std::vector<double> PlaneBasis::point(double x, double y) const {
    std::vector<double> out = origin;
    const auto& k = kern::active();
    k.axpy(x, u1.data(), out.data(), out.size());
    k.axpy(y, u2.data(), out.data(), out.size());
    return out;
}

PlaneBasis plane_basis(const std::vector<double>& w0, const std::vector<double>& w1,
                       const std::vector<double>& w2) {
    if (w0.size() != w1.size() || w0.size() != w2.size())
        throw ContractError("plane_basis: parameter vectors differ in length");
    const auto& k = kern::active();
    const std::size_t n = w0.size();

    std::vector<double> d1(n), d2(n);
    k.sub(w1.data(), w0.data(), d1.data(), n);
    k.sub(w2.data(), w0.data(), d2.data(), n);
    const double n1 = std::sqrt(k.dot(d1.data(), d1.data(), n));
    const double n2 = std::sqrt(k.dot(d2.data(), d2.data(), n));
    if (n1 == 0.0 || n2 == 0.0)
        throw DegenerateInputError("plane_basis: coincident anchors");

    PlaneBasis b;
    b.origin = w0;
    b.u1.resize(n);
    k.scale(d1.data(), 1.0 / n1, b.u1.data(), n);
    b.w1_x = n1;

    b.w2_x = k.dot(d2.data(), b.u1.data(), n);
    std::vector<double> resid = d2;
    k.axpy(-b.w2_x, b.u1.data(), resid.data(), n);
    const double rn = std::sqrt(k.dot(resid.data(), resid.data(), n));
    // sin(angle between d1 and d2) = |resid| / |d2|
    if (rn <= 1e-6 * n2)
        throw DegenerateInputError("plane_basis: anchors are collinear");
    b.u2.resize(n);
    k.scale(resid.data(), 1.0 / rn, b.u2.data(), n);
    b.w2_y = rn;
    return b;
}

LandscapeGrid landscape_slice(const PlaneBasis& basis, const LossClosure& loss,
                              double x0, double x1, double y0, double y1,
                              int resolution_x, int resolution_y) {
    if (resolution_x < 2 || resolution_y < 2)
        throw ContractError("landscape_slice: resolution must be >= 2 per axis");
    LandscapeGrid grid;
    grid.xs.resize(static_cast<std::size_t>(resolution_x));
    grid.ys.resize(static_cast<std::size_t>(resolution_y));
    for (int i = 0; i < resolution_x; ++i)
        grid.xs[static_cast<std::size_t>(i)] =
            x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(resolution_x - 1);
    for (int i = 0; i < resolution_y; ++i)
        grid.ys[static_cast<std::size_t>(i)] =
            y0 + (y1 - y0) * static_cast<double>(i) / static_cast<double>(resolution_y - 1);
    grid.loss = Tensor(grid.ys.size(), grid.xs.size());
    for (std::size_t r = 0; r < grid.ys.size(); ++r)
        for (std::size_t c = 0; c < grid.xs.size(); ++c)
            grid.loss.at(r, c) = loss(basis.point(grid.xs[c], grid.ys[r]));
    return grid;
}

TraceReport distill_trace_report(const std::vector<TaskTrace>& traces) {
    TraceReport report;
    long global = 0;
    for (const TaskTrace& trace : traces) {
        bool first = true;
        for (const StepRecord& rec : trace.steps) {
            report.series.push_back({global, trace.task_index, rec.step, rec.distill_xent});
            if (first) {
                report.task_start_values.emplace_back(trace.task_index, rec.distill_xent);
                first = false;
            }
            ++global;
        }
    }
    return report;
}

} // namespace gift
