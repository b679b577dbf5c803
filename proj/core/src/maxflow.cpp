#include "weakseg/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace weakseg {

namespace {

void check_finite_nonneg(const std::vector<float>& v, const char* what) {
    for (float x : v)
        if (!std::isfinite(x) || x < 0.0f)
            throw std::invalid_argument(std::string(what) + ": costs must be finite and >= 0");
}

} // namespace

void CostField::validate() const {
    if (ds.size() != dims.voxels() || dt.size() != dims.voxels())
        throw std::invalid_argument("CostField: data length != dims");
    check_finite_nonneg(ds, "CostField.ds");
    check_finite_nonneg(dt, "CostField.dt");
}

void PottsCostField::validate() const {
    if (n_labels < 2)
        throw std::invalid_argument("PottsCostField: n_labels must be >= 2");
    if (d.size() != std::size_t(n_labels) * dims.voxels())
        throw std::invalid_argument("PottsCostField: data length mismatch");
    check_finite_nonneg(d, "PottsCostField.d");
}

void SolverConfig::validate() const {
    if (alpha < 0.0) throw std::invalid_argument("SolverConfig: alpha must be >= 0");
    if (!(tolerance > 0.0)) throw std::invalid_argument("SolverConfig: tolerance must be > 0");
    if (max_iterations < 1) throw std::invalid_argument("SolverConfig: max_iterations must be >= 1");
    if (!(augmentation_weight > 0.0)) throw std::invalid_argument("SolverConfig: augmentation weight must be > 0");
    if (!(step_size > 0.0)) throw std::invalid_argument("SolverConfig: step size must be > 0");
}

namespace {

// Face-centred spatial flow storage: q[axis][i] is the flow across the face
// between voxel i and its +axis neighbour; entries on the last plane of each
// axis are unused and stay 0, so the discrete divergence needs no boundary
// special cases beyond the first plane.
struct FlowGrid {
    Dims3 dims;
    std::size_t n, sx, sy, sz;
    std::vector<float> qx, qy, qz, div;

    explicit FlowGrid(Dims3 d)
        : dims(d), n(d.voxels()), sx(1), sy(std::size_t(d.nx)),
          sz(std::size_t(d.nx) * std::size_t(d.ny)),
          qx(n, 0.0f), qy(n, 0.0f), qz(n, 0.0f), div(n, 0.0f) {}

    // q += step * grad(f), then clamp each component to [-cap, cap]. Returns
    // the summed absolute flow change; the multiplier alone is a misleading
    // convergence signal because the source/sink updates keep conservation
    // exact while the spatial flows are still growing toward their caps.
    double ascend_and_clamp(const std::vector<float>& f, float step, float cap) {
        const int nx = dims.nx, ny = dims.ny, nz = dims.nz;
        double change = 0.0;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y) {
                std::size_t row = sy * std::size_t(y) + sz * std::size_t(z);
                for (int x = 0; x + 1 < nx; ++x) {
                    std::size_t i = row + std::size_t(x);
                    float v = std::clamp(qx[i] + step * (f[i + sx] - f[i]), -cap, cap);
                    change += std::abs(double(v) - double(qx[i]));
                    qx[i] = v;
                }
            }
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y + 1 < ny; ++y) {
                std::size_t row = sy * std::size_t(y) + sz * std::size_t(z);
                for (int x = 0; x < nx; ++x) {
                    std::size_t i = row + std::size_t(x);
                    float v = std::clamp(qy[i] + step * (f[i + sy] - f[i]), -cap, cap);
                    change += std::abs(double(v) - double(qy[i]));
                    qy[i] = v;
                }
            }
        for (int z = 0; z + 1 < nz; ++z)
            for (int y = 0; y < ny; ++y) {
                std::size_t row = sy * std::size_t(y) + sz * std::size_t(z);
                for (int x = 0; x < nx; ++x) {
                    std::size_t i = row + std::size_t(x);
                    float v = std::clamp(qz[i] + step * (f[i + sz] - f[i]), -cap, cap);
                    change += std::abs(double(v) - double(qz[i]));
                    qz[i] = v;
                }
            }
        return change;
    }

    void recompute_div() {
        const int nx = dims.nx, ny = dims.ny, nz = dims.nz;
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y) {
                std::size_t row = sy * std::size_t(y) + sz * std::size_t(z);
                for (int x = 0; x < nx; ++x) {
                    std::size_t i = row + std::size_t(x);
                    float d = qx[i] + qy[i] + qz[i];
                    if (x > 0) d -= qx[i - sx];
                    if (y > 0) d -= qy[i - sy];
                    if (z > 0) d -= qz[i - sz];
                    div[i] = d;
                }
            }
    }
};

} // namespace

BinarySolveResult solve_binary(const CostField& cost, const SolverConfig& cfg) {
    cost.validate();
    cfg.validate();

    const std::size_t n = cost.dims.voxels();
    // Max-flow capacities: the source side carries the background cost and
    // the sink side the foreground cost, so that the dual multiplier u is the
    // foreground indicator of the stated energy.
    const std::vector<float>& cs = cost.dt;
    const std::vector<float>& ct = cost.ds;

    const float c = float(cfg.augmentation_weight);
    const float inv_c = 1.0f / c;
    const float step = float(cfg.step_size);
    const float cap = float(cfg.alpha);

    std::vector<float> u(n), ps(n), pt(n), f(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = cost.ds[i] <= cost.dt[i] ? 1.0f : 0.0f;
        ps[i] = std::min(cs[i], ct[i]);
        pt[i] = ps[i];
    }

    FlowGrid flow(cost.dims);

    ConvergenceReport report;
    report.min_u = 1.0;
    report.max_u = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        report.min_u = std::min<double>(report.min_u, u[i]);
        report.max_u = std::max<double>(report.max_u, u[i]);
    }

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i)
            f[i] = flow.div[i] - ps[i] + pt[i] - u[i] * inv_c;
        double flow_change = flow.ascend_and_clamp(f, step, cap);
        flow.recompute_div();

        double err_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            float d = flow.div[i];
            ps[i] = std::min(cs[i], d + pt[i] - u[i] * inv_c + inv_c);
            pt[i] = std::min(ct[i], ps[i] - d + u[i] * inv_c);
            float unew = std::clamp(u[i] - c * (d - ps[i] + pt[i]), 0.0f, 1.0f);
            err_sum += std::abs(double(unew) - double(u[i]));
            u[i] = unew;
        }
        // The projection keeps u in [0,1] exactly, so the recorded extremes
        // are those of the applied iterates.
        report.min_u = std::min(report.min_u, double(*std::min_element(u.begin(), u.end())));
        report.max_u = std::max(report.max_u, double(*std::max_element(u.begin(), u.end())));

        report.iterations = iter;
        report.residual = err_sum / double(n);
        if (report.residual <= cfg.tolerance && flow_change / double(n) <= cfg.tolerance) {
            report.converged = true;
            break;
        }
    }

    BinarySolveResult out;
    out.labels.dims = cost.dims;
    out.labels.n_labels = 1;
    out.labels.u = std::move(u);
    out.report = report;
    return out;
}

PottsSolveResult solve_potts(const PottsCostField& cost, const SolverConfig& cfg) {
    cost.validate();
    cfg.validate();

    const std::size_t n = cost.dims.voxels();
    const int nl = cost.n_labels;
    const float c = float(cfg.augmentation_weight);
    const float inv_c = 1.0f / c;
    const float step = float(cfg.step_size);
    const float cap = float(cfg.alpha);

    std::vector<float> u(std::size_t(nl) * n, 0.0f);
    std::vector<float> pt(std::size_t(nl) * n);
    std::vector<float> ps(n), f(n);
    std::vector<FlowGrid> flow;
    flow.reserve(std::size_t(nl));
    for (int l = 0; l < nl; ++l) flow.emplace_back(cost.dims);

    // Start from the pointwise argmin labelling with all sink flows saturated
    // at the cheapest cost.
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        float bestc = cost.at(0, i);
        for (int l = 1; l < nl; ++l) {
            float cl = cost.at(l, i);
            if (cl < bestc) { bestc = cl; best = l; }
        }
        ps[i] = bestc;
        u[std::size_t(best) * n + i] = 1.0f;
        for (int l = 0; l < nl; ++l) pt[std::size_t(l) * n + i] = bestc;
    }

    ConvergenceReport report;
    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        double flow_change = 0.0;
        for (int l = 0; l < nl; ++l) {
            const float* ul = &u[std::size_t(l) * n];
            const float* ptl = &pt[std::size_t(l) * n];
            FlowGrid& fl = flow[std::size_t(l)];
            for (std::size_t i = 0; i < n; ++i)
                f[i] = fl.div[i] - ps[i] + ptl[i] - ul[i] * inv_c;
            flow_change += fl.ascend_and_clamp(f, step, cap);
            fl.recompute_div();

            // Sink flow update for this label.
            const float* dl = &cost.d[std::size_t(l) * n];
            float* ptl_w = &pt[std::size_t(l) * n];
            for (std::size_t i = 0; i < n; ++i)
                ptl_w[i] = std::min(dl[i], ps[i] - fl.div[i] + ul[i] * inv_c);
        }

        // Unconstrained source flow: the optimality condition couples all
        // labels and restores the per-voxel simplex sum of u exactly.
        const float inv_nl = 1.0f / float(nl);
        for (std::size_t i = 0; i < n; ++i) {
            float acc = inv_c;
            for (int l = 0; l < nl; ++l)
                acc += flow[std::size_t(l)].div[i] + pt[std::size_t(l) * n + i] -
                       u[std::size_t(l) * n + i] * inv_c;
            ps[i] = acc * inv_nl;
        }

        double err_sum = 0.0;
        for (int l = 0; l < nl; ++l) {
            float* ul = &u[std::size_t(l) * n];
            const float* ptl = &pt[std::size_t(l) * n];
            const FlowGrid& fl = flow[std::size_t(l)];
            for (std::size_t i = 0; i < n; ++i) {
                float e = c * (fl.div[i] - ps[i] + ptl[i]);
                ul[i] -= e;
                err_sum += std::abs(double(e));
            }
        }

        report.iterations = iter;
        report.residual = err_sum / (double(n) * double(nl));
        if (report.residual <= cfg.tolerance &&
            flow_change / (double(n) * double(nl)) <= cfg.tolerance) {
            report.converged = true;
            break;
        }
    }

    // Final cleanup: clamp tiny constraint violations and renormalize so the
    // returned field satisfies the simplex invariant exactly.
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (int l = 0; l < nl; ++l) {
            float& v = u[std::size_t(l) * n + i];
            v = std::clamp(v, 0.0f, 1.0f);
            sum += v;
        }
        if (sum <= 0.0) {
            for (int l = 0; l < nl; ++l) u[std::size_t(l) * n + i] = 1.0f / float(nl);
        } else {
            float inv = float(1.0 / sum);
            for (int l = 0; l < nl; ++l) u[std::size_t(l) * n + i] *= inv;
        }
    }

    PottsSolveResult out;
    out.labels.dims = cost.dims;
    out.labels.n_labels = nl;
    out.labels.u = std::move(u);
    out.report = report;
    return out;
}

MaskVolume threshold_labels(const LabelField& field) {
    if (field.n_labels != 1)
        throw std::invalid_argument("threshold_labels: expected a binary field");
    MaskVolume out(field.dims);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = field.u[i] >= 0.5f ? 1 : 0;
    return out;
}

std::vector<std::int32_t> argmax_labels(const LabelField& field) {
    const std::size_t n = field.dims.voxels();
    std::vector<std::int32_t> out(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        float bestv = field.u[i];
        for (int l = 1; l < field.n_labels; ++l) {
            float v = field.u[std::size_t(l) * n + i];
            if (v > bestv) { bestv = v; best = l; }
        }
        out[i] = best;
    }
    return out;
}

double discrete_energy(const MaskVolume& labeling, const CostField& cost, double alpha) {
    if (!(labeling.dims == cost.dims))
        throw std::invalid_argument("discrete_energy: dims mismatch");
    const Dims3& d = cost.dims;
    double e = 0.0;
    for (std::size_t i = 0; i < labeling.data.size(); ++i)
        e += labeling.data[i] ? cost.ds[i] : cost.dt[i];

    const std::size_t sx = 1, sy = std::size_t(d.nx), sz = std::size_t(d.nx) * std::size_t(d.ny);
    long cuts = 0;
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                std::size_t i = std::size_t(x) + sy * std::size_t(y) + sz * std::size_t(z);
                if (x + 1 < d.nx && labeling.data[i] != labeling.data[i + sx]) ++cuts;
                if (y + 1 < d.ny && labeling.data[i] != labeling.data[i + sy]) ++cuts;
                if (z + 1 < d.nz && labeling.data[i] != labeling.data[i + sz]) ++cuts;
            }
    return e + alpha * double(cuts);
}

} // namespace weakseg
