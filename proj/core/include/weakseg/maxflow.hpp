#ifndef WEAKSEG_MAXFLOW_HPP
#define WEAKSEG_MAXFLOW_HPP

#include <cstdint>
#include <vector>

#include "weakseg/volume.hpp"

namespace weakseg {

// Voxel-wise data terms for the binary foreground/background model.
// ds is the cost of labelling a voxel foreground, dt the cost of labelling it
// background; both must be finite and non-negative.
struct CostField {
    Dims3 dims;
    std::vector<float> ds;
    std::vector<float> dt;

    CostField() = default;
    explicit CostField(Dims3 d)
        : dims(d), ds(d.voxels(), 0.0f), dt(d.voxels(), 0.0f) {}

    void validate() const;
};

// Per-voxel, per-label costs for the multi-region (Potts) model. Costs are
// stored label-major: d[L*voxels + i].
struct PottsCostField {
    Dims3 dims;
    int n_labels = 0;
    std::vector<float> d;

    PottsCostField() = default;
    PottsCostField(Dims3 dims_, int n_labels_)
        : dims(dims_), n_labels(n_labels_),
          d(std::size_t(n_labels_) * dims_.voxels(), 0.0f) {}

    float& at(int label, std::size_t voxel) { return d[std::size_t(label) * dims.voxels() + voxel]; }
    float at(int label, std::size_t voxel) const { return d[std::size_t(label) * dims.voxels() + voxel]; }

    void validate() const;
};

struct SolverConfig {
    double alpha = 1.0;              // total-variation weight
    int max_iterations = 2000;
    double tolerance = 1e-4;         // mean absolute multiplier update per voxel
    double augmentation_weight = 0.2; // c in the augmented-Lagrangian steps
    double step_size = 0.11;         // gradient step for the spatial flows

    void validate() const;
};

// Relaxed labelling. n_labels == 1 holds a binary u(x) in [0,1]; otherwise
// one channel per label, stored label-major like PottsCostField.
struct LabelField {
    Dims3 dims;
    int n_labels = 1;
    std::vector<float> u;

    float at(int label, std::size_t voxel) const { return u[std::size_t(label) * dims.voxels() + voxel]; }
};

struct ConvergenceReport {
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    // Extremes of the multiplier seen over all iterations (binary solver).
    double min_u = 0.0;
    double max_u = 0.0;
};

struct BinarySolveResult {
    LabelField labels;
    ConvergenceReport report;
};

struct PottsSolveResult {
    LabelField labels;
    ConvergenceReport report;
};

// Minimizes  sum_x [ ds(x) u(x) + dt(x) (1-u(x)) ] + alpha * TV(u)  over
// u in [0,1], with anisotropic (per-axis L1) total variation on forward
// differences. Uses the augmented-Lagrangian continuous max-flow iteration
// with source, sink and spatial flow fields; the relaxation is exact for this
// discretization, so thresholding the result at 0.5 yields a discrete
// minimizer. Non-convergence within max_iterations is reported via the
// `converged` flag, not an error.
BinarySolveResult solve_binary(const CostField& cost, const SolverConfig& cfg);

// Multi-region counterpart: minimizes  sum_L sum_x [ d_L(x) u_L(x) ] +
// alpha * sum_L TV(u_L)  subject to the per-voxel label simplex constraint.
PottsSolveResult solve_potts(const PottsCostField& cost, const SolverConfig& cfg);

// Binary discretization: foreground iff u(x) >= 0.5.
MaskVolume threshold_labels(const LabelField& field);

// Potts discretization: argmax over labels, ties broken toward the lower
// label index.
std::vector<std::int32_t> argmax_labels(const LabelField& field);

// Discrete evaluation of the binary energy for a given hard labelling:
// data terms plus alpha times the number of forward-difference label changes
// along each axis.
double discrete_energy(const MaskVolume& labeling, const CostField& cost, double alpha);

} // namespace weakseg

#endif
