#include "weakseg/annotation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "weakseg/rng.hpp"

namespace weakseg {

const char* to_string(AnnotationKind k) {
    switch (k) {
    case AnnotationKind::SC: return "SC";
    case AnnotationKind::BD: return "BD";
    case AnnotationKind::RR: return "RR";
    case AnnotationKind::PS: return "PS";
    case AnnotationKind::NotVisible: return "NV";
    default: return "UNANNOTATED";
    }
}

const char* to_string(AnnotationType t) {
    switch (t) {
    case AnnotationType::SCOnly: return "sc";
    case AnnotationType::SCBD: return "bd";
    case AnnotationType::SCRR: return "rr";
    default: return "ps";
    }
}

std::optional<AnnotationKind> annotation_kind_from_string(const std::string& s) {
    if (s == "SC") return AnnotationKind::SC;
    if (s == "BD") return AnnotationKind::BD;
    if (s == "RR") return AnnotationKind::RR;
    if (s == "PS") return AnnotationKind::PS;
    if (s == "NV") return AnnotationKind::NotVisible;
    if (s == "UNANNOTATED") return AnnotationKind::Unannotated;
    return std::nullopt;
}

std::optional<AnnotationType> annotation_type_from_string(const std::string& s) {
    if (s == "sc") return AnnotationType::SCOnly;
    if (s == "bd") return AnnotationType::SCBD;
    if (s == "rr") return AnnotationType::SCRR;
    if (s == "ps") return AnnotationType::SCPS;
    return std::nullopt;
}

int AnnotationPlan::stride() const {
    return std::max(1, int(std::lround(1.0 / ar)));
}

void AnnotationPlan::validate() const {
    if (!(ar > 0.0) || ar > 1.0)
        throw std::invalid_argument("AnnotationPlan: ar must be in (0,1]");
    if (err < 0.0 || err > 1.0)
        throw std::invalid_argument("AnnotationPlan: err must be in [0,1]");
    if (bd_splits < 1)
        throw std::invalid_argument("AnnotationPlan: bd_splits must be >= 1");
    if (!(sc_max_area_fraction > 0.0))
        throw std::invalid_argument("AnnotationPlan: sc_max_area_fraction must be > 0");
}

std::vector<std::pair<int, int>> select_slices(const AnnotationPlan& plan, const Dims3& dims) {
    plan.validate();
    const int k = plan.stride();
    std::vector<std::pair<int, int>> out;
    for (int d = 0; d < 3; ++d)
        for (int idx = 0; idx < dims.extent(d); idx += k)
            out.emplace_back(d, idx);
    return out;
}

SliceAnnotation simulate_sc(const Mask2D& m, double max_area_fraction) {
    SliceAnnotation ann;
    ann.kind = AnnotationKind::NotVisible;
    const std::size_t base_area = m.count();
    if (base_area == 0) return ann;

    const double limit = max_area_fraction * double(base_area);
    Mask2D cur = m;
    while (double(cur.count()) > limit) {
        Mask2D next = erode_mask(cur, 1);
        if (next.empty_mask()) break;
        cur = std::move(next);
    }
    ann.kind = AnnotationKind::SC;
    ann.mask = std::move(cur);
    return ann;
}

namespace {

// Grid cell boundaries for ds splits over n pixels: equal cells of floor(n/ds)
// with the remainder absorbed by the last cell.
std::vector<std::pair<int, int>> grid_cells_1d(int n, int ds) {
    std::vector<std::pair<int, int>> cells;
    int base = n / ds;
    for (int i = 0; i < ds; ++i) {
        int lo = i * base;
        int hi = (i + 1 == ds) ? n : (i + 1) * base;
        cells.emplace_back(lo, hi);
    }
    return cells;
}

} // namespace

SliceAnnotation simulate_bd(const Mask2D& m, int ds) {
    if (ds < 1) throw std::invalid_argument("simulate_bd: ds must be >= 1");
    SliceAnnotation ann;
    ann.kind = AnnotationKind::NotVisible;
    if (m.empty_mask()) return ann;

    auto row_cells = grid_cells_1d(m.nb, ds);
    auto col_cells = grid_cells_1d(m.na, ds);
    Mask2D out(m.na, m.nb);
    for (const auto& [r0, r1] : row_cells) {
        for (const auto& [c0, c1] : col_cells) {
            bool hit = false;
            for (int r = r0; r < r1 && !hit; ++r)
                for (int c = c0; c < c1; ++c)
                    if (m.at(r, c)) { hit = true; break; }
            if (!hit) continue;
            for (int r = r0; r < r1; ++r)
                for (int c = c0; c < c1; ++c)
                    out.at(r, c) = 1;
        }
    }
    ann.kind = AnnotationKind::BD;
    ann.mask = std::move(out);
    return ann;
}

SliceAnnotation simulate_rr(const Mask2D& m) {
    SliceAnnotation ann;
    ann.kind = AnnotationKind::NotVisible;
    auto rect = bounding_rect(m);
    if (!rect) return ann;
    ann.kind = AnnotationKind::RR;
    ann.mask = filled_rect(m.na, m.nb, *rect);
    return ann;
}

SliceAnnotation simulate_ps(const Mask2D& m, const ComponentMap& components) {
    if (components.na != m.na || components.nb != m.nb)
        throw std::invalid_argument("simulate_ps: component map dims mismatch");
    SliceAnnotation ann;
    ann.kind = AnnotationKind::NotVisible;
    if (m.empty_mask()) return ann;

    std::vector<std::uint8_t> selected(std::size_t(components.count) + 1, 0);
    for (std::size_t i = 0; i < m.data.size(); ++i)
        if (m.data[i]) selected[std::size_t(components.labels[i])] = 1;
    Mask2D out(m.na, m.nb);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = selected[std::size_t(components.labels[i])];
    ann.kind = AnnotationKind::PS;
    ann.mask = std::move(out);
    return ann;
}

std::vector<std::int32_t> intensity_label_map(const VolumeGrid& vol, int n_labels,
                                              double alpha_potts) {
    if (n_labels < 2)
        throw std::invalid_argument("intensity_label_map: n_labels must be >= 2");
    vol.validate();

    // Histogram of the whole volume; label intensities are the centers of the
    // n_labels most frequent bins (ties toward the lower bin).
    const int bins = 256;
    auto [mn_it, mx_it] = std::minmax_element(vol.data.begin(), vol.data.end());
    const double lo = *mn_it, hi = *mx_it;
    const double width = (hi - lo) / bins;
    std::vector<std::size_t> hist(bins, 0);
    for (float v : vol.data) {
        int b = width > 0.0 ? std::min(bins - 1, int((v - lo) / width)) : 0;
        ++hist[std::size_t(std::max(0, b))];
    }
    std::vector<int> order(bins);
    for (int i = 0; i < bins; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return hist[std::size_t(a)] > hist[std::size_t(b)]; });

    std::vector<double> centers(static_cast<std::size_t>(n_labels));
    for (int l = 0; l < n_labels; ++l) {
        int b = order[std::size_t(std::min(l, bins - 1))];
        centers[std::size_t(l)] = lo + (double(b) + 0.5) * width;
    }

    PottsCostField cost(vol.dims, n_labels);
    for (int l = 0; l < n_labels; ++l) {
        float* d = &cost.d[std::size_t(l) * vol.dims.voxels()];
        const double center = centers[std::size_t(l)];
        for (std::size_t i = 0; i < vol.data.size(); ++i)
            d[i] = float(std::abs(double(vol.data[i]) - center));
    }

    SolverConfig cfg;
    cfg.alpha = alpha_potts;
    PottsSolveResult solved = solve_potts(cost, cfg);
    return argmax_labels(solved.labels);
}

Presegmentation compute_presegmentation(const VolumeGrid& vol, int n_labels,
                                        double alpha_potts) {
    std::vector<std::int32_t> labels = intensity_label_map(vol, n_labels, alpha_potts);

    Presegmentation out;
    out.dims = vol.dims;
    std::vector<std::int32_t> plane;
    for (int d = 0; d < 3; ++d) {
        const int na = d == 0 ? vol.dims.ny : vol.dims.nx;
        const int nb = d == 2 ? vol.dims.ny : vol.dims.nz;
        out.maps[std::size_t(d)].reserve(std::size_t(vol.dims.extent(d)));
        for (int idx = 0; idx < vol.dims.extent(d); ++idx) {
            plane.assign(std::size_t(na) * std::size_t(nb), 0);
            for (int row = 0; row < nb; ++row)
                for (int col = 0; col < na; ++col) {
                    int xyz[3];
                    xyz[d] = idx;
                    switch (d) {
                    case 0: xyz[1] = col; xyz[2] = row; break;
                    case 1: xyz[0] = col; xyz[2] = row; break;
                    default: xyz[0] = col; xyz[1] = row; break;
                    }
                    std::size_t vi = std::size_t(xyz[0]) +
                                     std::size_t(vol.dims.nx) *
                                         (std::size_t(xyz[1]) + std::size_t(vol.dims.ny) * std::size_t(xyz[2]));
                    plane[std::size_t(col) + std::size_t(na) * std::size_t(row)] = labels[vi];
                }
            out.maps[std::size_t(d)].push_back(connected_components_labelled(na, nb, plane));
        }
    }
    return out;
}

void ensure_presegmentation(SubjectRecord& subject, int n_labels, double alpha_potts) {
    if (!subject.preseg)
        subject.preseg = std::make_shared<Presegmentation>(
            compute_presegmentation(subject.volume, n_labels, alpha_potts));
}

namespace {

// Simulates the (SC + companion) records for one slice from a given organ
// mask. Returns a single NotVisible record when the organ is absent.
void emit_unit(std::vector<SliceAnnotation>& out, const SubjectRecord& subject,
               const AnnotationPlan& plan, int d, int idx, const Mask2D& organ_slice,
               bool corrupted) {
    if (organ_slice.empty_mask()) {
        SliceAnnotation nv;
        nv.direction = d;
        nv.index = idx;
        nv.kind = AnnotationKind::NotVisible;
        nv.corrupted = corrupted;
        out.push_back(std::move(nv));
        return;
    }

    SliceAnnotation sc = simulate_sc(organ_slice, plan.sc_max_area_fraction);
    sc.direction = d;
    sc.index = idx;
    sc.corrupted = corrupted;
    out.push_back(std::move(sc));

    SliceAnnotation comp;
    switch (plan.type) {
    case AnnotationType::SCOnly:
        return;
    case AnnotationType::SCBD:
        comp = simulate_bd(organ_slice, plan.bd_splits);
        break;
    case AnnotationType::SCRR:
        comp = simulate_rr(organ_slice);
        break;
    case AnnotationType::SCPS:
        if (!subject.preseg)
            throw std::logic_error("PS annotation requires a pre-segmentation; call ensure_presegmentation first");
        comp = simulate_ps(organ_slice, subject.preseg->at(d, idx));
        break;
    }
    comp.direction = d;
    comp.index = idx;
    comp.corrupted = corrupted;
    out.push_back(std::move(comp));
}

} // namespace

void annotate_subject(SubjectRecord& subject, const AnnotationPlan& plan) {
    plan.validate();
    if (subject.organs.empty() || subject.target >= subject.organs.size())
        throw std::invalid_argument("annotate_subject: subject has no target organ");
    if (plan.type == AnnotationType::SCPS)
        ensure_presegmentation(subject);

    subject.annotations.clear();
    const MaskVolume& target = subject.target_mask();
    for (auto [d, idx] : select_slices(plan, subject.volume.dims)) {
        Mask2D slice = extract_slice(target, d, idx);
        emit_unit(subject.annotations, subject, plan, d, idx, slice, false);
    }
}

void apply_error_model(SubjectRecord& subject, const AnnotationPlan& plan) {
    plan.validate();
    if (plan.err == 0.0) return;

    // Group existing records into per-slice units, preserving order.
    std::vector<std::pair<int, int>> units;
    for (const auto& ann : subject.annotations) {
        std::pair<int, int> key{ann.direction, ann.index};
        if (units.empty() || units.back() != key) units.push_back(key);
    }

    std::vector<SliceAnnotation> rewritten;
    rewritten.reserve(subject.annotations.size());
    for (auto [d, idx] : units) {
        Rng rng(mix_seed(plan.seed, std::uint64_t(subject.id), std::uint64_t(d),
                         std::uint64_t(idx)));
        const bool corrupt = rng.uniform() < plan.err;
        if (!corrupt) {
            for (const auto& ann : subject.annotations)
                if (ann.direction == d && ann.index == idx) rewritten.push_back(ann);
            continue;
        }

        // Wrong-organ annotation from a distractor visible in this slice, or a
        // false "not visible" answer when none is.
        std::vector<Mask2D> visible;
        for (std::size_t o = 0; o < subject.organs.size(); ++o) {
            if (o == subject.target) continue;
            Mask2D s = extract_slice(subject.organs[o].mask, d, idx);
            if (!s.empty_mask()) visible.push_back(std::move(s));
        }
        if (visible.empty()) {
            SliceAnnotation nv;
            nv.direction = d;
            nv.index = idx;
            nv.kind = AnnotationKind::NotVisible;
            nv.corrupted = true;
            rewritten.push_back(std::move(nv));
        } else {
            const Mask2D& organ_slice = visible[rng.uniform_int(visible.size())];
            emit_unit(rewritten, subject, plan, d, idx, organ_slice, true);
        }
    }
    subject.annotations = std::move(rewritten);
}

void simulate_annotations(SubjectRecord& subject, const AnnotationPlan& plan) {
    annotate_subject(subject, plan);
    apply_error_model(subject, plan);
}

// --- manifest I/O ---------------------------------------------------------------

void write_annotation_manifest(const std::filesystem::path& path, int subject_id,
                               const Dims3& dims,
                               const std::vector<SliceAnnotation>& annotations) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write annotation manifest: " + path.string());
    out << "WSANN 1\n";
    out << "subject " << subject_id << "\n";
    out << "dims " << dims.nx << " " << dims.ny << " " << dims.nz << "\n";
    out << "records " << annotations.size() << "\n";
    for (const auto& ann : annotations) {
        out << "ann " << ann.direction << " " << ann.index << " " << to_string(ann.kind)
            << " " << (ann.corrupted ? 1 : 0);
        if (ann.mask) {
            out << " " << ann.mask->na << " " << ann.mask->nb;
            // Alternating run lengths starting with zeros.
            std::uint8_t value = 0;
            std::size_t run = 0;
            for (std::uint8_t px : ann.mask->data) {
                std::uint8_t bit = px ? 1 : 0;
                if (bit == value) {
                    ++run;
                } else {
                    out << " " << run;
                    value = bit;
                    run = 1;
                }
            }
            out << " " << run;
        }
        out << "\n";
    }
    if (!out)
        throw std::runtime_error("short write: " + path.string());
}

AnnotationManifest read_annotation_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open annotation manifest: " + path.string());
    AnnotationManifest m;
    std::string line;
    if (!std::getline(in, line) || line != "WSANN 1")
        throw std::runtime_error("annotation manifest: bad magic in " + path.string());
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "subject") {
            ls >> m.subject_id;
        } else if (tag == "dims") {
            ls >> m.dims.nx >> m.dims.ny >> m.dims.nz;
        } else if (tag == "records") {
            ls >> expected;
        } else if (tag == "ann") {
            SliceAnnotation ann;
            std::string kind;
            int corrupted = 0;
            if (!(ls >> ann.direction >> ann.index >> kind >> corrupted))
                throw std::runtime_error("annotation manifest: bad record line");
            auto k = annotation_kind_from_string(kind);
            if (!k)
                throw std::runtime_error("annotation manifest: unknown kind " + kind);
            ann.kind = *k;
            ann.corrupted = corrupted != 0;
            int na = 0, nb = 0;
            if (ls >> na >> nb) {
                Mask2D mask(na, nb);
                std::size_t pos = 0;
                std::uint8_t value = 0;
                std::size_t run = 0;
                while (ls >> run) {
                    if (pos + run > mask.data.size())
                        throw std::runtime_error("annotation manifest: RLE overruns mask");
                    std::fill_n(mask.data.begin() + std::ptrdiff_t(pos), run, value);
                    pos += run;
                    value = value ? 0 : 1;
                }
                if (pos != mask.data.size())
                    throw std::runtime_error("annotation manifest: RLE underruns mask");
                ann.mask = std::move(mask);
            }
            m.annotations.push_back(std::move(ann));
        }
    }
    if (m.annotations.size() != expected)
        throw std::runtime_error("annotation manifest: record count mismatch");
    return m;
}

} // namespace weakseg
