#include "weakseg/atlas_qc.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "weakseg/parallel.hpp"

namespace weakseg {

void QCConfig::validate() const {
    if (n_similar < 1) throw std::invalid_argument("QCConfig: n_similar must be >= 1");
    if (n_iterations < 1) throw std::invalid_argument("QCConfig: n_iterations must be >= 1");
    if (consensus_threshold < 0.0 || consensus_threshold >= 1.0)
        throw std::invalid_argument("QCConfig: consensus_threshold must be in [0,1)");
}

namespace {

template <typename M>
double dice_impl(const M& a, const M& b) {
    std::size_t inter = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += va && vb;
        na += va;
        nb += vb;
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * double(inter) / double(na + nb);
}

} // namespace

double dice(const Mask2D& a, const Mask2D& b) {
    if (a.na != b.na || a.nb != b.nb)
        throw std::invalid_argument("dice: dims mismatch");
    return dice_impl(a, b);
}

double dice(const MaskVolume& a, const MaskVolume& b) {
    if (!(a.dims == b.dims))
        throw std::invalid_argument("dice: dims mismatch");
    return dice_impl(a, b);
}

std::optional<SliceUnit> slice_unit(const SubjectRecord& subject, int direction, int index) {
    const SliceAnnotation* sc = nullptr;
    const SliceAnnotation* companion = nullptr;
    const SliceAnnotation* nv = nullptr;
    for (const auto& ann : subject.annotations) {
        if (ann.direction != direction || ann.index != index) continue;
        switch (ann.kind) {
        case AnnotationKind::SC: sc = &ann; break;
        case AnnotationKind::NotVisible: nv = &ann; break;
        case AnnotationKind::BD:
        case AnnotationKind::RR:
        case AnnotationKind::PS: companion = &ann; break;
        default: break;
        }
    }
    const SliceAnnotation* rep = companion ? companion : (sc ? sc : nv);
    if (!rep) return std::nullopt;

    SliceUnit unit;
    unit.direction = direction;
    unit.index = index;
    unit.kind = rep->kind;
    unit.corrupted = rep->corrupted;
    if (rep->mask) {
        unit.mask = *rep->mask;
    } else {
        // NotVisible: an empty mask with the slice's shape.
        Dims3 dims = subject.volume.dims;
        int na = direction == 0 ? dims.ny : dims.nx;
        int nb = direction == 2 ? dims.ny : dims.nz;
        unit.mask = Mask2D(na, nb);
    }
    return unit;
}

NeighborCache build_neighbor_cache(const AtlasDatabase& db) {
    NeighborCache cache;
    const int n_subj = int(db.subjects.size());
    const Dims3 dims = db.dims();
    for (int d = 0; d < 3; ++d) {
        auto& per_dir = cache.ranked[std::size_t(d)];
        per_dir.resize(std::size_t(dims.extent(d)));
        for (int idx = 0; idx < dims.extent(d); ++idx) {
            std::vector<SliceImage> slices;
            slices.reserve(std::size_t(n_subj));
            for (const auto& s : db.subjects)
                slices.push_back(extract_slice(s.volume, d, idx));

            auto& per_query = per_dir[std::size_t(idx)];
            per_query.resize(std::size_t(n_subj));
            std::vector<std::pair<double, int>> ranking;
            for (int i = 0; i < n_subj; ++i) {
                ranking.clear();
                for (int q = 0; q < n_subj; ++q) {
                    if (q == i) continue;
                    double ssd = 0.0;
                    const auto& a = slices[std::size_t(i)].data;
                    const auto& b = slices[std::size_t(q)].data;
                    for (std::size_t p = 0; p < a.size(); ++p) {
                        double diff = double(a[p]) - double(b[p]);
                        ssd += diff * diff;
                    }
                    ranking.emplace_back(ssd, q);
                }
                std::sort(ranking.begin(), ranking.end());
                auto& out = per_query[std::size_t(i)];
                out.reserve(ranking.size());
                for (const auto& [ssd, q] : ranking) out.push_back(q);
            }
        }
    }
    return cache;
}

std::vector<int> retrieve_similar(const AtlasDatabase& db, int query_subject, int direction,
                                  int index, int n, const NeighborCache* cache) {
    std::vector<int> ordered;
    if (cache) {
        ordered = cache->ranked[std::size_t(direction)][std::size_t(index)]
                              [std::size_t(query_subject)];
    } else {
        SliceImage query = extract_slice(db.subjects[std::size_t(query_subject)].volume,
                                         direction, index);
        std::vector<std::pair<double, int>> ranking;
        for (int q = 0; q < int(db.subjects.size()); ++q) {
            if (q == query_subject) continue;
            SliceImage cand = extract_slice(db.subjects[std::size_t(q)].volume, direction, index);
            double ssd = 0.0;
            for (std::size_t p = 0; p < query.data.size(); ++p) {
                double diff = double(query.data[p]) - double(cand.data[p]);
                ssd += diff * diff;
            }
            ranking.emplace_back(ssd, q);
        }
        std::sort(ranking.begin(), ranking.end());
        ordered.reserve(ranking.size());
        for (const auto& [ssd, q] : ranking) ordered.push_back(q);
    }

    std::vector<int> out;
    for (int q : ordered) {
        if (int(out.size()) >= n) break;
        if (slice_unit(db.subjects[std::size_t(q)], direction, index))
            out.push_back(q);
    }
    return out;
}

Mask2D consensus_fusion(const std::vector<const Mask2D*>& masks, double threshold) {
    if (masks.empty())
        throw std::invalid_argument("consensus_fusion: empty annotation list");
    const Mask2D& first = *masks.front();
    std::vector<int> votes(first.data.size(), 0);
    for (const Mask2D* m : masks) {
        if (m->na != first.na || m->nb != first.nb)
            throw std::invalid_argument("consensus_fusion: dims mismatch");
        for (std::size_t i = 0; i < m->data.size(); ++i) votes[i] += m->data[i] != 0;
    }
    Mask2D out(first.na, first.nb);
    const double cut = threshold * double(masks.size());
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = double(votes[i]) > cut ? 1 : 0;
    return out;
}

OutlierDecision detect_outlier(const AtlasDatabase& db, int query_subject, int direction,
                               int index, const QCConfig& cfg, const NeighborCache* cache) {
    cfg.validate();
    auto query_unit = slice_unit(db.subjects[std::size_t(query_subject)], direction, index);
    if (!query_unit)
        throw std::invalid_argument("detect_outlier: query slice is unannotated");

    std::vector<int> members =
        retrieve_similar(db, query_subject, direction, index, cfg.n_similar, cache);
    OutlierDecision decision;
    if (members.empty()) {
        // No peers to compare against; keep the annotation.
        decision.outlier = false;
        decision.dice_vs_consensus = 1.0;
        decision.mu = 0.0;
        return decision;
    }

    std::vector<SliceUnit> units;
    units.reserve(members.size());
    for (int q : members)
        units.push_back(*slice_unit(db.subjects[std::size_t(q)], direction, index));

    std::vector<std::size_t> active(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) active[i] = i;

    Mask2D consensus;
    double mu = 0.0;
    for (int it = 0; it < cfg.n_iterations; ++it) {
        std::vector<const Mask2D*> masks;
        masks.reserve(active.size());
        for (std::size_t i : active) masks.push_back(&units[i].mask);
        consensus = consensus_fusion(masks, cfg.consensus_threshold);

        std::vector<double> dices(active.size());
        double sum = 0.0;
        for (std::size_t k = 0; k < active.size(); ++k) {
            dices[k] = dice(consensus, units[active[k]].mask);
            sum += dices[k];
        }
        mu = sum / double(active.size());

        // Keep members at or above the mean; the best member always survives,
        // so the subset never empties once non-empty.
        std::vector<std::size_t> kept;
        for (std::size_t k = 0; k < active.size(); ++k)
            if (dices[k] >= mu) kept.push_back(active[k]);
        if (!kept.empty()) active = std::move(kept);
    }

    decision.dice_vs_consensus = dice(query_unit->mask, consensus);
    decision.mu = mu;
    decision.outlier = decision.dice_vs_consensus < mu;
    return decision;
}

FilterResult filter_database(const AtlasDatabase& db, const QCConfig& cfg,
                             unsigned n_threads, const NeighborCache* cache) {
    cfg.validate();
    NeighborCache local_cache;
    if (!cache) {
        local_cache = build_neighbor_cache(db);
        cache = &local_cache;
    }

    struct UnitAddr {
        int subject;
        int direction;
        int index;
    };
    std::vector<UnitAddr> addrs;
    std::vector<std::pair<int, int>> seen;
    for (int s = 0; s < int(db.subjects.size()); ++s) {
        seen.clear();
        for (const auto& ann : db.subjects[std::size_t(s)].annotations) {
            std::pair<int, int> key{ann.direction, ann.index};
            if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
            seen.push_back(key);
            addrs.push_back({s, ann.direction, ann.index});
        }
    }

    std::vector<RejectionRecord> report(addrs.size());
    parallel_for(addrs.size(), n_threads, [&](std::size_t i) {
        const UnitAddr& a = addrs[i];
        const SubjectRecord& subject = db.subjects[std::size_t(a.subject)];
        SliceUnit unit = *slice_unit(subject, a.direction, a.index);
        OutlierDecision decision =
            detect_outlier(db, a.subject, a.direction, a.index, cfg, cache);
        RejectionRecord& r = report[i];
        r.subject_id = subject.id;
        r.direction = a.direction;
        r.index = a.index;
        r.kind = unit.kind;
        r.corrupted = unit.corrupted;
        r.dice_vs_consensus = decision.dice_vs_consensus;
        r.mu = decision.mu;
        r.rejected = decision.outlier;
    });

    FilterResult out;
    out.filtered = db;
    out.report = std::move(report);
    for (std::size_t i = 0; i < addrs.size(); ++i) {
        if (!out.report[i].rejected) continue;
        const UnitAddr& a = addrs[i];
        auto& anns = out.filtered.subjects[std::size_t(a.subject)].annotations;
        anns.erase(std::remove_if(anns.begin(), anns.end(),
                                  [&](const SliceAnnotation& ann) {
                                      return ann.direction == a.direction && ann.index == a.index;
                                  }),
                   anns.end());
    }
    return out;
}

void write_qc_report(const std::filesystem::path& path,
                     const std::vector<RejectionRecord>& report) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write QC report: " + path.string());
    out << "subject,direction,index,kind,corrupted,dice,mu,rejected\n";
    char buf[64];
    for (const auto& r : report) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.dice_vs_consensus, r.mu);
        out << r.subject_id << ',' << r.direction << ',' << r.index << ','
            << to_string(r.kind) << ',' << (r.corrupted ? 1 : 0) << ',' << buf << ','
            << (r.rejected ? 1 : 0) << '\n';
    }
    if (!out)
        throw std::runtime_error("short write: " + path.string());
}

} // namespace weakseg
