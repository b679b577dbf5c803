#include "weakseg/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "weakseg/parallel.hpp"
#include "weakseg/rng.hpp"

namespace weakseg {

void ExperimentConfig::validate() const {
    if (ar_set.empty() || err_set.empty() || types.empty())
        throw std::invalid_argument("ExperimentConfig: ar_set, err_set and types must be non-empty");
    for (double ar : ar_set)
        if (!(ar > 0.0) || ar > 1.0)
            throw std::invalid_argument("ExperimentConfig: ar values must be in (0,1]");
    for (double err : err_set)
        if (err < 0.0 || err > 1.0)
            throw std::invalid_argument("ExperimentConfig: err values must be in [0,1]");
    if (cohort_count < 1)
        throw std::invalid_argument("ExperimentConfig: cohort_count must be >= 1");
    phantom.validate();
    solver.validate();
    qc.validate();
    if (potts_labels < 2)
        throw std::invalid_argument("ExperimentConfig: n_labels must be >= 2");
    if (bd_splits < 1)
        throw std::invalid_argument("ExperimentConfig: bd_splits must be >= 1");
}

unsigned ExperimentConfig::effective_threads() const {
    return threads == 0 ? default_thread_count() : threads;
}

ExperimentConfig smoke_profile(ExperimentConfig cfg) {
    if (cfg.ar_set.size() > 3) cfg.ar_set.resize(3);
    if (cfg.err_set.size() > 2) cfg.err_set.resize(2);
    cfg.cohort_count = std::min(cfg.cohort_count, 5);
    return cfg;
}

namespace {

std::uint64_t cell_seed(const ExperimentConfig& cfg, AnnotationType type, double ar,
                        double err) {
    return mix_seed(cfg.seed, 0xA110ULL + std::uint64_t(type),
                    std::bit_cast<std::uint64_t>(ar), std::bit_cast<std::uint64_t>(err));
}

AnnotationPlan cell_plan(const ExperimentConfig& cfg, AnnotationType type, double ar,
                         double err) {
    AnnotationPlan plan;
    plan.ar = ar;
    plan.err = err;
    plan.type = type;
    plan.bd_splits = cfg.bd_splits;
    plan.sc_max_area_fraction = cfg.sc_max_area_fraction;
    plan.seed = cell_seed(cfg, type, ar, err);
    return plan;
}

CellStats make_stats(AnnotationType type, double ar, double err,
                     std::vector<double> case_dsc, int failures) {
    CellStats s;
    s.type = type;
    s.ar = ar;
    s.err = err;
    s.n = int(case_dsc.size());
    s.failures = failures;
    double mean = 0.0;
    for (double v : case_dsc) mean += v;
    mean /= double(case_dsc.size());
    double ss = 0.0;
    for (double v : case_dsc) ss += (v - mean) * (v - mean);
    s.mean_dsc = mean;
    s.sd_dsc = case_dsc.size() > 1 ? std::sqrt(ss / double(case_dsc.size() - 1)) : 0.0;
    s.case_dsc = std::move(case_dsc);
    return s;
}

bool uses_type(const ExperimentConfig& cfg, AnnotationType t) {
    return std::find(cfg.types.begin(), cfg.types.end(), t) != cfg.types.end();
}

} // namespace

CohortContext build_cohort_context(const ExperimentConfig& cfg) {
    cfg.validate();
    CohortContext ctx;
    ctx.cohort = generate_cohort(cfg.phantom, cfg.cohort_count, cfg.seed);
    if (uses_type(cfg, AnnotationType::SCPS)) {
        parallel_for(ctx.cohort.subjects.size(), cfg.effective_threads(), [&](std::size_t i) {
            ensure_presegmentation(ctx.cohort.subjects[i], cfg.potts_labels, cfg.alpha_potts);
        });
    }
    return ctx;
}

AccuracyMatrix run_grid(const ExperimentConfig& cfg, bool corrected) {
    CohortContext ctx = build_cohort_context(cfg);
    return run_grid_with(cfg, corrected, ctx);
}

AccuracyMatrix run_grid_with(const ExperimentConfig& cfg, bool corrected, CohortContext& ctx) {
    cfg.validate();
    const unsigned threads = cfg.effective_threads();

    AtlasDatabase& cohort = ctx.cohort;
    if (uses_type(cfg, AnnotationType::SCPS)) {
        parallel_for(cohort.subjects.size(), threads, [&](std::size_t i) {
            ensure_presegmentation(cohort.subjects[i], cfg.potts_labels, cfg.alpha_potts);
        });
    }
    if (corrected && !ctx.neighbors_built) {
        ctx.neighbors = build_neighbor_cache(cohort);
        ctx.neighbors_built = true;
    }
    const NeighborCache& cache = ctx.neighbors;

    AccuracyMatrix matrix;
    matrix.corrected = corrected;
    for (AnnotationType type : cfg.types) {
        for (double ar : cfg.ar_set) {
            for (double err : cfg.err_set) {
                try {
                    AnnotationPlan plan = cell_plan(cfg, type, ar, err);

                    AtlasDatabase annotated = cohort;
                    parallel_for(annotated.subjects.size(), threads, [&](std::size_t i) {
                        simulate_annotations(annotated.subjects[i], plan);
                    });
                    if (corrected) {
                        FilterResult fr = filter_database(annotated, cfg.qc, threads, &cache);
                        annotated = std::move(fr.filtered);
                    }

                    std::vector<double> dsc(annotated.subjects.size(), 0.0);
                    std::vector<std::uint8_t> failed(annotated.subjects.size(), 0);
                    parallel_for(annotated.subjects.size(), threads, [&](std::size_t i) {
                        SegmentationResult r = segment_weak(annotated.subjects[i], cfg.solver);
                        if (r.failed) {
                            failed[i] = 1;
                            dsc[i] = 0.0; // failure convention
                        } else {
                            dsc[i] = dice(r.mask, cohort.subjects[i].target_mask());
                        }
                    });

                    int failures = 0;
                    for (auto f : failed) failures += f;
                    matrix.cells.push_back(make_stats(type, ar, err, std::move(dsc), failures));
                } catch (const std::exception& e) {
                    char buf[160];
                    std::snprintf(buf, sizeof(buf), "cell type=%s ar=%g err=%g: ",
                                  to_string(type), ar, err);
                    throw std::runtime_error(buf + std::string(e.what()));
                }
            }
        }
    }
    return matrix;
}

std::vector<SignificanceCell> significance_tests(const ExperimentConfig& cfg,
                                                 const AccuracyMatrix& corrected,
                                                 const AccuracyMatrix& raw) {
    (void)cfg;
    if (corrected.cells.size() != raw.cells.size())
        throw std::invalid_argument("significance_tests: matrix shapes differ");
    std::vector<SignificanceCell> out;
    out.reserve(corrected.cells.size());
    for (std::size_t i = 0; i < corrected.cells.size(); ++i) {
        const CellStats& c = corrected.cells[i];
        const CellStats& r = raw.cells[i];
        SignificanceCell cell;
        cell.type = c.type;
        cell.ar = c.ar;
        cell.err = c.err;
        cell.test = paired_t_test(c.case_dsc, r.case_dsc);
        if (cell.test.p < 0.05)
            cell.direction = c.mean_dsc > r.mean_dsc ? '+' : (c.mean_dsc < r.mean_dsc ? '-' : '0');
        out.push_back(cell);
    }
    return out;
}

namespace {

std::string csv_double(double v, const char* fmt = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write(content.data(), std::streamsize(content.size()));
    if (!out)
        throw std::runtime_error("short write: " + path.string());
}

void write_accuracy_outputs(const ExperimentConfig& cfg, const AccuracyMatrix& m,
                            AnnotationType type, const std::filesystem::path& out_dir) {
    const char* suffix = m.corrected ? "corrected" : "raw";
    std::string base = std::string("accuracy_") + to_string(type) + "_" + suffix;

    std::string csv = "ar,err,mean_dsc,sd_dsc,failures,n\n";
    for (const CellStats& c : m.cells) {
        if (c.type != type) continue;
        csv += csv_double(c.ar, "%g");
        csv += ',';
        csv += csv_double(c.err, "%g");
        csv += ',';
        csv += csv_double(c.mean_dsc);
        csv += ',';
        csv += csv_double(c.sd_dsc);
        csv += ',';
        csv += std::to_string(c.failures);
        csv += ',';
        csv += std::to_string(c.n);
        csv += '\n';
    }
    write_text(out_dir / (base + ".csv"), csv);

    // Heatmap: rows follow err_set order, columns ar_set order.
    const int w = int(cfg.ar_set.size());
    const int h = int(cfg.err_set.size());
    std::string pgm = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<unsigned char> pixels(std::size_t(w) * std::size_t(h), 0);
    for (const CellStats& c : m.cells) {
        if (c.type != type) continue;
        auto ar_it = std::find(cfg.ar_set.begin(), cfg.ar_set.end(), c.ar);
        auto err_it = std::find(cfg.err_set.begin(), cfg.err_set.end(), c.err);
        if (ar_it == cfg.ar_set.end() || err_it == cfg.err_set.end()) continue;
        std::size_t col = std::size_t(ar_it - cfg.ar_set.begin());
        std::size_t row = std::size_t(err_it - cfg.err_set.begin());
        pixels[col + std::size_t(w) * row] =
            (unsigned char)(std::lround(255.0 * std::clamp(c.mean_dsc, 0.0, 1.0)));
    }
    pgm.append(reinterpret_cast<const char*>(pixels.data()), pixels.size());
    write_text(out_dir / (base + ".pgm"), pgm);
}

} // namespace

void emit_reports(const ExperimentConfig& cfg, const std::vector<AccuracyMatrix>& matrices,
                  const std::vector<SignificanceCell>& tests,
                  const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (AnnotationType type : cfg.types) {
        for (const AccuracyMatrix& m : matrices)
            write_accuracy_outputs(cfg, m, type, out_dir);

        std::string csv = "ar,err,t,p,direction\n";
        for (const SignificanceCell& c : tests) {
            if (c.type != type) continue;
            csv += csv_double(c.ar, "%g");
            csv += ',';
            csv += csv_double(c.err, "%g");
            csv += ',';
            csv += csv_double(c.test.t);
            csv += ',';
            csv += csv_double(c.test.p, "%.6g");
            csv += ',';
            csv += c.direction;
            csv += '\n';
        }
        write_text(out_dir / (std::string("significance_") + to_string(type) + ".csv"), csv);
    }
}

void run_experiment(const ExperimentConfig& cfg, bool corrected) {
    CohortContext ctx = build_cohort_context(cfg);
    AccuracyMatrix raw = run_grid_with(cfg, false, ctx);
    std::vector<AccuracyMatrix> matrices{raw};
    std::vector<SignificanceCell> tests;
    if (corrected) {
        AccuracyMatrix corr = run_grid_with(cfg, true, ctx);
        tests = significance_tests(cfg, corr, raw);
        matrices.push_back(std::move(corr));
    }
    emit_reports(cfg, matrices, tests, cfg.out_dir);
}

// --- config file ----------------------------------------------------------------

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw std::runtime_error("config: bad number '" + s + "' for key " + key);
    }
}

long parse_long(const std::string& s, const std::string& key) {
    try {
        std::size_t pos = 0;
        long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (...) {
        throw std::runtime_error("config: bad integer '" + s + "' for key " + key);
    }
}

} // namespace

ExperimentConfig parse_experiment_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = std::all_of(line.begin(), line.end(), [](unsigned char c) {
                return std::isspace(c);
            });
            if (blank) continue;
            throw std::runtime_error("config: expected 'key = value', got: " + line);
        }
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("config: empty key in line: " + line);

        if (key == "ar_set") {
            cfg.ar_set.clear();
            for (const auto& v : split_list(value)) cfg.ar_set.push_back(parse_double(v, key));
        } else if (key == "err_set") {
            cfg.err_set.clear();
            for (const auto& v : split_list(value)) cfg.err_set.push_back(parse_double(v, key));
        } else if (key == "types") {
            cfg.types.clear();
            for (const auto& v : split_list(value)) {
                auto t = annotation_type_from_string(v);
                if (!t) throw std::runtime_error("config: unknown annotation type " + v);
                cfg.types.push_back(*t);
            }
        } else if (key == "cohort_count") {
            cfg.cohort_count = int(parse_long(value, key));
        } else if (key == "dims") {
            auto parts = split_list(value);
            if (parts.size() != 3) throw std::runtime_error("config: dims needs 3 values");
            cfg.phantom.dims = {int(parse_long(parts[0], key)), int(parse_long(parts[1], key)),
                                int(parse_long(parts[2], key))};
        } else if (key == "seed") {
            cfg.seed = std::uint64_t(parse_long(value, key));
        } else if (key == "alpha") {
            cfg.solver.alpha = parse_double(value, key);
        } else if (key == "alpha_potts") {
            cfg.alpha_potts = parse_double(value, key);
        } else if (key == "n_labels") {
            cfg.potts_labels = int(parse_long(value, key));
        } else if (key == "n_similar") {
            cfg.qc.n_similar = int(parse_long(value, key));
        } else if (key == "n_iterations") {
            cfg.qc.n_iterations = int(parse_long(value, key));
        } else if (key == "sc_fraction") {
            cfg.sc_max_area_fraction = parse_double(value, key);
        } else if (key == "bd_splits") {
            cfg.bd_splits = int(parse_long(value, key));
        } else if (key == "solver_max_iterations") {
            cfg.solver.max_iterations = int(parse_long(value, key));
        } else if (key == "solver_tolerance") {
            cfg.solver.tolerance = parse_double(value, key);
        } else if (key == "threads") {
            cfg.threads = unsigned(parse_long(value, key));
        } else if (key == "out") {
            cfg.out_dir = value;
        } else {
            throw std::runtime_error("config: unknown key " + key);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config_text(ss.str());
}

std::string serialize_experiment_config(const ExperimentConfig& cfg) {
    std::string s;
    auto list_doubles = [](const std::vector<double>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ',';
            out += csv_double(v[i], "%g");
        }
        return out;
    };
    s += "ar_set = " + list_doubles(cfg.ar_set) + "\n";
    s += "err_set = " + list_doubles(cfg.err_set) + "\n";
    s += "types = ";
    for (std::size_t i = 0; i < cfg.types.size(); ++i) {
        if (i) s += ',';
        s += to_string(cfg.types[i]);
    }
    s += "\n";
    s += "cohort_count = " + std::to_string(cfg.cohort_count) + "\n";
    s += "dims = " + std::to_string(cfg.phantom.dims.nx) + "," +
         std::to_string(cfg.phantom.dims.ny) + "," + std::to_string(cfg.phantom.dims.nz) + "\n";
    s += "seed = " + std::to_string(cfg.seed) + "\n";
    s += "alpha = " + csv_double(cfg.solver.alpha, "%g") + "\n";
    s += "alpha_potts = " + csv_double(cfg.alpha_potts, "%g") + "\n";
    s += "n_labels = " + std::to_string(cfg.potts_labels) + "\n";
    s += "n_similar = " + std::to_string(cfg.qc.n_similar) + "\n";
    s += "n_iterations = " + std::to_string(cfg.qc.n_iterations) + "\n";
    s += "sc_fraction = " + csv_double(cfg.sc_max_area_fraction, "%g") + "\n";
    s += "bd_splits = " + std::to_string(cfg.bd_splits) + "\n";
    s += "solver_max_iterations = " + std::to_string(cfg.solver.max_iterations) + "\n";
    s += "solver_tolerance = " + csv_double(cfg.solver.tolerance, "%g") + "\n";
    s += "threads = " + std::to_string(cfg.threads) + "\n";
    s += "out = " + cfg.out_dir + "\n";
    return s;
}

} // namespace weakseg
