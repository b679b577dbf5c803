#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "weakseg/experiment.hpp"

using namespace weakseg;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Scaled-down scene for fast grid runs.
ExperimentConfig tiny_config() {
    ExperimentConfig cfg;
    cfg.phantom.dims = {32, 32, 32};
    for (auto& o : cfg.phantom.organs) {
        for (auto& c : o.center) c *= 0.5;
        for (auto& r : o.radii) r *= 0.5;
        for (auto& sat : o.satellites) {
            for (auto& off : sat.offset) off *= 0.5;
            sat.radius *= 0.5;
        }
    }
    cfg.cohort_count = 3;
    cfg.ar_set = {1.0, 0.5};
    cfg.err_set = {0.0};
    cfg.types = {AnnotationType::SCRR};
    cfg.threads = 2;
    cfg.seed = 2024;
    return cfg;
}

} // namespace

TEST_CASE("regularized incomplete beta basics") {
    CHECK(regularized_incomplete_beta(1.0, 1.0, 0.3) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(2.0, 2.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    for (double x : {0.1, 0.35, 0.8}) {
        double lhs = regularized_incomplete_beta(2.5, 1.5, x);
        double rhs = 1.0 - regularized_incomplete_beta(1.5, 2.5, 1.0 - x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
    CHECK(regularized_incomplete_beta(2.0, 0.5, 0.0) == 0.0);
    CHECK(regularized_incomplete_beta(2.0, 0.5, 1.0) == 1.0);
}

TEST_CASE("paired t-test: identical samples") {
    std::vector<double> a{0.9, 0.8, 0.7, 0.95};
    TTestResult r = paired_t_test(a, a);
    CHECK(r.p == 1.0);
    CHECK(r.t == 0.0);
}

TEST_CASE("paired t-test: constant nonzero differences") {
    std::vector<double> a{2, 3, 4, 5};
    std::vector<double> b{1, 2, 3, 4};
    TTestResult r = paired_t_test(a, b);
    CHECK(r.p == 0.0);
    CHECK(std::isinf(r.t));
    CHECK(r.t > 0);
}

TEST_CASE("paired t-test: five-pair hand computation") {
    // d = [2,4,6,8,10]: mean 6, sd sqrt(10), t = 6/(sqrt(10)/sqrt(5))
    //   = 4.242640687119285; p = I_{4/22}(2, 0.5) = 0.0132369 (worked by hand
    //   via I_x(2,1/2) = (4/3 - 2*sqrt(1-x) + (2/3)*(1-x)^{3/2}) * 3/4).
    std::vector<double> a{3, 6, 9, 12, 15};
    std::vector<double> b{1, 2, 3, 4, 5};
    TTestResult r = paired_t_test(a, b);
    CHECK(std::abs(r.t - 4.242640687119285) <= 1e-6);
    CHECK(std::abs(r.p - 0.0132369) <= 1e-4);
}

TEST_CASE("paired t-test input errors") {
    CHECK_THROWS_AS(paired_t_test({1.0, 2.0}, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(paired_t_test({1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("config defaults pin the reference parameters") {
    ExperimentConfig cfg;
    CHECK(cfg.ar_set == std::vector<double>{1, 0.5, 0.33, 0.25, 0.1, 0.05, 0.01});
    CHECK(cfg.err_set == std::vector<double>{0, 0.05, 0.1, 0.25, 0.5});
    CHECK(cfg.solver.alpha == 4.0);
    CHECK(cfg.alpha_potts == 0.05);
    CHECK(cfg.potts_labels == 16);
    CHECK(cfg.qc.n_similar == 30);
    CHECK(cfg.qc.n_iterations == 2);
    CHECK(cfg.cohort_count == 30);
    CHECK(cfg.bd_splits == 4);
    CHECK(cfg.sc_max_area_fraction == 0.15);
    CHECK(cfg.solver.max_iterations == 2000);
    CHECK(cfg.solver.tolerance == 1e-4);
}

TEST_CASE("config file parse and round-trip") {
    std::string text =
        "# example config\n"
        "ar_set = 1,0.5\n"
        "err_set = 0,0.25\n"
        "types = rr,bd\n"
        "cohort_count = 4\n"
        "dims = 32,32,32\n"
        "seed = 77\n"
        "alpha = 2.5\n"
        "threads = 2\n"
        "out = /tmp/somewhere\n";
    ExperimentConfig cfg = parse_experiment_config_text(text);
    CHECK(cfg.ar_set == std::vector<double>{1, 0.5});
    CHECK(cfg.err_set == std::vector<double>{0, 0.25});
    CHECK(cfg.types ==
          std::vector<AnnotationType>{AnnotationType::SCRR, AnnotationType::SCBD});
    CHECK(cfg.cohort_count == 4);
    CHECK(cfg.phantom.dims == Dims3{32, 32, 32});
    CHECK(cfg.seed == 77);
    CHECK(cfg.solver.alpha == 2.5);
    CHECK(cfg.out_dir == "/tmp/somewhere");

    ExperimentConfig again = parse_experiment_config_text(serialize_experiment_config(cfg));
    CHECK(again.ar_set == cfg.ar_set);
    CHECK(again.err_set == cfg.err_set);
    CHECK(again.types == cfg.types);
    CHECK(again.seed == cfg.seed);
    CHECK(again.solver.alpha == cfg.solver.alpha);

    CHECK_THROWS(parse_experiment_config_text("nonsense = 1\n"));
    CHECK_THROWS(parse_experiment_config_text("alpha = abc\n"));
    CHECK_THROWS(parse_experiment_config_text("just a line\n"));
}

TEST_CASE("smoke profile trims the grid") {
    ExperimentConfig cfg;
    ExperimentConfig s = smoke_profile(cfg);
    CHECK(s.ar_set.size() == 3);
    CHECK(s.err_set.size() == 2);
    CHECK(s.cohort_count == 5);
}

TEST_CASE("emit_reports writes one row per cell and scaled heatmaps") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "weakseg_emit_test";
    fs::remove_all(dir);

    ExperimentConfig cfg;
    cfg.types = {AnnotationType::SCRR};
    AccuracyMatrix m;
    m.corrected = false;
    double v = 0.0;
    for (double ar : cfg.ar_set)
        for (double err : cfg.err_set) {
            CellStats c;
            c.type = AnnotationType::SCRR;
            c.ar = ar;
            c.err = err;
            c.mean_dsc = std::min(1.0, v);
            v += 0.03;
            c.sd_dsc = 0.01;
            c.failures = 0;
            c.n = 5;
            m.cells.push_back(c);
        }
    emit_reports(cfg, {m}, {}, dir);

    std::string csv = slurp(dir / "accuracy_rr_raw.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 36); // header + 7*5 rows
    CHECK(csv.rfind("ar,err,mean_dsc,sd_dsc,failures,n\n", 0) == 0);

    std::string sig = slurp(dir / "significance_rr.csv");
    CHECK(sig == "ar,err,t,p,direction\n");

    std::string pgm = slurp(dir / "accuracy_rr_raw.pgm");
    CHECK(pgm.rfind("P5\n7 5\n255\n", 0) == 0);
    // first cell mean 0 -> 0; second (ar=1, err=0.05) mean 0.03 -> round(7.65)=8
    std::size_t off = std::string("P5\n7 5\n255\n").size();
    CHECK((unsigned char)pgm[off] == 0);
    CHECK((unsigned char)pgm[off + 7] == 8); // row 1 col 0 is err index 1
    fs::remove_all(dir);
}

TEST_CASE("sub-grids reproduce the corresponding cells of the full grid") {
    ExperimentConfig full = tiny_config();
    AccuracyMatrix m_full = run_grid(full, false);

    ExperimentConfig sub = full;
    sub.ar_set = {0.5};
    AccuracyMatrix m_sub = run_grid(sub, false);

    REQUIRE(m_sub.cells.size() == 1);
    const CellStats* match = nullptr;
    for (const auto& c : m_full.cells)
        if (c.ar == 0.5 && c.err == 0.0) match = &c;
    REQUIRE(match != nullptr);
    CHECK(m_sub.cells[0].mean_dsc == match->mean_dsc);
    CHECK(m_sub.cells[0].sd_dsc == match->sd_dsc);
    CHECK(m_sub.cells[0].case_dsc == match->case_dsc);
}

TEST_CASE("corrected and raw runs share the cohort context") {
    ExperimentConfig cfg = tiny_config();
    cfg.ar_set = {1.0};
    CohortContext ctx = build_cohort_context(cfg);
    AccuracyMatrix raw = run_grid_with(cfg, false, ctx);
    AccuracyMatrix corr = run_grid_with(cfg, true, ctx);
    auto tests = significance_tests(cfg, corr, raw);
    REQUIRE(tests.size() == 1);
    // With no injected errors the correction must not markedly hurt.
    CHECK(corr.cells[0].mean_dsc >= raw.cells[0].mean_dsc - 0.05);
}
