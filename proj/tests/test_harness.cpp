#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "waiclab/harness.hpp"
#include "waiclab/rng.hpp"

using namespace waiclab;

namespace {

const char* kBernText = R"(# cheap conjugate experiment
model.type = bernoulli_beta
model.p0 = 0.6
n = 30
test_size = 200
beta = 1
trials = 3
master_seed = 11
mcmc.burn_in = 200
mcmc.thin = 5
mcmc.keep = 200
mcmc.step_scale = 0.2
)";

std::filesystem::path temp_dir(const char* leaf) {
    auto p = std::filesystem::temp_directory_path() / leaf;
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("config parsing: values, comments, defaults") {
    auto cfg = parse_experiment_config_text(kBernText);
    CHECK(cfg.n == 30);
    CHECK(cfg.test_size == 200);
    CHECK(cfg.trials == 3);
    CHECK(cfg.master_seed == 11);
    CHECK(cfg.mcmc.thin == 5);
    CHECK(cfg.mcmc.adapt == true); // default
    const auto* b = std::get_if<BernoulliBetaConfig>(&cfg.model);
    REQUIRE(b != nullptr);
    CHECK(b->p0 == doctest::Approx(0.6));
    CHECK(b->a0 == doctest::Approx(1.0));
}

TEST_CASE("config parsing: overrides win over file values") {
    auto cfg = parse_experiment_config_text(
        kBernText, {"trials = 7", "mcmc.keep=50", "model.p0 = 0.25"});
    CHECK(cfg.trials == 7);
    CHECK(cfg.mcmc.keep == 50);
    CHECK(std::get<BernoulliBetaConfig>(cfg.model).p0 == doctest::Approx(0.25));
}

TEST_CASE("config parsing: unknown and malformed keys are named") {
    CHECK_THROWS_WITH_AS(
        parse_experiment_config_text("model.type = reduced_rank\nmodel.Nx = 3\n"),
        doctest::Contains("model.Nx"), config_error);
    CHECK_THROWS_AS(parse_experiment_config_text("model.type = nonsense\n"),
                    config_error);
    CHECK_THROWS_AS(parse_experiment_config_text("n = 5\n"), config_error);
    CHECK_THROWS_AS(parse_experiment_config_text(
                        "model.type = bernoulli_beta\nn = abc\n"),
                    config_error);
    CHECK_THROWS_AS(parse_experiment_config_text(
                        "model.type = bernoulli_beta\ntrials = 0\n"),
                    config_error);
    // Model-specific keys do not leak across types.
    CHECK_THROWS_AS(parse_experiment_config_text(
                        "model.type = bernoulli_beta\nmodel.H = 3\n"),
                    config_error);
}

TEST_CASE("reduced rank config builds a shared truth from the seed") {
    const std::string text =
        "model.type = reduced_rank\nmodel.truth_seed = 5\ntrials = 1\n";
    auto a = parse_experiment_config_text(text);
    auto b = parse_experiment_config_text(text);
    const auto& ra = std::get<ReducedRankConfig>(a.model);
    const auto& rb = std::get<ReducedRankConfig>(b.model);
    CHECK((ra.A0 - rb.A0).norm() == 0.0);
    CHECK((ra.B0 - rb.B0).norm() == 0.0);
    CHECK(ra.dim() == 36);
}

TEST_CASE("run_trial is deterministic and decoupled across trials") {
    auto cfg = parse_experiment_config_text(kBernText);
    ErrorReport a = run_trial(cfg, 0);
    ErrorReport b = run_trial(cfg, 0);
    CHECK(a.Bg == b.Bg);
    CHECK(a.waic1 == b.waic1);
    ErrorReport c = run_trial(cfg, 1);
    CHECK(a.Bg != c.Bg);
}

TEST_CASE("run_experiment aggregates and reruns byte-identically") {
    auto cfg = parse_experiment_config_text(kBernText);
    auto agg1 = run_experiment(cfg, false);
    auto agg2 = run_experiment(cfg, false);
    REQUIRE(agg1.reports.size() == 3);
    CHECK(agg1.failures.empty());
    for (std::size_t t = 0; t < 3; ++t)
        CHECK(agg1.reports[t].Bg == agg2.reports[t].Bg);
    // Aggregate mean equals the hand mean.
    double m = 0.0;
    for (const auto& r : agg1.reports)
        m += r.Bg;
    m /= 3.0;
    CHECK(agg1.mean("Bg") == doctest::Approx(m).epsilon(1e-15));
    CHECK_THROWS_AS(agg1.mean("bogus"), std::invalid_argument);
}

TEST_CASE("single-trial aggregate has zero spread") {
    auto cfg = parse_experiment_config_text(kBernText, {"trials = 1"});
    auto agg = run_experiment(cfg, false);
    REQUIRE(agg.reports.size() == 1);
    CHECK(agg.stddev("Bg") == 0.0);
    CHECK(agg.mean("Bg") == agg.reports[0].Bg);
    CHECK_THROWS_AS(verify_state_equations(agg, 1.0), std::invalid_argument);
}

TEST_CASE("state equations hold exactly on synthetic regular-limit trials") {
    // Trials drawn at the regular reference point; the shifts are dyadic so
    // every residual cancels exactly and the pass bound 0 <= 0 is exercised.
    std::vector<ErrorReport> reports;
    for (int t = 0; t < 12; ++t) {
        ErrorReport r;
        const double eps = (t - 6) * 0x1p-20;
        r.Bt = -1.0 + eps;
        r.Gt = 0.0 + eps;
        r.Bg = 1.0 + eps; // Bt + 2(Gt - Bt) with the shared shift
        r.Gg = 2.0 + eps;
        reports.push_back(r);
    }
    auto res = verify_state_equations(reports, 1.0);
    CHECK(res.r1 == 0.0);
    CHECK(res.r2 == 0.0);
    CHECK(res.r3 == 0.0);
    CHECK(res.all_pass());
}

TEST_CASE("state equations flag a biased ensemble") {
    std::vector<ErrorReport> reports;
    auto rng = make_engine(4);
    std::normal_distribution<double> norm(0.0, 1e-4);
    for (int t = 0; t < 12; ++t) {
        ErrorReport r;
        r.Bt = -1.0;
        r.Gt = 0.0;
        r.Bg = 1.1 + norm(rng); // violates equation 1 by 0.1 >> spread
        r.Gg = 2.0;
        reports.push_back(r);
    }
    auto res = verify_state_equations(reports, 1.0);
    CHECK(!res.pass1);
    CHECK(res.pass2);
    CHECK(!res.all_pass());
}

TEST_CASE("trials csv round trip and experiment outputs") {
    auto dir = temp_dir("waiclab_harness_out");
    auto cfg = parse_experiment_config_text(
        kBernText, {"output_dir = " + dir.string()});
    auto agg = run_experiment(cfg, true);
    CHECK(std::filesystem::exists(dir / "trials.csv"));
    CHECK(std::filesystem::exists(dir / "aggregate.csv"));
    CHECK(std::filesystem::exists(dir / "aggregate.txt"));
    auto back = read_trials_csv((dir / "trials.csv").string());
    REQUIRE(back.size() == agg.reports.size());
    for (std::size_t t = 0; t < back.size(); ++t) {
        CHECK(back[t].Bg == agg.reports[t].Bg);
        CHECK(back[t].waic1 == agg.reports[t].waic1);
        CHECK(back[t].n == agg.reports[t].n);
    }
    auto res_file = verify_state_equations(back, cfg.beta);
    auto res_mem = verify_state_equations(agg, cfg.beta);
    CHECK(res_file.r1 == doctest::Approx(res_mem.r1).epsilon(1e-12));
    std::filesystem::remove_all(dir);
}

TEST_CASE("waic1_excess arithmetic") {
    ErrorReport r;
    r.Bt = -0.8;
    r.Gt = -0.3;
    r.beta = 1.0;
    CHECK(waic1_excess(r) == doctest::Approx(-0.8 + 2.0 * 0.5));
    r.beta = 0.5;
    CHECK(waic1_excess(r) == doctest::Approx(-0.8 + 0.5));
}

TEST_CASE("table1 runner shares the truth and handles under-ranked models") {
    auto dir = temp_dir("waiclab_table1_out");
    auto base = parse_experiment_config_text(
        "model.type = reduced_rank\n"
        "model.N1 = 3\nmodel.N2 = 3\nmodel.H = 2\nmodel.H0 = 2\n"
        "model.sigma = 0.2\nmodel.truth_seed = 21\n"
        "n = 40\ntest_size = 300\ntrials = 2\nmaster_seed = 6\n"
        "mcmc.burn_in = 300\nmcmc.thin = 3\nmcmc.keep = 100\n"
        "mcmc.step_scale = 0.05\n",
        {"output_dir = " + dir.string()});
    auto rows = run_table1(base, {1, 2}, true);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].H == 1);
    CHECK(std::isnan(rows[0].theory_lambda_over_n)); // H < H0: no theory value
    CHECK(rows[1].H == 2);
    CHECK(rows[1].theory_lambda_over_n > 0.0);
    CHECK(rows[0].mean_Bg > rows[1].mean_Bg); // under-ranked model cannot fit
    CHECK(std::filesystem::exists(dir / "table1.csv"));
    CHECK(std::filesystem::exists(dir / "H2" / "trials.csv"));
    std::filesystem::remove_all(dir);

    auto gauss = parse_experiment_config_text(
        "model.type = regular_gaussian\ntrials = 1\n");
    CHECK_THROWS_AS(run_table1(gauss, {1}, false), config_error);
}
