#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "waiclab/model.hpp"
#include "waiclab/rng.hpp"
#include "waiclab/zoo.hpp"

using namespace waiclab;

namespace {

Model gaussian_1d() {
    RegularGaussianConfig cfg;
    cfg.d = 1;
    cfg.sigma = 1.0;
    cfg.mu0 = {0.0};
    cfg.prior_scale = 0.5;
    return make_regular_gaussian(cfg);
}

} // namespace

TEST_CASE("log_density_ratio matches hand evaluation for 1-d gaussian") {
    Model m = gaussian_1d();
    // log N(1;0,1) - log N(1;0.5,1) = -0.5 + 0.125
    CHECK(log_density_ratio(m, {1.0}, {0.5}) == doctest::Approx(-0.375).epsilon(1e-12));
}

TEST_CASE("log_density_ratio is exactly zero at the true parameter") {
    Model m = gaussian_1d();
    for (double x : {-2.0, 0.0, 0.7, 3.1})
        CHECK(log_density_ratio(m, {x}, {0.0}) == 0.0);
}

TEST_CASE("log_density_ratio equals the difference of the two log densities") {
    Model m = gaussian_1d();
    auto rng = make_engine(11);
    std::normal_distribution<double> norm;
    for (int i = 0; i < 50; ++i) {
        const double x = norm(rng), w = norm(rng);
        CHECK(log_density_ratio(m, {x}, {w}) ==
              m.true_log_density({x}) - m.log_density({x}, {w}));
    }
}

TEST_CASE("log_density_ratio requires a true density") {
    Model m = gaussian_1d();
    m.true_log_density = nullptr;
    CHECK_THROWS_AS(log_density_ratio(m, {1.0}, {0.0}), unsupported_operation);
}

TEST_CASE("reduced rank ratio vanishes when BA equals the truth") {
    auto cfg = ReducedRankConfig::with_random_truth(4, 4, 2, 2, 0.2, 1e-4, 99);
    Model m = make_reduced_rank(cfg);
    // Pack (A0, B0) into the H=H0 layout.
    ParameterVector w(static_cast<std::size_t>(cfg.dim()));
    std::size_t p = 0;
    for (int i = 0; i < cfg.H; ++i)
        for (int j = 0; j < cfg.N1; ++j)
            w[p++] = cfg.A0(i, j);
    for (int i = 0; i < cfg.N2; ++i)
        for (int j = 0; j < cfg.H; ++j)
            w[p++] = cfg.B0(i, j);
    auto rng = make_engine(5);
    for (int i = 0; i < 20; ++i) {
        Sample x = m.true_sampler(rng);
        CHECK(log_density_ratio(m, x, w) == 0.0);
    }
}

TEST_CASE("sample_dataset rejects n = 0 and missing sampler") {
    Model m = gaussian_1d();
    CHECK_THROWS_AS(sample_dataset(m, 0, 1), std::invalid_argument);
    m.true_sampler = nullptr;
    CHECK_THROWS_AS(sample_dataset(m, 5, 1), unsupported_operation);
}

TEST_CASE("sample_dataset is deterministic given the seed") {
    Model m = gaussian_1d();
    Dataset a = sample_dataset(m, 200, 42);
    Dataset b = sample_dataset(m, 200, 42);
    REQUIRE(a.n() == b.n());
    for (std::size_t i = 0; i < a.n(); ++i)
        CHECK(a.samples[i][0] == b.samples[i][0]);
    Dataset c = sample_dataset(m, 200, 43);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.n(); ++i)
        any_diff |= (a.samples[i][0] != c.samples[i][0]);
    CHECK(any_diff);
}

TEST_CASE("sample mean obeys the CLT bound") {
    Model m = gaussian_1d();
    const std::size_t n = 100000;
    Dataset d = sample_dataset(m, n, 7);
    double mean = 0.0;
    for (const auto& s : d.samples)
        mean += s[0];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("monte carlo mean of the ratio at the true parameter is zero") {
    Model m = gaussian_1d();
    Dataset d = sample_dataset(m, 20000, 3);
    double s = 0.0;
    for (const auto& x : d.samples)
        s += log_density_ratio(m, x, {0.0});
    CHECK(s == 0.0); // f vanishes pointwise in the well-specified case
}

TEST_CASE("dataset csv round trip") {
    Model m = gaussian_1d();
    Dataset d = sample_dataset(m, 50, 123);
    const std::string path =
        (std::filesystem::temp_directory_path() / "waiclab_ds_test.csv").string();
    write_dataset_csv(d, path, "gaussian d=1");
    Dataset back = read_dataset_csv(path);
    REQUIRE(back.n() == d.n());
    CHECK(back.seed == d.seed);
    for (std::size_t i = 0; i < d.n(); ++i)
        CHECK(back.samples[i][0] == d.samples[i][0]);
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".meta.json");
}
