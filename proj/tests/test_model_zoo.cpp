#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "waiclab/model.hpp"
#include "waiclab/rng.hpp"
#include "waiclab/zoo.hpp"

using namespace waiclab;

TEST_CASE("reduced rank truth has the requested rank and singular values") {
    auto cfg = ReducedRankConfig::with_random_truth(6, 6, 3, 3, 0.1, 2e-5, 1);
    Eigen::MatrixXd P = cfg.B0 * cfg.A0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-10)
            ++rank;
    CHECK(rank == 3);
    CHECK(sv(0) == doctest::Approx(1.5));
    CHECK(sv(2) == doctest::Approx(0.5));
}

TEST_CASE("reduced rank config validation") {
    CHECK_THROWS_AS(
        ReducedRankConfig::with_random_truth(6, 6, 7, 3, 0.1, 2e-5, 1),
        configuration_error);
    CHECK_THROWS_AS(
        ReducedRankConfig::with_random_truth(6, 6, 3, 3, -0.1, 2e-5, 1),
        configuration_error);
    auto cfg = ReducedRankConfig::with_random_truth(6, 6, 3, 3, 0.1, 2e-5, 1);
    cfg.A0.resize(2, 6); // wrong truth shape
    CHECK_THROWS_AS(make_reduced_rank(cfg), configuration_error);
}

TEST_CASE("reduced rank noise covariance matches sigma^2 I") {
    auto cfg = ReducedRankConfig::with_random_truth(6, 6, 3, 3, 0.1, 2e-5, 17);
    Model m = make_reduced_rank(cfg);
    Eigen::MatrixXd P = cfg.B0 * cfg.A0;
    const std::size_t n = 100000;
    auto rng = make_engine(21);
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(6, 6);
    for (std::size_t i = 0; i < n; ++i) {
        Sample x = m.true_sampler(rng);
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), 12);
        Eigen::VectorXd r = xv.tail(6) - P * xv.head(6);
        cov += r * r.transpose();
    }
    cov /= static_cast<double>(n);
    Eigen::MatrixXd target = 0.01 * Eigen::MatrixXd::Identity(6, 6);
    CHECK((cov - target).norm() / target.norm() < 0.05);
}

TEST_CASE("reduced rank log density matches a direct dense evaluation") {
    auto cfg = ReducedRankConfig::with_random_truth(5, 4, 2, 2, 0.3, 1e-3, 8);
    Model m = make_reduced_rank(cfg);
    auto rng = make_engine(30);
    std::normal_distribution<double> norm;
    ParameterVector w(static_cast<std::size_t>(cfg.dim()));
    for (auto& v : w)
        v = norm(rng);
    Sample x = m.true_sampler(rng);

    // Independent evaluation of the two quadratic forms.
    Eigen::MatrixXd A(cfg.H, cfg.N1), B(cfg.N2, cfg.H);
    std::size_t p = 0;
    for (int i = 0; i < cfg.H; ++i)
        for (int j = 0; j < cfg.N1; ++j)
            A(i, j) = w[p++];
    for (int i = 0; i < cfg.N2; ++i)
        for (int j = 0; j < cfg.H; ++j)
            B(i, j) = w[p++];
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), cfg.N1 + cfg.N2);
    const double s2 = cfg.sigma * cfg.sigma;
    const double expected =
        ((xv.tail(cfg.N2) - B * A * xv.head(cfg.N1)).squaredNorm() -
         (xv.tail(cfg.N2) - cfg.B0 * cfg.A0 * xv.head(cfg.N1)).squaredNorm()) /
        (2.0 * s2);
    CHECK(log_density_ratio(m, x, w) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("reduced rank batch evaluator agrees with per-sample path") {
    auto cfg = ReducedRankConfig::with_random_truth(6, 6, 4, 3, 0.1, 2e-5, 55);
    Model m = make_reduced_rank(cfg);
    Dataset d = sample_dataset(m, 40, 9);
    auto rng = make_engine(31);
    std::normal_distribution<double> norm;
    ParameterVector w(static_cast<std::size_t>(cfg.dim()));
    for (auto& v : w)
        v = norm(rng);
    auto eval = m.batch(d.samples);
    std::vector<double> out;
    eval(w, out);
    for (std::size_t j = 0; j < d.n(); ++j)
        CHECK(out[j] == doctest::Approx(m.log_density(d.samples[j], w)).epsilon(1e-12));
}

TEST_CASE("gaussian KL matches the closed form by monte carlo") {
    RegularGaussianConfig cfg;
    cfg.d = 2;
    cfg.sigma = 1.0;
    cfg.mu0 = {0.3, -0.2};
    Model m = make_regular_gaussian(cfg);
    ParameterVector w = {1.0, 0.5};
    const double closed = (std::pow(1.0 - 0.3, 2) + std::pow(0.5 + 0.2, 2)) / 2.0;
    const std::size_t n = 200000;
    Dataset d = sample_dataset(m, n, 77);
    double mean = 0.0, sq = 0.0;
    for (const auto& x : d.samples) {
        const double f = log_density_ratio(m, x, w);
        mean += f;
        sq += f * f;
    }
    mean /= static_cast<double>(n);
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - closed) < 4.0 * se);
}

TEST_CASE("densities integrate to one (monte carlo importance ratio)") {
    // E_q[p(x|w)/q(x)] = integral of p = 1.
    RegularGaussianConfig cfg;
    cfg.d = 1;
    cfg.mu0 = {0.0};
    Model m = make_regular_gaussian(cfg);
    ParameterVector w = {0.4};
    const std::size_t n = 200000;
    Dataset d = sample_dataset(m, n, 13);
    double mean = 0.0, sq = 0.0;
    for (const auto& x : d.samples) {
        const double r = std::exp(-log_density_ratio(m, x, w));
        mean += r;
        sq += r * r;
    }
    mean /= static_cast<double>(n);
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0) < 3.0 * se);
}

TEST_CASE("bernoulli basics") {
    BernoulliBetaConfig cfg;
    Model m = make_bernoulli_beta(cfg);
    CHECK(m.log_density({1.0}, {0.3}) == doctest::Approx(std::log(0.3)));
    CHECK(m.log_density({0.0}, {0.3}) == doctest::Approx(std::log(0.7)));
    CHECK(std::exp(m.log_density({1.0}, {0.3})) +
              std::exp(m.log_density({0.0}, {0.3})) ==
          doctest::Approx(1.0));
    CHECK_THROWS_AS(make_bernoulli_beta(BernoulliBetaConfig{1.5, 1, 1}),
                    configuration_error);
}

TEST_CASE("bernoulli oracle: single observation, uniform prior") {
    BernoulliBetaConfig cfg;
    Dataset d;
    d.samples = {{1.0}};
    d.seed = 1;
    // E_w[p(1|w)] under Beta(2,1) is 2/3.
    CHECK(exact_bayes_training_loss_bernoulli(d, cfg, 1.0) ==
          doctest::Approx(-std::log(2.0 / 3.0)).epsilon(1e-14));
}

TEST_CASE("bernoulli oracle matches brute-force quadrature") {
    BernoulliBetaConfig cfg;
    cfg.a0 = 1.0;
    cfg.b0 = 1.0;
    Dataset d;
    d.seed = 2;
    for (int i = 0; i < 20; ++i)
        d.samples.push_back({i < 13 ? 1.0 : 0.0});

    for (double beta : {0.5, 1.0, 2.0}) {
        const double a = cfg.a0 + beta * 13.0;
        const double b = cfg.b0 + beta * 7.0;
        // Midpoint rule on the unnormalized tempered posterior.
        const std::size_t N = 1000000;
        long double z = 0, m1 = 0, l1 = 0, l0 = 0, l1sq = 0, l0sq = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const long double w = (i + 0.5L) / N;
            const long double dens =
                std::exp((a - 1) * std::log(w) + (b - 1) * std::log1p(-w));
            z += dens;
            m1 += w * dens;
            l1 += std::log(w) * dens;
            l0 += std::log1p(-w) * dens;
            l1sq += std::log(w) * std::log(w) * dens;
            l0sq += std::log1p(-w) * std::log1p(-w) * dens;
        }
        m1 /= z;
        l1 /= z;
        l0 /= z;
        l1sq /= z;
        l0sq /= z;
        const double blt_quad =
            -(13.0 * std::log(static_cast<double>(m1)) +
              7.0 * std::log(static_cast<double>(1.0L - m1))) /
            20.0;
        const double glt_quad =
            -(13.0 * static_cast<double>(l1) + 7.0 * static_cast<double>(l0)) /
            20.0;
        const double v_quad =
            (13.0 * static_cast<double>(l1sq - l1 * l1) +
             7.0 * static_cast<double>(l0sq - l0 * l0)) /
            20.0;
        CHECK(exact_bayes_training_loss_bernoulli(d, cfg, beta) ==
              doctest::Approx(blt_quad).epsilon(1e-9));
        CHECK(exact_gibbs_training_loss_bernoulli(d, cfg, beta) ==
              doctest::Approx(glt_quad).epsilon(1e-9));
        CHECK(exact_functional_variance_bernoulli(d, cfg, beta) ==
              doctest::Approx(v_quad).epsilon(1e-7));
    }
}

TEST_CASE("bernoulli oracle rejects non-binary data") {
    BernoulliBetaConfig cfg;
    Dataset d;
    d.samples = {{0.5}};
    CHECK_THROWS_AS(exact_bayes_training_loss_bernoulli(d, cfg, 1.0),
                    std::domain_error);
}
