#include "waiclab/zoo.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <limits>
#include <memory>

#include "waiclab/rng.hpp"

namespace waiclab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd unpack_A(const ParameterVector& w, int H, int N1) {
    Eigen::MatrixXd A(H, N1);
    for (int i = 0; i < H; ++i)
        for (int j = 0; j < N1; ++j)
            A(i, j) = w[static_cast<std::size_t>(i) * N1 + j];
    return A;
}

Eigen::MatrixXd unpack_B(const ParameterVector& w, int H, int N1, int N2) {
    Eigen::MatrixXd B(N2, H);
    const std::size_t off = static_cast<std::size_t>(H) * N1;
    for (int i = 0; i < N2; ++i)
        for (int j = 0; j < H; ++j)
            B(i, j) = w[off + static_cast<std::size_t>(i) * H + j];
    return B;
}

double log_q1(const Eigen::Ref<const Eigen::VectorXd>& x1) {
    return -0.5 * x1.size() * kLog2Pi - 0.5 * x1.squaredNorm();
}

std::size_t count_ones_checked(const Dataset& data) {
    std::size_t k = 0;
    for (const auto& s : data.samples) {
        if (s.size() != 1 || (s[0] != 0.0 && s[0] != 1.0))
            throw std::domain_error("bernoulli oracle: data must be binary");
        k += (s[0] == 1.0);
    }
    return k;
}

} // namespace

ReducedRankConfig ReducedRankConfig::with_random_truth(
    int N1, int N2, int H, int H0, double sigma, double prior_scale,
    std::uint64_t truth_seed) {
    if (N1 < 1 || N2 < 1 || H < 1 || H > std::min(N1, N2) || H0 < 1 ||
        H0 > std::min(N1, N2))
        throw configuration_error("reduced rank: need 1 <= H,H0 <= min(N1,N2)");
    if (sigma <= 0 || prior_scale <= 0)
        throw configuration_error("reduced rank: sigma, prior_scale must be > 0");
    ReducedRankConfig cfg;
    cfg.N1 = N1;
    cfg.N2 = N2;
    cfg.H = H;
    cfg.H0 = H0;
    cfg.sigma = sigma;
    cfg.prior_scale = prior_scale;

    auto rng = make_engine(truth_seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    Eigen::MatrixXd A(H0, N1), B(N2, H0);
    for (int i = 0; i < H0; ++i)
        for (int j = 0; j < N1; ++j)
            A(i, j) = norm(rng);
    for (int i = 0; i < N2; ++i)
        for (int j = 0; j < H0; ++j)
            B(i, j) = norm(rng);
    Eigen::MatrixXd P = B * A;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        P, Eigen::ComputeThinU | Eigen::ComputeThinV);
    // Even grid of singular values in [0.5, 1.5], largest first.
    Eigen::VectorXd sv = Eigen::VectorXd::Zero(H0);
    for (int i = 0; i < H0; ++i)
        sv(i) = (H0 == 1) ? 1.0 : 1.5 - i * (1.0 / (H0 - 1));
    Eigen::VectorXd root = sv.array().sqrt();
    cfg.A0 = root.asDiagonal() *
             svd.matrixV().leftCols(H0).transpose(); // H0 x N1
    cfg.B0 = svd.matrixU().leftCols(H0) * root.asDiagonal(); // N2 x H0
    return cfg;
}

Model make_reduced_rank(const ReducedRankConfig& cfg) {
    if (cfg.A0.rows() != cfg.H0 || cfg.A0.cols() != cfg.N1 ||
        cfg.B0.rows() != cfg.N2 || cfg.B0.cols() != cfg.H0)
        throw configuration_error("reduced rank: A0/B0 dimension mismatch");
    if (cfg.H < 1 || cfg.H > std::min(cfg.N1, cfg.N2))
        throw configuration_error("reduced rank: H out of range");
    if (cfg.sigma <= 0 || cfg.prior_scale <= 0)
        throw configuration_error("reduced rank: sigma, prior_scale must be > 0");

    const int N1 = cfg.N1, N2 = cfg.N2, H = cfg.H;
    const double sigma = cfg.sigma;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double out_const = -0.5 * N2 * (kLog2Pi + 2.0 * std::log(sigma));
    const Eigen::MatrixXd P0 = cfg.B0 * cfg.A0;
    const double c = cfg.prior_scale;

    Model m;
    m.dim = cfg.dim();
    m.name = "reduced_rank";

    m.log_density = [=](const Sample& x, const ParameterVector& w) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
        auto x1 = xv.head(N1);
        auto x2 = xv.tail(N2);
        Eigen::MatrixXd M = unpack_B(w, H, N1, N2) * unpack_A(w, H, N1);
        return log_q1(x1) + out_const -
               (x2 - M * x1).squaredNorm() * inv2s2;
    };
    m.true_log_density = [=](const Sample& x) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), x.size());
        auto x1 = xv.head(N1);
        auto x2 = xv.tail(N2);
        return log_q1(x1) + out_const -
               (x2 - P0 * x1).squaredNorm() * inv2s2;
    };
    m.log_prior = [=](const ParameterVector& w) {
        double s = 0.0;
        for (double v : w)
            s += v * v;
        return -c * s;
    };
    m.true_sampler = [=](std::mt19937_64& rng) {
        std::normal_distribution<double> norm(0.0, 1.0);
        Sample x(static_cast<std::size_t>(N1 + N2));
        Eigen::VectorXd x1(N1);
        for (int i = 0; i < N1; ++i) {
            x1(i) = norm(rng);
            x[i] = x1(i);
        }
        Eigen::VectorXd mean = P0 * x1;
        for (int i = 0; i < N2; ++i)
            x[N1 + i] = mean(i) + sigma * norm(rng);
        return x;
    };
    // Warm start: rank-H truncated SVD of the least squares solution,
    // plus a small seeded jitter. The prior here is nearly flat, so a
    // prior draw would start the chain absurdly far from the data.
    m.init_sampler = [=](const Dataset& data, std::mt19937_64& rng) {
        const int n = static_cast<int>(data.n());
        Eigen::MatrixXd X1(N1, n), X2(N2, n);
        for (int j = 0; j < n; ++j) {
            const auto& s = data.samples[j];
            for (int i = 0; i < N1; ++i)
                X1(i, j) = s[i];
            for (int i = 0; i < N2; ++i)
                X2(i, j) = s[N1 + i];
        }
        Eigen::MatrixXd G = X1 * X1.transpose();
        G.diagonal().array() += 1e-9 * n;
        Eigen::MatrixXd W = X2 * X1.transpose() * G.inverse();
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(
            W, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const int r = std::min<int>(H, static_cast<int>(svd.singularValues().size()));
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(H, N1);
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(N2, H);
        for (int i = 0; i < r; ++i) {
            const double rt = std::sqrt(svd.singularValues()(i));
            A.row(i) = rt * svd.matrixV().col(i).transpose();
            B.col(i) = rt * svd.matrixU().col(i);
        }
        std::normal_distribution<double> jitter(0.0, 0.01);
        ParameterVector w(static_cast<std::size_t>(H) * N1 +
                          static_cast<std::size_t>(N2) * H);
        std::size_t p = 0;
        for (int i = 0; i < H; ++i)
            for (int j = 0; j < N1; ++j)
                w[p++] = A(i, j) + jitter(rng);
        for (int i = 0; i < N2; ++i)
            for (int j = 0; j < H; ++j)
                w[p++] = B(i, j) + jitter(rng);
        return w;
    };
    m.batch_factory = [=](const std::vector<Sample>& samples) -> BatchLogDensity {
        const int n = static_cast<int>(samples.size());
        auto X1 = std::make_shared<Eigen::MatrixXd>(N1, n);
        auto X2 = std::make_shared<Eigen::MatrixXd>(N2, n);
        auto base = std::make_shared<Eigen::VectorXd>(n);
        for (int j = 0; j < n; ++j) {
            const auto& s = samples[j];
            for (int i = 0; i < N1; ++i)
                (*X1)(i, j) = s[i];
            for (int i = 0; i < N2; ++i)
                (*X2)(i, j) = s[N1 + i];
            (*base)(j) = log_q1(X1->col(j)) + out_const;
        }
        return [=](const ParameterVector& w, std::vector<double>& out) {
            out.resize(static_cast<std::size_t>(n));
            Eigen::MatrixXd M = unpack_B(w, H, N1, N2) * unpack_A(w, H, N1);
            Eigen::MatrixXd R = *X2 - M * (*X1);
            for (int j = 0; j < n; ++j)
                out[static_cast<std::size_t>(j)] =
                    (*base)(j) - R.col(j).squaredNorm() * inv2s2;
        };
    };
    return m;
}

Model make_regular_gaussian(const RegularGaussianConfig& cfg) {
    if (cfg.d < 1 || cfg.sigma <= 0 || cfg.prior_scale <= 0)
        throw configuration_error("regular gaussian: bad config");
    if (!cfg.mu0.empty() && static_cast<int>(cfg.mu0.size()) != cfg.d)
        throw configuration_error("regular gaussian: mu0 size != d");

    const int d = cfg.d;
    const double sigma = cfg.sigma;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    const double base = -0.5 * d * (kLog2Pi + 2.0 * std::log(sigma));
    std::vector<double> mu0 = cfg.mu0.empty()
                                  ? std::vector<double>(d, 0.0)
                                  : cfg.mu0;
    const double c = cfg.prior_scale;
    const double prior_std = 1.0 / std::sqrt(2.0 * c);

    Model m;
    m.dim = d;
    m.name = "regular_gaussian";
    m.log_density = [=](const Sample& x, const ParameterVector& w) {
        double q = 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = x[i] - w[i];
            q += r * r;
        }
        return base - q * inv2s2;
    };
    m.true_log_density = [=](const Sample& x) {
        double q = 0.0;
        for (int i = 0; i < d; ++i) {
            const double r = x[i] - mu0[i];
            q += r * r;
        }
        return base - q * inv2s2;
    };
    m.log_prior = [=](const ParameterVector& w) {
        double s = 0.0;
        for (double v : w)
            s += v * v;
        return -c * s;
    };
    m.true_sampler = [=](std::mt19937_64& rng) {
        std::normal_distribution<double> norm(0.0, 1.0);
        Sample x(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            x[i] = mu0[i] + sigma * norm(rng);
        return x;
    };
    m.init_sampler = [=](const Dataset&, std::mt19937_64& rng) {
        std::normal_distribution<double> norm(0.0, prior_std);
        ParameterVector w(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i)
            w[i] = norm(rng);
        return w;
    };
    m.batch_factory = [=](const std::vector<Sample>& samples) -> BatchLogDensity {
        const int n = static_cast<int>(samples.size());
        auto X = std::make_shared<Eigen::MatrixXd>(d, n);
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < d; ++i)
                (*X)(i, j) = samples[j][i];
        // Same arithmetic as log_density/true_log_density so the ratio
        // cancels bitwise at the true parameter.
        return [=](const ParameterVector& w, std::vector<double>& out) {
            out.resize(static_cast<std::size_t>(n));
            for (int j = 0; j < n; ++j) {
                double q = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double r = (*X)(i, j) - w[static_cast<std::size_t>(i)];
                    q += r * r;
                }
                out[static_cast<std::size_t>(j)] = base - q * inv2s2;
            }
        };
    };
    return m;
}

Model make_bernoulli_beta(const BernoulliBetaConfig& cfg) {
    if (!(cfg.p0 > 0 && cfg.p0 < 1) || cfg.a0 <= 0 || cfg.b0 <= 0)
        throw configuration_error("bernoulli beta: bad config");
    const double p0 = cfg.p0, a0 = cfg.a0, b0 = cfg.b0;

    Model m;
    m.dim = 1;
    m.name = "bernoulli_beta";
    m.log_density = [](const Sample& x, const ParameterVector& w) {
        const double p = w[0];
        if (p <= 0.0 || p >= 1.0)
            return kNegInf;
        return x[0] == 1.0 ? std::log(p) : std::log1p(-p);
    };
    m.true_log_density = [=](const Sample& x) {
        return x[0] == 1.0 ? std::log(p0) : std::log1p(-p0);
    };
    m.log_prior = [=](const ParameterVector& w) {
        const double p = w[0];
        if (p <= 0.0 || p >= 1.0)
            return kNegInf;
        return (a0 - 1.0) * std::log(p) + (b0 - 1.0) * std::log1p(-p);
    };
    m.true_sampler = [=](std::mt19937_64& rng) {
        std::bernoulli_distribution coin(p0);
        return Sample{coin(rng) ? 1.0 : 0.0};
    };
    m.init_sampler = [=](const Dataset&, std::mt19937_64& rng) {
        std::gamma_distribution<double> ga(a0, 1.0), gb(b0, 1.0);
        const double u = ga(rng), v = gb(rng);
        return ParameterVector{u / (u + v)};
    };
    return m;
}

std::pair<double, double> bernoulli_posterior_shape(
    const Dataset& data, const BernoulliBetaConfig& cfg, double beta) {
    const std::size_t k = count_ones_checked(data);
    return {cfg.a0 + beta * static_cast<double>(k),
            cfg.b0 + beta * static_cast<double>(data.n() - k)};
}

double exact_bayes_training_loss_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta) {
    if (beta <= 0)
        throw std::invalid_argument("bernoulli oracle: beta must be > 0");
    const std::size_t n = data.n();
    const std::size_t k = count_ones_checked(data);
    const auto [a, b] = bernoulli_posterior_shape(data, cfg, beta);
    const double s = a + b;
    // Posterior predictive: E_w[p(1|w)] = a/s, E_w[p(0|w)] = b/s.
    return -(static_cast<double>(k) * std::log(a / s) +
             static_cast<double>(n - k) * std::log(b / s)) /
           static_cast<double>(n);
}

double exact_gibbs_training_loss_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta) {
    const std::size_t n = data.n();
    const std::size_t k = count_ones_checked(data);
    const auto [a, b] = bernoulli_posterior_shape(data, cfg, beta);
    using boost::math::digamma;
    const double s = a + b;
    return -(static_cast<double>(k) * (digamma(a) - digamma(s)) +
             static_cast<double>(n - k) * (digamma(b) - digamma(s))) /
           static_cast<double>(n);
}

double exact_functional_variance_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta) {
    const std::size_t n = data.n();
    const std::size_t k = count_ones_checked(data);
    const auto [a, b] = bernoulli_posterior_shape(data, cfg, beta);
    using boost::math::trigamma;
    const double s = a + b;
    return (static_cast<double>(k) * (trigamma(a) - trigamma(s)) +
            static_cast<double>(n - k) * (trigamma(b) - trigamma(s))) /
           static_cast<double>(n);
}

} // namespace waiclab
