#include "waiclab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace waiclab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Streaming per-point statistics of log p(x_j|w_k) over the ensemble:
// running log-sum-exp (max + scaled sum), plain sum, and sum of squares.
struct PointAccum {
    std::vector<double> lse_max, lse_sum, sum, sum_sq;
    std::size_t draws = 0;

    explicit PointAccum(std::size_t n)
        : lse_max(n, -kInf), lse_sum(n, 0.0), sum(n, 0.0), sum_sq(n, 0.0) {}

    void add(const std::vector<double>& logp) {
        for (std::size_t j = 0; j < logp.size(); ++j) {
            const double x = logp[j];
            if (x > lse_max[j]) {
                lse_sum[j] = lse_sum[j] * std::exp(lse_max[j] - x) + 1.0;
                lse_max[j] = x;
            } else {
                lse_sum[j] += std::exp(x - lse_max[j]);
            }
            sum[j] += x;
            sum_sq[j] += x * x;
        }
        ++draws;
    }

    // log[(1/K) sum_k p(x_j|w_k)]
    double log_mean_density(std::size_t j) const {
        return lse_max[j] + std::log(lse_sum[j]) -
               std::log(static_cast<double>(draws));
    }
    double mean_log_density(std::size_t j) const {
        return sum[j] / static_cast<double>(draws);
    }
    double var_log_density(std::size_t j) const {
        const double m = mean_log_density(j);
        return std::max(sum_sq[j] / static_cast<double>(draws) - m * m, 0.0);
    }
};

PointAccum accumulate(const PosteriorEnsemble& ensemble, const Model& model,
                      const std::vector<Sample>& samples) {
    if (ensemble.draws.empty())
        throw std::invalid_argument("estimator: empty ensemble");
    auto eval = model.batch(samples);
    PointAccum acc(samples.size());
    std::vector<double> logp;
    for (const auto& w : ensemble.draws) {
        eval(w, logp);
        acc.add(logp);
    }
    return acc;
}

std::vector<double> truth_values(const Model& model,
                                 const std::vector<Sample>& samples) {
    if (!model.true_log_density)
        throw unsupported_operation("estimator: model has no true_log_density");
    std::vector<double> tq(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j)
        tq[j] = model.true_log_density(samples[j]);
    return tq;
}

struct MeanSe {
    double mean = 0;
    double se = 0;
};

template <typename F>
MeanSe mean_se(std::size_t n, F&& value) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        s += value(j);
    const double m = s / static_cast<double>(n);
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double d = value(j) - m;
        v += d * d;
    }
    const double se =
        n > 1 ? std::sqrt(v / static_cast<double>(n - 1) / static_cast<double>(n))
              : 0.0;
    return {m, se};
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw std::runtime_error(std::string("estimator: non-finite ") + what +
                                 " (NaN log density in data?)");
}

} // namespace

const std::vector<std::string>& ErrorReport::field_names() {
    static const std::vector<std::string> names = {
        "Bg", "Bt", "Gg", "Gt", "BLg", "BLt", "GLg", "GLt", "V",
        "waic1", "waic2", "waic3", "waic1_variance_form",
        "lambda_hat", "nu_hat", "lambda_train",
        "n", "beta", "mc_se_Bg", "mc_se_Gg"};
    return names;
}

std::vector<double> ErrorReport::field_values() const {
    return {Bg, Bt, Gg, Gt, BLg, BLt, GLg, GLt, V,
            waic1, waic2, waic3, waic1_variance_form,
            lambda_hat, nu_hat, lambda_train,
            static_cast<double>(n), beta, mc_se_Bg, mc_se_Gg};
}

void ErrorReport::set_field(const std::string& name, double value) {
    if (name == "Bg") Bg = value;
    else if (name == "Bt") Bt = value;
    else if (name == "Gg") Gg = value;
    else if (name == "Gt") Gt = value;
    else if (name == "BLg") BLg = value;
    else if (name == "BLt") BLt = value;
    else if (name == "GLg") GLg = value;
    else if (name == "GLt") GLt = value;
    else if (name == "V") V = value;
    else if (name == "waic1") waic1 = value;
    else if (name == "waic2") waic2 = value;
    else if (name == "waic3") waic3 = value;
    else if (name == "waic1_variance_form") waic1_variance_form = value;
    else if (name == "lambda_hat") lambda_hat = value;
    else if (name == "nu_hat") nu_hat = value;
    else if (name == "lambda_train") lambda_train = value;
    else if (name == "n") n = static_cast<std::size_t>(value);
    else if (name == "beta") beta = value;
    else if (name == "mc_se_Bg") mc_se_Bg = value;
    else if (name == "mc_se_Gg") mc_se_Gg = value;
    else throw std::invalid_argument("ErrorReport: unknown field " + name);
}

double bayes_training_loss(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data) {
    auto acc = accumulate(ensemble, model, data.samples);
    const std::size_t n = data.n();
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        s += acc.log_mean_density(j);
    const double blt = -s / static_cast<double>(n);
    check_finite(blt, "BLt");
    return blt;
}

double gibbs_training_loss(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data) {
    auto acc = accumulate(ensemble, model, data.samples);
    const std::size_t n = data.n();
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        s += acc.mean_log_density(j);
    const double glt = -s / static_cast<double>(n);
    check_finite(glt, "GLt");
    return glt;
}

GenLosses generalization_losses(const PosteriorEnsemble& ensemble,
                                const Model& model, const Dataset& test_data) {
    auto acc = accumulate(ensemble, model, test_data.samples);
    const std::size_t m = test_data.n();
    auto b = mean_se(m, [&](std::size_t j) { return -acc.log_mean_density(j); });
    auto g = mean_se(m, [&](std::size_t j) { return -acc.mean_log_density(j); });
    check_finite(b.mean, "BLg");
    check_finite(g.mean, "GLg");
    return {b.mean, g.mean, b.se, g.se};
}

FourErrors four_errors(const PosteriorEnsemble& ensemble, const Model& model,
                       const Dataset& data, const Dataset& test_data) {
    if (data.seed == test_data.seed)
        throw std::invalid_argument(
            "four_errors: test data shares the training seed/stream");
    auto tr = accumulate(ensemble, model, data.samples);
    auto te = accumulate(ensemble, model, test_data.samples);
    auto tq_tr = truth_values(model, data.samples);
    auto tq_te = truth_values(model, test_data.samples);

    FourErrors e;
    auto bt = mean_se(data.n(), [&](std::size_t j) {
        return tq_tr[j] - tr.log_mean_density(j);
    });
    auto gt = mean_se(data.n(), [&](std::size_t j) {
        return tq_tr[j] - tr.mean_log_density(j);
    });
    auto bg = mean_se(test_data.n(), [&](std::size_t j) {
        return tq_te[j] - te.log_mean_density(j);
    });
    auto gg = mean_se(test_data.n(), [&](std::size_t j) {
        return tq_te[j] - te.mean_log_density(j);
    });
    e.Bt = bt.mean;
    e.Gt = gt.mean;
    e.Bg = bg.mean;
    e.Gg = gg.mean;
    e.mc_se_Bg = bg.se;
    e.mc_se_Gg = gg.se;
    check_finite(e.Bg, "Bg");
    check_finite(e.Gt, "Gt");
    return e;
}

double functional_variance(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data) {
    if (ensemble.size() < 2)
        throw std::invalid_argument(
            "functional_variance: undefined for K < 2");
    auto acc = accumulate(ensemble, model, data.samples);
    double s = 0.0;
    for (std::size_t j = 0; j < data.n(); ++j)
        s += acc.var_log_density(j);
    const double v = s / static_cast<double>(data.n());
    check_finite(v, "V");
    return v;
}

WaicValues waic(double BLt, double GLt, double V, double beta) {
    if (beta <= 0)
        throw std::invalid_argument("waic: beta must be > 0");
    WaicValues w;
    const double gap = GLt - BLt;
    w.waic1 = BLt + 2.0 * beta * gap;
    w.waic2 = GLt + 2.0 * beta * gap;
    w.waic1_variance_form = BLt + beta * V;
    return w;
}

double waic3(double BLt, double GLt, double V) {
    return BLt - GLt + 0.5 * V;
}

LambdaNu lambda_nu_hat(double Bt, double Gt, double Gg, double beta,
                       std::size_t n) {
    if (n < 1 || beta <= 0)
        throw std::invalid_argument("lambda_nu_hat: need n >= 1, beta > 0");
    LambdaNu r;
    const double nn = static_cast<double>(n);
    r.nu_hat = beta * nn * (Gt - Bt);
    r.lambda_hat = beta * nn * (Gg + Gt) / 2.0;
    r.lambda_train = beta * (nn * Gt + r.nu_hat);
    return r;
}

std::array<std::array<double, 2>, 2> generalization_transform(double beta) {
    return {{{1.0 - 2.0 * beta, 2.0 * beta}, {-2.0 * beta, 1.0 + 2.0 * beta}}};
}

std::pair<double, double> predict_generalization(double Bt_star,
                                                 double Gt_star, double beta) {
    auto T = generalization_transform(beta);
    return {T[0][0] * Bt_star + T[0][1] * Gt_star,
            T[1][0] * Bt_star + T[1][1] * Gt_star};
}

ErrorReport compute_report(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data,
                           const Dataset& test_data) {
    if (data.seed == test_data.seed)
        throw std::invalid_argument(
            "compute_report: test data shares the training seed/stream");
    const std::size_t n = data.n();
    const std::size_t m = test_data.n();
    const double beta = ensemble.beta;

    auto tr = accumulate(ensemble, model, data.samples);
    auto te = accumulate(ensemble, model, test_data.samples);
    auto tq_tr = truth_values(model, data.samples);
    auto tq_te = truth_values(model, test_data.samples);

    ErrorReport r;
    r.n = n;
    r.beta = beta;

    auto blt = mean_se(n, [&](std::size_t j) { return -tr.log_mean_density(j); });
    auto glt = mean_se(n, [&](std::size_t j) { return -tr.mean_log_density(j); });
    auto blg = mean_se(m, [&](std::size_t j) { return -te.log_mean_density(j); });
    auto glg = mean_se(m, [&](std::size_t j) { return -te.mean_log_density(j); });
    r.BLt = blt.mean;
    r.GLt = glt.mean;
    r.BLg = blg.mean;
    r.GLg = glg.mean;

    auto bt = mean_se(n, [&](std::size_t j) {
        return tq_tr[j] - tr.log_mean_density(j);
    });
    auto gt = mean_se(n, [&](std::size_t j) {
        return tq_tr[j] - tr.mean_log_density(j);
    });
    auto bg = mean_se(m, [&](std::size_t j) {
        return tq_te[j] - te.log_mean_density(j);
    });
    auto gg = mean_se(m, [&](std::size_t j) {
        return tq_te[j] - te.mean_log_density(j);
    });
    r.Bt = bt.mean;
    r.Gt = gt.mean;
    r.Bg = bg.mean;
    r.Gg = gg.mean;
    r.mc_se_Bg = bg.se;
    r.mc_se_Gg = gg.se;

    double vsum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        vsum += tr.var_log_density(j);
    r.V = ensemble.size() >= 2 ? vsum / static_cast<double>(n) : 0.0;

    auto w = waic(r.BLt, r.GLt, r.V, beta);
    r.waic1 = w.waic1;
    r.waic2 = w.waic2;
    r.waic1_variance_form = w.waic1_variance_form;
    r.waic3 = waic3(r.BLt, r.GLt, r.V);

    auto ln = lambda_nu_hat(r.Bt, r.Gt, r.Gg, beta, n);
    r.lambda_hat = ln.lambda_hat;
    r.nu_hat = ln.nu_hat;
    r.lambda_train = ln.lambda_train;

    check_finite(r.Bg, "Bg");
    check_finite(r.BLt, "BLt");
    check_finite(r.V, "V");
    return r;
}

ErrorReport compute_training_report(const PosteriorEnsemble& ensemble,
                                    const Model& model, const Dataset& data) {
    const std::size_t n = data.n();
    const double beta = ensemble.beta;
    auto tr = accumulate(ensemble, model, data.samples);

    ErrorReport r;
    r.n = n;
    r.beta = beta;
    auto blt = mean_se(n, [&](std::size_t j) { return -tr.log_mean_density(j); });
    auto glt = mean_se(n, [&](std::size_t j) { return -tr.mean_log_density(j); });
    r.BLt = blt.mean;
    r.GLt = glt.mean;

    double vsum = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        vsum += tr.var_log_density(j);
    r.V = ensemble.size() >= 2 ? vsum / static_cast<double>(n) : 0.0;

    auto w = waic(r.BLt, r.GLt, r.V, beta);
    r.waic1 = w.waic1;
    r.waic2 = w.waic2;
    r.waic1_variance_form = w.waic1_variance_form;
    r.waic3 = waic3(r.BLt, r.GLt, r.V);
    // Gt - Bt equals GLt - BLt (the entropy term cancels), so nu_hat is
    // available without the true density.
    r.nu_hat = beta * static_cast<double>(n) * (r.GLt - r.BLt);

    if (model.has_truth()) {
        auto tq = truth_values(model, data.samples);
        double tq_mean = 0.0;
        for (double v : tq)
            tq_mean += v;
        tq_mean /= static_cast<double>(n);
        const double Gt = r.GLt + tq_mean;
        r.Gt = Gt;
        r.Bt = r.BLt + tq_mean;
        r.lambda_train = beta * (static_cast<double>(n) * Gt + r.nu_hat);
    } else {
        r.lambda_train = std::numeric_limits<double>::quiet_NaN();
    }

    check_finite(r.BLt, "BLt");
    return r;
}

} // namespace waiclab
