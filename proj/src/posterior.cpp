#include "waiclab/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "waiclab/rng.hpp"

namespace waiclab {

void McmcConfig::validate() const {
    if (burn_in < 0)
        throw std::invalid_argument("mcmc: burn_in must be >= 0");
    if (thin < 1)
        throw std::invalid_argument("mcmc: thin must be >= 1");
    if (keep < 1)
        throw std::invalid_argument("mcmc: keep must be >= 1");
    if (step_scale <= 0)
        throw std::invalid_argument("mcmc: step_scale must be > 0");
    if (!(target_accept > 0 && target_accept < 1))
        throw std::invalid_argument("mcmc: target_accept must be in (0,1)");
}

PosteriorEnsemble metropolis_sample(const Model& model, const Dataset& data,
                                    double beta, const McmcConfig& cfg) {
    if (beta <= 0)
        throw std::invalid_argument("metropolis_sample: beta must be > 0");
    cfg.validate();

    auto rng = make_engine(cfg.seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    ParameterVector w;
    if (model.init_sampler) {
        w = model.init_sampler(data, rng);
    } else {
        w.assign(static_cast<std::size_t>(model.dim), 0.0);
    }

    auto eval = model.batch(data.samples);
    std::vector<double> logp;
    auto log_post = [&](const ParameterVector& v) {
        const double prior = model.log_prior(v);
        if (!std::isfinite(prior))
            return prior;
        eval(v, logp);
        return prior + beta * std::accumulate(logp.begin(), logp.end(), 0.0);
    };

    double lp = log_post(w);
    if (!std::isfinite(lp))
        throw std::runtime_error(
            "metropolis_sample: non-finite log posterior at initial point");

    PosteriorEnsemble out;
    out.beta = beta;
    out.config = cfg;
    out.draws.reserve(static_cast<std::size_t>(cfg.keep));
    out.log_post_trace.reserve(static_cast<std::size_t>(cfg.keep));

    double step = cfg.step_scale;
    const long total = cfg.burn_in + cfg.thin * cfg.keep;
    long accepted_post = 0, steps_post = 0;
    ParameterVector prop(w.size());

    for (long t = 1; t <= total; ++t) {
        for (std::size_t i = 0; i < w.size(); ++i)
            prop[i] = w[i] + step * norm(rng);
        const double lp_prop = log_post(prop);
        const double dlp = lp_prop - lp;
        const double acc_prob =
            std::isfinite(lp_prop) ? std::min(1.0, std::exp(std::min(dlp, 0.0)))
                                   : 0.0;
        if (acc_prob > 0.0 && std::log(unif(rng)) < dlp) {
            w.swap(prop);
            lp = lp_prop;
            if (t > cfg.burn_in)
                ++accepted_post;
        }
        if (t > cfg.burn_in)
            ++steps_post;
        if (cfg.adapt && t <= cfg.burn_in) {
            // Robbins-Monro on log step; frozen after burn-in.
            const double gamma = 1.0 / std::pow(static_cast<double>(t), 0.6);
            step *= std::exp(gamma * (acc_prob - cfg.target_accept));
        }
        if (t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 &&
            out.draws.size() < static_cast<std::size_t>(cfg.keep)) {
            out.draws.push_back(w);
            out.log_post_trace.push_back(lp);
        }
    }

    out.accept_rate = steps_post > 0
                          ? static_cast<double>(accepted_post) / steps_post
                          : 0.0;
    if (steps_post > 0 && (out.accept_rate < 0.01 || out.accept_rate > 0.99))
        out.warnings.push_back("acceptance rate " +
                               std::to_string(out.accept_rate) +
                               " outside [0.01, 0.99]");
    return out;
}

EssResult effective_sample_size_trace(const std::vector<double>& trace) {
    const std::size_t K = trace.size();
    if (K < 10)
        throw std::invalid_argument("effective_sample_size: need K >= 10");
    const double mean =
        std::accumulate(trace.begin(), trace.end(), 0.0) / K;
    std::vector<double> c(trace.size());
    for (std::size_t i = 0; i < K; ++i)
        c[i] = trace[i] - mean;
    double c0 = 0.0;
    for (double v : c)
        c0 += v * v;
    c0 /= K;
    if (c0 <= 1e-28 * (mean * mean + 1.0))
        return {static_cast<double>(K), true};

    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = 0; i + lag < K; ++i)
            s += c[i] * c[i + lag];
        return s / K;
    };

    // Geyer initial monotone positive sequence.
    double sum_gamma = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < K; ++m) {
        double g = autocov(2 * m) + autocov(2 * m + 1);
        if (g <= 0.0)
            break;
        g = std::min(g, prev);
        prev = g;
        sum_gamma += g;
    }
    const double tau = std::max(2.0 * sum_gamma / c0 - 1.0, 1e-12);
    const double ess = static_cast<double>(K) / tau;
    return {std::clamp(ess, 1.0, static_cast<double>(K)), false};
}

EssResult effective_sample_size(
    const PosteriorEnsemble& ensemble,
    const std::function<double(const ParameterVector&)>& statistic) {
    std::vector<double> trace;
    trace.reserve(ensemble.size());
    for (const auto& d : ensemble.draws)
        trace.push_back(statistic(d));
    return effective_sample_size_trace(trace);
}

void write_ensemble_csv(const PosteriorEnsemble& ensemble,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_ensemble_csv: cannot open " + path);
    if (ensemble.draws.empty())
        throw std::invalid_argument("write_ensemble_csv: empty ensemble");
    const std::size_t d = ensemble.draws.front().size();
    for (std::size_t c = 0; c < d; ++c)
        out << (c ? "," : "") << "w" << (c + 1);
    out << "\n";
    out.precision(17);
    for (const auto& w : ensemble.draws) {
        for (std::size_t c = 0; c < d; ++c)
            out << (c ? "," : "") << w[c];
        out << "\n";
    }
    nlohmann::json meta;
    meta["beta"] = ensemble.beta;
    meta["accept_rate"] = ensemble.accept_rate;
    meta["burn_in"] = ensemble.config.burn_in;
    meta["thin"] = ensemble.config.thin;
    meta["keep"] = ensemble.config.keep;
    meta["step_scale"] = ensemble.config.step_scale;
    meta["adapt"] = ensemble.config.adapt;
    meta["seed"] = ensemble.config.seed;
    meta["warnings"] = ensemble.warnings;
    std::ofstream mout(path + ".meta.json");
    mout << meta.dump(2) << "\n";
}

} // namespace waiclab
