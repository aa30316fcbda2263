#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "waiclab/model.hpp"

namespace waiclab {

struct McmcConfig {
    long burn_in = 5000;
    long thin = 200;
    long keep = 2000;
    double step_scale = 0.1;
    bool adapt = true;
    double target_accept = 0.30;
    std::uint64_t seed = 0;

    void validate() const;
};

struct PosteriorEnsemble {
    std::vector<ParameterVector> draws;
    double beta = 1.0;
    double accept_rate = 0.0;
    std::vector<double> log_post_trace; // unnormalized, per retained draw
    McmcConfig config;
    std::vector<std::string> warnings;

    std::size_t size() const { return draws.size(); }
};

// Random-walk Metropolis targeting exp(log_prior(w) + beta * sum log p(x_i|w)).
// One joint isotropic Gaussian update per step; step scale adapted toward
// target_accept during burn-in only.
PosteriorEnsemble metropolis_sample(const Model& model, const Dataset& data,
                                    double beta, const McmcConfig& cfg);

struct EssResult {
    double value = 0.0;
    bool zero_variance = false;
};

// ESS of the scalar trace statistic(draw_k) via the initial monotone
// positive sequence estimator; clamped to [1, K].
EssResult effective_sample_size(
    const PosteriorEnsemble& ensemble,
    const std::function<double(const ParameterVector&)>& statistic);

EssResult effective_sample_size_trace(const std::vector<double>& trace);

void write_ensemble_csv(const PosteriorEnsemble& ensemble,
                        const std::string& path);

} // namespace waiclab
