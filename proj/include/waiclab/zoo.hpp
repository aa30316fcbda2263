#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "waiclab/model.hpp"

namespace waiclab {

struct configuration_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Reduced rank regression x = (x1, x2), x2 = B A x1 + noise.
// A maps input (H x N1), B maps hidden to output (N2 x H).
// Parameter layout: A row-major, then B row-major.
struct ReducedRankConfig {
    int N1 = 6;
    int N2 = 6;
    int H = 3;
    int H0 = 3;
    double sigma = 0.1;
    double prior_scale = 2.0e-5;
    Eigen::MatrixXd A0; // H0 x N1
    Eigen::MatrixXd B0; // N2 x H0

    int dim() const { return H * N1 + N2 * H; }

    // Random rank-H0 truth: Gaussian factors, then the nonzero singular
    // values of B0*A0 are replaced by an even grid in [0.5, 1.5].
    static ReducedRankConfig with_random_truth(int N1, int N2, int H, int H0,
                                               double sigma, double prior_scale,
                                               std::uint64_t truth_seed);
};

struct RegularGaussianConfig {
    int d = 1;
    double sigma = 1.0;
    std::vector<double> mu0;
    double prior_scale = 0.5;
};

struct BernoulliBetaConfig {
    double p0 = 0.5;
    double a0 = 1.0;
    double b0 = 1.0;
};

Model make_reduced_rank(const ReducedRankConfig& cfg);
Model make_regular_gaussian(const RegularGaussianConfig& cfg);
Model make_bernoulli_beta(const BernoulliBetaConfig& cfg);

// Closed-form conjugate quantities for the tempered Beta posterior.
// These are oracles used to validate the MCMC path.
double exact_bayes_training_loss_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta);
double exact_gibbs_training_loss_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta);
double exact_functional_variance_bernoulli(const Dataset& data,
                                           const BernoulliBetaConfig& cfg,
                                           double beta);

// Tempered posterior Beta(a0 + beta*k, b0 + beta*(n-k)) shape parameters.
std::pair<double, double> bernoulli_posterior_shape(const Dataset& data,
                                                    const BernoulliBetaConfig& cfg,
                                                    double beta);

} // namespace waiclab
