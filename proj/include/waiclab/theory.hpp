#pragma once

#include "waiclab/model.hpp"

namespace waiclab {

struct RegularReference {
    double Bg_star = 0, Gg_star = 0, Bt_star = 0, Gt_star = 0;
    int d = 0;
    double beta = 1.0;
};

struct unsupported_case : std::domain_error {
    using std::domain_error::domain_error;
};

struct out_of_regime : std::domain_error {
    using std::domain_error::domain_error;
};

struct singular_model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scaled (x n) limiting errors of a regular model in the well-specified case.
RegularReference regular_reference(int d, double beta);

// Learning coefficient of reduced rank regression with true rank H0 and
// model rank H >= H0, valid in the regime where the generic closed form
// applies (validated against known constants at startup).
double rrr_learning_coefficient(int N1, int N2, int H0, int H);

struct TraceIJResult {
    double value = 0;
    double cond_J = 0;
};

// tr(I J^-1) at w_star by central finite differences of log p(x|.) and
// Monte Carlo over the true distribution. Throws singular_model_error
// when J is numerically singular (condition number > 1e12).
TraceIJResult tr_ij(const Model& model, const ParameterVector& w_star,
                    std::size_t mc_size, double fd_step = 0.0,
                    std::uint64_t seed = 20240817);

struct Lemma8Result {
    double value = 0;    // the (near-zero) signed integral
    double scale = 0;    // positive envelope integral, for relative error
    double relative = 0; // |value| / scale
};

// integral_0^inf (2t - sqrt(t) a - 2 lambda/beta) t^(lambda-1)
//               exp(-beta t + beta sqrt(t) a) dt
// evaluated after the substitution t = s^2; exactly zero analytically.
Lemma8Result lemma8_integral(double lambda, double beta, double a);

} // namespace waiclab
