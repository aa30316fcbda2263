#pragma once

#include <array>
#include <optional>

#include "waiclab/model.hpp"
#include "waiclab/posterior.hpp"

namespace waiclab {

struct ErrorReport {
    double Bg = 0, Bt = 0, Gg = 0, Gt = 0;
    double BLg = 0, BLt = 0, GLg = 0, GLt = 0;
    double V = 0;
    double waic1 = 0, waic2 = 0, waic3 = 0;
    double waic1_variance_form = 0;
    double lambda_hat = 0, nu_hat = 0;
    double lambda_train = 0;
    std::size_t n = 0;
    double beta = 1.0;
    double mc_se_Bg = 0, mc_se_Gg = 0;

    static const std::vector<std::string>& field_names();
    std::vector<double> field_values() const;
    void set_field(const std::string& name, double value);
};

struct WaicValues {
    double waic1 = 0;
    double waic2 = 0;
    double waic1_variance_form = 0;
};

struct LambdaNu {
    double lambda_hat = 0;
    double nu_hat = 0;
    double lambda_train = 0; // Corollary identity, no truth needed
};

double bayes_training_loss(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data);
double gibbs_training_loss(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data);

struct GenLosses {
    double BLg = 0;
    double GLg = 0;
    double mc_se_BLg = 0;
    double mc_se_GLg = 0;
};
GenLosses generalization_losses(const PosteriorEnsemble& ensemble,
                                const Model& model, const Dataset& test_data);

struct FourErrors {
    double Bg = 0, Bt = 0, Gg = 0, Gt = 0;
    double mc_se_Bg = 0, mc_se_Gg = 0;
};
// All four errors through the log density ratio f(x,w), so factors
// shared between q and p cancel and no entropy estimate is needed.
FourErrors four_errors(const PosteriorEnsemble& ensemble, const Model& model,
                       const Dataset& data, const Dataset& test_data);

double functional_variance(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data);

WaicValues waic(double BLt, double GLt, double V, double beta);
double waic3(double BLt, double GLt, double V);
LambdaNu lambda_nu_hat(double Bt, double Gt, double Gg, double beta,
                       std::size_t n);

// Corollary linear transform on scaled (x n) training errors.
std::pair<double, double> predict_generalization(double Bt_star,
                                                 double Gt_star, double beta);
std::array<std::array<double, 2>, 2> generalization_transform(double beta);

// One pass over the ensemble: everything the report needs.
ErrorReport compute_report(const PosteriorEnsemble& ensemble,
                           const Model& model, const Dataset& data,
                           const Dataset& test_data);

// Truth-free subset (losses, V, WAIC, nu_hat, lambda_train) for workflows
// where only the data and the machine are available.
ErrorReport compute_training_report(const PosteriorEnsemble& ensemble,
                                    const Model& model, const Dataset& data);

} // namespace waiclab
