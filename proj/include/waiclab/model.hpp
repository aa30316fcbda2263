#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace waiclab {

using ParameterVector = std::vector<double>;
using Sample = std::vector<double>;

struct unsupported_operation : std::logic_error {
    using std::logic_error::logic_error;
};

struct Dataset {
    std::vector<Sample> samples;
    std::uint64_t seed = 0;

    std::size_t n() const { return samples.size(); }
};

// Evaluates per-point log densities for a fixed list of samples.
// out is resized to samples.size().
using BatchLogDensity =
    std::function<void(const ParameterVector&, std::vector<double>&)>;

// A learning machine: parametric log density, log prior, and (when the
// true distribution is known) its log density and a sampler for it.
// batch_factory is an optional fast path; callers should go through
// batch() which falls back to a per-sample loop.
struct Model {
    int dim = 0;
    std::function<double(const Sample&, const ParameterVector&)> log_density;
    std::function<double(const ParameterVector&)> log_prior;
    std::function<double(const Sample&)> true_log_density;   // may be empty
    std::function<Sample(std::mt19937_64&)> true_sampler;    // may be empty
    // Chain starting point; gets the training data so model-specific
    // warm starts (e.g. least squares) are possible.
    std::function<ParameterVector(const Dataset&, std::mt19937_64&)> init_sampler;
    std::function<BatchLogDensity(const std::vector<Sample>&)> batch_factory;
    std::string name;

    bool has_truth() const { return static_cast<bool>(true_log_density); }

    BatchLogDensity batch(const std::vector<Sample>& samples) const;
};

// log q(x) - log p(x|w). Factors shared between q and p cancel because
// both sides are evaluated by the same code paths.
double log_density_ratio(const Model& model, const Sample& x,
                         const ParameterVector& w);

Dataset sample_dataset(const Model& model, std::size_t n, std::uint64_t seed);

// CSV with header x1..xN, one sample per row; metadata goes to
// <path>.meta.json.
void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::string& model_desc = "");
Dataset read_dataset_csv(const std::string& path);

} // namespace waiclab
