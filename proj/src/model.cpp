#include "waiclab/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "waiclab/rng.hpp"

namespace waiclab {

BatchLogDensity Model::batch(const std::vector<Sample>& samples) const {
    if (batch_factory)
        return batch_factory(samples);
    auto ld = log_density;
    auto pts = samples;
    return [ld, pts](const ParameterVector& w, std::vector<double>& out) {
        out.resize(pts.size());
        for (std::size_t j = 0; j < pts.size(); ++j)
            out[j] = ld(pts[j], w);
    };
}

double log_density_ratio(const Model& model, const Sample& x,
                         const ParameterVector& w) {
    if (!model.true_log_density)
        throw unsupported_operation(
            "log_density_ratio: model has no true_log_density");
    return model.true_log_density(x) - model.log_density(x, w);
}

Dataset sample_dataset(const Model& model, std::size_t n, std::uint64_t seed) {
    if (!model.true_sampler)
        throw unsupported_operation(
            "sample_dataset: model has no true_sampler");
    if (n == 0)
        throw std::invalid_argument("sample_dataset: n must be >= 1");
    Dataset data;
    data.seed = seed;
    data.samples.reserve(n);
    auto rng = make_engine(seed);
    for (std::size_t i = 0; i < n; ++i)
        data.samples.push_back(model.true_sampler(rng));
    return data;
}

void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::string& model_desc) {
    if (data.samples.empty())
        throw std::invalid_argument("write_dataset_csv: empty dataset");
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("write_dataset_csv: cannot open " + path);
    const std::size_t dim = data.samples.front().size();
    for (std::size_t c = 0; c < dim; ++c)
        out << (c ? "," : "") << "x" << (c + 1);
    out << "\n";
    out.precision(17);
    for (const auto& s : data.samples) {
        for (std::size_t c = 0; c < dim; ++c)
            out << (c ? "," : "") << s[c];
        out << "\n";
    }
    nlohmann::json meta;
    meta["seed"] = data.seed;
    meta["n"] = data.n();
    if (!model_desc.empty())
        meta["model"] = model_desc;
    std::ofstream mout(path + ".meta.json");
    mout << meta.dump(2) << "\n";
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("read_dataset_csv: cannot open " + path);
    Dataset data;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("read_dataset_csv: empty file " + path);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        Sample s;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            s.push_back(std::stod(cell));
        data.samples.push_back(std::move(s));
    }
    if (data.samples.empty())
        throw std::runtime_error("read_dataset_csv: no samples in " + path);
    std::ifstream min(path + ".meta.json");
    if (min) {
        nlohmann::json meta;
        min >> meta;
        if (meta.contains("seed"))
            data.seed = meta["seed"].get<std::uint64_t>();
    }
    return data;
}

} // namespace waiclab
