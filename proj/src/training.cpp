#include "ppa/training.hpp"

#include "ppa/bigint.hpp"

#include <algorithm>
#include <random>

namespace ppa::training {

namespace {

// Per-client streams must differ from each other and from the ground truth
// stream; seed_seq mixes all three words.
std::mt19937_64 client_engine(std::uint64_t seed, std::size_t client_index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(client_index), static_cast<std::uint32_t>(client_index >> 32),
                      0x636c6e74u};
    return std::mt19937_64(seq);
}

double dot(const ModelVector& a, const ModelVector& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

std::string to_string(TaskKind kind)
{
    switch (kind) {
    case TaskKind::mean_estimation:
        return "mean_estimation";
    case TaskKind::linear_regression:
        return "linear_regression";
    }
    return "unknown";
}

TaskKind task_kind_from_string(const std::string& name)
{
    if (name == "mean_estimation") {
        return TaskKind::mean_estimation;
    }
    if (name == "linear_regression") {
        return TaskKind::linear_regression;
    }
    throw Error("unknown task kind '" + name + "'");
}

ModelVector ground_truth(const SyntheticTask& task)
{
    std::seed_seq seq{static_cast<std::uint32_t>(task.seed), static_cast<std::uint32_t>(task.seed >> 32),
                      0x74727468u};
    std::mt19937_64 engine(seq);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    ModelVector theta(task.model_len);
    for (double& v : theta) {
        v = uniform(engine);
    }
    return theta;
}

LocalDataset generate_client_data(const SyntheticTask& task, std::size_t client_index)
{
    if (task.model_len == 0 || task.samples_per_client == 0) {
        throw Error("generate_client_data: model_len and samples_per_client must be positive");
    }
    const ModelVector theta = ground_truth(task);
    auto engine = client_engine(task.seed, client_index);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);

    LocalDataset data;
    data.samples.reserve(task.samples_per_client);
    for (std::size_t s = 0; s < task.samples_per_client; ++s) {
        ModelVector row(task.model_len);
        if (task.kind == TaskKind::mean_estimation) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                row[i] = theta[i] + task.noise_std * noise(engine);
            }
        } else {
            for (double& x : row) {
                x = uniform(engine);
            }
            data.targets.push_back(dot(theta, row) + task.noise_std * noise(engine));
        }
        data.samples.push_back(std::move(row));
    }
    return data;
}

double regression_loss(const ModelVector& model, const LocalDataset& data)
{
    double loss = 0.0;
    for (std::size_t s = 0; s < data.samples.size(); ++s) {
        double r = dot(model, data.samples[s]) - data.targets[s];
        loss += r * r;
    }
    return data.samples.empty() ? 0.0 : loss / static_cast<double>(data.samples.size());
}

ModelVector local_train(const ModelVector& global_model, const LocalDataset& data, TaskKind kind,
                        const Hyperparams& hp)
{
    if (data.samples.empty()) {
        throw Error("local_train: empty dataset");
    }
    const std::size_t m = global_model.size();
    for (const auto& row : data.samples) {
        if (row.size() != m) {
            throw Error("local_train: sample length does not match the model");
        }
    }

    if (kind == TaskKind::mean_estimation) {
        // One-shot: the sample mean, independent of the global model.
        return fedavg_oracle(data.samples);
    }

    if (data.targets.size() != data.samples.size()) {
        throw Error("local_train: regression dataset needs one target per sample");
    }
    ModelVector theta = global_model;
    ModelVector grad(m);
    const double inv_n = 1.0 / static_cast<double>(data.samples.size());
    for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t s = 0; s < data.samples.size(); ++s) {
            const ModelVector& x = data.samples[s];
            double residual = dot(theta, x) - data.targets[s];
            for (std::size_t i = 0; i < m; ++i) {
                grad[i] += residual * x[i];
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            theta[i] -= hp.learning_rate * 2.0 * inv_n * grad[i];
        }
    }
    return theta;
}

ModelVector fedavg_oracle(std::span<const ModelVector> local_models)
{
    if (local_models.empty()) {
        throw Error("fedavg_oracle: empty set of models");
    }
    const std::size_t m = local_models.front().size();
    ModelVector mean(m, 0.0);
    for (const auto& v : local_models) {
        if (v.size() != m) {
            throw Error("fedavg_oracle: models differ in length");
        }
        for (std::size_t i = 0; i < m; ++i) {
            mean[i] += v[i];
        }
    }
    for (double& x : mean) {
        x /= static_cast<double>(local_models.size());
    }
    return mean;
}

} // namespace ppa::training
