#pragma once

// Synthetic learning tasks used to drive the protocol end to end.

#include "ppa/encoding.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ppa::training {

using encoding::ModelVector;

enum class TaskKind { mean_estimation, linear_regression };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct SyntheticTask {
    TaskKind kind = TaskKind::mean_estimation;
    std::size_t model_len = 10;
    std::size_t num_clients = 10;
    std::size_t samples_per_client = 20;
    double noise_std = 0.1;
    std::uint64_t seed = 0;
};

struct LocalDataset {
    // mean_estimation: noisy copies of the target. linear_regression: inputs.
    std::vector<ModelVector> samples;
    // linear_regression targets, one per sample; empty for mean_estimation.
    std::vector<double> targets;
};

struct Hyperparams {
    std::size_t epochs = 20;
    double learning_rate = 0.1;
};

/// Hidden parameter vector, entries uniform in [-1, 1]. Depends only on the seed.
ModelVector ground_truth(const SyntheticTask& task);

LocalDataset generate_client_data(const SyntheticTask& task, std::size_t client_index);

ModelVector local_train(const ModelVector& global_model, const LocalDataset& data, TaskKind kind,
                        const Hyperparams& hp);

/// Mean squared error of `model` on a regression dataset.
double regression_loss(const ModelVector& model, const LocalDataset& data);

/// Coordinate-wise arithmetic mean.
ModelVector fedavg_oracle(std::span<const ModelVector> local_models);

} // namespace ppa::training
