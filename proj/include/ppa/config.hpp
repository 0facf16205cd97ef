#pragma once

// Flat `key=value` configuration shared by the role runners and the simulator.
// Blank lines and lines starting with '#' are ignored; unknown keys are errors.

#include "ppa/encoding.hpp"
#include "ppa/protocol.hpp"
#include "ppa/training.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace ppa {

struct RunConfig {
    std::string role;
    std::string listen_addr = "127.0.0.1:0";
    std::string es_addr = "127.0.0.1:7701";
    std::string as_addr = "127.0.0.1:7702";

    unsigned key_bits = 2048;
    std::size_t model_len = 10;
    std::size_t threshold = 3;
    std::uint64_t share_budget = 1u << 20;
    encoding::Config encoding;
    protocol::RateLimit rate_limit;
    std::uint64_t seed = 0;

    // Synthetic task.
    training::TaskKind task = training::TaskKind::mean_estimation;
    std::size_t num_clients = 10;
    std::size_t samples_per_client = 20;
    double noise_std = 0.1;
    training::Hyperparams hyper;

    // Client pool: stop once a response shows this tag (0 = run `rounds` rounds).
    std::uint64_t until_tag = 0;
    std::size_t rounds = 1;
    std::size_t client_offset = 0;

    // Encryption server: exit after this many successful epochs (0 = never).
    std::uint64_t max_epochs = 0;

    // Simulation.
    std::uint64_t target_epochs = 1;   // stop after this many successful aggregations
    std::uint64_t max_updates = 0;     // cap on submitted updates (0 = unlimited)
    std::uint64_t stale_replays = 0;   // replay this many old updates after each epoch change
    std::uint64_t max_events = 100000; // scheduler safety bound
};

std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Applies `key=value` pairs on top of `base`. Throws on unknown keys or bad values.
RunConfig apply_config(RunConfig base, const std::map<std::string, std::string>& values);

RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Canonical `key=value` rendering of every setting, sorted by key.
std::string render_config(const RunConfig& cfg);

protocol::EncryptionServerConfig encryption_server_config(const RunConfig& cfg);
training::SyntheticTask synthetic_task(const RunConfig& cfg);

} // namespace ppa
