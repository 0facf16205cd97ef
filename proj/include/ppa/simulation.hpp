#pragma once

// Deterministic in-process run of the full protocol. The role state machines
// are the same ones the networked runners use; messages pass through the wire
// codec and a seeded discrete-event scheduler instead of sockets.

#include "ppa/config.hpp"
#include "ppa/protocol.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ppa::simulation {

struct EpochRecord {
    std::uint64_t tag = 0;        // tag that was aggregated
    std::size_t aggregated = 0;   // t', updates in the aggregate
    std::vector<protocol::UpdateId> contributors;
    encoding::ModelVector decrypted;
    encoding::ModelVector oracle; // plaintext FedAvg of the same local models
    double max_error = 0.0;
    std::uint64_t dropped_total = 0;
    std::uint64_t completed_at_ms = 0;
};

struct RejectionRecord {
    std::uint64_t tag = 0;
    protocol::Rejection reason = protocol::Rejection::none;
    std::size_t shares = 0;
};

struct SimulationReport {
    std::uint64_t seed = 0;
    RunConfig config;
    std::vector<EpochRecord> epochs;
    std::vector<RejectionRecord> rejections;
    std::uint64_t final_tag = 0;
    std::uint64_t requests_sent = 0;
    std::uint64_t refused_requests = 0;
    std::uint64_t updates_submitted = 0;
    std::uint64_t updates_replayed = 0;
    std::uint64_t dropped_stale = 0;
    std::uint64_t rejected_malformed = 0;
    std::uint64_t events = 0;
    encoding::ModelVector final_model;
    encoding::ModelVector ground_truth;

    /// Stable text rendering; identical inputs give identical bytes.
    std::string render() const;
};

SimulationReport run_simulation(const RunConfig& config, std::uint64_t seed);

} // namespace ppa::simulation
