#pragma once

// Long-running networked roles. Each runner owns one protocol state machine
// behind a mutex; connection threads hand it one event at a time.
//
// Topology: clients talk to the encryption server both ways and only send to
// the aggregation server; the aggregation server dials the encryption server.

#include "ppa/config.hpp"

#include <atomic>
#include <iosfwd>

namespace ppa::runners {

/// Prints `listening <addr>` and one `epoch_completed ...` line per successful
/// aggregation to `out`. Returns when `stop` is raised or max_epochs is reached.
int run_encryption_server(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out);

/// Prints `listening <addr>` and `aggregation_sent ...` lines to `out`.
int run_aggregation_server(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out);

/// Runs cfg.num_clients clients concurrently. Each client loops
/// request -> train -> submit (then disconnects) until it has submitted
/// cfg.rounds updates, or, when cfg.until_tag > 0, until a response carries
/// that tag. Returns 0 when every client reached its goal.
int run_client_pool(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out);

} // namespace ppa::runners
