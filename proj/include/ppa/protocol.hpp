#pragma once

// Role state machines for the dual-server asynchronous aggregation protocol.
//
//   client --request--> encryption server --(tag, pk, share, model, t)--> client
//   client --update(tag, Enc(model), share)--> aggregation server
//   aggregation server --(tag, sum of ciphertexts, shares)--> encryption server
//   encryption server --result / notification--> everyone
//
// Every state machine processes one event at a time; callers serialize.

#include "ppa/encoding.hpp"
#include "ppa/paillier.hpp"
#include "ppa/shamir.hpp"
#include "ppa/training.hpp"

#include <chrono>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace ppa::protocol {

using encoding::ModelVector;
using paillier::Ciphertext;
using shamir::Share;

/// Global model version. Starts at 0, advances by one per successful aggregation.
struct Tag {
    std::uint64_t version = 0;

    Tag next() const { return Tag{version + 1}; }
    auto operator<=>(const Tag&) const = default;
};

/// Monotonic milliseconds; wall clock in networked mode, virtual in simulation.
using Timestamp = std::chrono::milliseconds;

// -- messages ---------------------------------------------------------------

struct ClientRequest {
    std::string client_id;

    friend bool operator==(const ClientRequest&, const ClientRequest&) = default;
};

struct ClientResponse {
    Tag tag;
    paillier::PublicKey public_key;
    Share share;
    ModelVector global_model;
    std::size_t threshold = 0;

    friend bool operator==(const ClientResponse&, const ClientResponse&) = default;
};

struct Update {
    Tag tag;
    std::string client_id;
    std::uint64_t count = 0;
    std::vector<Ciphertext> ciphertexts;
    Share share;

    friend bool operator==(const Update&, const Update&) = default;
};

struct AggregationRequest {
    Tag tag;
    std::vector<Ciphertext> aggregate;
    std::vector<Share> shares;

    friend bool operator==(const AggregationRequest&, const AggregationRequest&) = default;
};

enum class Rejection {
    none,
    tag_mismatch,
    malformed_request,
    insufficient_shares,
    share_verification_failed,
    decryption_failure,
};

std::string to_string(Rejection r);
Rejection rejection_from_string(const std::string& s);

struct AggregationResult {
    Tag tag;                  // tag of the request this answers
    bool accepted = false;
    Rejection reason = Rejection::none;
    Tag current_tag;          // encryption server tag after processing

    friend bool operator==(const AggregationResult&, const AggregationResult&) = default;
};

enum class NotificationKind { epoch_started, aggregation_failed };

std::string to_string(NotificationKind k);
NotificationKind notification_kind_from_string(const std::string& s);

/// Broadcast by the encryption server. epoch_started announces a tag with its
/// threshold and public key (the aggregation server needs n^2 to multiply);
/// aggregation_failed carries the unchanged tag and the reason.
struct Notification {
    NotificationKind kind = NotificationKind::epoch_started;
    Tag tag;
    Rejection reason = Rejection::none;
    std::size_t threshold = 0;
    std::optional<paillier::PublicKey> public_key;

    friend bool operator==(const Notification&, const Notification&) = default;
};

struct ErrorMessage {
    std::string code;
    std::string message;

    friend bool operator==(const ErrorMessage&, const ErrorMessage&) = default;
};

using Message = std::variant<ClientRequest, ClientResponse, Update, AggregationRequest, AggregationResult,
                             Notification, ErrorMessage>;

// -- encryption server ------------------------------------------------------

struct RateLimit {
    std::size_t max_requests = 10;
    Timestamp window = std::chrono::seconds(60);
};

struct EncryptionServerConfig {
    unsigned key_bits = paillier::kDefaultModulusBits;
    std::size_t model_len = 10;
    std::size_t threshold = 3;
    std::uint64_t share_budget = 1u << 20;
    encoding::Config encoding;
    RateLimit rate_limit;
    shamir::FieldParams field = shamir::setup();
};

/// Everything the encryption server holds for one tag. Replaced wholesale on
/// every successful aggregation.
struct EpochState {
    Tag tag;
    shamir::Polynomial polynomial; // constant term is the epoch secret
    std::size_t threshold = 0;
    std::uint64_t share_budget = 0;
    std::uint64_t issued_count = 0;
    paillier::KeyPair keypair;
    ModelVector global_model;

    const BigInt& secret() const { return polynomial.secret(); }
};

enum class RefusalReason { rate_limited, share_budget_exhausted };

std::string to_string(RefusalReason r);

struct Refusal {
    RefusalReason reason;
    std::string client_id;
    Timestamp at;
};

using RequestOutcome = std::variant<ClientResponse, Refusal>;

struct AggregationOutcome {
    AggregationResult result;
    Notification notification;
};

using KeyGenerator = std::function<paillier::KeyPair(RandomSource&)>;

class EncryptionServer {
public:
    /// Starts at tag 0 with a zero global model. `rng` must outlive the server.
    EncryptionServer(EncryptionServerConfig config, RandomSource& rng, KeyGenerator keygen = {});

    RequestOutcome handle_request(const std::string& client_id, Timestamp now);
    AggregationOutcome handle_aggregation(const AggregationRequest& request);

    /// epoch_started notification for the current tag.
    Notification announcement() const;

    Tag tag() const { return epoch_.tag; }
    const EpochState& epoch() const { return epoch_; }
    const ModelVector& global_model() const { return epoch_.global_model; }
    const paillier::PublicKey& public_key() const { return epoch_.keypair.public_key; }
    const EncryptionServerConfig& config() const { return config_; }

    /// Request timestamps per client within the current window.
    const std::map<std::string, std::deque<Timestamp>>& request_log() const { return request_log_; }
    const std::vector<Refusal>& refusals() const { return refusals_; }

private:
    EpochState make_epoch(Tag tag, ModelVector model);
    Rejection verify(const AggregationRequest& request) const;

    EncryptionServerConfig config_;
    RandomSource* rng_;
    KeyGenerator keygen_;
    EpochState epoch_;
    std::map<std::string, std::deque<Timestamp>> request_log_;
    std::vector<Refusal> refusals_;
};

// -- aggregation server -----------------------------------------------------

struct AggregationServerConfig {
    std::size_t model_len = 10;
};

enum class IngestStatus { buffered, dropped_stale, rejected_malformed };

std::string to_string(IngestStatus s);

struct UpdateId {
    std::string client_id;
    Tag tag;
    std::uint64_t count = 0;

    auto operator<=>(const UpdateId&) const = default;
};

/// Aggregation request plus which buffered updates went into it. The
/// contributors never leave the aggregation server.
struct AggregationBatch {
    AggregationRequest request;
    std::vector<UpdateId> contributors;
};

struct AggregationMetrics {
    std::uint64_t buffered = 0;
    std::uint64_t dropped_stale = 0;
    std::uint64_t rejected_malformed = 0;
    std::uint64_t requests_sent = 0;
};

class AggregationServer {
public:
    explicit AggregationServer(AggregationServerConfig config) : config_(config) {}

    void on_notification(const Notification& notification);
    void on_result(const AggregationResult& result);

    IngestStatus receive_update(Update update);

    /// Packages every buffered update for `tag` once at least t_v are present
    /// and no request for the tag is outstanding.
    std::optional<AggregationBatch> try_aggregate(Tag tag);

    /// Lowest tag still accepting updates.
    Tag live_floor() const { return live_floor_; }
    std::size_t buffered(Tag tag) const;
    /// Tags with buffered updates, ascending.
    std::vector<Tag> pending_tags() const;
    bool in_flight(Tag tag) const { return in_flight_.count(tag) > 0; }
    const AggregationMetrics& metrics() const { return metrics_; }

private:
    struct EpochInfo {
        std::size_t threshold = 0;
        paillier::PublicKey public_key;
    };

    void advance_floor(Tag floor);

    AggregationServerConfig config_;
    Tag live_floor_;
    std::map<Tag, EpochInfo> epochs_;
    std::map<Tag, std::vector<Update>> buffer_;
    std::set<Tag> in_flight_;
    AggregationMetrics metrics_;
};

// -- client -----------------------------------------------------------------

class Client {
public:
    Client(std::string id, training::LocalDataset data, training::TaskKind kind, training::Hyperparams hp,
           encoding::Config encoding);

    ClientRequest make_request() const { return ClientRequest{id_}; }
    void on_response(ClientResponse response);
    bool has_response() const { return response_.has_value(); }

    /// Local training from the received global model, then encryption under
    /// the received key. Consumes the response; each update needs a new share.
    Update round(RandomSource& rng);

    const std::string& id() const { return id_; }
    const ModelVector& last_local_model() const { return last_local_model_; }

private:
    std::string id_;
    training::LocalDataset data_;
    training::TaskKind kind_;
    training::Hyperparams hp_;
    encoding::Config encoding_;
    std::optional<ClientResponse> response_;
    std::map<Tag, std::uint64_t> counts_;
    ModelVector last_local_model_;
};

} // namespace ppa::protocol
