#include "ppa/protocol.hpp"

#include <spdlog/spdlog.h>

#include <unordered_set>

namespace ppa::protocol {

std::string to_string(Rejection r)
{
    switch (r) {
    case Rejection::none:
        return "none";
    case Rejection::tag_mismatch:
        return "tag_mismatch";
    case Rejection::malformed_request:
        return "malformed_request";
    case Rejection::insufficient_shares:
        return "insufficient_shares";
    case Rejection::share_verification_failed:
        return "share_verification_failed";
    case Rejection::decryption_failure:
        return "decryption_failure";
    }
    return "unknown";
}

Rejection rejection_from_string(const std::string& s)
{
    for (auto r : {Rejection::none, Rejection::tag_mismatch, Rejection::malformed_request,
                   Rejection::insufficient_shares, Rejection::share_verification_failed,
                   Rejection::decryption_failure}) {
        if (to_string(r) == s) {
            return r;
        }
    }
    throw Error("unknown rejection reason '" + s + "'");
}

std::string to_string(NotificationKind k)
{
    return k == NotificationKind::epoch_started ? "epoch_started" : "aggregation_failed";
}

NotificationKind notification_kind_from_string(const std::string& s)
{
    if (s == "epoch_started") {
        return NotificationKind::epoch_started;
    }
    if (s == "aggregation_failed") {
        return NotificationKind::aggregation_failed;
    }
    throw Error("unknown notification kind '" + s + "'");
}

std::string to_string(RefusalReason r)
{
    return r == RefusalReason::rate_limited ? "rate_limited" : "share_budget_exhausted";
}

std::string to_string(IngestStatus s)
{
    switch (s) {
    case IngestStatus::buffered:
        return "buffered";
    case IngestStatus::dropped_stale:
        return "dropped_stale";
    case IngestStatus::rejected_malformed:
        return "rejected_malformed";
    }
    return "unknown";
}

// -- encryption server ------------------------------------------------------

EncryptionServer::EncryptionServer(EncryptionServerConfig config, RandomSource& rng, KeyGenerator keygen)
    : config_(std::move(config)),
      rng_(&rng),
      keygen_(keygen ? std::move(keygen)
                     : KeyGenerator([bits = config_.key_bits](RandomSource& r) {
                           return paillier::keygen(paillier::setup(bits), r);
                       })),
      epoch_(make_epoch(Tag{0}, ModelVector(config_.model_len, 0.0)))
{
    spdlog::info("encryption server: epoch {} started (t={}, n={} bits)", epoch_.tag.version, epoch_.threshold,
                 mpz_sizeinbase(epoch_.keypair.public_key.n.get_mpz_t(), 2));
}

EpochState EncryptionServer::make_epoch(Tag tag, ModelVector model)
{
    if (config_.threshold < 1 || config_.threshold > config_.share_budget) {
        throw Error("encryption server: threshold must be in [1, share_budget]");
    }
    if (config_.threshold > config_.encoding.max_summands) {
        throw Error("encryption server: threshold exceeds the encoding's max_summands");
    }
    paillier::KeyPair keypair = keygen_(*rng_);
    encoding::validate(config_.encoding, keypair.public_key.n);

    BigInt secret = rng_->below(config_.field.prime);
    auto poly = shamir::Polynomial::random(secret, config_.threshold, config_.field, *rng_);
    return EpochState{tag, std::move(poly), config_.threshold, config_.share_budget, 0, std::move(keypair),
                      std::move(model)};
}

RequestOutcome EncryptionServer::handle_request(const std::string& client_id, Timestamp now)
{
    auto& log = request_log_[client_id];
    while (!log.empty() && now - log.front() >= config_.rate_limit.window) {
        log.pop_front();
    }
    if (log.size() >= config_.rate_limit.max_requests) {
        spdlog::warn("encryption server: refusing client '{}': {} requests within {} ms", client_id, log.size(),
                     config_.rate_limit.window.count());
        refusals_.push_back(Refusal{RefusalReason::rate_limited, client_id, now});
        return refusals_.back();
    }
    if (epoch_.issued_count >= epoch_.share_budget) {
        spdlog::warn("encryption server: share budget exhausted at tag {}", epoch_.tag.version);
        refusals_.push_back(Refusal{RefusalReason::share_budget_exhausted, client_id, now});
        return refusals_.back();
    }
    log.push_back(now);

    ++epoch_.issued_count;
    Share share = epoch_.polynomial.share_at(epoch_.issued_count, epoch_.tag.version);
    return ClientResponse{epoch_.tag, epoch_.keypair.public_key, std::move(share), epoch_.global_model,
                          epoch_.threshold};
}

Rejection EncryptionServer::verify(const AggregationRequest& request) const
{
    if (request.tag != epoch_.tag) {
        return Rejection::tag_mismatch;
    }
    if (request.aggregate.size() != config_.model_len) {
        return Rejection::malformed_request;
    }
    std::unordered_set<std::uint64_t> indices;
    for (const Share& s : request.shares) {
        if (s.tag != request.tag.version || !indices.insert(s.index).second) {
            return Rejection::malformed_request;
        }
    }
    if (request.shares.size() > config_.encoding.max_summands) {
        return Rejection::malformed_request;
    }
    if (request.shares.size() < epoch_.threshold) {
        return Rejection::insufficient_shares;
    }
    for (const Share& s : request.shares) {
        if (s.index == 0 || s.index > epoch_.issued_count) {
            return Rejection::share_verification_failed;
        }
    }
    // Interpolate through every submitted share, so a single forged share
    // among extras moves the result off the secret.
    try {
        BigInt recovered = shamir::combine(request.shares.size(), request.shares, config_.field);
        if (recovered != epoch_.secret()) {
            return Rejection::share_verification_failed;
        }
    } catch (const Error&) {
        return Rejection::share_verification_failed;
    }
    for (const Ciphertext& c : request.aggregate) {
        if (c.key_fingerprint != epoch_.keypair.public_key.fingerprint) {
            return Rejection::decryption_failure;
        }
    }
    return Rejection::none;
}

AggregationOutcome EncryptionServer::handle_aggregation(const AggregationRequest& request)
{
    Rejection reason = verify(request);
    ModelVector model;
    if (reason == Rejection::none) {
        try {
            model = encoding::decrypt_vector(request.aggregate, epoch_.keypair.secret_key, request.shares.size(),
                                             config_.encoding);
        } catch (const Error& e) {
            spdlog::warn("encryption server: decryption failed: {}", e.what());
            reason = Rejection::decryption_failure;
        }
    }

    if (reason != Rejection::none) {
        spdlog::warn("encryption server: aggregation for tag {} rejected: {}", request.tag.version,
                     to_string(reason));
        AggregationResult result{request.tag, false, reason, epoch_.tag};
        Notification note{NotificationKind::aggregation_failed, epoch_.tag, reason, epoch_.threshold, std::nullopt};
        return AggregationOutcome{result, note};
    }

    // Build the next epoch before touching the current one, so a keygen
    // failure leaves the server as it was.
    const Tag completed = epoch_.tag;
    EpochState next = make_epoch(completed.next(), std::move(model));
    epoch_ = std::move(next);
    spdlog::info("encryption server: aggregated {} updates for tag {}; epoch {} started", request.shares.size(),
                 completed.version, epoch_.tag.version);
    return AggregationOutcome{AggregationResult{completed, true, Rejection::none, epoch_.tag}, announcement()};
}

Notification EncryptionServer::announcement() const
{
    return Notification{NotificationKind::epoch_started, epoch_.tag, Rejection::none, epoch_.threshold,
                        epoch_.keypair.public_key};
}

// -- aggregation server -----------------------------------------------------

void AggregationServer::advance_floor(Tag floor)
{
    if (floor <= live_floor_) {
        return;
    }
    live_floor_ = floor;
    for (auto it = buffer_.begin(); it != buffer_.end() && it->first < floor;) {
        metrics_.dropped_stale += it->second.size();
        it = buffer_.erase(it);
    }
    epochs_.erase(epochs_.begin(), epochs_.lower_bound(floor));
    in_flight_.erase(in_flight_.begin(), in_flight_.lower_bound(floor));
}

void AggregationServer::on_notification(const Notification& notification)
{
    if (notification.kind == NotificationKind::epoch_started) {
        advance_floor(notification.tag);
        if (notification.public_key) {
            epochs_[notification.tag] = EpochInfo{notification.threshold, *notification.public_key};
        }
    } else {
        in_flight_.erase(notification.tag);
    }
}

void AggregationServer::on_result(const AggregationResult& result)
{
    in_flight_.erase(result.tag);
    if (result.accepted) {
        advance_floor(result.tag.next());
    }
}

IngestStatus AggregationServer::receive_update(Update update)
{
    if (update.tag < live_floor_) {
        ++metrics_.dropped_stale;
        return IngestStatus::dropped_stale;
    }

    auto malformed = [this](const char* why, const Update& u) {
        spdlog::warn("aggregation server: rejecting update from '{}' at tag {}: {}", u.client_id, u.tag.version, why);
        ++metrics_.rejected_malformed;
        return IngestStatus::rejected_malformed;
    };

    if (update.ciphertexts.size() != config_.model_len) {
        return malformed("wrong model length", update);
    }
    if (update.share.tag != update.tag.version) {
        return malformed("share tag differs from update tag", update);
    }
    const auto& fp = update.ciphertexts.front().key_fingerprint;
    for (const auto& c : update.ciphertexts) {
        if (c.key_fingerprint != fp) {
            return malformed("mixed key fingerprints", update);
        }
    }
    if (auto it = epochs_.find(update.tag); it != epochs_.end()) {
        if (fp != it->second.public_key.fingerprint) {
            return malformed("ciphertexts under a foreign key", update);
        }
        for (const auto& c : update.ciphertexts) {
            if (!paillier::is_valid_ciphertext_value(c.value, it->second.public_key)) {
                return malformed("ciphertext outside Z*_{n^2}", update);
            }
        }
    }
    auto& pending = buffer_[update.tag];
    for (const auto& u : pending) {
        if (u.share.index == update.share.index) {
            return malformed("share already buffered", update);
        }
        if (u.ciphertexts.front().key_fingerprint != fp) {
            return malformed("ciphertexts under a different key than buffered updates", update);
        }
    }
    pending.push_back(std::move(update));
    ++metrics_.buffered;
    return IngestStatus::buffered;
}

std::size_t AggregationServer::buffered(Tag tag) const
{
    auto it = buffer_.find(tag);
    return it == buffer_.end() ? 0 : it->second.size();
}

std::vector<Tag> AggregationServer::pending_tags() const
{
    std::vector<Tag> out;
    for (const auto& [tag, updates] : buffer_) {
        if (!updates.empty()) {
            out.push_back(tag);
        }
    }
    return out;
}

std::optional<AggregationBatch> AggregationServer::try_aggregate(Tag tag)
{
    if (tag < live_floor_ || in_flight(tag)) {
        return std::nullopt;
    }
    auto info = epochs_.find(tag);
    auto pending = buffer_.find(tag);
    if (info == epochs_.end() || pending == buffer_.end()) {
        return std::nullopt;
    }
    if (pending->second.size() < info->second.threshold) {
        return std::nullopt;
    }

    std::vector<Update> updates = std::move(pending->second);
    buffer_.erase(pending);

    std::vector<std::vector<Ciphertext>> vectors;
    AggregationBatch batch;
    batch.request.tag = tag;
    vectors.reserve(updates.size());
    for (auto& u : updates) {
        batch.request.shares.push_back(u.share);
        batch.contributors.push_back(UpdateId{u.client_id, u.tag, u.count});
        vectors.push_back(std::move(u.ciphertexts));
    }
    batch.request.aggregate = encoding::add_vectors(vectors, info->second.public_key);
    in_flight_.insert(tag);
    ++metrics_.requests_sent;
    return batch;
}

// -- client -----------------------------------------------------------------

Client::Client(std::string id, training::LocalDataset data, training::TaskKind kind, training::Hyperparams hp,
               encoding::Config encoding)
    : id_(std::move(id)), data_(std::move(data)), kind_(kind), hp_(hp), encoding_(encoding)
{
}

void Client::on_response(ClientResponse response)
{
    if (response.share.tag != response.tag.version) {
        throw Error("client: response share belongs to a different tag");
    }
    response_ = std::move(response);
}

Update Client::round(RandomSource& rng)
{
    if (!response_) {
        throw Error("client '" + id_ + "': no response from the encryption server");
    }
    ClientResponse response = std::move(*response_);
    response_.reset();

    last_local_model_ = training::local_train(response.global_model, data_, kind_, hp_);
    Update update;
    update.tag = response.tag;
    update.client_id = id_;
    update.count = counts_[response.tag]++;
    update.ciphertexts = encoding::encrypt_vector(last_local_model_, response.public_key, encoding_, rng);
    update.share = std::move(response.share);
    return update;
}

} // namespace ppa::protocol
