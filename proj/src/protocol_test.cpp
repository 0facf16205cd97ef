#include "ppa/protocol.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace ppa::protocol;
using ppa::BigInt;
using std::chrono::milliseconds;
namespace pe = ppa::paillier;

namespace {

EncryptionServerConfig small_config(std::size_t t, std::size_t m = 3)
{
    EncryptionServerConfig cfg;
    cfg.key_bits = 128;
    cfg.model_len = m;
    cfg.threshold = t;
    cfg.rate_limit.max_requests = 1000;
    return cfg;
}

ClientResponse expect_response(const RequestOutcome& outcome)
{
    REQUIRE(std::holds_alternative<ClientResponse>(outcome));
    return std::get<ClientResponse>(outcome);
}

// Encrypts `values` under the response key and attaches its share.
Update make_update(const ClientResponse& r, const std::string& id, const ModelVector& values,
                   ppa::RandomSource& rng, std::uint64_t count = 0)
{
    Update u;
    u.tag = r.tag;
    u.client_id = id;
    u.count = count;
    u.ciphertexts = ppa::encoding::encrypt_vector(values, r.public_key, {}, rng);
    u.share = r.share;
    return u;
}

struct Harness {
    ppa::SeededRandom rng{99};
    ppa::SeededRandom client_rng{100};
    EncryptionServer es;
    AggregationServer as;
    milliseconds now{0};

    explicit Harness(std::size_t t, std::size_t m = 3) : es(small_config(t, m), rng), as({m})
    {
        as.on_notification(es.announcement());
    }

    ClientResponse request(const std::string& id)
    {
        now += milliseconds(1);
        return expect_response(es.handle_request(id, now));
    }

    void submit(const std::string& id, const ModelVector& values)
    {
        auto r = request(id);
        CHECK(as.receive_update(make_update(r, id, values, client_rng)) == IngestStatus::buffered);
    }

    AggregationOutcome deliver(const AggregationRequest& req)
    {
        auto out = es.handle_aggregation(req);
        as.on_result(out.result);
        as.on_notification(out.notification);
        return out;
    }
};

} // namespace

TEST_CASE("encryption server starts at tag 0")
{
    ppa::SeededRandom rng(1);
    EncryptionServer es(small_config(3), rng);
    CHECK(es.tag() == Tag{0});
    CHECK(es.epoch().issued_count == 0);
    CHECK(es.global_model() == ModelVector(3, 0.0));
    auto note = es.announcement();
    CHECK(note.kind == NotificationKind::epoch_started);
    CHECK(note.threshold == 3);
    REQUIRE(note.public_key.has_value());
    CHECK(*note.public_key == es.public_key());
}

TEST_CASE("invalid thresholds are refused")
{
    ppa::SeededRandom rng(1);
    auto cfg = small_config(0);
    CHECK_THROWS_AS(EncryptionServer(cfg, rng), ppa::Error);
    cfg = small_config(5);
    cfg.share_budget = 4;
    CHECK_THROWS_AS(EncryptionServer(cfg, rng), ppa::Error);
}

TEST_CASE("requests receive distinct shares and are logged")
{
    Harness h(3);
    auto a = h.request("a");
    auto b = h.request("b");
    auto a2 = h.request("a");
    std::set<std::uint64_t> idx{a.share.index, b.share.index, a2.share.index};
    CHECK(idx.size() == 3);
    CHECK(a.tag == Tag{0});
    CHECK(a.share.tag == 0);
    CHECK(a.threshold == 3);
    CHECK(a.public_key == h.es.public_key());
    CHECK(h.es.request_log().at("a").size() == 2);
    CHECK(h.es.request_log().at("b").size() == 1);
    CHECK(h.es.epoch().issued_count == 3);
}

TEST_CASE("share budget is enforced")
{
    ppa::SeededRandom rng(2);
    auto cfg = small_config(2);
    cfg.share_budget = 2;
    EncryptionServer es(cfg, rng);
    expect_response(es.handle_request("a", milliseconds(0)));
    expect_response(es.handle_request("b", milliseconds(0)));
    auto third = es.handle_request("c", milliseconds(0));
    REQUIRE(std::holds_alternative<Refusal>(third));
    CHECK(std::get<Refusal>(third).reason == RefusalReason::share_budget_exhausted);
}

TEST_CASE("sliding window rate limit")
{
    ppa::SeededRandom rng(3);
    auto cfg = small_config(2);
    cfg.rate_limit = {3, milliseconds(1000)};
    EncryptionServer es(cfg, rng);
    for (int i = 0; i < 3; ++i) {
        expect_response(es.handle_request("x", milliseconds(100 * i)));
    }
    auto refused = es.handle_request("x", milliseconds(500));
    REQUIRE(std::holds_alternative<Refusal>(refused));
    CHECK(std::get<Refusal>(refused).reason == RefusalReason::rate_limited);
    CHECK(es.refusals().size() == 1);
    CHECK(es.refusals()[0].client_id == "x");
    // another client is unaffected
    expect_response(es.handle_request("y", milliseconds(500)));
    // first request leaves the window at t = 1000
    expect_response(es.handle_request("x", milliseconds(1000)));
    CHECK(es.epoch().issued_count == 5);
}

TEST_CASE("aggregation below threshold is not triggered")
{
    Harness h(3);
    h.submit("a", {1, 1, 1});
    h.submit("b", {1, 1, 1});
    CHECK_FALSE(h.as.try_aggregate(Tag{0}).has_value());
    CHECK(h.as.buffered(Tag{0}) == 2);
}

TEST_CASE("threshold met: all-ones mean and tag advance")
{
    Harness h(3);
    auto old_pk = h.es.public_key();
    for (const char* id : {"a", "b", "c"}) {
        h.submit(id, {1, 1, 1});
    }
    auto batch = h.as.try_aggregate(Tag{0});
    REQUIRE(batch.has_value());
    CHECK(batch->request.shares.size() == 3);
    CHECK(batch->contributors.size() == 3);
    CHECK(h.as.in_flight(Tag{0}));
    CHECK_FALSE(h.as.try_aggregate(Tag{0}).has_value());

    auto out = h.deliver(batch->request);
    CHECK(out.result.accepted);
    CHECK(out.result.tag == Tag{0});
    CHECK(out.result.current_tag == Tag{1});
    CHECK(h.es.tag() == Tag{1});
    CHECK(h.es.global_model() == ModelVector{1, 1, 1});
    CHECK_FALSE(h.es.public_key() == old_pk);
    CHECK(h.es.epoch().issued_count == 0);
    CHECK(h.as.live_floor() == Tag{1});
    CHECK_FALSE(h.as.in_flight(Tag{0}));
}

TEST_CASE("all buffered updates are included and averaged")
{
    Harness h(3, 2);
    std::vector<ModelVector> plain{{0.5, -1.0}, {1.5, 2.0}, {-0.25, 0.125}, {3.0, -3.0}, {0.1, 0.2}};
    for (std::size_t i = 0; i < plain.size(); ++i) {
        h.submit("c" + std::to_string(i), plain[i]);
    }
    auto batch = h.as.try_aggregate(Tag{0});
    REQUIRE(batch.has_value());
    CHECK(batch->request.shares.size() == 5);
    auto out = h.deliver(batch->request);
    REQUIRE(out.result.accepted);
    for (std::size_t j = 0; j < 2; ++j) {
        double oracle = 0;
        for (const auto& v : plain) {
            oracle += v[j];
        }
        oracle /= 5.0;
        CHECK(std::abs(h.es.global_model()[j] - oracle) <= 5e-7);
    }
}

TEST_CASE("rejections leave the encryption server untouched")
{
    Harness h(3);
    for (const char* id : {"a", "b", "c"}) {
        h.submit(id, {0.5, 0.5, 0.5});
    }
    auto batch = h.as.try_aggregate(Tag{0});
    REQUIRE(batch.has_value());
    const auto genuine = batch->request;
    const BigInt secret = h.es.epoch().secret();
    const auto pk = h.es.public_key();
    const auto sk_lambda = h.es.epoch().keypair.secret_key.lambda;
    const auto model = h.es.global_model();

    auto check_unchanged = [&](const AggregationOutcome& out, Rejection why) {
        CHECK_FALSE(out.result.accepted);
        CHECK(out.result.reason == why);
        CHECK(out.notification.kind == NotificationKind::aggregation_failed);
        CHECK(out.notification.reason == why);
        CHECK(out.notification.tag == Tag{0});
        CHECK(h.es.tag() == Tag{0});
        CHECK(h.es.epoch().secret() == secret);
        CHECK(h.es.public_key() == pk);
        CHECK(h.es.epoch().keypair.secret_key.lambda == sk_lambda);
        CHECK(h.es.global_model() == model);
    };

    SUBCASE("forged share value")
    {
        auto forged = genuine;
        forged.shares[1].value = (forged.shares[1].value + 1) % h.es.config().field.prime;
        // oracle: combine over the genuine shares is the secret, over the forged set it is not
        CHECK(ppa::shamir::combine(3, genuine.shares, h.es.config().field) == secret);
        CHECK(ppa::shamir::combine(3, forged.shares, h.es.config().field) != secret);
        check_unchanged(h.es.handle_aggregation(forged), Rejection::share_verification_failed);
    }
    SUBCASE("too few shares")
    {
        auto fewer = genuine;
        fewer.shares.pop_back();
        check_unchanged(h.es.handle_aggregation(fewer), Rejection::insufficient_shares);
    }
    SUBCASE("wrong tag")
    {
        auto stale = genuine;
        stale.tag = Tag{7};
        check_unchanged(h.es.handle_aggregation(stale), Rejection::tag_mismatch);
    }
    SUBCASE("duplicate share")
    {
        auto dup = genuine;
        dup.shares[2] = dup.shares[0];
        check_unchanged(h.es.handle_aggregation(dup), Rejection::malformed_request);
    }
    SUBCASE("wrong length")
    {
        auto shorter = genuine;
        shorter.aggregate.pop_back();
        check_unchanged(h.es.handle_aggregation(shorter), Rejection::malformed_request);
    }
    SUBCASE("unissued index")
    {
        auto extra = genuine;
        extra.shares.push_back(h.es.epoch().polynomial.share_at(50, 0));
        check_unchanged(h.es.handle_aggregation(extra), Rejection::share_verification_failed);
    }
    SUBCASE("aggregate under a foreign key")
    {
        auto foreign = genuine;
        auto other = pe::keygen_from_primes(11, 13);
        for (auto& c : foreign.aggregate) {
            c = pe::Ciphertext{1, other.public_key.fingerprint};
        }
        check_unchanged(h.es.handle_aggregation(foreign), Rejection::decryption_failure);
    }

    // the failure notification releases the tag on the aggregation server
    auto out = h.es.handle_aggregation(AggregationRequest{Tag{0}, genuine.aggregate, {}});
    h.as.on_result(out.result);
    h.as.on_notification(out.notification);
    CHECK_FALSE(h.as.in_flight(Tag{0}));
    CHECK(h.as.live_floor() == Tag{0});
}

TEST_CASE("stale updates are dropped without touching the model")
{
    Harness h(2);
    auto r_old = h.request("late");
    h.submit("a", {0.25, 0.25, 0.25});
    h.submit("b", {0.75, 0.75, 0.75});
    auto batch = h.as.try_aggregate(Tag{0});
    REQUIRE(batch.has_value());
    REQUIRE(h.deliver(batch->request).result.accepted);
    const ModelVector model = h.es.global_model();

    CHECK(h.as.receive_update(make_update(r_old, "late", {9, 9, 9}, h.client_rng)) == IngestStatus::dropped_stale);
    CHECK(h.as.metrics().dropped_stale == 1);
    CHECK(h.as.buffered(Tag{0}) == 0);
    CHECK_FALSE(h.as.try_aggregate(Tag{0}).has_value());
    CHECK(h.es.global_model() == model);
    CHECK(h.es.tag() == Tag{1});
}

TEST_CASE("malformed updates are rejected")
{
    Harness h(3);
    auto r = h.request("a");
    auto good = make_update(r, "a", {1, 2, 3}, h.client_rng);

    auto shorter = good;
    shorter.ciphertexts.pop_back();
    CHECK(h.as.receive_update(shorter) == IngestStatus::rejected_malformed);

    auto mixed = good;
    mixed.ciphertexts[1].key_fingerprint = "00";
    CHECK(h.as.receive_update(mixed) == IngestStatus::rejected_malformed);

    auto retagged = good;
    retagged.share.tag = 5;
    CHECK(h.as.receive_update(retagged) == IngestStatus::rejected_malformed);

    auto zero = good;
    zero.ciphertexts[0].value = 0;
    CHECK(h.as.receive_update(zero) == IngestStatus::rejected_malformed);

    CHECK(h.as.metrics().rejected_malformed == 4);
    CHECK(h.as.receive_update(good) == IngestStatus::buffered);
    CHECK(h.as.receive_update(good) == IngestStatus::rejected_malformed);
    CHECK(h.as.buffered(Tag{0}) == 1);
}

TEST_CASE("client rounds")
{
    ppa::training::SyntheticTask task;
    task.model_len = 3;
    Harness h(2);
    Client c("client-0", ppa::training::generate_client_data(task, 0), task.kind, {}, {});
    CHECK_THROWS_AS(c.round(h.client_rng), ppa::Error);

    auto r1 = h.request(c.id());
    c.on_response(r1);
    CHECK(c.has_response());
    Update u1 = c.round(h.client_rng);
    CHECK_FALSE(c.has_response());
    CHECK(u1.tag == Tag{0});
    CHECK(u1.count == 0);
    CHECK(u1.ciphertexts.size() == 3);
    CHECK(u1.share == r1.share);
    CHECK(u1.client_id == "client-0");
    auto decrypted = ppa::encoding::decrypt_vector(u1.ciphertexts, h.es.epoch().keypair.secret_key, 1, {});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(decrypted[i] - c.last_local_model()[i]) <= 5e-7);
    }

    c.on_response(h.request(c.id()));
    Update u2 = c.round(h.client_rng);
    CHECK(u2.count == 1);
    CHECK(u2.share.index != u1.share.index);

    auto bad = h.request(c.id());
    bad.share.tag = 9;
    CHECK_THROWS_AS(c.on_response(bad), ppa::Error);
}

TEST_CASE("tags advance without gaps")
{
    Harness h(2, 1);
    std::vector<std::uint64_t> tags{h.es.tag().version};
    std::set<BigInt> keys{h.es.public_key().n};
    for (int epoch = 0; epoch < 6; ++epoch) {
        // a rejected attempt between successes must not move the tag
        auto junk = h.es.handle_aggregation(AggregationRequest{h.es.tag(), {}, {}});
        CHECK_FALSE(junk.result.accepted);
        h.submit("a", {0.5});
        h.submit("b", {0.5});
        auto batch = h.as.try_aggregate(h.es.tag());
        REQUIRE(batch.has_value());
        REQUIRE(h.deliver(batch->request).result.accepted);
        tags.push_back(h.es.tag().version);
        keys.insert(h.es.public_key().n);
    }
    for (std::size_t i = 0; i < tags.size(); ++i) {
        CHECK(tags[i] == i);
    }
    CHECK(keys.size() == tags.size());
}

TEST_CASE("enum names roundtrip")
{
    for (auto r : {Rejection::none, Rejection::tag_mismatch, Rejection::malformed_request,
                   Rejection::insufficient_shares, Rejection::share_verification_failed,
                   Rejection::decryption_failure}) {
        CHECK(rejection_from_string(to_string(r)) == r);
    }
    CHECK(notification_kind_from_string("aggregation_failed") == NotificationKind::aggregation_failed);
    CHECK_THROWS_AS(rejection_from_string("nope"), ppa::Error);
    CHECK(to_string(RefusalReason::rate_limited) == "rate_limited");
    CHECK(to_string(IngestStatus::dropped_stale) == "dropped_stale");
}
