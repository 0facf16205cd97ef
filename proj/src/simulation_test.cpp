#include "ppa/simulation.hpp"

#include <doctest.h>

#include <cmath>

namespace sim = ppa::simulation;

namespace {

ppa::RunConfig base_config()
{
    ppa::RunConfig cfg;
    cfg.key_bits = 256;
    cfg.model_len = 4;
    cfg.threshold = 3;
    cfg.num_clients = 5;
    cfg.rate_limit.max_requests = 1000;
    cfg.target_epochs = 2;
    return cfg;
}

} // namespace

TEST_CASE("same seed, same bytes")
{
    auto cfg = base_config();
    auto a = sim::run_simulation(cfg, 11).render();
    auto b = sim::run_simulation(cfg, 11).render();
    CHECK(a == b);
    CHECK(sim::run_simulation(cfg, 12).render() != a);
}

TEST_CASE("epochs match the plaintext oracle")
{
    auto cfg = base_config();
    cfg.target_epochs = 3;
    auto report = sim::run_simulation(cfg, 3);
    REQUIRE(report.epochs.size() == 3);
    CHECK(report.final_tag == 3);
    for (std::size_t i = 0; i < report.epochs.size(); ++i) {
        const auto& e = report.epochs[i];
        CHECK(e.tag == i);
        CHECK(e.aggregated >= 3);
        REQUIRE(e.decrypted.size() == 4);
        for (std::size_t k = 0; k < 4; ++k) {
            CHECK(std::abs(e.decrypted[k] - e.oracle[k]) <= 5e-7);
        }
        CHECK(e.max_error <= 5e-7);
    }
    CHECK(report.final_model == report.epochs.back().decrypted);
}

TEST_CASE("threshold gate end to end")
{
    auto cfg = base_config();
    cfg.threshold = 5;
    cfg.target_epochs = 1;
    cfg.max_updates = 4;
    auto gated = sim::run_simulation(cfg, 8);
    CHECK(gated.updates_submitted == 4);
    CHECK(gated.epochs.empty());
    CHECK(gated.final_tag == 0);
    CHECK(gated.final_model == ppa::encoding::ModelVector(4, 0.0));

    cfg.max_updates = 5;
    auto open = sim::run_simulation(cfg, 8);
    CHECK(open.updates_submitted == 5);
    REQUIRE(open.epochs.size() == 1);
    CHECK(open.epochs[0].aggregated == 5);
    CHECK(open.final_tag == 1);
}

TEST_CASE("replayed stale update is dropped")
{
    auto cfg = base_config();
    cfg.target_epochs = 1;
    auto plain = sim::run_simulation(cfg, 21);
    cfg.stale_replays = 1;
    auto replayed = sim::run_simulation(cfg, 21);
    CHECK(replayed.updates_replayed == 1);
    CHECK(replayed.dropped_stale == plain.dropped_stale + 1);
    REQUIRE(replayed.epochs.size() == 1);
    CHECK(replayed.final_model == plain.final_model);
    CHECK(replayed.final_tag == 1);
}

TEST_CASE("configuration errors")
{
    auto cfg = base_config();
    cfg.num_clients = 0;
    CHECK_THROWS_AS(sim::run_simulation(cfg, 1), ppa::Error);
}
