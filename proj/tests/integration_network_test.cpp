#include "support/net_harness.hpp"

#include <doctest.h>


using namespace ppa;
using namespace std::chrono_literals;
using ppa::testing::RunnerThread;

namespace {

RunConfig network_config(std::uint16_t es_port, std::uint16_t as_port)
{
    RunConfig cfg;
    cfg.key_bits = 512;
    cfg.model_len = 5;
    cfg.threshold = 3;
    cfg.rate_limit.max_requests = 1000;
    cfg.es_addr = ppa::testing::loopback(es_port);
    cfg.as_addr = ppa::testing::loopback(as_port);
    return cfg;
}

std::size_t count_lines(const std::string& text, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
        ++n;
    }
    return n;
}

} // namespace

TEST_CASE("three clients, one round, one epoch")
{
    const auto es_port = ppa::testing::free_port();
    const auto as_port = ppa::testing::free_port();
    RunConfig cfg = network_config(es_port, as_port);

    RunConfig as_cfg = cfg;
    as_cfg.listen_addr = cfg.as_addr;
    // started before the encryption server exists: must keep retrying
    RunnerThread as(runners::run_aggregation_server, as_cfg);
    std::this_thread::sleep_for(500ms);
    CHECK_FALSE(as.done());

    RunConfig es_cfg = cfg;
    es_cfg.listen_addr = cfg.es_addr;
    es_cfg.max_epochs = 1;
    RunnerThread es(runners::run_encryption_server, es_cfg);

    RunConfig pool_cfg = cfg;
    pool_cfg.num_clients = 3;
    pool_cfg.rounds = 1;
    RunnerThread pool(runners::run_client_pool, pool_cfg);

    CHECK(pool.wait(60s));
    CHECK(pool.rc() == 0);
    CHECK(es.wait(60s));
    as.stop();
    as.join();

    const std::string es_out = es.output();
    CHECK(es_out.find("listening 127.0.0.1:" + std::to_string(es_port)) != std::string::npos);
    CHECK(count_lines(es_out, "epoch_completed tag=0 new_tag=1 updates=3") == 1);
    CHECK(count_lines(pool.output(), "submitted tag=0") == 3);
    CHECK(as.output().find("aggregation_sent tag=0") != std::string::npos);
}

TEST_CASE("clients keep going until a target tag")
{
    const auto es_port = ppa::testing::free_port();
    const auto as_port = ppa::testing::free_port();
    RunConfig cfg = network_config(es_port, as_port);

    RunConfig es_cfg = cfg;
    es_cfg.listen_addr = cfg.es_addr;
    RunnerThread es(runners::run_encryption_server, es_cfg);
    RunConfig as_cfg = cfg;
    as_cfg.listen_addr = cfg.as_addr;
    RunnerThread as(runners::run_aggregation_server, as_cfg);

    RunConfig pool_cfg = cfg;
    pool_cfg.num_clients = 4;
    pool_cfg.until_tag = 2;
    RunnerThread pool(runners::run_client_pool, pool_cfg);
    CHECK(pool.wait(90s));
    CHECK(pool.rc() == 0);
    es.stop();
    as.stop();
    es.join();
    as.join();

    const std::string es_out = es.output();
    CHECK(es_out.find("epoch_completed tag=0 new_tag=1") != std::string::npos);
    CHECK(es_out.find("epoch_completed tag=1 new_tag=2") != std::string::npos);
    CHECK(count_lines(pool.output(), "done tag=2") == 4);
}

TEST_CASE("aggregation server only takes updates from clients")
{
    const auto es_port = ppa::testing::free_port();
    const auto as_port = ppa::testing::free_port();
    RunConfig cfg = network_config(es_port, as_port);
    cfg.listen_addr = cfg.as_addr;
    RunnerThread as(runners::run_aggregation_server, cfg);

    std::atomic<bool> stop{false};
    auto sock = net::connect_with_retry(net::parse_endpoint(cfg.as_addr), stop, 20ms);
    REQUIRE(sock.has_value());
    net::send_message(*sock, protocol::ClientRequest{"intruder"});
    auto reply = net::read_frame(*sock, stop);
    REQUIRE(reply.has_value());
    auto msg = codec::from_envelope(*reply);
    REQUIRE(std::holds_alternative<protocol::ErrorMessage>(msg));
    CHECK(std::get<protocol::ErrorMessage>(msg).code == "topology_violation");
    // the connection is closed after the violation
    CHECK_FALSE(net::read_frame(*sock, stop).has_value());
    as.stop();
}

TEST_CASE("rate limit over the wire")
{
    const auto es_port = ppa::testing::free_port();
    RunConfig cfg = network_config(es_port, 1);
    cfg.listen_addr = cfg.es_addr;
    cfg.rate_limit.max_requests = 3;
    cfg.rate_limit.window = std::chrono::seconds(60);
    RunnerThread es(runners::run_encryption_server, cfg);

    std::atomic<bool> stop{false};
    auto sock = net::connect_with_retry(net::parse_endpoint(cfg.es_addr), stop, 20ms);
    REQUIRE(sock.has_value());
    for (int i = 0; i < 3; ++i) {
        net::send_message(*sock, protocol::ClientRequest{"greedy"});
        auto reply = ppa::testing::next_reply(*sock, stop);
        REQUIRE(reply.has_value());
        CHECK(std::holds_alternative<protocol::ClientResponse>(*reply));
    }
    net::send_message(*sock, protocol::ClientRequest{"greedy"});
    auto refused = ppa::testing::next_reply(*sock, stop);
    REQUIRE(refused.has_value());
    REQUIRE(std::holds_alternative<protocol::ErrorMessage>(*refused));
    CHECK(std::get<protocol::ErrorMessage>(*refused).code == "rate_limited");
    sock->close();
    es.stop();
    es.join();
    CHECK(es.output().find("request_refused client=greedy reason=rate_limited") != std::string::npos);
}
