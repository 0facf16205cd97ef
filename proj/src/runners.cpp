#include "ppa/runners.hpp"

#include "ppa/net.hpp"
#include "ppa/protocol.hpp"

#include <spdlog/spdlog.h>

#include <list>
#include <memory>
#include <mutex>
#include <ostream>
#include <thread>

namespace ppa::runners {

using namespace ppa::protocol;

namespace {

using SteadyClock = std::chrono::steady_clock;

constexpr auto kAcceptSlice = std::chrono::milliseconds(100);

struct Peer {
    explicit Peer(net::Socket s) : sock(std::move(s)) {}

    net::Socket sock;
    std::mutex write_mu;

    bool send(const Message& msg)
    {
        std::lock_guard lock(write_mu);
        try {
            net::send_message(sock, msg);
            return true;
        } catch (const Error& e) {
            spdlog::debug("send failed: {}", e.what());
            return false;
        }
    }
};

// Connection threads with completion flags, reaped from the accept loop.
class ThreadSet {
public:
    template <typename F>
    void spawn(F&& fn)
    {
        auto done = std::make_shared<std::atomic<bool>>(false);
        threads_.push_back(Entry{std::thread([fn = std::forward<F>(fn), done]() mutable {
                                     fn();
                                     done->store(true);
                                 }),
                                 done});
    }

    void reap()
    {
        for (auto it = threads_.begin(); it != threads_.end();) {
            if (it->done->load()) {
                it->thread.join();
                it = threads_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void join_all()
    {
        for (auto& e : threads_) {
            e.thread.join();
        }
        threads_.clear();
    }

private:
    struct Entry {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::list<Entry> threads_;
};

class PeerSet {
public:
    void add(const std::shared_ptr<Peer>& p)
    {
        std::lock_guard lock(mu_);
        peers_.push_back(p);
    }

    void remove(const std::shared_ptr<Peer>& p)
    {
        std::lock_guard lock(mu_);
        peers_.remove(p);
    }

    void broadcast(const Message& msg)
    {
        std::vector<std::shared_ptr<Peer>> snapshot;
        {
            std::lock_guard lock(mu_);
            snapshot.assign(peers_.begin(), peers_.end());
        }
        for (auto& p : snapshot) {
            p->send(msg);
        }
    }

    void shutdown_all()
    {
        std::lock_guard lock(mu_);
        for (auto& p : peers_) {
            p->sock.shutdown();
        }
    }

private:
    std::mutex mu_;
    std::list<std::shared_ptr<Peer>> peers_;
};

std::optional<Message> decode_or_report(const codec::Envelope& env, Peer& peer)
{
    try {
        return codec::from_envelope(env);
    } catch (const codec::CodecError& e) {
        peer.send(ErrorMessage{"protocol_error", e.what()});
        return std::nullopt;
    }
}

// -- encryption server ------------------------------------------------------

class EncryptionServerRunner {
public:
    EncryptionServerRunner(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out)
        : cfg_(cfg), stop_(stop), out_(out), es_(encryption_server_config(cfg), rng_)
    {
    }

    int run()
    {
        net::Socket listener = net::listen_on(net::parse_endpoint(cfg_.listen_addr));
        print("listening " + net::parse_endpoint(cfg_.listen_addr).host + ":"
              + std::to_string(net::local_port(listener)));

        while (!stop_.load()) {
            threads_.reap();
            auto conn = net::accept_for(listener, kAcceptSlice);
            if (!conn) {
                continue;
            }
            auto peer = std::make_shared<Peer>(std::move(*conn));
            peers_.add(peer);
            threads_.spawn([this, peer] { serve(peer); });
        }
        listener.close();
        peers_.shutdown_all();
        threads_.join_all();
        return 0;
    }

private:
    void print(const std::string& line)
    {
        std::lock_guard lock(out_mu_);
        out_ << line << std::endl;
    }

    Timestamp now() const
    {
        return std::chrono::duration_cast<Timestamp>(SteadyClock::now() - started_);
    }

    void serve(const std::shared_ptr<Peer>& peer)
    {
        {
            std::lock_guard lock(state_mu_);
            peer->send(es_.announcement());
        }
        try {
            while (!stop_.load()) {
                auto env = net::read_frame(peer->sock, stop_);
                if (!env) {
                    break;
                }
                auto msg = decode_or_report(*env, *peer);
                if (!msg) {
                    break;
                }
                dispatch(*peer, *msg);
            }
        } catch (const Error& e) {
            spdlog::warn("encryption server: connection error: {}", e.what());
        }
        peers_.remove(peer);
    }

    void dispatch(Peer& peer, const Message& msg)
    {
        if (const auto* req = std::get_if<ClientRequest>(&msg)) {
            std::unique_lock lock(state_mu_);
            RequestOutcome outcome = es_.handle_request(req->client_id, now());
            lock.unlock();
            if (const auto* resp = std::get_if<ClientResponse>(&outcome)) {
                peer.send(*resp);
            } else {
                const auto& refusal = std::get<Refusal>(outcome);
                print("request_refused client=" + refusal.client_id + " reason=" + to_string(refusal.reason));
                peer.send(ErrorMessage{to_string(refusal.reason), "request refused"});
            }
        } else if (const auto* agg = std::get_if<AggregationRequest>(&msg)) {
            std::unique_lock lock(state_mu_);
            AggregationOutcome outcome = es_.handle_aggregation(*agg);
            lock.unlock();
            peer.send(outcome.result);
            peers_.broadcast(outcome.notification);
            if (outcome.result.accepted) {
                ++epochs_completed_;
                print("epoch_completed tag=" + std::to_string(outcome.result.tag.version) + " new_tag="
                      + std::to_string(outcome.result.current_tag.version) + " updates="
                      + std::to_string(agg->shares.size()));
                if (cfg_.max_epochs > 0 && epochs_completed_ >= cfg_.max_epochs) {
                    stop_.store(true);
                }
            } else {
                print("aggregation_rejected tag=" + std::to_string(agg->tag.version) + " reason="
                      + to_string(outcome.result.reason));
            }
        } else {
            peer.send(ErrorMessage{"unexpected_message", "encryption server accepts client_request and "
                                                         "aggregation_request only"});
        }
    }

    const RunConfig& cfg_;
    std::atomic<bool>& stop_;
    std::ostream& out_;
    std::mutex out_mu_;
    SecureRandom rng_;
    std::mutex state_mu_;
    EncryptionServer es_;
    SteadyClock::time_point started_ = SteadyClock::now();
    std::atomic<std::uint64_t> epochs_completed_{0};
    PeerSet peers_;
    ThreadSet threads_;
};

// -- aggregation server -----------------------------------------------------

class AggregationServerRunner {
public:
    AggregationServerRunner(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out)
        : cfg_(cfg), stop_(stop), out_(out), as_(AggregationServerConfig{cfg.model_len})
    {
    }

    int run()
    {
        net::Socket listener = net::listen_on(net::parse_endpoint(cfg_.listen_addr));
        print("listening " + net::parse_endpoint(cfg_.listen_addr).host + ":"
              + std::to_string(net::local_port(listener)));

        std::thread es_thread([this] { es_link(); });
        while (!stop_.load()) {
            threads_.reap();
            auto conn = net::accept_for(listener, kAcceptSlice);
            if (!conn) {
                continue;
            }
            auto peer = std::make_shared<Peer>(std::move(*conn));
            clients_.add(peer);
            threads_.spawn([this, peer] { serve_client(peer); });
        }
        listener.close();
        clients_.shutdown_all();
        {
            std::lock_guard lock(es_mu_);
            if (es_peer_) {
                es_peer_->sock.shutdown();
            }
        }
        threads_.join_all();
        es_thread.join();
        return 0;
    }

private:
    void print(const std::string& line)
    {
        std::lock_guard lock(out_mu_);
        out_ << line << std::endl;
    }

    std::shared_ptr<Peer> es_peer()
    {
        std::lock_guard lock(es_mu_);
        return es_peer_;
    }

    // Caller holds state_mu_.
    void flush_ready()
    {
        auto es = es_peer();
        if (!es) {
            return;
        }
        for (Tag tag : as_.pending_tags()) {
            if (auto batch = as_.try_aggregate(tag)) {
                print("aggregation_sent tag=" + std::to_string(tag.version) + " updates="
                      + std::to_string(batch->request.shares.size()));
                if (!es->send(batch->request)) {
                    spdlog::warn("aggregation server: lost request for tag {} (link down)", tag.version);
                }
            }
        }
    }

    void es_link()
    {
        const net::Endpoint ep = net::parse_endpoint(cfg_.es_addr);
        while (!stop_.load()) {
            auto sock = net::connect_with_retry(ep, stop_);
            if (!sock) {
                break;
            }
            spdlog::info("aggregation server: connected to encryption server at {}", cfg_.es_addr);
            auto peer = std::make_shared<Peer>(std::move(*sock));
            {
                std::lock_guard lock(es_mu_);
                es_peer_ = peer;
            }
            try {
                while (!stop_.load()) {
                    auto env = net::read_frame(peer->sock, stop_);
                    if (!env) {
                        break;
                    }
                    auto msg = decode_or_report(*env, *peer);
                    if (!msg) {
                        break;
                    }
                    std::lock_guard lock(state_mu_);
                    if (const auto* note = std::get_if<Notification>(&msg.value())) {
                        as_.on_notification(*note);
                    } else if (const auto* result = std::get_if<AggregationResult>(&msg.value())) {
                        as_.on_result(*result);
                        print("aggregation_result tag=" + std::to_string(result->tag.version) + " accepted="
                              + (result->accepted ? "1" : "0") + " reason=" + to_string(result->reason));
                    }
                    flush_ready();
                }
            } catch (const Error& e) {
                spdlog::warn("aggregation server: encryption server link error: {}", e.what());
            }
            {
                std::lock_guard lock(es_mu_);
                es_peer_.reset();
            }
            if (!stop_.load()) {
                spdlog::warn("aggregation server: lost encryption server link, reconnecting");
            }
        }
    }

    void serve_client(const std::shared_ptr<Peer>& peer)
    {
        try {
            while (!stop_.load()) {
                auto env = net::read_frame(peer->sock, stop_);
                if (!env) {
                    break;
                }
                if (env->type != codec::MsgType::update) {
                    peer->send(ErrorMessage{"topology_violation", "clients may only send update frames"});
                    break;
                }
                auto msg = decode_or_report(*env, *peer);
                if (!msg) {
                    break;
                }
                auto& update = std::get<Update>(*msg);
                std::lock_guard lock(state_mu_);
                IngestStatus status = as_.receive_update(std::move(update));
                if (status != IngestStatus::buffered) {
                    print("update_" + to_string(status) + " tag=" + std::to_string(env->tag));
                }
                flush_ready();
            }
        } catch (const Error& e) {
            spdlog::warn("aggregation server: client connection error: {}", e.what());
        }
        clients_.remove(peer);
    }

    const RunConfig& cfg_;
    std::atomic<bool>& stop_;
    std::ostream& out_;
    std::mutex out_mu_;
    std::mutex state_mu_;
    AggregationServer as_;
    std::mutex es_mu_;
    std::shared_ptr<Peer> es_peer_;
    PeerSet clients_;
    ThreadSet threads_;
};

// -- client pool ------------------------------------------------------------

void sleep_unless_stopped(std::chrono::milliseconds d, const std::atomic<bool>& stop)
{
    auto deadline = SteadyClock::now() + d;
    while (!stop.load() && SteadyClock::now() < deadline) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

// Fetches a response, skipping notifications. nullopt with `refused` set on
// an explicit refusal.
std::optional<ClientResponse> request_response(const net::Socket& sock, const std::string& id,
                                               const std::atomic<bool>& stop, std::string& refused)
{
    net::send_message(sock, ClientRequest{id});
    while (!stop.load()) {
        auto env = net::read_frame(sock, stop);
        if (!env) {
            return std::nullopt;
        }
        Message msg = codec::from_envelope(*env);
        if (auto* resp = std::get_if<ClientResponse>(&msg)) {
            return std::move(*resp);
        }
        if (auto* err = std::get_if<ErrorMessage>(&msg)) {
            refused = err->code;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

} // namespace

int run_encryption_server(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out)
{
    EncryptionServerRunner runner(cfg, stop, out);
    return runner.run();
}

int run_aggregation_server(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out)
{
    AggregationServerRunner runner(cfg, stop, out);
    return runner.run();
}

int run_client_pool(const RunConfig& cfg, std::atomic<bool>& stop, std::ostream& out)
{
    if (cfg.num_clients == 0) {
        throw Error("client pool: num_clients must be positive");
    }
    const net::Endpoint es_ep = net::parse_endpoint(cfg.es_addr);
    const net::Endpoint as_ep = net::parse_endpoint(cfg.as_addr);
    const training::SyntheticTask task = synthetic_task(cfg);
    std::mutex out_mu;
    std::atomic<std::size_t> succeeded{0};

    auto client_main = [&](std::size_t index) {
        const std::string id = "client-" + std::to_string(index);
        Client client(id, training::generate_client_data(task, index), cfg.task, cfg.hyper, cfg.encoding);
        SecureRandom rng;
        std::size_t submitted = 0;
        auto log = [&](const std::string& line) {
            std::lock_guard lock(out_mu);
            out << id << " " << line << std::endl;
        };

        while (!stop.load()) {
            if (cfg.until_tag == 0 && submitted >= cfg.rounds) {
                ++succeeded;
                return;
            }
            try {
                auto es = net::connect_with_retry(es_ep, stop);
                if (!es) {
                    return;
                }
                std::string refused;
                auto resp = request_response(*es, id, stop, refused);
                es->close();
                if (!resp) {
                    if (!refused.empty()) {
                        log("refused reason=" + refused);
                        sleep_unless_stopped(std::chrono::seconds(1), stop);
                    }
                    continue;
                }
                if (cfg.until_tag > 0 && resp->tag.version >= cfg.until_tag) {
                    log("done tag=" + std::to_string(resp->tag.version));
                    ++succeeded;
                    return;
                }
                client.on_response(std::move(*resp));
                Update update = client.round(rng);
                const auto tag = update.tag.version;
                auto as = net::connect_with_retry(as_ep, stop);
                if (!as) {
                    return;
                }
                net::send_message(*as, update);
                as->close(); // no need to stay online after submitting
                ++submitted;
                log("submitted tag=" + std::to_string(tag) + " count=" + std::to_string(update.count));
            } catch (const Error& e) {
                spdlog::warn("{}: {}", id, e.what());
                sleep_unless_stopped(std::chrono::milliseconds(200), stop);
            }
            sleep_unless_stopped(std::chrono::milliseconds(20 + 37 * ((index + submitted) % 5)), stop);
        }
    };

    std::vector<std::thread> threads;
    for (std::size_t i = 0; i < cfg.num_clients; ++i) {
        threads.emplace_back(client_main, cfg.client_offset + i);
    }
    for (auto& t : threads) {
        t.join();
    }
    return succeeded.load() == cfg.num_clients ? 0 : 1;
}

} // namespace ppa::runners
