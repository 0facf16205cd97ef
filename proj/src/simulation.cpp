#include "ppa/simulation.hpp"

#include "ppa/codec.hpp"

#include <spdlog/spdlog.h>

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <queue>

namespace ppa::simulation {

using namespace ppa::protocol;

namespace {

std::string real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string vector_str(const encoding::ModelVector& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) {
            out.push_back(',');
        }
        out += real(v[i]);
    }
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct Event {
    std::uint64_t time;
    std::uint64_t seq;
    std::function<void()> action;
};

struct EventOrder {
    bool operator()(const Event& a, const Event& b) const
    {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
};

class Simulator {
public:
    Simulator(const RunConfig& cfg, std::uint64_t seed)
        : cfg_(cfg),
          es_rng_(derive_seed(seed, 0)),
          client_rng_(derive_seed(seed, 1)),
          sched_rng_(derive_seed(seed, 2)),
          es_(encryption_server_config(cfg), es_rng_),
          as_(AggregationServerConfig{cfg.model_len})
    {
        report_.seed = seed;
        report_.config = cfg;
        report_.config.seed = seed;

        training::SyntheticTask task = synthetic_task(cfg);
        task.seed = seed;
        report_.ground_truth = training::ground_truth(task);
        for (std::size_t i = 0; i < cfg.num_clients; ++i) {
            clients_.emplace_back("client-" + std::to_string(i), training::generate_client_data(task, i), cfg.task,
                                  cfg.hyper, cfg.encoding);
        }
    }

    SimulationReport run()
    {
        send_to_as(es_.announcement());
        for (std::size_t i = 0; i < clients_.size(); ++i) {
            schedule(uniform(0, 100), [this, i] { client_wake(i); });
        }

        while (!queue_.empty()) {
            if (report_.events >= cfg_.max_events) {
                spdlog::warn("simulation: event bound {} reached", cfg_.max_events);
                break;
            }
            Event ev = queue_.top();
            queue_.pop();
            now_ = ev.time;
            ++report_.events;
            ev.action();
        }

        report_.final_tag = es_.tag().version;
        report_.final_model = es_.global_model();
        report_.refused_requests = es_.refusals().size();
        report_.dropped_stale = as_.metrics().dropped_stale;
        report_.rejected_malformed = as_.metrics().rejected_malformed;
        return std::move(report_);
    }

private:
    std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi)
    {
        return lo + sched_rng_.next_u64() % (hi - lo + 1);
    }

    void schedule(std::uint64_t delay, std::function<void()> action)
    {
        queue_.push(Event{now_ + delay, seq_++, std::move(action)});
    }

    // Every message crosses the wire codec, as it would between processes.
    template <typename Handler>
    void deliver(const Message& msg, Handler handler)
    {
        std::string frame = codec::encode_message(msg);
        schedule(uniform(1, 20), [frame = std::move(frame), handler]() mutable {
            handler(codec::decode_message(frame));
        });
    }

    void send_to_as(const Message& msg)
    {
        deliver(msg, [this](Message m) { as_receive(std::move(m)); });
    }

    void send_to_es(const Message& msg)
    {
        deliver(msg, [this](Message m) { es_receive(std::move(m)); });
    }

    bool accepting_new_work() const
    {
        if (stopping_) {
            return false;
        }
        return cfg_.max_updates == 0 || report_.requests_sent < cfg_.max_updates;
    }

    void client_wake(std::size_t i)
    {
        if (!accepting_new_work()) {
            return;
        }
        ++report_.requests_sent;
        ClientRequest req = clients_[i].make_request();
        deliver(req, [this, i](Message m) { es_receive_request(i, std::get<ClientRequest>(m)); });
    }

    void es_receive_request(std::size_t client, const ClientRequest& req)
    {
        RequestOutcome outcome = es_.handle_request(req.client_id, Timestamp(now_));
        if (auto* resp = std::get_if<ClientResponse>(&outcome)) {
            deliver(*resp, [this, client](Message m) { client_receive(client, std::move(m)); });
        } else {
            const auto& refusal = std::get<Refusal>(outcome);
            deliver(ErrorMessage{to_string(refusal.reason), "request refused"},
                    [this, client](Message m) { client_receive(client, std::move(m)); });
        }
    }

    void client_receive(std::size_t i, Message msg)
    {
        if (auto* resp = std::get_if<ClientResponse>(&msg)) {
            clients_[i].on_response(std::move(*resp));
            schedule(uniform(50, 500), [this, i] { client_train(i); });
        } else {
            schedule(uniform(500, 2000), [this, i] { client_wake(i); });
        }
    }

    void client_train(std::size_t i)
    {
        Update update = clients_[i].round(client_rng_);
        UpdateId id{update.client_id, update.tag, update.count};
        plaintexts_[id] = clients_[i].last_local_model();
        sent_updates_[update.tag.version].push_back(update);
        ++report_.updates_submitted;
        send_to_as(update);
        schedule(uniform(100, 1000), [this, i] { client_wake(i); });
    }

    void as_receive(Message msg)
    {
        if (auto* update = std::get_if<Update>(&msg)) {
            Tag tag = update->tag;
            if (as_.receive_update(std::move(*update)) == IngestStatus::buffered) {
                as_try(tag);
            }
        } else if (auto* note = std::get_if<Notification>(&msg)) {
            as_.on_notification(*note);
            as_try(as_.live_floor());
        } else if (auto* result = std::get_if<AggregationResult>(&msg)) {
            as_.on_result(*result);
            as_try(as_.live_floor());
        }
    }

    void as_try(Tag tag)
    {
        if (auto batch = as_.try_aggregate(tag)) {
            contributors_[tag.version] = batch->contributors;
            send_to_es(batch->request);
        }
    }

    void es_receive(Message msg)
    {
        auto* req = std::get_if<AggregationRequest>(&msg);
        if (req == nullptr) {
            return;
        }
        AggregationOutcome outcome = es_.handle_aggregation(*req);
        send_to_as(outcome.result);
        send_to_as(outcome.notification);

        if (!outcome.result.accepted) {
            report_.rejections.push_back(
                RejectionRecord{req->tag.version, outcome.result.reason, req->shares.size()});
            return;
        }

        EpochRecord rec;
        rec.tag = req->tag.version;
        rec.aggregated = req->shares.size();
        rec.contributors = contributors_[rec.tag];
        rec.decrypted = es_.global_model();
        std::vector<encoding::ModelVector> locals;
        for (const auto& id : contributors_[rec.tag]) {
            locals.push_back(plaintexts_.at(id));
        }
        rec.oracle = training::fedavg_oracle(locals);
        for (std::size_t k = 0; k < rec.oracle.size(); ++k) {
            rec.max_error = std::max(rec.max_error, std::fabs(rec.decrypted[k] - rec.oracle[k]));
        }
        rec.dropped_total = as_.metrics().dropped_stale;
        rec.completed_at_ms = now_;
        report_.epochs.push_back(std::move(rec));

        if (report_.epochs.size() >= cfg_.target_epochs) {
            stopping_ = true;
        }
        replay_stale(req->tag.version);
    }

    // Re-sends already submitted updates of a completed tag.
    void replay_stale(std::uint64_t completed)
    {
        const auto& sent = sent_updates_[completed];
        for (std::uint64_t k = 0; k < cfg_.stale_replays && k < sent.size(); ++k) {
            ++report_.updates_replayed;
            Update copy = sent[k];
            schedule(uniform(30, 60), [this, copy = std::move(copy)] { send_to_as(copy); });
        }
    }

    RunConfig cfg_;
    SeededRandom es_rng_;
    SeededRandom client_rng_;
    SeededRandom sched_rng_;
    EncryptionServer es_;
    AggregationServer as_;
    std::vector<Client> clients_;

    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::uint64_t now_ = 0;
    std::uint64_t seq_ = 0;
    bool stopping_ = false;

    std::map<UpdateId, encoding::ModelVector> plaintexts_;
    std::map<std::uint64_t, std::vector<Update>> sent_updates_;
    std::map<std::uint64_t, std::vector<UpdateId>> contributors_;
    SimulationReport report_;
};

} // namespace

std::string SimulationReport::render() const
{
    std::string out;
    out += "# simulation report\n";
    out += "seed=" + std::to_string(seed) + "\n";
    std::string cfg_text = render_config(config);
    std::size_t pos = 0;
    while (pos < cfg_text.size()) {
        auto nl = cfg_text.find('\n', pos);
        out += "config." + cfg_text.substr(pos, nl - pos) + "\n";
        pos = nl + 1;
    }
    for (const auto& e : epochs) {
        out += "epoch tag=" + std::to_string(e.tag) + " aggregated=" + std::to_string(e.aggregated)
               + " dropped_total=" + std::to_string(e.dropped_total) + " completed_at_ms="
               + std::to_string(e.completed_at_ms) + " max_error=" + real(e.max_error) + "\n";
        out += "  contributors=";
        for (std::size_t i = 0; i < e.contributors.size(); ++i) {
            out += (i > 0 ? "," : "") + e.contributors[i].client_id + "#" + std::to_string(e.contributors[i].count);
        }
        out += "\n";
        out += "  decrypted=" + vector_str(e.decrypted) + "\n";
        out += "  oracle=" + vector_str(e.oracle) + "\n";
    }
    for (const auto& r : rejections) {
        out += "rejection tag=" + std::to_string(r.tag) + " reason=" + protocol::to_string(r.reason)
               + " shares=" + std::to_string(r.shares) + "\n";
    }
    out += "summary final_tag=" + std::to_string(final_tag) + " epochs=" + std::to_string(epochs.size())
           + " requests_sent=" + std::to_string(requests_sent) + " refused_requests="
           + std::to_string(refused_requests) + " updates_submitted=" + std::to_string(updates_submitted)
           + " updates_replayed=" + std::to_string(updates_replayed) + " dropped_stale="
           + std::to_string(dropped_stale) + " rejected_malformed=" + std::to_string(rejected_malformed)
           + " events=" + std::to_string(events) + "\n";
    out += "final_model=" + vector_str(final_model) + "\n";
    out += "ground_truth=" + vector_str(ground_truth) + "\n";
    return out;
}

SimulationReport run_simulation(const RunConfig& config, std::uint64_t seed)
{
    if (config.num_clients == 0) {
        throw Error("simulation: num_clients must be positive");
    }
    if (config.threshold == 0) {
        throw Error("simulation: threshold must be positive");
    }
    Simulator sim(config, seed);
    return sim.run();
}

} // namespace ppa::simulation
