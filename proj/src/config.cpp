#include "ppa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace ppa {

namespace {

std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename Int>
Int to_uint(const std::string& key, const std::string& v)
{
    Int out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
        throw Error("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
    }
    return out;
}

double to_real(const std::string& key, const std::string& v)
{
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size()) {
        throw Error("config: '" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

std::string real_str(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"role", [](RunConfig& c, const auto&, const auto& v) { c.role = v; }},
        {"listen_addr", [](RunConfig& c, const auto&, const auto& v) { c.listen_addr = v; }},
        {"es_addr", [](RunConfig& c, const auto&, const auto& v) { c.es_addr = v; }},
        {"as_addr", [](RunConfig& c, const auto&, const auto& v) { c.as_addr = v; }},
        {"key_bits", [](RunConfig& c, const auto& k, const auto& v) { c.key_bits = to_uint<unsigned>(k, v); }},
        {"model_len", [](RunConfig& c, const auto& k, const auto& v) { c.model_len = to_uint<std::size_t>(k, v); }},
        {"threshold", [](RunConfig& c, const auto& k, const auto& v) { c.threshold = to_uint<std::size_t>(k, v); }},
        {"share_budget",
         [](RunConfig& c, const auto& k, const auto& v) { c.share_budget = to_uint<std::uint64_t>(k, v); }},
        {"scale", [](RunConfig& c, const auto& k, const auto& v) { c.encoding.scale = to_uint<std::uint64_t>(k, v); }},
        {"max_summands",
         [](RunConfig& c, const auto& k, const auto& v) { c.encoding.max_summands = to_uint<std::uint64_t>(k, v); }},
        {"max_abs_value", [](RunConfig& c, const auto& k, const auto& v) { c.encoding.max_abs_value = to_real(k, v); }},
        {"rate_limit_count",
         [](RunConfig& c, const auto& k, const auto& v) { c.rate_limit.max_requests = to_uint<std::size_t>(k, v); }},
        {"rate_limit_window_secs",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.rate_limit.window = std::chrono::milliseconds(static_cast<std::int64_t>(to_real(k, v) * 1000.0));
         }},
        {"seed", [](RunConfig& c, const auto& k, const auto& v) { c.seed = to_uint<std::uint64_t>(k, v); }},
        {"task", [](RunConfig& c, const auto&, const auto& v) { c.task = training::task_kind_from_string(v); }},
        {"num_clients",
         [](RunConfig& c, const auto& k, const auto& v) { c.num_clients = to_uint<std::size_t>(k, v); }},
        {"samples_per_client",
         [](RunConfig& c, const auto& k, const auto& v) { c.samples_per_client = to_uint<std::size_t>(k, v); }},
        {"noise_std", [](RunConfig& c, const auto& k, const auto& v) { c.noise_std = to_real(k, v); }},
        {"learning_rate", [](RunConfig& c, const auto& k, const auto& v) { c.hyper.learning_rate = to_real(k, v); }},
        {"local_epochs",
         [](RunConfig& c, const auto& k, const auto& v) { c.hyper.epochs = to_uint<std::size_t>(k, v); }},
        {"until_tag", [](RunConfig& c, const auto& k, const auto& v) { c.until_tag = to_uint<std::uint64_t>(k, v); }},
        {"rounds", [](RunConfig& c, const auto& k, const auto& v) { c.rounds = to_uint<std::size_t>(k, v); }},
        {"client_offset",
         [](RunConfig& c, const auto& k, const auto& v) { c.client_offset = to_uint<std::size_t>(k, v); }},
        {"max_epochs",
         [](RunConfig& c, const auto& k, const auto& v) { c.max_epochs = to_uint<std::uint64_t>(k, v); }},
        {"target_epochs",
         [](RunConfig& c, const auto& k, const auto& v) { c.target_epochs = to_uint<std::uint64_t>(k, v); }},
        {"max_updates",
         [](RunConfig& c, const auto& k, const auto& v) { c.max_updates = to_uint<std::uint64_t>(k, v); }},
        {"stale_replays",
         [](RunConfig& c, const auto& k, const auto& v) { c.stale_replays = to_uint<std::uint64_t>(k, v); }},
        {"max_events",
         [](RunConfig& c, const auto& k, const auto& v) { c.max_events = to_uint<std::uint64_t>(k, v); }},
    };
    return table;
}

} // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text)
{
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw Error("config: line " + std::to_string(lineno) + " is not key=value");
        }
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) {
            throw Error("config: line " + std::to_string(lineno) + " has an empty key");
        }
        out[key] = trim(t.substr(eq + 1));
    }
    return out;
}

RunConfig apply_config(RunConfig base, const std::map<std::string, std::string>& values)
{
    const auto& table = setters();
    for (const auto& [k, v] : values) {
        auto it = table.find(k);
        if (it == table.end()) {
            throw Error("config: unknown key '" + k + "'");
        }
        it->second(base, k, v);
    }
    return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) {
        throw Error("config: cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return apply_config(std::move(base), parse_key_values(ss.str()));
}

std::string render_config(const RunConfig& c)
{
    std::map<std::string, std::string> kv = {
        {"role", c.role},
        {"listen_addr", c.listen_addr},
        {"es_addr", c.es_addr},
        {"as_addr", c.as_addr},
        {"key_bits", std::to_string(c.key_bits)},
        {"model_len", std::to_string(c.model_len)},
        {"threshold", std::to_string(c.threshold)},
        {"share_budget", std::to_string(c.share_budget)},
        {"scale", std::to_string(c.encoding.scale)},
        {"max_summands", std::to_string(c.encoding.max_summands)},
        {"max_abs_value", real_str(c.encoding.max_abs_value)},
        {"rate_limit_count", std::to_string(c.rate_limit.max_requests)},
        {"rate_limit_window_secs", real_str(static_cast<double>(c.rate_limit.window.count()) / 1000.0)},
        {"seed", std::to_string(c.seed)},
        {"task", training::to_string(c.task)},
        {"num_clients", std::to_string(c.num_clients)},
        {"samples_per_client", std::to_string(c.samples_per_client)},
        {"noise_std", real_str(c.noise_std)},
        {"learning_rate", real_str(c.hyper.learning_rate)},
        {"local_epochs", std::to_string(c.hyper.epochs)},
        {"until_tag", std::to_string(c.until_tag)},
        {"rounds", std::to_string(c.rounds)},
        {"client_offset", std::to_string(c.client_offset)},
        {"max_epochs", std::to_string(c.max_epochs)},
        {"target_epochs", std::to_string(c.target_epochs)},
        {"max_updates", std::to_string(c.max_updates)},
        {"stale_replays", std::to_string(c.stale_replays)},
        {"max_events", std::to_string(c.max_events)},
    };
    std::string out;
    for (const auto& [k, v] : kv) {
        out += k + "=" + v + "\n";
    }
    return out;
}

protocol::EncryptionServerConfig encryption_server_config(const RunConfig& cfg)
{
    protocol::EncryptionServerConfig es;
    es.key_bits = cfg.key_bits;
    es.model_len = cfg.model_len;
    es.threshold = cfg.threshold;
    es.share_budget = cfg.share_budget;
    es.encoding = cfg.encoding;
    es.rate_limit = cfg.rate_limit;
    return es;
}

training::SyntheticTask synthetic_task(const RunConfig& cfg)
{
    training::SyntheticTask t;
    t.kind = cfg.task;
    t.model_len = cfg.model_len;
    t.num_clients = cfg.num_clients;
    t.samples_per_client = cfg.samples_per_client;
    t.noise_std = cfg.noise_std;
    t.seed = cfg.seed;
    return t;
}

} // namespace ppa
