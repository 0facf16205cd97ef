// Command-line entry point: role runners, simulation, benchmarks.

#include "ppa/bench.hpp"
#include "ppa/config.hpp"
#include "ppa/paillier.hpp"
#include "ppa/runners.hpp"
#include "ppa/simulation.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int)
{
    g_stop.store(true);
}

void install_signal_handlers()
{
    struct sigaction sa{};
    sa.sa_handler = on_signal;
    sigemptyset(&sa.sa_mask);
    sigaction(SIGINT, &sa, nullptr);
    sigaction(SIGTERM, &sa, nullptr);
    std::signal(SIGPIPE, SIG_IGN);
}

// Settings shared by every role subcommand: a config file, then repeated
// --set key=value, then the dedicated flags.
struct RoleOptions {
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    void attach(CLI::App* cmd, const std::vector<std::pair<std::string, std::string>>& named)
    {
        cmd->add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
        cmd->add_option("--set", sets, "override one setting (key=value), repeatable");
        for (const auto& [flag, key] : named) {
            cmd->add_option_function<std::string>(
                "--" + flag, [this, key = key](const std::string& v) { flags[key] = v; }, "sets " + key);
        }
    }

    ppa::RunConfig resolve(const std::string& role) const
    {
        ppa::RunConfig cfg;
        cfg.role = role;
        if (!config_path.empty()) {
            cfg = ppa::load_config_file(config_path, cfg);
        }
        std::map<std::string, std::string> overrides;
        for (const auto& s : sets) {
            auto eq = s.find('=');
            if (eq == std::string::npos) {
                throw ppa::Error("--set expects key=value, got '" + s + "'");
            }
            overrides[s.substr(0, eq)] = s.substr(eq + 1);
        }
        for (const auto& [k, v] : flags) {
            overrides[k] = v;
        }
        return ppa::apply_config(std::move(cfg), overrides);
    }
};

int keygen_demo(unsigned bits)
{
    ppa::paillier::KeyPair kp;
    if (bits == 0) {
        kp = ppa::paillier::keygen_from_primes(11, 13);
    } else {
        ppa::SecureRandom rng;
        kp = ppa::paillier::keygen(ppa::paillier::setup(bits), rng);
    }
    std::cout << "fingerprint=" << kp.public_key.fingerprint << "\n"
              << "public_key_g=" << ppa::to_hex(kp.public_key.g) << "\n"
              << "public_key_n=" << ppa::to_hex(kp.public_key.n) << "\n"
              << "secret_key_lambda=" << ppa::to_hex(kp.secret_key.lambda) << "\n"
              << "secret_key_mu=" << ppa::to_hex(kp.secret_key.mu) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("ppa"));

    CLI::App app{"Privacy-preserving asynchronous federated aggregation"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    RoleOptions es_opts;
    auto* es_cmd = app.add_subcommand("encryption-server", "run the key/share issuing and decrypting server");
    es_opts.attach(es_cmd, {{"listen", "listen_addr"},
                            {"key-bits", "key_bits"},
                            {"model-len", "model_len"},
                            {"threshold", "threshold"},
                            {"scale", "scale"},
                            {"rate-limit-count", "rate_limit_count"},
                            {"rate-limit-window-secs", "rate_limit_window_secs"},
                            {"max-epochs", "max_epochs"}});

    RoleOptions as_opts;
    auto* as_cmd = app.add_subcommand("aggregation-server", "run the buffering and homomorphic summing server");
    as_opts.attach(as_cmd, {{"listen", "listen_addr"}, {"es", "es_addr"}, {"model-len", "model_len"}});

    RoleOptions client_opts;
    auto* client_cmd = app.add_subcommand("client", "run a pool of training clients");
    client_opts.attach(client_cmd, {{"es", "es_addr"},
                                    {"as", "as_addr"},
                                    {"clients", "num_clients"},
                                    {"rounds", "rounds"},
                                    {"until-tag", "until_tag"},
                                    {"offset", "client_offset"},
                                    {"model-len", "model_len"},
                                    {"seed", "seed"}});

    RoleOptions sim_opts;
    std::uint64_t sim_seed = 0;
    bool sim_seed_given = false;
    std::string sim_out;
    auto* sim_cmd = app.add_subcommand("simulate", "run the whole protocol in-process, deterministically");
    sim_opts.attach(sim_cmd, {});
    sim_cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t v) {
            sim_seed = v;
            sim_seed_given = true;
        },
        "scheduler, key and data seed");
    sim_cmd->add_option("--out", sim_out, "write the report here instead of standard output");

    std::string primitive;
    std::string ms, us, ns, ts;
    std::size_t reps = 5;
    unsigned bench_bits = 2048;
    auto* bench_cmd = app.add_subcommand("bench", "time a primitive over a parameter sweep, CSV to stdout");
    bench_cmd->add_option("--primitive", primitive, "enc, dec, eval_by_u, eval_by_m, share_gen, share_recover")
        ->required();
    bench_cmd->add_option("--m", ms, "model sizes, comma separated");
    bench_cmd->add_option("--u", us, "update counts, comma separated");
    bench_cmd->add_option("--n", ns, "share counts, comma separated");
    bench_cmd->add_option("--t", ts, "thresholds, comma separated (paired with --n)");
    bench_cmd->add_option("--reps", reps, "timed repetitions per point (>= 3)");
    bench_cmd->add_option("--key-bits", bench_bits, "Paillier modulus size");

    unsigned demo_bits = 0;
    auto* demo_cmd = app.add_subcommand("keygen-demo", "print a serialized key pair (default: p=11, q=13)");
    demo_cmd->add_option("--bits", demo_bits, "generate a fresh key of this size instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));
    install_signal_handlers();

    try {
        if (es_cmd->parsed()) {
            return ppa::runners::run_encryption_server(es_opts.resolve("encryption-server"), g_stop, std::cout);
        }
        if (as_cmd->parsed()) {
            return ppa::runners::run_aggregation_server(as_opts.resolve("aggregation-server"), g_stop, std::cout);
        }
        if (client_cmd->parsed()) {
            return ppa::runners::run_client_pool(client_opts.resolve("client"), g_stop, std::cout);
        }
        if (sim_cmd->parsed()) {
            ppa::RunConfig cfg = sim_opts.resolve("simulate");
            auto report = ppa::simulation::run_simulation(cfg, sim_seed_given ? sim_seed : cfg.seed);
            if (sim_out.empty()) {
                std::cout << report.render();
            } else {
                std::ofstream f(sim_out);
                f << report.render();
                if (!f) {
                    throw ppa::Error("cannot write '" + sim_out + "'");
                }
            }
            return 0;
        }
        if (bench_cmd->parsed()) {
            auto spec = ppa::bench::make_spec(ppa::bench::primitive_from_string(primitive),
                                              ms.empty() ? std::vector<std::size_t>{} : ppa::bench::parse_list(ms),
                                              us.empty() ? std::vector<std::size_t>{} : ppa::bench::parse_list(us),
                                              ns.empty() ? std::vector<std::size_t>{} : ppa::bench::parse_list(ns),
                                              ts.empty() ? std::vector<std::size_t>{} : ppa::bench::parse_list(ts),
                                              reps, bench_bits);
            std::cout << ppa::bench::csv_header() << "\n";
            for (const auto& row : ppa::bench::run_bench(spec, std::cerr)) {
                std::cout << ppa::bench::csv_row(row) << std::endl;
            }
            return 0;
        }
        if (demo_cmd->parsed()) {
            return keygen_demo(demo_bits);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
