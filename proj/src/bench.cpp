#include "ppa/bench.hpp"

#include "ppa/encoding.hpp"
#include "ppa/paillier.hpp"
#include "ppa/shamir.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>

namespace ppa::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<paillier::Ciphertext> random_ciphertexts(std::size_t count, const paillier::PublicKey& pk,
                                                     RandomSource& rng)
{
    // Every element of Z*_{n^2} is a valid ciphertext, so sampling directly
    // avoids paying for encryption in the setup of dec/eval benches.
    std::vector<paillier::Ciphertext> out;
    out.reserve(count);
    while (out.size() < count) {
        BigInt v = rng.below(pk.n_squared);
        if (paillier::is_valid_ciphertext_value(v, pk)) {
            out.push_back(paillier::Ciphertext{std::move(v), pk.fingerprint});
        }
    }
    return out;
}

encoding::ModelVector random_model(std::size_t m, RandomSource& rng)
{
    encoding::ModelVector v(m);
    for (double& x : v) {
        x = static_cast<double>(rng.next_u64() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    }
    return v;
}

BenchRow measure(Primitive p, const BenchPoint& point, std::size_t reps, const std::function<void()>& setup,
                 const std::function<void()>& body)
{
    setup();
    body(); // warm-up
    std::vector<double> ms;
    ms.reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
        setup();
        auto start = Clock::now();
        body();
        auto stop = Clock::now();
        ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(ms.begin(), ms.end());
    double median = ms.size() % 2 == 1 ? ms[ms.size() / 2] : 0.5 * (ms[ms.size() / 2 - 1] + ms[ms.size() / 2]);
    return BenchRow{p, point, median, ms.front(), ms.back()};
}

std::string opt(const std::optional<std::size_t>& v)
{
    return v ? std::to_string(*v) : std::string();
}

} // namespace

std::string to_string(Primitive p)
{
    switch (p) {
    case Primitive::enc:
        return "enc";
    case Primitive::dec:
        return "dec";
    case Primitive::eval_by_u:
        return "eval_by_u";
    case Primitive::eval_by_m:
        return "eval_by_m";
    case Primitive::share_gen:
        return "share_gen";
    case Primitive::share_recover:
        return "share_recover";
    }
    return "unknown";
}

Primitive primitive_from_string(const std::string& s)
{
    for (auto p : {Primitive::enc, Primitive::dec, Primitive::eval_by_u, Primitive::eval_by_m, Primitive::share_gen,
                   Primitive::share_recover}) {
        if (to_string(p) == s) {
            return p;
        }
    }
    throw Error("bench: unknown primitive '" + s + "'");
}

std::vector<std::size_t> parse_list(const std::string& text)
{
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        std::size_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
            throw Error("bench: malformed list '" + text + "'");
        }
        out.push_back(v);
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

BenchSpec make_spec(Primitive primitive, const std::vector<std::size_t>& ms, const std::vector<std::size_t>& us,
                    const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ts,
                    std::size_t repetitions, unsigned key_bits)
{
    if (repetitions < 3) {
        throw Error("bench: at least 3 repetitions are required");
    }
    BenchSpec spec;
    spec.primitive = primitive;
    spec.repetitions = repetitions;
    spec.key_bits = key_bits;

    auto single = [](const std::vector<std::size_t>& v, std::size_t fallback, const char* axis) {
        if (v.empty()) {
            return fallback;
        }
        if (v.size() != 1) {
            throw Error(std::string("bench: this primitive takes a single --") + axis + " value");
        }
        return v.front();
    };

    switch (primitive) {
    case Primitive::enc:
    case Primitive::dec:
    case Primitive::eval_by_m: {
        std::optional<std::size_t> u;
        if (primitive == Primitive::eval_by_m) {
            u = single(us, kDefaultFixedU, "u");
        }
        for (auto m : ms) {
            spec.sweep.push_back(BenchPoint{m, u, std::nullopt, std::nullopt});
        }
        break;
    }
    case Primitive::eval_by_u: {
        std::size_t m = single(ms, kDefaultFixedM, "m");
        for (auto u : us) {
            spec.sweep.push_back(BenchPoint{m, u, std::nullopt, std::nullopt});
        }
        break;
    }
    case Primitive::share_gen:
    case Primitive::share_recover:
        if (ns.size() != ts.size()) {
            throw Error("bench: --n and --t lists must have the same length");
        }
        for (std::size_t i = 0; i < ns.size(); ++i) {
            spec.sweep.push_back(BenchPoint{std::nullopt, std::nullopt, ns[i], ts[i]});
        }
        break;
    }
    if (spec.sweep.empty()) {
        throw Error("bench: empty sweep for " + to_string(primitive));
    }
    return spec;
}

std::vector<BenchRow> run_bench(const BenchSpec& spec, std::ostream& notes)
{
    if (spec.sweep.empty()) {
        throw Error("bench: empty sweep");
    }
    if (spec.repetitions < 3) {
        throw Error("bench: at least 3 repetitions are required");
    }
    SecureRandom rng;
    std::vector<BenchRow> rows;
    const Primitive p = spec.primitive;
    const bool needs_key = p == Primitive::enc || p == Primitive::dec || p == Primitive::eval_by_u
                           || p == Primitive::eval_by_m;

    std::optional<paillier::KeyPair> keys;
    if (needs_key) {
        keys = paillier::keygen(paillier::setup(spec.key_bits), rng);
    }
    const shamir::FieldParams field = shamir::setup();
    const encoding::Config enc_cfg;

    for (const BenchPoint& point : spec.sweep) {
        switch (p) {
        case Primitive::enc: {
            encoding::ModelVector model;
            rows.push_back(measure(
                p, point, spec.repetitions, [&] { model = random_model(*point.m, rng); },
                [&] { (void)encoding::encrypt_vector(model, keys->public_key, enc_cfg, rng); }));
            break;
        }
        case Primitive::dec: {
            auto cts = random_ciphertexts(*point.m, keys->public_key, rng);
            rows.push_back(measure(
                p, point, spec.repetitions, [] {},
                [&] {
                    for (const auto& c : cts) {
                        (void)paillier::decrypt(c, keys->secret_key);
                    }
                }));
            break;
        }
        case Primitive::eval_by_u:
        case Primitive::eval_by_m: {
            std::vector<std::vector<paillier::Ciphertext>> vectors;
            for (std::size_t k = 0; k < *point.u; ++k) {
                vectors.push_back(random_ciphertexts(*point.m, keys->public_key, rng));
            }
            rows.push_back(measure(
                p, point, spec.repetitions, [] {},
                [&] { (void)encoding::add_vectors(vectors, keys->public_key); }));
            break;
        }
        case Primitive::share_gen: {
            if (*point.t > *point.n || *point.t == 0) {
                notes << "bench: skipping share_gen point n=" << *point.n << " t=" << *point.t
                      << " (need 1 <= t <= n)\n";
                continue;
            }
            BigInt secret;
            rows.push_back(measure(
                p, point, spec.repetitions, [&] { secret = rng.below(field.prime); },
                [&] { (void)shamir::share(*point.n, *point.t, secret, field, rng); }));
            break;
        }
        case Primitive::share_recover: {
            if (*point.t > *point.n || *point.t == 0) {
                notes << "bench: skipping share_recover point n=" << *point.n << " t=" << *point.t
                      << " (need 1 <= t <= n)\n";
                continue;
            }
            std::vector<shamir::Share> shares;
            rows.push_back(measure(
                p, point, spec.repetitions,
                [&] { shares = shamir::share(*point.n, *point.t, rng.below(field.prime), field, rng); },
                [&] { (void)shamir::combine(*point.t, shares, field); }));
            break;
        }
        }
    }
    return rows;
}

std::string csv_header()
{
    return "primitive,m,u,n,t,median_ms,min_ms,max_ms";
}

std::string csv_row(const BenchRow& row)
{
    char times[96];
    std::snprintf(times, sizeof times, "%.3f,%.3f,%.3f", row.median_ms, row.min_ms, row.max_ms);
    return to_string(row.primitive) + "," + opt(row.point.m) + "," + opt(row.point.u) + "," + opt(row.point.n) + ","
           + opt(row.point.t) + "," + times;
}

} // namespace ppa::bench
