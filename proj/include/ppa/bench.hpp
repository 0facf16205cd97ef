#pragma once

// Timing sweeps over the cryptographic building blocks. Single-threaded; each
// point runs one untimed warm-up repetition and reports the median of the rest.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ppa::bench {

enum class Primitive { enc, dec, eval_by_u, eval_by_m, share_gen, share_recover };

std::string to_string(Primitive p);
Primitive primitive_from_string(const std::string& s);

struct BenchPoint {
    std::optional<std::size_t> m;
    std::optional<std::size_t> u;
    std::optional<std::size_t> n;
    std::optional<std::size_t> t;
};

struct BenchSpec {
    Primitive primitive = Primitive::enc;
    std::vector<BenchPoint> sweep;
    std::size_t repetitions = 5;
    unsigned key_bits = 2048;
};

struct BenchRow {
    Primitive primitive;
    BenchPoint point;
    double median_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
};

inline constexpr std::size_t kDefaultFixedM = 1000;
inline constexpr std::size_t kDefaultFixedU = 10;

/// Builds the sweep for `primitive` from comma-separated axis lists:
/// enc/dec sweep m; eval_by_u sweeps u at one m; eval_by_m sweeps m at one u;
/// share_gen/share_recover pair n[i] with t[i].
BenchSpec make_spec(Primitive primitive, const std::vector<std::size_t>& ms, const std::vector<std::size_t>& us,
                    const std::vector<std::size_t>& ns, const std::vector<std::size_t>& ts,
                    std::size_t repetitions, unsigned key_bits);

/// Runs the sweep. Infeasible points (t > n) are skipped with a note on `notes`.
std::vector<BenchRow> run_bench(const BenchSpec& spec, std::ostream& notes);

std::string csv_header();
std::string csv_row(const BenchRow& row);

std::vector<std::size_t> parse_list(const std::string& text);

} // namespace ppa::bench
