#ifndef EXCHMAT_RNG_HPP
#define EXCHMAT_RNG_HPP

// Deterministic, splittable randomness and uniform permutation sampling.
//
// Every random quantity in the library is drawn from an RngStream.  A stream
// is keyed by (master_seed, substream_index); its output is a pure function of
// that key and of the number of draws already taken, so sequences are
// bit-identical on every platform with 64-bit unsigned arithmetic.
//
// Stream derivation:
//   key  = mix64(master_seed + (substream_index + 1) * kGolden)
//   out_k = mix64(key ^ mix64((k + 1) * kCounterStep)),  k = 0, 1, 2, ...
// where mix64 is the SplitMix64 finalizer (Steele, Lea, Flood 2014).  The map
// substream_index -> key is a bijection for a fixed master seed (kGolden is
// odd and mix64 is invertible), so distinct substreams never share state.
// kCounterStep differs from kGolden so that the counter term never reproduces a key.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "exchmat/error.hpp"

namespace exchmat {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
inline constexpr std::uint64_t kCounterStep = 0xd1b54a32d192ed03ULL;

/// SplitMix64 output finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t substream_index) noexcept
        : key_(mix64(master_seed + (substream_index + 1) * kGolden)),
          master_seed_(master_seed),
          stream_id_(substream_index) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return mix64(key_ ^ mix64(counter_ * kCounterStep));
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
};

/// Convenience factory mirroring the documented derivation.
inline RngStream rng_stream(std::uint64_t master_seed, std::uint64_t substream_index) {
    return RngStream(master_seed, substream_index);
}

/// Unbiased integer in [0, bound) by multiply-and-reject (Lemire 2019).
template <std::uniform_random_bit_generator G>
std::uint64_t uniform_below(G& gen, std::uint64_t bound) {
    static_assert(G::min() == 0 && G::max() == std::numeric_limits<std::uint64_t>::max(),
                  "uniform_below expects a full-range 64-bit generator");
    if (bound == 0) throw DomainError("uniform_below: empty range");
    unsigned __int128 m = static_cast<unsigned __int128>(gen()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<unsigned __int128>(gen()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Uniform double in [0, 1) with 53 random bits.
template <std::uniform_random_bit_generator G>
double uniform01(G& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

/// Standard normal by the Marsaglia polar method (only sqrt and log, no trig).
template <std::uniform_random_bit_generator G>
double standard_normal(G& gen) {
    for (;;) {
        const double u = 2.0 * uniform01(gen) - 1.0;
        const double v = 2.0 * uniform01(gen) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// A bijection on [0, m).
struct Permutation {
    std::vector<std::size_t> map;

    std::size_t size() const noexcept { return map.size(); }
    std::size_t operator[](std::size_t i) const { return map[i]; }

    static Permutation identity(std::size_t m) {
        Permutation p;
        p.map.resize(m);
        std::iota(p.map.begin(), p.map.end(), std::size_t{0});
        return p;
    }

    Permutation inverse() const {
        Permutation q;
        q.map.resize(map.size());
        for (std::size_t i = 0; i < map.size(); ++i) q.map[map[i]] = i;
        return q;
    }

    /// (this ∘ other)(i) = this[other[i]].
    Permutation compose(const Permutation& other) const {
        if (other.size() != size()) throw DomainError("Permutation::compose: size mismatch");
        Permutation r;
        r.map.resize(size());
        for (std::size_t i = 0; i < size(); ++i) r.map[i] = map[other.map[i]];
        return r;
    }

    bool is_bijection() const {
        std::vector<char> seen(map.size(), 0);
        for (auto v : map) {
            if (v >= map.size() || seen[v]) return false;
            seen[v] = 1;
        }
        return true;
    }

    friend bool operator==(const Permutation&, const Permutation&) = default;
};

/// Uniform permutation of [0, m) by Fisher-Yates.
template <std::uniform_random_bit_generator G>
Permutation sample_permutation(G& gen, std::size_t m) {
    if (m == 0) throw DomainError("sample_permutation: empty domain (m = 0)");
    Permutation p = Permutation::identity(m);
    for (std::size_t i = m - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(gen, i + 1));
        std::swap(p.map[i], p.map[j]);
    }
    return p;
}

/// Parses a master seed given in decimal or 0x-prefixed hexadecimal.
inline std::uint64_t parse_seed(std::string_view text) {
    if (text.empty()) throw ValidationError("seed: empty string");
    int base = 10;
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X')) {
        base = 16;
        text.remove_prefix(2);
    }
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec == std::errc::result_out_of_range) throw ValidationError("seed: value does not fit in 64 bits");
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ValidationError("seed: not a decimal or 0x-hex integer: '" + std::string(text) + "'");
    return value;
}

} // namespace exchmat

#endif
