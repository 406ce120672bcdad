#include "mdre/rng.hpp"

#include <cmath>
#include <numbers>

namespace mdre {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
    for (unsigned char c : name) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master_seed) ^ h);
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view name)
    : gen_(derive_stream_seed(master_seed, name)) {}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u must be > 0 for the log
    double u = 0.0;
    do {
        u = uniform();
    } while (u <= 0.0);
    double v = uniform();
    double mag = std::sqrt(-2.0 * std::log(u));
    double ang = 2.0 * std::numbers::pi * v;
    spare_ = mag * std::sin(ang);
    has_spare_ = true;
    return mag * std::cos(ang);
}

std::uint64_t RngStream::below(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

}  // namespace mdre
