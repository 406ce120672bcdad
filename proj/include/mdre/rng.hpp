#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mdre {

// All randomness in a run flows from one master seed through named streams
// ("init", "shuffle", "sample", ...). Streams with different names are
// statistically independent and insensitive to the order in which other
// streams are consumed, which keeps parallel benchmark jobs reproducible.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view name);

    std::uint64_t next_u64();

    // uniform double in [0, 1) with 53 random bits
    double uniform();

    // standard normal via Box-Muller; second value of each pair is cached
    double normal();

    // unbiased integer in [0, n), rejection sampled
    std::uint64_t below(std::uint64_t n);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stable 64-bit stream-name hash (FNV-1a mixed with splitmix64).
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view name);

}  // namespace mdre
