#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace samlab {

// One splitmix64 round; also used to expand a master seed into component seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// Component seeds derived from one master seed. Component i receives the
// (i+1)-th output of a splitmix64 stream started at the master seed, so
// changing one component's consumption never shifts another's stream.
enum class SeedComponent : std::uint64_t {
    data = 0,
    split = 1,
    init = 2,
    optimizer = 3,
    shuffle = 4,
    diagnostics = 5,
};
std::uint64_t derive_seed(std::uint64_t master, SeedComponent component) noexcept;

// mt19937_64 plus hand-written distributions, so that streams are identical
// across standard libraries (std:: distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // [0, 1) with 53 random bits.
    double uniform01();
    double uniform(double lo, double hi);
    // Unbiased integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    std::size_t range(std::size_t lo, std::size_t hi_inclusive);
    double normal();
    bool bernoulli(double p);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace samlab
