#pragma once

#include <cstdint>
#include <limits>

namespace ssep
{
    /// Stafford variant 13 of the MurmurHash3 finalizer.
    constexpr std::uint64_t mix64(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Counter-based generator: output i is a keyed hash of i, so any position of any stream
    /// can be produced without state beyond (key, counter). Satisfies UniformRandomBitGenerator.
    class CounterRng
    {
    public:
        using result_type = std::uint64_t;

        explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
            : key_(mix64(key ^ 0x6a09e667f3bcc909ULL)), ctr_(counter)
        {
        }

        /// Stream for one replica: key = seed xor replica index.
        static CounterRng for_replica(std::uint64_t seed, std::uint64_t replica, std::uint64_t domain = 0) noexcept
        {
            return CounterRng((seed ^ replica) + domain * 0xd1b54a32d192ed03ULL);
        }

        static constexpr result_type min() noexcept { return 0; }
        static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

        result_type operator()() noexcept
        {
            return mix64(key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL);
        }

        /// Uniform integer in [0, n) by multiply-high (bias below 2^-64 n).
        std::uint64_t below(std::uint64_t n) noexcept
        {
            return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
        }

        /// Uniform double in [0, 1).
        double uniform() noexcept
        {
            return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
        }

        std::uint64_t counter() const noexcept { return ctr_; }

    private:
        std::uint64_t key_;
        std::uint64_t ctr_;
    };
} // namespace ssep
