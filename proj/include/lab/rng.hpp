#pragma once

#include <cstdint>
#include <span>

namespace lab::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
inline std::uint64_t mix(std::uint64_t z) {
	z += kGolden;
	z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
	z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
	return z ^ (z >> 31);
}

inline std::uint64_t derive(std::uint64_t seed, std::uint64_t index) { return mix(seed ^ mix(index * kGolden + 1)); }

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) { return derive(master, trial); }

inline std::uint64_t site_key(std::uint64_t seed, std::span<const int> site) {
	std::uint64_t h = mix(seed);
	for (int c : site) h = mix(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
	return h;
}

// Uniform on [0,1) from the j-th draw of a keyed stream.
inline double uniform(std::uint64_t key, std::uint64_t j = 0) {
	return static_cast<double>(derive(key, j) >> 11) * 0x1.0p-53;
}

// Small sequential generator for test and sampling loops.
class Stream {
public:
	explicit Stream(std::uint64_t seed) : key_(seed) {}
	double uniform() { return lab::rng::uniform(key_, count_++); }
	std::uint64_t next() { return derive(key_, count_++); }

private:
	std::uint64_t key_;
	std::uint64_t count_ = 0;
};

} // namespace lab::rng
