#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace diffnet {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Engine for the stream identified by (seed, key...). Streams with different
/// keys are statistically independent, so work keyed this way can be
/// scheduled in any order without changing results.
Engine keyed_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> key);

// Stream tags, first element of every key.
namespace stream {
inline constexpr std::uint64_t graph = 1;
inline constexpr std::uint64_t fill = 2;
inline constexpr std::uint64_t subject = 3;
inline constexpr std::uint64_t replication = 4;
inline constexpr std::uint64_t bootstrap = 5;
inline constexpr std::uint64_t folds = 6;
inline constexpr std::uint64_t split = 7;
} // namespace stream

} // namespace diffnet
