#include "diffnet/rng.hpp"
#include "diffnet/common.hpp"

#include <iostream>
#include <mutex>
#include <vector>

namespace diffnet {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Engine keyed_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> key)
{
    std::uint64_t h = mix64(seed);
    for (auto k : key) h = mix64(h ^ mix64(k));

    std::vector<std::uint32_t> words;
    words.reserve(8);
    std::uint64_t s = h;
    for (int i = 0; i < 4; ++i) {
        s = mix64(s);
        words.push_back(static_cast<std::uint32_t>(s));
        words.push_back(static_cast<std::uint32_t>(s >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return Engine(seq);
}

void warn(const std::string& message)
{
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "warning: " << message << '\n';
}

} // namespace diffnet
