#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace eagrl {

using Rng = std::mt19937_64;

// Stable sub-seed derivation so that each stage (or patient) can be rerun in
// isolation and still draw the same stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

double uniform01(Rng& rng);
double standard_normal(Rng& rng);

// Inverse-CDF draw from a (not necessarily normalized) nonnegative weight
// vector. Zero-weight entries are never returned.
int sample_index(std::span<const double> weights, Rng& rng);

// Uniform integer in [0, n).
std::size_t uniform_below(std::size_t n, Rng& rng);

// Fisher-Yates over uniform_below, so results are identical across standard
// library implementations.
template <class T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_below(i, rng);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace eagrl
