#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <vector>

namespace spatialdnn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
[[nodiscard]] std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives an independent stream seed from a base seed and a list of keys.
/// Used to give every (design, replicate, purpose) its own generator.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept;

/// Stable 64-bit hash of a short tag (FNV-1a), for labelling streams.
[[nodiscard]] std::uint64_t tag_hash(std::string_view tag) noexcept;

/// Seeded shuffled k-fold split: entry i is the fold (0..k-1) of observation i.
/// Fold sizes differ by at most one.
[[nodiscard]] std::vector<int> kfold_assignment(std::size_t n, int k, std::uint64_t seed);

}  // namespace spatialdnn
