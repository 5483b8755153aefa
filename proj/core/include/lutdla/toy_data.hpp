#pragma once

#include <cstddef>
#include <cstdint>

#include "lutdla/nn.hpp"

namespace lutdla {

/// Two interleaved half circles, labels 0/1, roughly centred on the origin.
Dataset two_moons(std::size_t n, double noise, std::uint64_t seed);

/// 8x8 digit glyphs (0, 1, 4, 7) with a random one-pixel shift, pixel
/// dropout and Gaussian intensity noise. 64 features in [0, 1]-ish, 4 classes.
Dataset glyphs8x8(std::size_t n, double noise, std::uint64_t seed);

inline constexpr std::size_t kGlyphClasses = 4;

}  // namespace lutdla
