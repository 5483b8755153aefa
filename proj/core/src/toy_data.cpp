#include "lutdla/toy_data.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "lutdla/rng.hpp"

namespace lutdla {
namespace {

constexpr std::array<std::array<const char*, 8>, kGlyphClasses> kGlyphs = {{
    {"..####..", ".##..##.", ".##..##.", ".##..##.", ".##..##.", ".##..##.", "..####..", "........"},
    {"...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..", "........"},
    {"....##..", "...###..", "..#.##..", ".#..##..", ".######.", "....##..", "....##..", "........"},
    {".######.", ".....##.", "....##..", "...##...", "..##....", "..##....", "..##....", "........"},
}};

}  // namespace

Dataset two_moons(std::size_t n, double noise, std::uint64_t seed) {
  require(n >= 2, "two_moons: need at least two points");
  require(noise >= 0.0, "two_moons: noise must be >= 0");
  Rng rng(seed);
  Dataset d;
  d.x = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double t = rng.uniform() * std::numbers::pi;
    double x = std::cos(t), y = std::sin(t);
    if (label == 1) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    d.x(i, 0) = x - 0.5 + rng.normal(0.0, noise);
    d.x(i, 1) = y - 0.25 + rng.normal(0.0, noise);
    d.labels.push_back(label);
  }
  return d;
}

Dataset glyphs8x8(std::size_t n, double noise, std::uint64_t seed) {
  require(n >= 1, "glyphs8x8: need at least one sample");
  require(noise >= 0.0, "glyphs8x8: noise must be >= 0");
  Rng rng(seed);
  Dataset d;
  d.x = Matrix(n, 64);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % kGlyphClasses;
    const int dx = static_cast<int>(rng.below(3)) - 1;
    const int dy = static_cast<int>(rng.below(3)) - 1;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        const int sr = r - dy, sc = c - dx;
        double px = 0.0;
        if (sr >= 0 && sr < 8 && sc >= 0 && sc < 8 && kGlyphs[label][sr][sc] == '#') px = 1.0;
        if (rng.uniform() < 0.1 * noise) px = 1.0 - px;
        d.x(i, static_cast<std::size_t>(r * 8 + c)) = px + rng.normal(0.0, 0.2 * noise);
      }
    d.labels.push_back(label);
  }
  return d;
}

}  // namespace lutdla
