#pragma once

#include <cstdint>

#include "dpgan/schema.hpp"

namespace dpgan {

/// Six 2-D Gaussians with centers on a regular hexagon of radius 1 and
/// per-component std 0.1; points are assigned to components round-robin so
/// labels stay balanced. Columns: x, y continuous in [-1.6, 1.6] (samples
/// clamped), label categorical c0..c5.
Table make_gaussian_mixture(std::size_t n, std::uint64_t seed);

/// Surrogate metering series: a double-peaked daily profile with per-series
/// amplitude/phase jitter plus observation noise, clamped into [-1, 1].
/// One series column of the given length (default callers use 96).
Table make_timeseries(std::size_t n, std::size_t length, std::uint64_t seed);

/// Census-style mixed tabular benchmark with a balanced binary income label
/// and label-dependent feature distributions. A stand-in for the adult
/// dataset at desk scale; distribution constants are calibrated so a random
/// forest on real rows scores close to the published 77 % reference.
Table make_adult_like(std::size_t n, std::uint64_t seed);

}  // namespace dpgan
