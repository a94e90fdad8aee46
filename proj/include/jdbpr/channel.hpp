#pragma once

#include <jdbpr/rng.hpp>
#include <jdbpr/types.hpp>

#include <iosfwd>

namespace jdbpr {

// Uniform-linear-array response for n elements with spacing d/lambda at an
// azimuth angle (radians from broadside): element i carries
// exp(-j * 2*pi * (d/lambda) * (i-1) * sin(angle)).
Eigen::VectorXcd array_response(int n, double spacing_ratio, double angle);

// Distance-law amplitude factor sqrt(C0 * d^-alpha), reference distance 1 m.
// Squared it is the per-entry average power gain of the link.
double path_gain(double c0, double d, double alpha);

// Azimuth of the link a -> b measured from the x-axis (array broadside).
double azimuth(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// Unit-average-power Rician fading: sqrt(kf/(1+kf)) * los + sqrt(1/(1+kf)) * nlos,
// nlos entries CN(0,1). los must have unit-modulus entries.
Eigen::MatrixXcd rician_mix(const Eigen::MatrixXcd& los, double k_factor, Rng& rng);

// Users drawn uniformly in a ground disc of cfg.user_radius around the origin;
// draws are sequential per user, so growing K extends a smaller topology.
Topology draw_topology(const SystemConfig& cfg, std::uint64_t draw = 0);

// Full channel realization for one draw: Rayleigh direct links, Rician BS-IRS
// and IRS-user links with rank-one line-of-sight parts from the ULA geometry.
// Substreams are keyed per user / per element row, and entries are drawn in
// index order, so enlarging K, N, or M extends the same realization.
ChannelSet generate_channels(const SystemConfig& cfg, std::uint64_t draw = 0);
ChannelSet generate_channels(const SystemConfig& cfg, const Topology& topo,
                             std::uint64_t draw = 0);

// Drops the reflecting surface from a realization (M = 0 view, shared h_d).
ChannelSet without_irs(const ChannelSet& ch);

// Text serialization for cross-implementation regression: header with
// dimensions and seed, then one complex entry per line, row-major.
void dump_channels(std::ostream& os, const ChannelSet& ch);
ChannelSet load_channels(std::istream& is);

} // namespace jdbpr
