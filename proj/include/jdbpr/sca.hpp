#pragma once

namespace jdbpr::sca {

// Affine function of one scalar: value(t) = offset + slope * t.
struct Affine {
    double offset = 0.0;
    double slope = 0.0;

    double at(double t) const { return offset + slope * t; }
};

// First-order bound of the concave logarithm at c > 0:
//   ln(t) <= ln(c) + (t - c)/c  for all t > 0, with equality at t = c.
// This is the linearization used for every concave ln term in the successive
// convex approximation steps.
Affine log_upper_bound(double c);

// Piecewise-linear majorant of the convex -ln(t) on the trust interval
// [t0/omega, t0*omega]: the chords of -ln over [t0/omega, t0] and
// [t0, t0*omega]. Both chords pass through (t0, -ln t0), so the majorant is
// exact at the expansion point; on the interval each chord lies above -ln,
// so max(left, right) >= -ln(t) there. Convex -ln terms that appear on the
// wrong side of a constraint enter the conic programs through an epigraph
// scalar bounded below by both chords, plus the two trust-interval rows.
struct NegLogMajorant {
    Affine left;  // chord over [t0/omega, t0]
    Affine right; // chord over [t0, t0*omega]
    double lo = 0.0;
    double hi = 0.0;

    double at(double t) const;
};

NegLogMajorant neg_log_majorant(double t0, double omega = 10.0);

} // namespace jdbpr::sca
