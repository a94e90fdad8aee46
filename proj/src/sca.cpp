#include <jdbpr/sca.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jdbpr::sca {

Affine log_upper_bound(double c) {
    if (!(c > 0.0) || !std::isfinite(c))
        throw std::invalid_argument("log_upper_bound: expansion point must be positive");
    return {std::log(c) - 1.0, 1.0 / c};
}

double NegLogMajorant::at(double t) const { return std::max(left.at(t), right.at(t)); }

NegLogMajorant neg_log_majorant(double t0, double omega) {
    if (!(t0 > 0.0) || !std::isfinite(t0))
        throw std::invalid_argument("neg_log_majorant: expansion point must be positive");
    if (!(omega > 1.0) || !std::isfinite(omega))
        throw std::invalid_argument("neg_log_majorant: omega must exceed 1");
    auto chord = [](double a, double b) {
        const double slope = (std::log(a) - std::log(b)) / (b - a); // (-ln b + ln a)/(b - a)
        return Affine{-std::log(a) - slope * a, slope};
    };
    NegLogMajorant m;
    m.lo = t0 / omega;
    m.hi = t0 * omega;
    m.left = chord(m.lo, t0);
    m.right = chord(t0, m.hi);
    return m;
}

} // namespace jdbpr::sca
