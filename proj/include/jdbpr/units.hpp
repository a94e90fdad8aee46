#pragma once

#include <cmath>
#include <stdexcept>

namespace jdbpr {

// Power conversions. All internal computation runs in linear watts; dBm/dB
// appear only at the config and report boundaries.
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double watts) {
    if (!(watts > 0.0))
        throw std::domain_error("watts_to_dbm: power must be strictly positive");
    return 10.0 * std::log10(watts) + 30.0;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

inline double linear_to_db(double lin) {
    if (!(lin > 0.0))
        throw std::domain_error("linear_to_db: ratio must be strictly positive");
    return 10.0 * std::log10(lin);
}

} // namespace jdbpr
