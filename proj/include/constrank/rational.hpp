#pragma once

#include <gmpxx.h>

#include <string>

#include "constrank/errors.hpp"

namespace constrank {

using Rational = mpq_class;

/// Parse "p/q" or "p"; exact, no floating intermediate.
inline Rational parse_rational(const std::string& s) {
    try {
        Rational r(s);
        r.canonicalize();
        return r;
    } catch (const std::invalid_argument&) {
        throw ConfigError("not a rational: '" + s + "'");
    }
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline double to_double(const Rational& r) { return r.get_d(); }

}  // namespace constrank
