#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace tcostlab {

// CRRA utilities only: both are increasing, strictly concave, Inada, and
// have asymptotic elasticity below 1, which is what the solvers rely on.
struct UtilitySpec {
    enum class Kind { log_utility, power_utility };
    Kind kind = Kind::log_utility;
    double p = 0.5;  // power exponent, in (0,1); ignored for log

    void validate() const {
        if (kind == Kind::power_utility && !(p > 0.0 && p < 1.0))
            throw std::invalid_argument("UtilitySpec: power exponent must be in (0,1)");
    }

    bool is_log() const { return kind == Kind::log_utility; }

    // U(v); -inf outside the effective domain so inadmissible wealth is
    // never preferred.
    double operator()(double v) const {
        if (is_log())
            return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
        if (v > 0.0) return std::pow(v, p) / p;
        return v == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }

    static UtilitySpec parse(const std::string& text) {
        UtilitySpec u;
        if (text == "log") {
            u.kind = Kind::log_utility;
            return u;
        }
        if (text.rfind("power:", 0) == 0) {
            u.kind = Kind::power_utility;
            u.p = std::stod(text.substr(6));
            u.validate();
            return u;
        }
        throw std::invalid_argument("UtilitySpec: expected 'log' or 'power:<p>', got '" + text +
                                    "'");
    }

    std::string to_string() const {
        return is_log() ? "log" : "power:" + std::to_string(p);
    }
};

} // namespace tcostlab
