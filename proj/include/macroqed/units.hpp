#pragma once

#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "macroqed/error.hpp"

namespace macroqed {

// Internal units: c = 1, omega_T = 1, so lengths are in c/omega_T.
enum class LengthUnit { c_over_omega_T, lambda_T, lambda_A };

inline std::optional<LengthUnit> parse_length_unit(std::string_view s) {
    if (s == "c_over_omega_T") return LengthUnit::c_over_omega_T;
    if (s == "lambda_T") return LengthUnit::lambda_T;
    if (s == "lambda_A") return LengthUnit::lambda_A;
    return std::nullopt;
}

inline std::string to_string(LengthUnit u) {
    switch (u) {
        case LengthUnit::c_over_omega_T: return "c_over_omega_T";
        case LengthUnit::lambda_T: return "lambda_T";
        default: return "lambda_A";
    }
}

// Converts a length given in `unit` to c/omega_T. lambda_A = 2 pi c / omega_A needs omega_A.
inline double to_internal_length(double value, LengthUnit unit, double omega_A = 0) {
    switch (unit) {
        case LengthUnit::c_over_omega_T: return value;
        case LengthUnit::lambda_T: return 2 * std::numbers::pi * value;
        default:
            if (!(omega_A > 0)) throw ValidationError("length unit lambda_A needs a positive omega_A");
            return 2 * std::numbers::pi * value / omega_A;
    }
}

}  // namespace macroqed
