#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mss {

using Q = boost::rational<std::int64_t>;

inline double to_double(const Q& q) {
    return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator());
}

inline std::string to_string(const Q& q) {
    if (q.denominator() == 1) return std::to_string(q.numerator());
    return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

// Accepts "a", "a/b" and plain decimals such as "1.25".
inline Q parse_rational(const std::string& text) {
    auto slash = text.find('/');
    try {
        if (slash != std::string::npos) {
            return Q(std::stoll(text.substr(0, slash)), std::stoll(text.substr(slash + 1)));
        }
        auto dot = text.find('.');
        if (dot == std::string::npos) return Q(std::stoll(text));
        std::string digits = text.substr(0, dot) + text.substr(dot + 1);
        std::int64_t den = 1;
        for (std::size_t i = dot + 1; i < text.size(); ++i) den *= 10;
        return Q(std::stoll(digits), den);
    } catch (const std::exception&) {
        throw std::invalid_argument("not a rational number: '" + text + "'");
    }
}

inline const Q& qmin(const Q& a, const Q& b) { return b < a ? b : a; }

}  // namespace mss
