#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace specrec {

using std::size_t;

inline constexpr double kPi = 3.14159265358979323846;

/// Errors thrown by library operations; `what()` names the violated
/// precondition or the failing stage.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

inline double sq(double x) { return x * x; }

// <lambda> = (1 + lambda^2)^{1/2}; Sobolev weights are <lambda>^s.
inline double japanese_bracket(double lambda) {
    return std::sqrt(1.0 + lambda * lambda);
}

inline double sobolev_weight(double lambda, double s) {
    return std::pow(japanese_bracket(lambda), s);
}

/// FNV-1a, used for config/content hashing and for deriving named RNG
/// substreams from a root seed.
inline std::uint64_t fnv1a(const void* data, size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a(s.data(), s.size(), h);
}

/// All randomness flows from one root seed through named substreams.
inline std::mt19937_64 substream(std::uint64_t root_seed, const std::string& name) {
    std::uint64_t h = fnv1a(name);
    h = fnv1a(&root_seed, sizeof(root_seed), h);
    return std::mt19937_64(h);
}

inline double uniform01(std::mt19937_64& rng) {
    // 53-bit mantissa draw; bit-stable for a fixed mt19937_64 stream.
    return double(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
    return a + (b - a) * uniform01(rng);
}

/// Box-Muller on explicit uniform draws (std::normal_distribution is not
/// reproducible across standard library implementations).
inline double gaussian(std::mt19937_64& rng) {
    double u1 = uniform01(rng), u2 = uniform01(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size() && i < b.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace specrec
