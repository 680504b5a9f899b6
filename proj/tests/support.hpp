#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "neckcheck/dsp.hpp"
#include "neckcheck/rng.hpp"

namespace testing {

inline neckcheck::dsp::Series sine(double freq_hz, double amplitude, double fs, std::size_t n) {
    neckcheck::dsp::Series s{fs, 0.0, std::vector<double>(n)};
    for (std::size_t k = 0; k < n; ++k) {
        s.values[k] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(k) / fs);
    }
    return s;
}

inline neckcheck::dsp::Series white_noise(double sigma, double fs, std::size_t n, std::uint64_t seed) {
    neckcheck::Xoshiro256 rng(seed);
    neckcheck::dsp::Series s{fs, 0.0, std::vector<double>(n)};
    for (auto& v : s.values) v = sigma * rng.normal();
    return s;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("neckcheck_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
