#pragma once

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ssep::acceptance
{
    struct Criterion
    {
        int id = 0;
        std::string name;
        bool pass = false;
        double seconds = 0.0;
        double limit_seconds = 0.0; // runtime requirement; exceeding it fails the criterion
        nlohmann::json values;      // measured quantities
        std::string note;
    };

    struct Options
    {
        double scale = 1.0; // multiplies every replica count (reduced scale widens SE gates)
        std::uint64_t seed = 20240611;
        int threads = 1;
        bool inject_seed_fault = false;
        std::vector<int> only; // empty: all ten
        std::function<void(const Criterion&)> on_result;
    };

    std::vector<Criterion> run_all(const Options& opt);

    /// One line: "PASS  3  oracle agreement  (1.2 s / 120 s)  tv=..."
    std::string line(const Criterion& c);
    nlohmann::json to_json(const std::vector<Criterion>& cs, const Options& opt);
} // namespace ssep::acceptance
