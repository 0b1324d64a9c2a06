#pragma once

// JSON serialization of reports and tables.

#include "gflm/simharness.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace gflm {

using Json = nlohmann::ordered_json;

/// Numbers as JSON, non-finite values as null.
Json number(double v);
Json to_json(const Vec& v);
Json to_json(const IntervalReport& r);
Json to_json(const TestReport& r);
Json to_json(const AdaptiveReport& r);
Json to_json(const NullConstants& c);
Json to_json(const ConstantsReport& r);
Json to_json(const GcvTrace& t);
Json to_json(const SimulationTable& t);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view text);
std::string hex64(std::uint64_t v);

std::string version();

}  // namespace gflm
