#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "regen/error.hpp"

namespace regen {

/// One life cycle between consecutive regeneration times.
struct RegenerationRecord {
  std::size_t index = 0;          ///< cycle number n >= 1
  double duration = 0.0;          ///< R_n - R_{n-1}
  std::vector<double> xi;         ///< integral of each observable over the cycle
  std::optional<std::size_t> start_state;  ///< X at R_{n-1} (finite chains only)
  std::size_t clock_ticks = 0;    ///< exponential clock intervals in the cycle (split chains)
};

/// Cycles produced by a regeneration scheme. `initial` is the first cycle
/// [0, R_1], whose law depends on the start point; `records` are cycles
/// n >= 2, identically distributed.
struct RegenerationStream {
  std::vector<std::string> observables;
  RegenerationRecord initial;
  std::vector<RegenerationRecord> records;
  std::vector<double> clock_times;  ///< jump times T_n, when requested
  std::vector<double> coins;        ///< Z^2 at every jump time, when requested

  std::size_t stationary_count() const { return records.size(); }

  std::vector<double> durations() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.duration);
    return out;
  }

  std::size_t observable_index(const std::string& name) const {
    const auto it = std::find(observables.begin(), observables.end(), name);
    if (it == observables.end()) throw DomainError("stream has no observable '" + name + "'");
    return static_cast<std::size_t>(it - observables.begin());
  }

  std::vector<double> xi(std::size_t k) const {
    if (k >= observables.size()) throw DomainError("observable index out of range");
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.xi[k]);
    return out;
  }
};

/// Splits an ordered list of cycles into initial cycle and stationary cycles.
inline RegenerationStream make_stream(std::vector<RegenerationRecord> cycles,
                                      std::vector<std::string> observables) {
  if (cycles.empty()) throw DataError("make_stream: no cycles");
  RegenerationStream s;
  s.observables = std::move(observables);
  s.initial = std::move(cycles.front());
  s.records.assign(std::make_move_iterator(cycles.begin() + 1),
                   std::make_move_iterator(cycles.end()));
  return s;
}

}  // namespace regen
