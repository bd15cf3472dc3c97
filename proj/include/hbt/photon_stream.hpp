#pragma once

#include <cstdint>
#include <vector>

namespace hbt {

using Picoseconds = std::uint64_t;

/// Sorted detection timestamps in picoseconds on [0, duration).
struct PhotonStream {
  std::vector<Picoseconds> timestamps;
  Picoseconds duration = 0;

  std::size_t size() const { return timestamps.size(); }
  bool empty() const { return timestamps.empty(); }
  double duration_ns() const { return static_cast<double>(duration) * 1e-3; }
};

void validate(const PhotonStream& stream);

/// Converts a delay in ns to integer picoseconds; rejects values that are not
/// a whole number of picoseconds.
Picoseconds to_picoseconds(double ns);

}  // namespace hbt
