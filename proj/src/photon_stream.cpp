#include "hbt/photon_stream.hpp"

#include <cmath>
#include <string>

#include "hbt/error.hpp"

namespace hbt {

void validate(const PhotonStream& stream) {
  for (std::size_t i = 0; i < stream.timestamps.size(); ++i) {
    require(stream.timestamps[i] < stream.duration,
            "photon stream timestamp " + std::to_string(stream.timestamps[i]) +
                " ps outside [0, duration)");
    if (i > 0) {
      require(stream.timestamps[i - 1] <= stream.timestamps[i],
              "photon stream timestamps must be non-decreasing");
    }
  }
}

Picoseconds to_picoseconds(double ns) {
  require(std::isfinite(ns) && ns >= 0.0, "time must be finite and non-negative");
  const double ps = ns * 1e3;
  const double rounded = std::round(ps);
  require(std::abs(ps - rounded) <= 1e-6 * std::max(1.0, rounded),
          "time must be a whole number of picoseconds");
  return static_cast<Picoseconds>(rounded);
}

}  // namespace hbt
