#pragma once

#include <cstdint>

namespace curvkit {

// Source of randomness consumed by label sampling and data generation.
// Virtual so tests can force degenerate streams (e.g. all-zero noise).
struct RandomSource {
  virtual ~RandomSource() = default;
  virtual double uniform() = 0;  // in [0, 1)
  virtual double normal() = 0;   // standard normal
};

// Counter-based splittable stream keyed by (seed, stream_a, stream_b).
// Two KeyedRng built from the same key produce identical sequences, so
// per-(datum, sample) keys give reproducible draws regardless of the
// order in which data points are processed.
class KeyedRng final : public RandomSource {
 public:
  explicit KeyedRng(std::uint64_t seed, std::uint64_t stream_a = 0,
                    std::uint64_t stream_b = 0);

  double uniform() override;
  double normal() override;

 private:
  std::uint64_t next_u64();

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace curvkit
