#pragma once

#include <cstddef>
#include <vector>

#include "ensobridge/core.hpp"

namespace ensobridge::surrogate {

struct CurriculumSchedule {
  double p0 = 0.0, p_max = 0.6;
  int e_f = 100;
  void validate() const;
};

double curriculum_probability(int e, const CurriculumSchedule& s);

struct SampleRef {
  bool reanalysis = false;
  std::size_t index = 0;
  bool operator==(const SampleRef&) const = default;
};

// Each element comes from the reanalysis pool with probability p, else from
// the OM pool; indices are uniform within the chosen pool.
std::vector<SampleRef> sample_curriculum_batch(std::size_t om_pool, std::size_t rea_pool, double p,
                                               std::size_t batch_size, Rng& rng);

}  // namespace ensobridge::surrogate
