#pragma once

#include <cstdint>
#include <vector>

#include "msba/manifest.hpp"

namespace msba {

struct BatchComposition {
  double real_frac = 1.0 / 3.0;
  double single_fake_frac = 1.0 / 3.0;
  double msba_frac = 1.0 / 3.0;
};

enum class SampleKind { real, single_fake, msba };

struct SampleSpec {
  SampleKind kind;
  const ImageRecord* record;  // record drawn from the epoch permutation
  uint64_t rng_tag;           // per-sample stream tag for augmentation draws
};

// One seeded permutation over the split's records per epoch; each record
// drives exactly one sample. Batches are laid out [real..., single..., msba...]
// with floor(frac * batch_size) single/msba slots and the remainder real.
class BatchIterator {
 public:
  BatchIterator(const Manifest& manifest, Split split, int batch_size,
                const BatchComposition& comp, uint64_t seed);

  void begin_epoch(int epoch);
  bool next(std::vector<SampleSpec>& batch);  // false when the epoch is done

  int batches_per_epoch() const;
  int records_per_epoch() const { return static_cast<int>(records_.size()); }

 private:
  const Manifest& manifest_;
  std::vector<const ImageRecord*> records_;
  int batch_size_;
  BatchComposition comp_;
  uint64_t seed_;
  int epoch_ = 0;
  size_t cursor_ = 0;
  uint64_t sample_counter_ = 0;
  std::vector<int> order_;
};

}  // namespace msba
