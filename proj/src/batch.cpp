#include "msba/batch.hpp"

#include <cmath>
#include <stdexcept>

#include "msba/rng.hpp"

namespace msba {

BatchIterator::BatchIterator(const Manifest& manifest, Split split, int batch_size,
                             const BatchComposition& comp, uint64_t seed)
    : manifest_(manifest), batch_size_(batch_size), comp_(comp), seed_(seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (comp.real_frac < 0 || comp.single_fake_frac < 0 || comp.msba_frac < 0)
    throw std::invalid_argument("batch composition fractions must be nonnegative");
  const double sum = comp.real_frac + comp.single_fake_frac + comp.msba_frac;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("batch composition fractions must sum to 1");

  records_ = manifest.split_records(split);
  if (records_.empty()) throw std::invalid_argument("empty split: " + to_string(split));

  if (comp.msba_frac > 0.0) {
    bool ok = false;
    for (const auto* r : records_)
      if (manifest.fakes_of_group(r->group_id).size() >= 2) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("msba_frac > 0 requires groups with at least 2 methods");
  }
  begin_epoch(0);
}

void BatchIterator::begin_epoch(int epoch) {
  epoch_ = epoch;
  cursor_ = 0;
  Rng rng(hash_combine(seed_, 0x65706f63ull + static_cast<uint64_t>(epoch)));
  order_ = rng.permutation(static_cast<int>(records_.size()));
}

int BatchIterator::batches_per_epoch() const {
  return static_cast<int>((records_.size() + batch_size_ - 1) / batch_size_);
}

bool BatchIterator::next(std::vector<SampleSpec>& batch) {
  batch.clear();
  if (cursor_ >= records_.size()) return false;
  const int take = static_cast<int>(std::min<size_t>(batch_size_, records_.size() - cursor_));
  const int n_single = static_cast<int>(std::floor(comp_.single_fake_frac * take));
  const int n_msba = static_cast<int>(std::floor(comp_.msba_frac * take));
  const int n_real = take - n_single - n_msba;

  for (int i = 0; i < take; ++i) {
    const ImageRecord* rec = records_[order_[cursor_ + i]];
    SampleKind kind = i < n_real               ? SampleKind::real
                      : i < n_real + n_single  ? SampleKind::single_fake
                                               : SampleKind::msba;
    batch.push_back({kind, rec, hash_combine(seed_, 0x73616d70ull + sample_counter_ + i)});
  }
  cursor_ += take;
  sample_counter_ += take;
  return true;
}

}  // namespace msba
