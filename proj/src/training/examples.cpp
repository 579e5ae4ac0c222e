#include "mmfuse/training/examples.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

#include "mmfuse/error.hpp"

namespace mmfuse {

FeatureMask FeatureMask::keep_all() {
  FeatureMask m;
  for (Modality mod : kModalities) {
    m.keep[index_of(mod)].assign(feature_dim(mod), 1);
    m.fill[index_of(mod)].assign(feature_dim(mod), 0.0);
  }
  return m;
}

std::size_t FeatureMask::kept() const {
  std::size_t n = 0;
  for (const auto& k : keep) n += static_cast<std::size_t>(std::count(k.begin(), k.end(), 1));
  return n;
}

ExampleSet make_examples(const std::vector<SessionRecord>& sessions, std::span<const std::size_t> indices, Scale scale) {
  ExampleSet set;
  for (std::size_t i : indices) {
    const SessionRecord& s = sessions.at(i);
    set.inputs.push_back({&s.audio, &s.video, &s.text});
    set.labels.push_back(derive_labels(s.scales)[static_cast<std::size_t>(scale)]);
  }
  return set;
}

std::array<std::vector<double>, 3> feature_means(const std::vector<SessionRecord>& sessions,
                                                 std::span<const std::size_t> indices) {
  std::array<std::vector<double>, 3> means;
  for (Modality m : kModalities) {
    std::vector<double>& acc = means[index_of(m)];
    acc.assign(feature_dim(m), 0.0);
    std::size_t frames = 0;
    for (std::size_t i : indices) {
      const Tensor& x = sessions.at(i).modality(m);
      for (std::size_t t = 0; t < x.dim(0); ++t) {
        for (std::size_t c = 0; c < x.dim(1); ++c) acc[c] += x.at(t, c);
      }
      frames += x.dim(0);
    }
    if (frames > 0) {
      for (double& v : acc) v /= static_cast<double>(frames);
    }
  }
  return means;
}

std::array<Tensor, 3> stack_batch(const ExampleSet& set, std::span<const std::size_t> rows, std::array<bool, 3> used) {
  if (rows.empty()) throw ContractError("stack_batch: empty batch");
  std::array<Tensor, 3> out;
  for (std::size_t m = 0; m < 3; ++m) {
    if (!used[m]) continue;
    const Tensor& first = *set.inputs.at(rows[0])[m];
    const std::size_t T = first.dim(0), D = first.dim(1);
    Tensor batch({rows.size(), T, D});
    for (std::size_t b = 0; b < rows.size(); ++b) {
      const Tensor& x = *set.inputs.at(rows[b])[m];
      if (x.dim(0) != T || x.dim(1) != D) throw DimensionError("stack_batch: examples differ in shape");
      std::memcpy(batch.ptr() + b * T * D, x.ptr(), T * D * sizeof(double));
    }
    if (set.mask) {
      const auto& keep = set.mask->keep[m];
      const auto& fill = set.mask->fill[m];
      if (keep.size() != D) throw DimensionError("feature mask width does not match the input");
      for (std::size_t r = 0; r < rows.size() * T; ++r) {
        double* row = batch.ptr() + r * D;
        for (std::size_t c = 0; c < D; ++c) {
          if (!keep[c]) row[c] = fill[c];
        }
      }
    }
    out[m] = std::move(batch);
  }
  return out;
}

ExampleSet OwnedExamples::view(const std::vector<int>& labels) const {
  if (labels.size() != tensors.size()) throw ContractError("label count does not match the cached examples");
  ExampleSet set;
  for (const auto& t : tensors) set.inputs.push_back({&t[0], &t[1], &t[2]});
  set.labels = labels;
  return set;
}

}  // namespace mmfuse
