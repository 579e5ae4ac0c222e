#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mmfuse/dataset/scales.hpp"
#include "mmfuse/dataset/session.hpp"
#include "mmfuse/numerics/tensor.hpp"

namespace mmfuse {

/// Input-level feature mask: excluded features are replaced by a per-feature
/// constant (typically the training-split mean) in every frame.
struct FeatureMask {
  std::array<std::vector<char>, 3> keep;   // per modality, feature_dim entries
  std::array<std::vector<double>, 3> fill; // same layout, used where keep == 0

  static FeatureMask keep_all();
  std::size_t kept() const;
};

/// Labelled examples referring to per-modality [T, D] tensors owned elsewhere.
struct ExampleSet {
  std::vector<std::array<const Tensor*, 3>> inputs;
  std::vector<int> labels;
  std::optional<FeatureMask> mask;

  std::size_t size() const { return labels.size(); }
};

ExampleSet make_examples(const std::vector<SessionRecord>& sessions, std::span<const std::size_t> indices, Scale scale);

/// Mean of every feature over the given sessions and all their frames.
std::array<std::vector<double>, 3> feature_means(const std::vector<SessionRecord>& sessions,
                                                 std::span<const std::size_t> indices);

/// Stacks the selected rows into [B, T, D] tensors, one per modality. Rows
/// must share T and D. Modalities with unused == true are skipped (left empty).
std::array<Tensor, 3> stack_batch(const ExampleSet& set, std::span<const std::size_t> rows,
                                  std::array<bool, 3> used = {true, true, true});

/// Tensor owned examples (cached embeddings).
struct OwnedExamples {
  std::vector<std::array<Tensor, 3>> tensors;
  ExampleSet view(const std::vector<int>& labels) const;
};

}  // namespace mmfuse
