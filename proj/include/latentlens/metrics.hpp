#pragma once

#include <span>

namespace latentlens {

// Mean of per-class recall over the classes that occur in `truth`
// (the challenge's balanced multi-class accuracy). Throws on length mismatch
// or empty input.
double balanced_accuracy(std::span<const int> preds, std::span<const int> truth);

}  // namespace latentlens
