#pragma once

#include <string>

#include "latentlens/nn.hpp"

namespace latentlens {

enum class BlockDirection { Encode, Decode };

// Two repetitions of (conv, batch-norm, ReLU) followed by 2x max pooling
// (encoder) or upsampling (decoder).
struct BlockSpec {
    BlockDirection direction = BlockDirection::Encode;
    int in_channels = 3;
    int filters = 16;
    int kernel = 3;
    int stride = 1;
    double bn_momentum = 0.95;
    int repetitions = 2;
};

inline constexpr int kMinBlockFilters = 1;
inline constexpr int kMaxBlockFilters = 512;

BlockSpec conv_block(BlockDirection direction, int in_channels, int filters, int stride = 1,
                     double bn_momentum = 0.95);

// Appends the block's layers with parameter names under `prefix`
// ("encoder.level2." -> "encoder.level2.conv1.weight", ...). For decoder
// blocks `out_res` is the upsampled size; encoder blocks ignore it.
void append_block(nn::Sequential& net, const BlockSpec& spec, const std::string& prefix, int out_res, nn::Rng& rng);

}  // namespace latentlens
