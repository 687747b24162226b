#include "latentlens/conv_block.hpp"

#include <stdexcept>

namespace latentlens {

BlockSpec conv_block(BlockDirection direction, int in_channels, int filters, int stride, double bn_momentum) {
    if (filters < kMinBlockFilters || filters > kMaxBlockFilters)
        throw std::invalid_argument("block filters " + std::to_string(filters) + " outside [" +
                                    std::to_string(kMinBlockFilters) + ", " + std::to_string(kMaxBlockFilters) + "]");
    if (in_channels < 1) throw std::invalid_argument("block input channels must be positive");
    if (stride < 1) throw std::invalid_argument("block stride must be positive");
    return {direction, in_channels, filters, 3, stride, bn_momentum, 2};
}

void append_block(nn::Sequential& net, const BlockSpec& spec, const std::string& prefix, int out_res, nn::Rng& rng) {
    int in = spec.in_channels;
    for (int r = 1; r <= spec.repetitions; ++r) {
        net.emplace<nn::Conv2d>(prefix + "conv" + std::to_string(r), in, spec.filters, spec.kernel, spec.stride,
                                spec.kernel / 2, rng);
        net.emplace<nn::BatchNorm2d>(prefix + "bn" + std::to_string(r), spec.filters, spec.bn_momentum);
        net.emplace<nn::ReLU>();
        in = spec.filters;
    }
    if (spec.direction == BlockDirection::Encode)
        net.emplace<nn::MaxPool2>();
    else
        net.emplace<nn::Upsample>(out_res, out_res);
}

}  // namespace latentlens
