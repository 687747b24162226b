#include "latentlens/metrics.hpp"

#include <map>
#include <stdexcept>

namespace latentlens {

double balanced_accuracy(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size())
        throw std::invalid_argument("balanced_accuracy: " + std::to_string(preds.size()) + " predictions for " +
                                    std::to_string(truth.size()) + " labels");
    if (truth.empty()) throw std::invalid_argument("balanced_accuracy: empty input");
    std::map<int, std::pair<long, long>> per_class;  // class -> (hits, total)
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& [hits, total] = per_class[truth[i]];
        ++total;
        if (preds[i] == truth[i]) ++hits;
    }
    double sum = 0.0;
    for (const auto& [cls, ht] : per_class) sum += static_cast<double>(ht.first) / static_cast<double>(ht.second);
    return sum / static_cast<double>(per_class.size());
}

}  // namespace latentlens
