#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <stdexcept>

#include "latentlens/metrics.hpp"

using latentlens::balanced_accuracy;

namespace {

// Confusion-matrix oracle: mean over true classes of diagonal / row sum.
double oracle(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::map<int, std::pair<int, int>> rows;  // class -> (hits, total)
    for (std::size_t i = 0; i < truth.size(); ++i) {
        auto& r = rows[truth[i]];
        r.second += 1;
        r.first += pred[i] == truth[i];
    }
    double s = 0.0;
    for (const auto& [_, r] : rows) s += static_cast<double>(r.first) / r.second;
    return s / rows.size();
}

}  // namespace

TEST_CASE("balanced accuracy hand-computed cases") {
    CHECK(balanced_accuracy(std::vector<int>{0, 1, 2}, std::vector<int>{0, 1, 2}) == 1.0);
    // Class 0 recall 2/3, class 1 recall 1.
    CHECK(balanced_accuracy(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 0, 1}) ==
          doctest::Approx((2.0 / 3.0 + 1.0) / 2.0));
    // Majority-class predictor on 90/10 data scores 0.5, not 0.9.
    std::vector<int> truth(100, 0), pred(100, 0);
    std::fill(truth.begin() + 90, truth.end(), 1);
    CHECK(balanced_accuracy(pred, truth) == doctest::Approx(0.5));
    // Predicting a class absent from truth only costs recall.
    CHECK(balanced_accuracy(std::vector<int>{5, 1}, std::vector<int>{0, 1}) == doctest::Approx(0.5));
}

TEST_CASE("balanced accuracy matches the confusion-matrix oracle") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 200), k = 1 + static_cast<int>(rng() % 8);
        std::vector<int> truth(n), pred(n);
        for (int i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(rng() % k);
            pred[i] = rng() % 3 == 0 ? truth[i] : static_cast<int>(rng() % k);
        }
        CHECK(balanced_accuracy(pred, truth) == doctest::Approx(oracle(pred, truth)).epsilon(1e-12));

        // Invariant under a joint permutation of the samples.
        std::vector<std::size_t> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> t2(n), p2(n);
        for (int i = 0; i < n; ++i) {
            t2[i] = truth[perm[i]];
            p2[i] = pred[perm[i]];
        }
        CHECK(balanced_accuracy(p2, t2) == doctest::Approx(balanced_accuracy(pred, truth)).epsilon(1e-12));
    }
}

TEST_CASE("balanced accuracy rejects bad input") {
    CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{}, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), std::invalid_argument);
}
