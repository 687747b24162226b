#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "latentlens/aae.hpp"
#include "latentlens/classifier.hpp"

namespace latentlens {

struct GeneticParams {
    int population = 100;
    int generations = 20;
    double crossover_prob = 0.5;
    double mutation_prob = 0.2;    // per coordinate
    double mutation_scale = 0.4;   // std-dev of the Gaussian perturbation
    double validity_threshold = 0.5;
    double eq_fraction = 0.5;      // share of the population searched with the same-class objective
    int tournament_size = 3;
    int max_retries = 3;
    double widen_factor = 2.0;

    void validate() const;
};

enum class Objective { SameClass, OtherClass };

struct LatentInstance {
    LatentCode code;
    Image decoded;
    int label = -1;
    bool valid = false;
    double validity = 0.0;  // discriminator score
    double fitness = 0.0;
    Objective origin = Objective::SameClass;
};

struct Neighborhood {
    LatentCode center;
    int center_label = -1;
    std::vector<LatentInstance> instances;
    GeneticParams params;
    std::uint64_t seed = 0;
    double mutation_scale_used = 0.0;
    int retries = 0;

    // Valid instances sharing / not sharing the centre's black-box label.
    std::vector<std::size_t> same_class() const;
    std::vector<std::size_t> other_class() const;
    std::size_t valid_count() const;
};

class DegenerateLocality : public std::runtime_error {
public:
    DegenerateLocality(const std::string& what, Neighborhood nbh)
        : std::runtime_error(what), neighborhood(std::move(nbh)) {}
    Neighborhood neighborhood;
};

// Euclidean latent distance divided by sqrt(k).
double normalized_distance(const LatentCode& a, const LatentCode& b);

// [same-class indicator] + (1 - normalized distance) - [h == z]
double fitness_eq(const LatentCode& h, const LatentCode& z, const BlackBox& bb, const AaeModel& m);
// [different-class indicator] + (1 - normalized distance) - [h == z]
double fitness_neq(const LatentCode& h, const LatentCode& z, const BlackBox& bb, const AaeModel& m);
double fitness_value(Objective objective, bool same_label, double distance, bool identical);

// Scores one code as a batch of one: discriminate(m, {h}) >= threshold.
bool validate_latent(const AaeModel& m, const LatentCode& h, double threshold);
// Per-code discriminator scores, each code scored on its own.
std::vector<double> validity_scores(const AaeModel& m, std::span<const LatentCode> codes);

LatentInstance label_instance(const BlackBox& bb, const AaeModel& m, const LatentCode& h, double threshold);
std::vector<LatentInstance> label_instances(const BlackBox& bb, const AaeModel& m, std::span<const LatentCode> codes,
                                            double threshold);

// Genetic search around z: one population per objective, decoded, labelled
// and validated. Retries with a wider mutation scale while either partition
// is empty; throws DegenerateLocality once retries run out.
Neighborhood generate_neighborhood(const LatentCode& z, const BlackBox& bb, const AaeModel& m,
                                   const GeneticParams& params, std::uint64_t seed);

// Baseline: Gaussian perturbations of z, no search.
Neighborhood generate_random_neighborhood(const LatentCode& z, const BlackBox& bb, const AaeModel& m, int count,
                                          double scale, double threshold, std::uint64_t seed);

// Best fitness per generation for one objective (diagnostics and tests).
std::vector<double> elite_fitness_trace(const LatentCode& z, const BlackBox& bb, const AaeModel& m,
                                        const GeneticParams& params, Objective objective, std::uint64_t seed);

nlohmann::json to_json(const Neighborhood& nbh);

}  // namespace latentlens
