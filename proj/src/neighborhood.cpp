#include "latentlens/neighborhood.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace latentlens {

void GeneticParams::validate() const {
    auto prob = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0,1]");
    };
    if (population < 2) throw std::invalid_argument("population must be >= 2");
    if (generations < 0) throw std::invalid_argument("generations must be >= 0");
    prob(crossover_prob, "crossover_prob");
    prob(mutation_prob, "mutation_prob");
    prob(eq_fraction, "eq_fraction");
    if (!(mutation_scale >= 0.0) || !std::isfinite(mutation_scale))
        throw std::invalid_argument("mutation_scale must be finite and >= 0");
    if (!(validity_threshold > 0.0 && validity_threshold < 1.0))
        throw std::invalid_argument("validity_threshold must lie in (0,1)");
    if (tournament_size < 1) throw std::invalid_argument("tournament_size must be >= 1");
    if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
    if (!(widen_factor >= 1.0)) throw std::invalid_argument("widen_factor must be >= 1");
}

namespace {

std::vector<std::size_t> select_valid(const Neighborhood& n, bool same) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < n.instances.size(); ++i) {
        const auto& h = n.instances[i];
        if (h.valid && ((h.label == n.center_label) == same)) out.push_back(i);
    }
    return out;
}

void check_code(const AaeModel& m, const LatentCode& z) {
    if (static_cast<int>(z.size()) != m.latent_dim())
        throw ShapeError("latent code has length " + std::to_string(z.size()) + ", model expects " +
                         std::to_string(m.latent_dim()));
    for (double v : z.values)
        if (!std::isfinite(v)) throw std::invalid_argument("latent code contains a non-finite value");
}

int center_label_of(const LatentCode& z, const BlackBox& bb, const AaeModel& m) {
    return bb.predict(m.decode(z)).label;
}

}  // namespace

std::vector<std::size_t> Neighborhood::same_class() const { return select_valid(*this, true); }
std::vector<std::size_t> Neighborhood::other_class() const { return select_valid(*this, false); }
std::size_t Neighborhood::valid_count() const {
    return static_cast<std::size_t>(
        std::count_if(instances.begin(), instances.end(), [](const LatentInstance& h) { return h.valid; }));
}

double normalized_distance(const LatentCode& a, const LatentCode& b) {
    if (a.size() != b.size()) throw ShapeError("latent codes differ in length");
    if (a.size() == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(a.size()));
}

double fitness_value(Objective objective, bool same_label, double distance, bool identical) {
    const bool hit = objective == Objective::SameClass ? same_label : !same_label;
    return (hit ? 1.0 : 0.0) + (1.0 - distance) - (identical ? 1.0 : 0.0);
}

double fitness_eq(const LatentCode& h, const LatentCode& z, const BlackBox& bb, const AaeModel& m) {
    check_code(m, h);
    check_code(m, z);
    const bool same = bb.predict(m.decode(h)).label == center_label_of(z, bb, m);
    return fitness_value(Objective::SameClass, same, normalized_distance(h, z), h == z);
}

double fitness_neq(const LatentCode& h, const LatentCode& z, const BlackBox& bb, const AaeModel& m) {
    check_code(m, h);
    check_code(m, z);
    const bool same = bb.predict(m.decode(h)).label == center_label_of(z, bb, m);
    return fitness_value(Objective::OtherClass, same, normalized_distance(h, z), h == z);
}

std::vector<double> validity_scores(const AaeModel& m, std::span<const LatentCode> codes) {
    std::vector<double> out;
    out.reserve(codes.size());
    for (const auto& c : codes) out.push_back(m.discriminate(std::span<const LatentCode>(&c, 1))[0]);
    return out;
}

bool validate_latent(const AaeModel& m, const LatentCode& h, double threshold) {
    check_code(m, h);
    return m.discriminate(std::span<const LatentCode>(&h, 1))[0] >= threshold;
}

std::vector<LatentInstance> label_instances(const BlackBox& bb, const AaeModel& m, std::span<const LatentCode> codes,
                                            double threshold) {
    if (codes.empty()) return {};
    for (const auto& c : codes) check_code(m, c);
    auto images = m.decode(codes);
    const auto preds = bb.predict_batch(images);
    const auto scores = validity_scores(m, codes);
    std::vector<LatentInstance> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        out[i].code = codes[i];
        out[i].decoded = std::move(images[i]);
        out[i].label = preds[i].label;
        out[i].validity = scores[i];
        out[i].valid = scores[i] >= threshold;
    }
    return out;
}

LatentInstance label_instance(const BlackBox& bb, const AaeModel& m, const LatentCode& h, double threshold) {
    return label_instances(bb, m, std::span<const LatentCode>(&h, 1), threshold).front();
}

namespace {

struct Population {
    std::vector<LatentInstance> members;
    std::vector<double> elite_trace;
};

void score(std::vector<LatentInstance>& members, const LatentCode& z, int center_label, Objective objective) {
    for (auto& h : members) {
        h.origin = objective;
        h.fitness = fitness_value(objective, h.label == center_label, normalized_distance(h.code, z), h.code == z);
    }
}

std::size_t best_index(const std::vector<LatentInstance>& members) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < members.size(); ++i)
        if (members[i].fitness > members[best].fitness) best = i;
    return best;
}

LatentCode mutate(LatentCode c, double prob, double scale, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& v : c.values) {
        // Draw both numbers unconditionally so the stream does not depend on outcomes.
        const double r = u(rng), step = nd(rng);
        if (r < prob) v += scale * step;
    }
    return c;
}

// Two-point crossover.
void crossover(LatentCode& a, LatentCode& b, std::mt19937_64& rng) {
    const std::size_t k = a.size();
    if (k < 2) return;
    std::uniform_int_distribution<std::size_t> pick(0, k);
    std::size_t lo = pick(rng), hi = pick(rng);
    if (lo > hi) std::swap(lo, hi);
    for (std::size_t i = lo; i < hi; ++i) std::swap(a.values[i], b.values[i]);
}

const LatentInstance& tournament(const std::vector<LatentInstance>& pop, int size, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    std::size_t best = pick(rng);
    for (int t = 1; t < size; ++t) {
        const std::size_t c = pick(rng);
        if (pop[c].fitness > pop[best].fitness) best = c;
    }
    return pop[best];
}

Population evolve(const LatentCode& z, int center_label, const BlackBox& bb, const AaeModel& m,
                  const GeneticParams& p, double scale, Objective objective, int size, std::mt19937_64& rng) {
    Population out;
    if (size <= 0) return out;
    std::vector<LatentCode> codes;
    codes.reserve(size);
    // Initial population: mutated copies of the centre, every coordinate perturbed.
    for (int i = 0; i < size; ++i) codes.push_back(mutate(z, 1.0, scale, rng));
    out.members = label_instances(bb, m, codes, p.validity_threshold);
    score(out.members, z, center_label, objective);
    out.elite_trace.push_back(out.members[best_index(out.members)].fitness);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int g = 0; g < p.generations; ++g) {
        const LatentInstance elite = out.members[best_index(out.members)];
        std::vector<LatentCode> children;
        children.reserve(size);
        while (static_cast<int>(children.size()) < size - 1) {
            LatentCode a = tournament(out.members, p.tournament_size, rng).code;
            LatentCode b = tournament(out.members, p.tournament_size, rng).code;
            if (u(rng) < p.crossover_prob) crossover(a, b, rng);
            children.push_back(mutate(std::move(a), p.mutation_prob, scale, rng));
            if (static_cast<int>(children.size()) < size - 1)
                children.push_back(mutate(std::move(b), p.mutation_prob, scale, rng));
        }
        auto next = label_instances(bb, m, children, p.validity_threshold);
        score(next, z, center_label, objective);
        next.insert(next.begin(), elite);
        out.members = std::move(next);
        out.elite_trace.push_back(out.members[best_index(out.members)].fitness);
    }
    return out;
}

}  // namespace

std::vector<double> elite_fitness_trace(const LatentCode& z, const BlackBox& bb, const AaeModel& m,
                                        const GeneticParams& params, Objective objective, std::uint64_t seed) {
    params.validate();
    check_code(m, z);
    std::mt19937_64 rng(seed);
    return evolve(z, center_label_of(z, bb, m), bb, m, params, params.mutation_scale, objective, params.population,
                  rng)
        .elite_trace;
}

Neighborhood generate_neighborhood(const LatentCode& z, const BlackBox& bb, const AaeModel& m,
                                   const GeneticParams& params, std::uint64_t seed) {
    params.validate();
    check_code(m, z);
    Neighborhood nbh;
    nbh.center = z;
    nbh.center_label = center_label_of(z, bb, m);
    nbh.params = params;
    nbh.seed = seed;

    const int n_eq = static_cast<int>(std::lround(params.population * params.eq_fraction));
    const int n_neq = params.population - n_eq;
    double scale = params.mutation_scale;
    for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
        std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt));
        auto eq = evolve(z, nbh.center_label, bb, m, params, scale, Objective::SameClass, n_eq, rng);
        auto neq = evolve(z, nbh.center_label, bb, m, params, scale, Objective::OtherClass, n_neq, rng);
        nbh.instances = std::move(eq.members);
        nbh.instances.insert(nbh.instances.end(), std::make_move_iterator(neq.members.begin()),
                             std::make_move_iterator(neq.members.end()));
        nbh.mutation_scale_used = scale;
        nbh.retries = attempt;
        if (!nbh.same_class().empty() && !nbh.other_class().empty()) return nbh;
        scale *= params.widen_factor;
    }
    const std::string msg = "degenerate locality: " + std::to_string(nbh.same_class().size()) + " valid same-class and " +
                            std::to_string(nbh.other_class().size()) + " valid other-class instances after " +
                            std::to_string(params.max_retries) + " retries";
    throw DegenerateLocality(msg, std::move(nbh));
}

Neighborhood generate_random_neighborhood(const LatentCode& z, const BlackBox& bb, const AaeModel& m, int count,
                                          double scale, double threshold, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    if (!(scale >= 0.0)) throw std::invalid_argument("scale must be >= 0");
    check_code(m, z);
    std::mt19937_64 rng(seed);
    std::vector<LatentCode> codes;
    codes.reserve(count);
    for (int i = 0; i < count; ++i) codes.push_back(mutate(z, 1.0, scale, rng));
    Neighborhood nbh;
    nbh.center = z;
    nbh.center_label = center_label_of(z, bb, m);
    nbh.seed = seed;
    nbh.mutation_scale_used = scale;
    nbh.params.validity_threshold = threshold;
    nbh.instances = label_instances(bb, m, codes, threshold);
    return nbh;
}

nlohmann::json to_json(const Neighborhood& nbh) {
    nlohmann::json j;
    j["center"] = nbh.center.values;
    j["center_label"] = nbh.center_label;
    j["seed"] = nbh.seed;
    j["mutation_scale_used"] = nbh.mutation_scale_used;
    j["retries"] = nbh.retries;
    j["params"] = {{"population", nbh.params.population},
                   {"generations", nbh.params.generations},
                   {"crossover_prob", nbh.params.crossover_prob},
                   {"mutation_prob", nbh.params.mutation_prob},
                   {"mutation_scale", nbh.params.mutation_scale},
                   {"validity_threshold", nbh.params.validity_threshold},
                   {"eq_fraction", nbh.params.eq_fraction}};
    auto& arr = j["instances"] = nlohmann::json::array();
    for (const auto& h : nbh.instances)
        arr.push_back({{"code", h.code.values},
                       {"label", h.label},
                       {"valid", h.valid},
                       {"validity", h.validity},
                       {"fitness", h.fitness},
                       {"objective", h.origin == Objective::SameClass ? "eq" : "neq"}});
    j["same_class"] = nbh.same_class().size();
    j["other_class"] = nbh.other_class().size();
    return j;
}

}  // namespace latentlens
