#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentlens/neighborhood.hpp"
#include "latentlens/surrogate.hpp"

namespace latentlens {

struct Exemplar {
    LatentCode code;
    Image image;
    int label = -1;
    double validity = 0.0;
    double distance = 0.0;   // normalized latent distance to the centre
    std::uint64_t draw = 0;  // index of the draw that produced it
    int rule_index = -1;     // counterexemplars: which counter-rule
};

struct SamplingResult {
    std::vector<Exemplar> items;
    std::vector<std::string> diagnostics;
    int attempts = 0;
};

struct SamplingConfig {
    double validity_threshold = 0.5;
    // Std-dev of the truncated Gaussian used for constrained coordinates.
    double sigma = 1.0;
    // Candidates evaluated per batch; results are independent of threads but
    // not of this value.
    int chunk = 32;
    // Worker threads per chunk. Candidates are scored in fixed micro-batches,
    // so results do not depend on this value.
    int threads = 1;
};

// One latent draw for rule-constrained sampling: every coordinate comes from
// N(z_i, sigma^2), truncated to the rule's interval where the rule names it.
// `draw` selects an independent stream.
LatentCode sample_in_rule(const Rule& r, const LatentCode& z, double sigma, std::uint64_t seed, std::uint64_t draw);

// Rejection sampling of up to `count` latents that satisfy r, pass the
// discriminator threshold and decode to an image the black box labels
// r.consequent. Stops after `budget` draws. Output sorted by (distance, draw).
SamplingResult generate_exemplars(const Rule& r, const LatentCode& z, const AaeModel& m, const BlackBox& bb, int count,
                                  int budget, const SamplingConfig& cfg, std::uint64_t seed);

// Runs generate_exemplars per counter-rule; items carry rule_index. Rules
// whose consequent equals `exclude_label` are skipped with a diagnostic.
SamplingResult generate_counterexemplars(std::span<const Rule> rules, const LatentCode& z, const AaeModel& m,
                                         const BlackBox& bb, int count_per_rule, int budget_per_rule,
                                         const SamplingConfig& cfg, std::uint64_t seed, int exclude_label = -1);

struct SaliencyMap {
    int height = 0, width = 0, channels = 0;
    std::vector<double> values;   // HWC, signed
    std::vector<double> display;  // HW, channel mean

    double display_min() const;
    double display_max() const;
};

// Per-pixel, per-channel median of (x - exemplar); an even count takes the
// mean of the two central values.
SaliencyMap saliency_map(const Image& x, std::span<const Image> exemplars);

// Overlay for display: grey copy of x tinted brown where the map is positive
// and green where it is negative, opacity proportional to magnitude.
Image render_saliency(const Image& x, const SaliencyMap& s);

// Counts per black-box label over valid instances.
std::map<int, int> neighborhood_stats(const Neighborhood& nbh);

struct ExplainConfig {
    GeneticParams genetic;
    SurrogateConfig tree;
    SamplingConfig sampling;
    int exemplars = 4;
    int counterexemplars = 1;  // per counter-rule
    int counter_rules = 3;
    int budget_factor = 50;
};

struct ExplainSeeds {
    std::uint64_t base = 0;
    std::uint64_t neighborhood = 0;
    std::uint64_t exemplars = 0;
    std::uint64_t counterexemplars = 0;

    static ExplainSeeds derive(std::uint64_t base);
};

enum class ExplanationStatus { Ready, Degenerate };
std::string to_string(ExplanationStatus s);

struct Explanation {
    std::string input_id;
    Image input;
    int label = -1;
    std::vector<double> scores;
    LatentCode z;
    Rule rule;
    std::vector<Rule> counter_rules;
    std::vector<Exemplar> exemplars;
    std::vector<Exemplar> counterexemplars;
    std::optional<SaliencyMap> saliency;
    std::map<int, int> neighborhood_stats;
    std::size_t neighborhood_size = 0;  // valid instances
    double fidelity = 0.0;
    ExplanationStatus status = ExplanationStatus::Ready;
    std::vector<std::string> diagnostics;
    ExplainSeeds seeds;
    std::string classifier_id, aae_id;
};

// encode -> neighborhood -> surrogate -> rules -> exemplars and
// counterexemplars -> saliency. Deterministic in `seed`. A single-class
// neighborhood yields a Degenerate explanation with no counter-rules.
Explanation explain(const Image& x, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg,
                    std::uint64_t seed);

// Extra exemplars / counterexemplars for an existing explanation, drawn with a
// fresh seed; the saliency map is recomputed from all exemplars.
void add_exemplars(Explanation& e, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg, int count,
                   std::uint64_t seed);
// Returns false when no counter-rule has consequent `target_class`.
bool add_counterexemplars(Explanation& e, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg, int count,
                          std::optional<int> target_class, std::uint64_t seed);

// Re-checks the structural and black-box invariants of an explanation.
// Returns human-readable violations; empty when everything holds.
std::vector<std::string> check_explanation(const Explanation& e, const BlackBox& bb, const AaeModel& m,
                                           double validity_threshold);

std::string sha256_hex(std::span<const unsigned char> bytes);

// PNG artifacts addressed by content hash.
class ArtifactStore {
public:
    // Directory-backed when a path is given, memory-only otherwise.
    explicit ArtifactStore(std::optional<std::filesystem::path> dir = std::nullopt);
    std::string put(const std::vector<unsigned char>& png);
    std::string put_image(const Image& img);
    std::optional<std::vector<unsigned char>> get(const std::string& ref) const;

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::vector<unsigned char>> mem_;
};

nlohmann::json to_json(const Explanation& e, ArtifactStore& store, const ClassCatalog* classes = nullptr);

// JSON Schema document for serialized explanations.
const nlohmann::json& explanation_schema();
// Structural validation against explanation_schema(); returns violations.
std::vector<std::string> validate_explanation_json(const nlohmann::json& j);

}  // namespace latentlens
