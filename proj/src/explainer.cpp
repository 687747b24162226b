#include "latentlens/explainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/normal.hpp>
#include <openssl/evp.h>

namespace latentlens {

namespace {

constexpr std::size_t kMicroBatch = 8;

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct Bounds {
    double lo = -std::numeric_limits<double>::infinity();  // exclusive
    double hi = std::numeric_limits<double>::infinity();   // inclusive
};

// Draw from N(mu, sigma^2) restricted to (lo, hi] by inverse-CDF sampling.
// Works in the lower tail (mirroring when needed) to keep precision.
double truncated_normal(double mu, double sigma, Bounds b, std::mt19937_64& rng) {
    static const boost::math::normal_distribution<double> unit;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    if (sigma <= 0.0) return std::clamp(mu, std::nextafter(b.lo, b.hi), b.hi);
    double a = (b.lo - mu) / sigma, c = (b.hi - mu) / sigma;
    bool mirrored = false;
    if (a > 0.0) {
        std::tie(a, c) = std::pair{-c, -a};
        mirrored = true;
    }
    const double pa = std::isinf(a) ? 0.0 : boost::math::cdf(unit, a);
    const double pc = std::isinf(c) ? 1.0 : boost::math::cdf(unit, c);
    const double u = u01(rng);
    double t;
    if (pc > pa) {
        const double p = std::clamp(pa + u * (pc - pa), std::numeric_limits<double>::min(), 1.0 - 1e-16);
        t = boost::math::quantile(unit, p);
        t = std::clamp(t, a, c);
    } else {
        // Interval lies beyond double precision of the CDF: uniform inside it.
        t = std::isinf(c) ? a + u : a + u * (c - a);
    }
    if (mirrored) t = -t;
    return mu + sigma * t;
}

std::map<int, Bounds> rule_bounds(const Rule& r) {
    std::map<int, Bounds> out;
    for (const auto& c : r.conditions) {
        auto& b = out[c.feature];
        if (c.op == Condition::Op::LessEq)
            b.hi = std::min(b.hi, c.threshold);
        else
            b.lo = std::max(b.lo, c.threshold);
    }
    return out;
}

}  // namespace

LatentCode sample_in_rule(const Rule& r, const LatentCode& z, double sigma, std::uint64_t seed, std::uint64_t draw) {
    std::mt19937_64 rng(splitmix(seed ^ splitmix(draw + 1)));
    const auto bounds = rule_bounds(r);
    LatentCode h;
    h.values.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        auto it = bounds.find(static_cast<int>(i));
        h.values[i] = truncated_normal(z[i], sigma, it == bounds.end() ? Bounds{} : it->second, rng);
    }
    for (const auto& [f, _] : bounds)
        if (f < 0 || static_cast<std::size_t>(f) >= z.size())
            throw std::out_of_range("rule names feature " + std::to_string(f) + " outside the latent space");
    return h;
}

SamplingResult generate_exemplars(const Rule& r, const LatentCode& z, const AaeModel& m, const BlackBox& bb, int count,
                                  int budget, const SamplingConfig& cfg, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("exemplar count must be >= 1");
    if (budget < 0) throw std::invalid_argument("budget must be >= 0");
    if (static_cast<int>(z.size()) != m.latent_dim()) throw ShapeError("centre code does not match the model");
    const int chunk = std::max(1, cfg.chunk);
    SamplingResult res;
    int found = 0;
    for (int start = 0; start < budget && found < count; start += chunk) {
        const int n = std::min(chunk, budget - start);
        std::vector<LatentCode> cand;
        std::vector<std::uint64_t> draws;
        for (int i = 0; i < n; ++i) {
            const auto d = static_cast<std::uint64_t>(start + i);
            LatentCode h = sample_in_rule(r, z, cfg.sigma, seed, d);
            if (!satisfies(r, h)) continue;
            cand.push_back(std::move(h));
            draws.push_back(d);
        }
        res.attempts += n;
        if (cand.empty()) continue;
        const std::size_t batches = (cand.size() + kMicroBatch - 1) / kMicroBatch;
        std::vector<std::vector<Exemplar>> out(batches);
        auto work = [&](std::size_t b) {
            const std::size_t lo = b * kMicroBatch, hi = std::min(cand.size(), lo + kMicroBatch);
            const std::span<const LatentCode> part(cand.data() + lo, hi - lo);
            const auto scores = validity_scores(m, part);
            std::vector<LatentCode> kept;
            std::vector<std::size_t> kept_idx;
            for (std::size_t i = 0; i < part.size(); ++i)
                if (scores[i] >= cfg.validity_threshold) {
                    kept.push_back(part[i]);
                    kept_idx.push_back(i);
                }
            if (kept.empty()) return;
            auto images = m.decode(kept);
            const auto preds = bb.predict_batch(images);
            for (std::size_t j = 0; j < kept.size(); ++j) {
                if (preds[j].label != r.consequent) continue;
                Exemplar e;
                e.code = kept[j];
                e.image = std::move(images[j]);
                e.label = preds[j].label;
                e.validity = scores[kept_idx[j]];
                e.distance = normalized_distance(e.code, z);
                e.draw = draws[lo + kept_idx[j]];
                out[b].push_back(std::move(e));
            }
        };
        const std::size_t workers = std::min<std::size_t>(std::max(1, cfg.threads), batches);
        if (workers <= 1) {
            for (std::size_t b = 0; b < batches; ++b) work(b);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::exception_ptr> errors(workers);
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < workers; ++t)
                pool.emplace_back([&, t] {
                    try {
                        for (std::size_t b; (b = next++) < batches;) work(b);
                    } catch (...) {
                        errors[t] = std::current_exception();
                    }
                });
            for (auto& th : pool) th.join();
            for (auto& err : errors)
                if (err) std::rethrow_exception(err);
        }
        for (auto& part : out)
            for (auto& e : part) {
                res.items.push_back(std::move(e));
                ++found;
            }
    }
    std::sort(res.items.begin(), res.items.end(), [](const Exemplar& a, const Exemplar& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.draw < b.draw;
    });
    if (static_cast<int>(res.items.size()) > count) res.items.resize(count);
    if (res.items.empty())
        res.diagnostics.push_back("no latent satisfying " + to_text(r) + " passed validation within " +
                                  std::to_string(budget) + " draws (rule region unreachable)");
    else if (static_cast<int>(res.items.size()) < count)
        res.diagnostics.push_back("found " + std::to_string(res.items.size()) + " of " + std::to_string(count) +
                                  " requested for " + to_text(r) + " within " + std::to_string(budget) + " draws");
    return res;
}

SamplingResult generate_counterexemplars(std::span<const Rule> rules, const LatentCode& z, const AaeModel& m,
                                         const BlackBox& bb, int count_per_rule, int budget_per_rule,
                                         const SamplingConfig& cfg, std::uint64_t seed, int exclude_label) {
    SamplingResult res;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (rules[i].consequent == exclude_label) {
            res.diagnostics.push_back("skipped counter-rule " + to_text(rules[i]) + ": consequent is the input's class");
            continue;
        }
        auto part = generate_exemplars(rules[i], z, m, bb, count_per_rule, budget_per_rule, cfg,
                                       splitmix(seed + 0x632be59bd9b4e019ULL * (i + 1)));
        res.attempts += part.attempts;
        for (auto& e : part.items) {
            e.rule_index = static_cast<int>(i);
            res.items.push_back(std::move(e));
        }
        res.diagnostics.insert(res.diagnostics.end(), part.diagnostics.begin(), part.diagnostics.end());
    }
    if (!rules.empty() && res.items.empty()) res.diagnostics.push_back("no counterexemplar found for any counter-rule");
    return res;
}

// ---------------------------------------------------------------- saliency

double SaliencyMap::display_min() const {
    return display.empty() ? 0.0 : *std::min_element(display.begin(), display.end());
}
double SaliencyMap::display_max() const {
    return display.empty() ? 0.0 : *std::max_element(display.begin(), display.end());
}

SaliencyMap saliency_map(const Image& x, std::span<const Image> exemplars) {
    if (exemplars.empty()) throw std::invalid_argument("saliency_map needs at least one exemplar");
    for (const auto& e : exemplars)
        if (!e.same_shape(x)) throw ShapeError("saliency_map: exemplar shape differs from the input");
    SaliencyMap s;
    s.height = x.height;
    s.width = x.width;
    s.channels = x.channels;
    s.values.resize(x.size());
    const std::size_t n = exemplars.size();
    std::vector<double> diffs(n);
    for (std::size_t p = 0; p < x.size(); ++p) {
        for (std::size_t i = 0; i < n; ++i) diffs[i] = x.pixels[p] - exemplars[i].pixels[p];
        const std::size_t mid = n / 2;
        std::nth_element(diffs.begin(), diffs.begin() + mid, diffs.end());
        double med = diffs[mid];
        if (n % 2 == 0) {
            const double lower = *std::max_element(diffs.begin(), diffs.begin() + mid);
            med = (lower + med) / 2.0;
        }
        s.values[p] = med;
    }
    s.display.assign(static_cast<std::size_t>(x.height) * x.width, 0.0);
    for (std::size_t q = 0; q < s.display.size(); ++q) {
        double acc = 0.0;
        for (int c = 0; c < x.channels; ++c) acc += s.values[q * x.channels + c];
        s.display[q] = acc / x.channels;
    }
    return s;
}

Image render_saliency(const Image& x, const SaliencyMap& s) {
    if (s.height != x.height || s.width != x.width) throw ShapeError("render_saliency: size mismatch");
    static constexpr double brown[3] = {0.55, 0.30, 0.08};
    static constexpr double green[3] = {0.10, 0.60, 0.15};
    double peak = 0.0;
    for (double v : s.display) peak = std::max(peak, std::abs(v));
    Image out(x.height, x.width, 3);
    for (int yy = 0; yy < x.height; ++yy)
        for (int xx = 0; xx < x.width; ++xx) {
            double grey = 0.0;
            for (int c = 0; c < x.channels; ++c) grey += x.at(yy, xx, c);
            grey /= x.channels;
            const double v = s.display[static_cast<std::size_t>(yy) * x.width + xx];
            const double alpha = peak > 0.0 ? std::abs(v) / peak : 0.0;
            const double* tint = v >= 0.0 ? brown : green;
            for (int c = 0; c < 3; ++c) out.at(yy, xx, c) = (1.0 - alpha) * grey + alpha * tint[c];
        }
    return out;
}

std::map<int, int> neighborhood_stats(const Neighborhood& nbh) {
    std::map<int, int> out;
    for (const auto& h : nbh.instances)
        if (h.valid) ++out[h.label];
    return out;
}

// ---------------------------------------------------------------- explain

ExplainSeeds ExplainSeeds::derive(std::uint64_t base) {
    return {base, splitmix(base ^ 0x6e65696768ULL), splitmix(base ^ 0x6578656d70ULL), splitmix(base ^ 0x636f756e74ULL)};
}

std::string to_string(ExplanationStatus s) { return s == ExplanationStatus::Ready ? "ready" : "degenerate"; }

namespace {

int budget_for(const ExplainConfig& cfg, int count) { return std::max(1, cfg.budget_factor * count); }

Rule exemplar_rule(const Explanation& e) {
    Rule r = e.rule;
    r.consequent = e.label;
    return r;
}

void refresh_saliency(Explanation& e) {
    if (e.exemplars.empty()) {
        e.saliency.reset();
        return;
    }
    std::vector<Image> imgs;
    for (const auto& x : e.exemplars) imgs.push_back(x.image);
    e.saliency = saliency_map(e.input, imgs);
}

}  // namespace

Explanation explain(const Image& x, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg,
                    std::uint64_t seed) {
    if (x.height != m.resolution() || x.width != m.resolution() || x.channels != m.config().channels)
        throw ShapeError("input is " + std::to_string(x.height) + "x" + std::to_string(x.width) + "x" +
                         std::to_string(x.channels) + ", autoencoder works at " + std::to_string(m.resolution()));
    Explanation e;
    e.input = x;
    e.seeds = ExplainSeeds::derive(seed);
    const auto pred = bb.predict(x);
    e.label = pred.label;
    e.scores = pred.scores.scores;
    e.z = m.encode(x);

    Neighborhood nbh;
    bool degenerate = false;
    try {
        nbh = generate_neighborhood(e.z, bb, m, cfg.genetic, e.seeds.neighborhood);
    } catch (const DegenerateLocality& d) {
        nbh = d.neighborhood;
        degenerate = true;
        e.diagnostics.push_back(d.what());
    }
    e.neighborhood_stats = neighborhood_stats(nbh);
    e.neighborhood_size = nbh.valid_count();
    if (nbh.center_label != e.label)
        e.diagnostics.push_back("black box labels the reconstruction " + std::to_string(nbh.center_label) +
                                " and the input " + std::to_string(e.label));

    if (e.neighborhood_stats.size() >= 2) {
        const SurrogateTree tree = fit_surrogate(nbh, cfg.tree);
        e.rule = extract_rule(tree, e.z);
        e.fidelity = fidelity(tree, nbh);
        // Counter-rules contrast with the explained label, which can differ
        // from the surrogate's class at z when the reconstruction changes class.
        if (!degenerate)
            for (auto& c : rank_counterfactuals(tree, e.z, e.label)) {
                if (static_cast<int>(e.counter_rules.size()) >= cfg.counter_rules) break;
                e.counter_rules.push_back(std::move(c.rule));
            }
    } else {
        e.rule.consequent = e.neighborhood_stats.empty() ? e.label : e.neighborhood_stats.begin()->first;
        e.fidelity = e.neighborhood_size ? 1.0 : 0.0;
    }
    if (e.rule.consequent != e.label)
        e.diagnostics.push_back("surrogate predicts class " + std::to_string(e.rule.consequent) +
                                " at the input; exemplars are filtered on the black-box class " +
                                std::to_string(e.label));

    auto ex = generate_exemplars(exemplar_rule(e), e.z, m, bb, cfg.exemplars, budget_for(cfg, cfg.exemplars),
                                 cfg.sampling, e.seeds.exemplars);
    e.exemplars = std::move(ex.items);
    e.diagnostics.insert(e.diagnostics.end(), ex.diagnostics.begin(), ex.diagnostics.end());

    if (!e.counter_rules.empty()) {
        auto cx = generate_counterexemplars(e.counter_rules, e.z, m, bb, cfg.counterexemplars,
                                            budget_for(cfg, cfg.counterexemplars), cfg.sampling,
                                            e.seeds.counterexemplars, e.label);
        e.counterexemplars = std::move(cx.items);
        e.diagnostics.insert(e.diagnostics.end(), cx.diagnostics.begin(), cx.diagnostics.end());
    } else if (!degenerate) {
        e.diagnostics.push_back("surrogate has no leaf of another class: black box locally constant");
    }

    refresh_saliency(e);
    if (!e.saliency) e.diagnostics.push_back("no exemplars, saliency map unavailable");
    e.status = degenerate ? ExplanationStatus::Degenerate : ExplanationStatus::Ready;
    return e;
}

void add_exemplars(Explanation& e, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg, int count,
                   std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    auto ex = generate_exemplars(exemplar_rule(e), e.z, m, bb, count, budget_for(cfg, count), cfg.sampling, seed);
    for (auto& x : ex.items) e.exemplars.push_back(std::move(x));
    e.diagnostics.insert(e.diagnostics.end(), ex.diagnostics.begin(), ex.diagnostics.end());
    refresh_saliency(e);
}

bool add_counterexemplars(Explanation& e, const BlackBox& bb, const AaeModel& m, const ExplainConfig& cfg, int count,
                          std::optional<int> target_class, std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("count must be >= 1");
    std::vector<Rule> chosen;
    std::vector<int> index;
    for (std::size_t i = 0; i < e.counter_rules.size(); ++i)
        if (!target_class || e.counter_rules[i].consequent == *target_class) {
            chosen.push_back(e.counter_rules[i]);
            index.push_back(static_cast<int>(i));
        }
    if (chosen.empty()) return false;
    auto cx = generate_counterexemplars(chosen, e.z, m, bb, count, budget_for(cfg, count), cfg.sampling, seed, e.label);
    for (auto& x : cx.items) {
        x.rule_index = index[x.rule_index];
        e.counterexemplars.push_back(std::move(x));
    }
    e.diagnostics.insert(e.diagnostics.end(), cx.diagnostics.begin(), cx.diagnostics.end());
    return true;
}

std::vector<std::string> check_explanation(const Explanation& e, const BlackBox& bb, const AaeModel& m,
                                           double validity_threshold) {
    std::vector<std::string> bad;
    const Rule er = exemplar_rule(e);
    for (std::size_t i = 0; i < e.exemplars.size(); ++i) {
        const auto& x = e.exemplars[i];
        const std::string tag = "exemplar " + std::to_string(i);
        if (!satisfies(er, x.code)) bad.push_back(tag + " violates the rule");
        if (!validate_latent(m, x.code, validity_threshold)) bad.push_back(tag + " fails the discriminator test");
        if (bb.predict(x.image).label != e.label) bad.push_back(tag + " has a different black-box class");
    }
    for (std::size_t i = 0; i < e.counterexemplars.size(); ++i) {
        const auto& x = e.counterexemplars[i];
        const std::string tag = "counterexemplar " + std::to_string(i);
        if (x.rule_index < 0 || x.rule_index >= static_cast<int>(e.counter_rules.size())) {
            bad.push_back(tag + " refers to no counter-rule");
            continue;
        }
        const Rule& r = e.counter_rules[x.rule_index];
        if (!satisfies(r, x.code)) bad.push_back(tag + " violates its counter-rule");
        if (!validate_latent(m, x.code, validity_threshold)) bad.push_back(tag + " fails the discriminator test");
        const int label = bb.predict(x.image).label;
        if (label != r.consequent || label != x.label) bad.push_back(tag + " label differs from its consequent");
        if (label == e.label) bad.push_back(tag + " has the input's class");
    }
    int total = 0;
    for (const auto& [_, c] : e.neighborhood_stats) total += c;
    if (static_cast<std::size_t>(total) != e.neighborhood_size) bad.push_back("neighborhood counts do not sum to its size");
    if (e.saliency) {
        if (e.saliency->height != e.input.height || e.saliency->width != e.input.width)
            bad.push_back("saliency size differs from the input");
        for (double v : e.saliency->values)
            if (!std::isfinite(v)) {
                bad.push_back("saliency has non-finite values");
                break;
            }
    }
    if (e.status == ExplanationStatus::Degenerate && !e.counter_rules.empty())
        bad.push_back("degenerate explanation carries counter-rules");
    return bad;
}

// ---------------------------------------------------------------- artifacts

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

ArtifactStore::ArtifactStore(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (dir_) std::filesystem::create_directories(*dir_);
}

std::string ArtifactStore::put(const std::vector<unsigned char>& png) {
    const std::string ref = sha256_hex(png);
    std::lock_guard lock(mu_);
    if (dir_) {
        const auto path = *dir_ / (ref + ".png");
        if (!std::filesystem::exists(path)) {
            const auto tmp = *dir_ / (ref + ".png.tmp");
            {
                std::ofstream out(tmp, std::ios::binary);
                out.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
                if (!out) throw std::runtime_error("cannot write artifact " + tmp.string());
            }
            std::filesystem::rename(tmp, path);
        }
    } else {
        mem_.emplace(ref, png);
    }
    return ref;
}

std::string ArtifactStore::put_image(const Image& img) { return put(encode_png(img)); }

std::optional<std::vector<unsigned char>> ArtifactStore::get(const std::string& ref) const {
    if (ref.size() != 64 || ref.find_first_not_of("0123456789abcdef") != std::string::npos) return std::nullopt;
    std::lock_guard lock(mu_);
    if (dir_) {
        std::ifstream in(*dir_ / (ref + ".png"), std::ios::binary);
        if (!in) return std::nullopt;
        return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
    }
    auto it = mem_.find(ref);
    if (it == mem_.end()) return std::nullopt;
    return it->second;
}

namespace {

std::string class_code(int label, const ClassCatalog* classes) {
    if (classes && label >= 0 && label < classes->size()) return classes->code(label);
    return std::to_string(label);
}

}  // namespace

nlohmann::json to_json(const Explanation& e, ArtifactStore& store, const ClassCatalog* classes) {
    nlohmann::json j;
    j["input_id"] = e.input_id;
    j["input"] = store.put_image(e.input);
    j["label"] = e.label;
    j["class"] = class_code(e.label, classes);
    j["scores"] = e.scores;
    j["status"] = to_string(e.status);
    j["latent"] = e.z.values;
    j["rule"] = to_json(e.rule, classes);
    j["counter_rules"] = nlohmann::json::array();
    for (const auto& r : e.counter_rules) j["counter_rules"].push_back(to_json(r, classes));
    nlohmann::json stats = nlohmann::json::object();
    for (const auto& [label, c] : e.neighborhood_stats) stats[class_code(label, classes)] = c;
    j["neighborhood_stats"] = stats;
    j["neighborhood_size"] = e.neighborhood_size;
    j["fidelity"] = e.fidelity;
    auto pack = [&](const Exemplar& x) {
        nlohmann::json o{{"image", store.put_image(x.image)},
                         {"label", x.label},
                         {"class", class_code(x.label, classes)},
                         {"distance", x.distance},
                         {"validity", x.validity},
                         {"draw", x.draw}};
        if (x.rule_index >= 0) o["rule_index"] = x.rule_index;
        return o;
    };
    j["exemplars"] = nlohmann::json::array();
    for (const auto& x : e.exemplars) j["exemplars"].push_back(pack(x));
    j["counterexemplars"] = nlohmann::json::array();
    for (const auto& x : e.counterexemplars) j["counterexemplars"].push_back(pack(x));
    if (e.saliency)
        j["saliency"] = {{"image", store.put_image(render_saliency(e.input, *e.saliency))},
                         {"min", e.saliency->display_min()},
                         {"max", e.saliency->display_max()},
                         {"height", e.saliency->height},
                         {"width", e.saliency->width}};
    else
        j["saliency"] = nullptr;
    j["seeds"] = {{"base", e.seeds.base},
                  {"neighborhood", e.seeds.neighborhood},
                  {"exemplars", e.seeds.exemplars},
                  {"counterexemplars", e.seeds.counterexemplars}};
    j["provenance"] = {{"classifier", e.classifier_id}, {"autoencoder", e.aae_id}};
    j["diagnostics"] = e.diagnostics;
    return j;
}

// ---------------------------------------------------------------- schema

const nlohmann::json& explanation_schema() {
    static const nlohmann::json schema = nlohmann::json::parse(R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "$id": "explanation.schema.json",
  "title": "Explanation",
  "type": "object",
  "required": ["input_id", "input", "label", "class", "scores", "status", "rule", "counter_rules",
               "neighborhood_stats", "neighborhood_size", "exemplars", "counterexemplars", "saliency", "seeds"],
  "properties": {
    "input_id": {"type": "string"},
    "input": {"$ref": "#/$defs/ref"},
    "label": {"type": "integer", "minimum": 0},
    "class": {"type": "string"},
    "scores": {"type": "array", "items": {"type": "number"}},
    "status": {"enum": ["ready", "degenerate"]},
    "latent": {"type": "array", "items": {"type": "number"}},
    "rule": {"$ref": "#/$defs/rule"},
    "counter_rules": {"type": "array", "items": {"$ref": "#/$defs/rule"}},
    "neighborhood_stats": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 0}},
    "neighborhood_size": {"type": "integer", "minimum": 0},
    "fidelity": {"type": "number", "minimum": 0, "maximum": 1},
    "exemplars": {"type": "array", "items": {"$ref": "#/$defs/exemplar"}},
    "counterexemplars": {"type": "array", "items": {"$ref": "#/$defs/exemplar"}},
    "saliency": {
      "type": ["object", "null"],
      "required": ["image", "min", "max"],
      "properties": {"image": {"$ref": "#/$defs/ref"}, "min": {"type": "number"}, "max": {"type": "number"}}
    },
    "seeds": {"type": "object", "required": ["base"], "properties": {"base": {"type": "integer"}}},
    "diagnostics": {"type": "array", "items": {"type": "string"}}
  },
  "$defs": {
    "ref": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
    "condition": {
      "type": "object",
      "required": ["feature", "op", "threshold"],
      "properties": {
        "feature": {"type": "integer", "minimum": 0},
        "op": {"enum": ["<=", ">"]},
        "threshold": {"type": "number"}
      }
    },
    "rule": {
      "type": "object",
      "required": ["conditions", "consequent", "class", "text"],
      "properties": {
        "conditions": {"type": "array", "items": {"$ref": "#/$defs/condition"}},
        "consequent": {"type": "integer"},
        "class": {"type": "string"},
        "text": {"type": "string"}
      }
    },
    "exemplar": {
      "type": "object",
      "required": ["image", "label", "class"],
      "properties": {
        "image": {"$ref": "#/$defs/ref"},
        "label": {"type": "integer", "minimum": 0},
        "class": {"type": "string"},
        "rule_index": {"type": "integer", "minimum": 0}
      }
    }
  }
})");
    return schema;
}

namespace {

// Validator for the subset of JSON Schema the published schemas use.
struct SchemaCheck {
    const nlohmann::json& root;
    std::vector<std::string>& errors;

    const nlohmann::json& resolve(const nlohmann::json& s) const {
        if (s.contains("$ref")) {
            const std::string ref = s["$ref"];
            const std::string prefix = "#/$defs/";
            if (ref.rfind(prefix, 0) != 0) throw std::logic_error("unsupported $ref " + ref);
            return root["$defs"][ref.substr(prefix.size())];
        }
        return s;
    }

    static bool type_matches(const nlohmann::json& v, const std::string& t) {
        if (t == "object") return v.is_object();
        if (t == "array") return v.is_array();
        if (t == "string") return v.is_string();
        if (t == "integer") return v.is_number_integer();
        if (t == "number") return v.is_number();
        if (t == "boolean") return v.is_boolean();
        if (t == "null") return v.is_null();
        return false;
    }

    void check(const nlohmann::json& v, const nlohmann::json& schema, const std::string& path) {
        const auto& s = resolve(schema);
        if (s.contains("type")) {
            bool ok = false;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"]) ok = ok || type_matches(v, t.get<std::string>());
            } else {
                ok = type_matches(v, s["type"].get<std::string>());
            }
            if (!ok) {
                errors.push_back(path + ": expected type " + s["type"].dump());
                return;
            }
        }
        if (s.contains("enum") && std::find(s["enum"].begin(), s["enum"].end(), v) == s["enum"].end())
            errors.push_back(path + ": value " + v.dump() + " not in " + s["enum"].dump());
        if (v.is_number()) {
            if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>())
                errors.push_back(path + ": below minimum");
            if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>())
                errors.push_back(path + ": above maximum");
        }
        if (v.is_string() && s.contains("pattern")) {
            // Only the hex-digest pattern is used.
            const std::string str = v;
            if (str.size() != 64 || str.find_first_not_of("0123456789abcdef") != std::string::npos)
                errors.push_back(path + ": not a 64-digit hex reference");
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& k : s["required"])
                    if (!v.contains(k.get<std::string>())) errors.push_back(path + ": missing " + k.get<std::string>());
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (s.contains("properties") && s["properties"].contains(it.key()))
                    check(it.value(), s["properties"][it.key()], path + "/" + it.key());
                else if (s.contains("additionalProperties") && s["additionalProperties"].is_object())
                    check(it.value(), s["additionalProperties"], path + "/" + it.key());
            }
        }
        if (v.is_array() && s.contains("items"))
            for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s["items"], path + "/" + std::to_string(i));
    }
};

}  // namespace

std::vector<std::string> validate_explanation_json(const nlohmann::json& j) {
    std::vector<std::string> errors;
    SchemaCheck{explanation_schema(), errors}.check(j, explanation_schema(), "");
    return errors;
}

}  // namespace latentlens
