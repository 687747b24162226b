#include "latentlens/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace latentlens {

nlohmann::json default_config_json() {
    return nlohmann::json::parse(R"({
  "classifier": {
    "input_res": 28, "channels": 3, "conv_filters": [8, 16], "hidden": 32, "epochs": 8,
    "batch_size": 32, "learning_rate": 0.002, "seed": 1, "augment": true, "oversample": true
  },
  "pgaae": {
    "base_res": 7, "target_res": 28, "latent_dim": 16, "width_step": 32, "filter_base": 16, "filter_cap": 128,
    "epochs": [8, 6, 4], "batch_size": 32, "learning_rate": 0.002, "disc_learning_rate": 0.001, "gen_learning_rate": 0.0002,
    "denoise_sigma": 0.1, "disc_noise_sigma": 0.1, "mbd_kernels": 16, "mbd_kernel_dim": 5,
    "minibatch_discrimination": true, "seed": 1
  },
  "explainer": {
    "population": 100, "generations": 20, "crossover_prob": 0.5, "mutation_prob": 0.2, "mutation_scale": 0.4,
    "validity_threshold": 0.5, "eq_fraction": 0.5, "max_retries": 3, "exemplars": 4, "counterexemplars": 1,
    "counter_rules": 3, "budget_factor": 50, "sampling_sigma": 1.0, "sampling_threads": 1, "max_depth": 8, "min_leaf": 2
  },
  "service": {
    "host": "127.0.0.1", "port": 8080, "workers": 2, "model_dir": "runs/model", "session_dir": "runs/sessions"
  },
  "data": {"val_fraction": 0.2}
})");
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

namespace {

std::string env_name(const std::string& path) {
    std::string out = kEnvPrefix;
    for (char c : path) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

nlohmann::json parse_env_value(const nlohmann::json& like, const std::string& raw, const std::string& name) {
    try {
        if (like.is_string()) return raw;
        nlohmann::json v = nlohmann::json::parse(raw);
        const bool ok = (like.is_boolean() && v.is_boolean()) || (like.is_number_integer() && v.is_number_integer()) ||
                        (like.is_number_float() && v.is_number()) || (like.is_array() && v.is_array());
        if (!ok) throw std::invalid_argument("wrong type");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(name + ": cannot use '" + raw + "' for a value like " + like.dump());
    }
}

void merge(nlohmann::json& base, const nlohmann::json& over, const std::string& path) {
    if (!over.is_object()) throw std::invalid_argument("config section " + path + " must be an object");
    for (auto it = over.begin(); it != over.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) throw std::invalid_argument("unknown config key " + key);
        auto& slot = base[it.key()];
        if (slot.is_object()) {
            merge(slot, it.value(), key);
        } else {
            const auto& v = it.value();
            const bool ok = (slot.is_string() && v.is_string()) || (slot.is_boolean() && v.is_boolean()) ||
                            (slot.is_number_integer() && v.is_number_integer()) ||
                            (slot.is_number_float() && v.is_number()) || (slot.is_array() && v.is_array());
            if (!ok) throw std::invalid_argument("config key " + key + " has the wrong type");
            slot = v;
        }
    }
}

void apply_env(nlohmann::json& node, const std::string& path, const EnvLookup& env) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (it.value().is_object()) {
            apply_env(it.value(), key, env);
        } else if (auto raw = env(env_name(key))) {
            it.value() = parse_env_value(it.value(), *raw, env_name(key));
        }
    }
}

}  // namespace

nlohmann::json resolve_config(const nlohmann::json& overrides, const EnvLookup& env) {
    nlohmann::json cfg = default_config_json();
    if (!overrides.is_null()) merge(cfg, overrides, "");
    if (env) apply_env(cfg, "", env);
    return cfg;
}

AppConfig config_from_json(const nlohmann::json& j) {
    AppConfig a;
    const auto& c = j.at("classifier");
    a.classifier.input_res = c.at("input_res");
    a.classifier.channels = c.at("channels");
    a.classifier.conv_filters = c.at("conv_filters").get<std::vector<int>>();
    a.classifier.hidden = c.at("hidden");
    a.classifier.epochs = c.at("epochs");
    a.classifier.batch_size = c.at("batch_size");
    a.classifier.learning_rate = c.at("learning_rate");
    a.classifier.seed = c.at("seed");
    a.classifier.augment = c.at("augment");
    a.classifier.oversample = c.at("oversample");

    const auto& p = j.at("pgaae");
    a.base_res = p.at("base_res");
    a.target_res = p.at("target_res");
    a.pgaae.latent_dim = p.at("latent_dim");
    a.pgaae.channels = a.classifier.channels;
    a.pgaae.width_step = p.at("width_step");
    a.pgaae.filter_base = p.at("filter_base");
    a.pgaae.filter_cap = p.at("filter_cap");
    a.pgaae.epochs = p.at("epochs").get<std::vector<int>>();
    a.pgaae.batch_size = p.at("batch_size");
    a.pgaae.optim.learning_rate = p.at("learning_rate");
    a.pgaae.optim.disc_learning_rate = p.at("disc_learning_rate");
    a.pgaae.optim.gen_learning_rate = p.at("gen_learning_rate");
    a.pgaae.optim.denoise_sigma = p.at("denoise_sigma");
    a.pgaae.optim.disc_noise_sigma = p.at("disc_noise_sigma");
    a.pgaae.mbd.kernels = p.at("mbd_kernels");
    a.pgaae.mbd.kernel_dim = p.at("mbd_kernel_dim");
    a.pgaae.minibatch_discrimination = p.at("minibatch_discrimination");
    a.pgaae.seed = p.at("seed");

    const auto& e = j.at("explainer");
    auto& g = a.explainer.genetic;
    g.population = e.at("population");
    g.generations = e.at("generations");
    g.crossover_prob = e.at("crossover_prob");
    g.mutation_prob = e.at("mutation_prob");
    g.mutation_scale = e.at("mutation_scale");
    g.validity_threshold = e.at("validity_threshold");
    g.eq_fraction = e.at("eq_fraction");
    g.max_retries = e.at("max_retries");
    g.validate();
    a.explainer.sampling.validity_threshold = g.validity_threshold;
    a.explainer.sampling.sigma = e.at("sampling_sigma");
    a.explainer.sampling.threads = e.at("sampling_threads");
    a.explainer.exemplars = e.at("exemplars");
    a.explainer.counterexemplars = e.at("counterexemplars");
    a.explainer.counter_rules = e.at("counter_rules");
    a.explainer.budget_factor = e.at("budget_factor");
    a.explainer.tree.max_depth = e.at("max_depth");
    a.explainer.tree.min_leaf = e.at("min_leaf");

    const auto& s = j.at("service");
    a.service.host = s.at("host");
    a.service.port = s.at("port");
    a.service.workers = s.at("workers");
    a.service.model_dir = s.at("model_dir").get<std::string>();
    a.service.session_dir = s.at("session_dir").get<std::string>();
    a.val_fraction = j.at("data").at("val_fraction");

    if (a.service.port < 0 || a.service.port > 65535) throw std::invalid_argument("service.port out of range");
    if (a.service.workers < 1) throw std::invalid_argument("service.workers must be >= 1");
    if (a.explainer.exemplars < 1 || a.explainer.counterexemplars < 1)
        throw std::invalid_argument("exemplar counts must be >= 1");
    if (a.explainer.sampling.threads < 1) throw std::invalid_argument("explainer.sampling_threads must be >= 1");
    if (a.explainer.budget_factor < 1) throw std::invalid_argument("explainer.budget_factor must be >= 1");
    if (!(a.val_fraction > 0.0 && a.val_fraction < 1.0)) throw std::invalid_argument("data.val_fraction must lie in (0,1)");
    stage_plan(a.base_res, a.target_res, a.pgaae);
    return a;
}

AppConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
    nlohmann::json overrides;
    if (path) {
        std::ifstream in(*path);
        if (!in) throw std::runtime_error("cannot open config " + path->string());
        try {
            overrides = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw std::invalid_argument("config " + path->string() + ": " + e.what());
        }
    }
    try {
        return config_from_json(resolve_config(overrides, env));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }
}

}  // namespace latentlens
