#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "latentlens/classifier.hpp"
#include "latentlens/explainer.hpp"
#include "latentlens/progressive.hpp"

namespace latentlens {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    int workers = 2;
    std::filesystem::path model_dir = "runs/model";
    std::filesystem::path session_dir = "runs/sessions";
};

struct AppConfig {
    ClassifierConfig classifier;
    ProgressiveHyper pgaae;
    int base_res = 7;
    int target_res = 28;
    ExplainConfig explainer;
    ServiceConfig service;
    double val_fraction = 0.2;
};

// Defaults as a JSON document; every leaf can be overridden by the config
// file and then by an environment variable named after its path, e.g.
// service.port -> LATENTLENS_SERVICE_PORT.
nlohmann::json default_config_json();

inline constexpr const char* kEnvPrefix = "LATENTLENS_";

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Merges `overrides` into the defaults (unknown keys are errors), applies the
// environment, and converts. Throws std::invalid_argument on bad values.
nlohmann::json resolve_config(const nlohmann::json& overrides, const EnvLookup& env);
AppConfig config_from_json(const nlohmann::json& resolved);
AppConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env = process_env());

}  // namespace latentlens
