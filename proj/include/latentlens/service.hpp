#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "latentlens/classifier.hpp"
#include "latentlens/config.hpp"
#include "latentlens/explainer.hpp"

namespace httplib {
class Server;
}

namespace latentlens {

// A trained classifier and autoencoder that work at the same resolution.
struct ModelBundle {
    std::string name;
    std::shared_ptr<const CnnClassifier> classifier;
    std::shared_ptr<const AaeModel> aae;
    std::string classifier_id, aae_id;  // content hashes of the checkpoints

    const ClassCatalog& classes() const { return classifier->classes(); }
    nlohmann::json describe() const;
};

inline constexpr const char* kClassifierFile = "classifier.ckpt";
inline constexpr const char* kAutoencoderFile = "aae.ckpt";

// Loads <dir>/classifier.ckpt and <dir>/aae.ckpt; throws when they disagree
// on resolution or channels.
ModelBundle load_bundle(const std::filesystem::path& dir, std::string name = "");

class ModelRegistry {
public:
    void add(ModelBundle bundle);
    // Empty name selects the first model added.
    const ModelBundle* find(const std::string& name) const;
    nlohmann::json describe() const;
    bool empty() const { return models_.empty(); }

private:
    std::vector<ModelBundle> models_;
};

// Converts an arbitrary decoded image to the black box's input geometry:
// grey is replicated to RGB, then an aspect-preserving resize and centre crop.
Image prepare_input(const Image& img, int height, int width, int channels);

std::vector<std::uint8_t> base64_decode(const std::string& text);
std::string base64_encode(std::span<const std::uint8_t> bytes);

enum class SessionStatus { Pending, Ready, Degenerate, Failed };
std::string to_string(SessionStatus s);

struct Session {
    std::string id;
    std::string model;
    std::uint64_t seed = 0;
    std::string created;
    std::string input_ref;
    SessionStatus status = SessionStatus::Pending;
    std::string error;
    std::optional<Explanation> explanation;  // absent for sessions reloaded from disk
    nlohmann::json document;                 // last serialized explanation
    nlohmann::json history = nlohmann::json::array();
    std::uint64_t refinements = 0;
    mutable std::mutex mu;
};

// Sessions live in memory and under <dir>/<id>/: session.json (current
// state), explanation.json and history.jsonl (append-only).
class SessionStore {
public:
    SessionStore(std::optional<std::filesystem::path> dir, std::shared_ptr<ArtifactStore> artifacts);

    std::shared_ptr<Session> create(const std::string& model, const Image& input, std::uint64_t seed);
    std::shared_ptr<Session> get(const std::string& id) const;
    // Appends to the history (memory and disk) and rewrites session.json.
    void record(Session& s, nlohmann::json event);
    void persist(const Session& s);
    std::size_t size() const;
    ArtifactStore& artifacts() { return *artifacts_; }

private:
    void reload();
    std::optional<std::filesystem::path> dir_;
    std::shared_ptr<ArtifactStore> artifacts_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
};

struct RefinementResult {
    int http_status = 200;
    nlohmann::json body;
};

// Runs explanations on a pool of worker threads over frozen models.
class ExplanationService {
public:
    ExplanationService(ModelRegistry registry, AppConfig cfg, std::optional<std::filesystem::path> session_dir);
    ~ExplanationService();
    ExplanationService(const ExplanationService&) = delete;
    ExplanationService& operator=(const ExplanationService&) = delete;

    const ModelRegistry& registry() const { return registry_; }
    const AppConfig& config() const { return cfg_; }
    SessionStore& sessions() { return store_; }

    nlohmann::json classify(const Image& img, const std::string& model) const;
    // Queues an explanation and returns the session id.
    std::string submit(const Image& img, const std::string& model, std::optional<std::uint64_t> seed);
    // Blocks until the session leaves Pending (tests and the CLI).
    void wait(const std::string& id) const;
    nlohmann::json session_json(const Session& s) const;

    RefinementResult more_exemplars(const std::string& id, const nlohmann::json& request);
    RefinementResult more_counterexemplars(const std::string& id, const nlohmann::json& request);

private:
    void worker();
    void run(const std::shared_ptr<Session>& s);
    void publish(Session& s, const ModelBundle& bundle);

    ModelRegistry registry_;
    AppConfig cfg_;
    SessionStore store_;
    std::mutex qmu_;
    std::condition_variable qcv_;
    mutable std::condition_variable done_cv_;
    mutable std::mutex done_mu_;
    std::deque<std::shared_ptr<Session>> queue_;
    bool stopping_ = false;
    std::vector<std::thread> threads_;
};

// Registers every endpoint on `server`.
void mount_routes(httplib::Server& server, ExplanationService& service);

}  // namespace latentlens
