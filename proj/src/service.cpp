#include "latentlens/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <random>
#include <stdexcept>

#include <httplib.h>
#include <openssl/evp.h>

#include "latentlens/checkpoint.hpp"

namespace latentlens {

// ---------------------------------------------------------------- models

nlohmann::json ModelBundle::describe() const {
    return {{"name", name},
            {"classes", classes().codes()},
            {"resolution", aae->resolution()},
            {"channels", aae->config().channels},
            {"latent_dim", aae->latent_dim()},
            {"stage", aae->stage()},
            {"classifier_id", classifier_id},
            {"aae_id", aae_id}};
}

ModelBundle load_bundle(const std::filesystem::path& dir, std::string name) {
    const auto cbytes = read_file(dir / kClassifierFile);
    const auto abytes = read_file(dir / kAutoencoderFile);
    ModelBundle b;
    b.name = name.empty() ? dir.filename().string() : std::move(name);
    b.classifier = std::make_shared<CnnClassifier>(CnnClassifier::from_checkpoint(CheckpointContainer::deserialize(cbytes)));
    b.aae = std::make_shared<AaeModel>(AaeModel::from_checkpoint(CheckpointContainer::deserialize(abytes)));
    b.classifier_id = sha256_hex(cbytes).substr(0, 16);
    b.aae_id = sha256_hex(abytes).substr(0, 16);
    if (b.classifier->input_height() != b.aae->resolution() || b.classifier->input_width() != b.aae->resolution() ||
        b.classifier->input_channels() != b.aae->config().channels)
        throw std::runtime_error("classifier input " + std::to_string(b.classifier->input_height()) +
                                 " does not match autoencoder resolution " + std::to_string(b.aae->resolution()));
    return b;
}

void ModelRegistry::add(ModelBundle bundle) {
    for (const auto& m : models_)
        if (m.name == bundle.name) throw std::invalid_argument("duplicate model name " + bundle.name);
    models_.push_back(std::move(bundle));
}

const ModelBundle* ModelRegistry::find(const std::string& name) const {
    if (name.empty()) return models_.empty() ? nullptr : &models_.front();
    for (const auto& m : models_)
        if (m.name == name) return &m;
    return nullptr;
}

nlohmann::json ModelRegistry::describe() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : models_) arr.push_back(m.describe());
    return {{"models", arr}, {"default", models_.empty() ? "" : models_.front().name}};
}

Image prepare_input(const Image& img, int height, int width, int channels) {
    img.validate();
    Image x = img;
    if (x.channels == 1 && channels == 3) {
        Image rgb(x.height, x.width, 3);
        for (std::size_t p = 0; p < x.size(); ++p)
            for (int c = 0; c < 3; ++c) rgb.pixels[p * 3 + c] = x.pixels[p];
        x = std::move(rgb);
    } else if (x.channels == 4 && channels == 3) {
        Image rgb(x.height, x.width, 3);
        for (std::size_t p = 0; p < static_cast<std::size_t>(x.height) * x.width; ++p)
            for (int c = 0; c < 3; ++c) rgb.pixels[p * 3 + c] = x.pixels[p * 4 + c];
        x = std::move(rgb);
    }
    if (x.channels != channels)
        throw ImageError("image has " + std::to_string(x.channels) + " channels, model expects " +
                         std::to_string(channels));
    if (x.height == height && x.width == width) return x;
    if (height != width) return resize(x, height, width);
    return preprocess_eval(x, height, height);
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::string clean;
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) clean += c;
    if (auto comma = clean.find(','); clean.rfind("data:", 0) == 0 && comma != std::string::npos)
        clean = clean.substr(comma + 1);
    if (clean.empty() || clean.size() % 4 != 0) throw std::invalid_argument("malformed base64 payload");
    std::vector<std::uint8_t> out(clean.size() / 4 * 3);
    const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                  static_cast<int>(clean.size()));
    if (n < 0) throw std::invalid_argument("malformed base64 payload");
    std::size_t pad = 0;
    if (clean.ends_with("==")) pad = 2;
    else if (clean.ends_with("=")) pad = 1;
    out.resize(static_cast<std::size_t>(n) - pad);
    return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

// ---------------------------------------------------------------- sessions

std::string to_string(SessionStatus s) {
    switch (s) {
        case SessionStatus::Pending: return "pending";
        case SessionStatus::Ready: return "ready";
        case SessionStatus::Degenerate: return "degenerate";
        case SessionStatus::Failed: return "failed";
    }
    return "unknown";
}

namespace {

SessionStatus status_from(const std::string& s) {
    if (s == "ready") return SessionStatus::Ready;
    if (s == "degenerate") return SessionStatus::Degenerate;
    if (s == "failed") return SessionStatus::Failed;
    return SessionStatus::Pending;
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string new_session_id() {
    static std::mutex mu;
    static std::random_device rd;
    std::lock_guard lock(mu);
    static const char* hex = "0123456789abcdef";
    std::string id;
    for (int i = 0; i < 4; ++i) {
        std::uint32_t v = rd();
        for (int k = 0; k < 8; ++k, v >>= 4) id += hex[v & 15];
    }
    return id;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

nlohmann::json session_record(const Session& s) {
    nlohmann::json j{{"session_id", s.id},       {"model", s.model},         {"seed", s.seed},
                     {"created", s.created},     {"input", s.input_ref},     {"status", to_string(s.status)},
                     {"refinements", s.refinements}};
    if (!s.error.empty()) j["error"] = s.error;
    return j;
}

}  // namespace

SessionStore::SessionStore(std::optional<std::filesystem::path> dir, std::shared_ptr<ArtifactStore> artifacts)
    : dir_(std::move(dir)), artifacts_(std::move(artifacts)) {
    if (dir_) {
        std::filesystem::create_directories(*dir_);
        reload();
    }
}

void SessionStore::reload() {
    for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
        if (!entry.is_directory() || !std::filesystem::exists(entry.path() / "session.json")) continue;
        try {
            std::ifstream in(entry.path() / "session.json");
            const auto j = nlohmann::json::parse(in);
            auto s = std::make_shared<Session>();
            s->id = j.at("session_id");
            s->model = j.at("model");
            s->seed = j.at("seed");
            s->created = j.at("created");
            s->input_ref = j.at("input");
            s->status = status_from(j.at("status"));
            s->refinements = j.value("refinements", 0ULL);
            s->error = j.value("error", "");
            if (s->status == SessionStatus::Pending) {
                s->status = SessionStatus::Failed;
                s->error = "interrupted by a restart";
            }
            if (std::ifstream ein(entry.path() / "explanation.json"); ein) s->document = nlohmann::json::parse(ein);
            if (std::ifstream hin(entry.path() / "history.jsonl"); hin)
                for (std::string line; std::getline(hin, line);)
                    if (!line.empty()) s->history.push_back(nlohmann::json::parse(line));
            sessions_.emplace(s->id, std::move(s));
        } catch (const std::exception&) {
            // Unreadable session directories are skipped.
        }
    }
}

std::shared_ptr<Session> SessionStore::create(const std::string& model, const Image& input, std::uint64_t seed) {
    auto s = std::make_shared<Session>();
    s->model = model;
    s->seed = seed;
    s->created = utc_now();
    s->input_ref = artifacts_->put_image(input);
    {
        std::lock_guard lock(mu_);
        do s->id = new_session_id();
        while (sessions_.count(s->id));
        sessions_.emplace(s->id, s);
    }
    if (dir_) std::filesystem::create_directories(*dir_ / s->id);
    {
        std::lock_guard lock(s->mu);
        record(*s, {{"op", "create"}, {"seed", seed}, {"model", model}, {"input", s->input_ref}});
    }
    return s;
}

std::shared_ptr<Session> SessionStore::get(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void SessionStore::record(Session& s, nlohmann::json event) {
    event["time"] = utc_now();
    event["index"] = s.history.size();
    s.history.push_back(event);
    if (dir_) {
        std::ofstream out(*dir_ / s.id / "history.jsonl", std::ios::app);
        out << event.dump() << '\n';
        if (!out) throw std::runtime_error("cannot append to session history");
    }
    persist(s);
}

void SessionStore::persist(const Session& s) {
    if (!dir_) return;
    write_text(*dir_ / s.id / "session.json", session_record(s).dump(2));
    if (!s.document.is_null()) write_text(*dir_ / s.id / "explanation.json", s.document.dump(2));
}

std::size_t SessionStore::size() const {
    std::lock_guard lock(mu_);
    return sessions_.size();
}

// ---------------------------------------------------------------- service

ExplanationService::ExplanationService(ModelRegistry registry, AppConfig cfg,
                                       std::optional<std::filesystem::path> session_dir)
    : registry_(std::move(registry)),
      cfg_(std::move(cfg)),
      store_(session_dir, std::make_shared<ArtifactStore>(session_dir ? std::optional(*session_dir / "artifacts")
                                                                      : std::nullopt)) {
    for (int i = 0; i < cfg_.service.workers; ++i) threads_.emplace_back([this] { worker(); });
}

ExplanationService::~ExplanationService() {
    {
        std::lock_guard lock(qmu_);
        stopping_ = true;
    }
    qcv_.notify_all();
    for (auto& t : threads_) t.join();
}

nlohmann::json ExplanationService::classify(const Image& img, const std::string& model) const {
    const ModelBundle* b = registry_.find(model);
    if (!b) throw std::out_of_range("unknown model '" + model + "'");
    const auto& bb = *b->classifier;
    const Image x = prepare_input(img, bb.input_height(), bb.input_width(), bb.input_channels());
    const auto p = bb.predict(x);
    nlohmann::json scores = nlohmann::json::object();
    for (int c = 0; c < bb.num_classes(); ++c) scores[b->classes().code(c)] = p.scores.scores[c];
    return {{"label", p.label}, {"class", b->classes().code(p.label)}, {"scores", scores}, {"model", b->name}};
}

std::string ExplanationService::submit(const Image& img, const std::string& model, std::optional<std::uint64_t> seed) {
    const ModelBundle* b = registry_.find(model);
    if (!b) throw std::out_of_range("unknown model '" + model + "'");
    const auto& bb = *b->classifier;
    const Image x = prepare_input(img, bb.input_height(), bb.input_width(), bb.input_channels());
    if (!seed) seed = std::random_device{}();
    auto s = store_.create(b->name, x, *seed);
    {
        std::lock_guard lock(qmu_);
        queue_.push_back(s);
    }
    qcv_.notify_one();
    return s->id;
}

void ExplanationService::wait(const std::string& id) const {
    auto s = const_cast<SessionStore&>(store_).get(id);
    if (!s) throw std::out_of_range("unknown session " + id);
    std::unique_lock lock(done_mu_);
    done_cv_.wait(lock, [&] {
        std::lock_guard sl(s->mu);
        return s->status != SessionStatus::Pending;
    });
}

void ExplanationService::worker() {
    for (;;) {
        std::shared_ptr<Session> s;
        {
            std::unique_lock lock(qmu_);
            qcv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_ && queue_.empty()) return;
            s = queue_.front();
            queue_.pop_front();
        }
        run(s);
        {
            std::lock_guard lock(done_mu_);
        }
        done_cv_.notify_all();
    }
}

void ExplanationService::publish(Session& s, const ModelBundle& b) {
    auto& e = *s.explanation;
    const auto violations = check_explanation(e, *b.classifier, *b.aae, cfg_.explainer.genetic.validity_threshold);
    if (!violations.empty()) throw std::logic_error("explanation failed its own checks: " + violations.front());
    nlohmann::json doc = to_json(e, store_.artifacts(), &b.classes());
    const auto errs = validate_explanation_json(doc);
    if (!errs.empty()) throw std::logic_error("explanation does not match its schema: " + errs.front());
    s.document = std::move(doc);
}

void ExplanationService::run(const std::shared_ptr<Session>& s) {
    std::string model;
    std::uint64_t seed;
    {
        std::lock_guard lock(s->mu);
        model = s->model;
        seed = s->seed;
    }
    const ModelBundle* b = registry_.find(model);
    try {
        auto png = store_.artifacts().get(s->input_ref);
        if (!png) throw std::runtime_error("input artifact missing");
        const Image x = decode_image(*png);
        Explanation e = explain(x, *b->classifier, *b->aae, cfg_.explainer, seed);
        e.input_id = s->id;
        e.classifier_id = b->classifier_id;
        e.aae_id = b->aae_id;
        std::lock_guard lock(s->mu);
        s->explanation = std::move(e);
        publish(*s, *b);
        s->status = s->explanation->status == ExplanationStatus::Ready ? SessionStatus::Ready
                                                                       : SessionStatus::Degenerate;
        store_.persist(*s);
    } catch (const std::exception& ex) {
        std::lock_guard lock(s->mu);
        s->status = SessionStatus::Failed;
        s->error = ex.what();
        store_.persist(*s);
    }
}

nlohmann::json ExplanationService::session_json(const Session& s) const {
    nlohmann::json j = s.document.is_object() ? s.document : nlohmann::json::object();
    j["session_id"] = s.id;
    j["status"] = to_string(s.status);
    j["model"] = s.model;
    j["created"] = s.created;
    j["history_length"] = s.history.size();
    if (!s.error.empty()) j["error"] = s.error;
    return j;
}

namespace {

std::uint64_t refinement_seed(const Session& s) {
    std::uint64_t x = s.seed + 0x9e3779b97f4a7c15ULL * (s.refinements + 1);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RefinementResult error(int status, const std::string& msg, nlohmann::json extra = nlohmann::json::object()) {
    extra["error"] = msg;
    return {status, extra};
}

std::optional<int> parse_count(const nlohmann::json& req) {
    if (!req.is_object() || !req.contains("count")) return std::nullopt;
    const auto& c = req["count"];
    if (!c.is_number_integer()) return std::nullopt;
    const int v = c.get<int>();
    if (v < 1 || v > 64) return std::nullopt;
    return v;
}

}  // namespace

RefinementResult ExplanationService::more_exemplars(const std::string& id, const nlohmann::json& request) {
    auto s = store_.get(id);
    if (!s) return error(404, "unknown session " + id);
    const auto count = parse_count(request);
    if (!count) return error(400, "count must be an integer in [1, 64]");
    std::lock_guard lock(s->mu);
    if (s->status == SessionStatus::Pending) return error(409, "explanation is still pending");
    if (!s->explanation) return error(409, "session has no live explanation to refine");
    const ModelBundle* b = registry_.find(s->model);
    const std::size_t before = s->explanation->exemplars.size();
    const std::uint64_t seed = refinement_seed(*s);
    add_exemplars(*s->explanation, *b->classifier, *b->aae, cfg_.explainer, *count, seed);
    ++s->refinements;
    publish(*s, *b);
    const auto added = s->explanation->exemplars.size() - before;
    store_.record(*s, {{"op", "exemplars"}, {"count", *count}, {"seed", seed}, {"added", added}});
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = before; i < s->document["exemplars"].size(); ++i) items.push_back(s->document["exemplars"][i]);
    return {200, {{"added", items}, {"seed", seed}, {"explanation", session_json(*s)}}};
}

RefinementResult ExplanationService::more_counterexemplars(const std::string& id, const nlohmann::json& request) {
    auto s = store_.get(id);
    if (!s) return error(404, "unknown session " + id);
    const auto count = parse_count(request);
    if (!count) return error(400, "count must be an integer in [1, 64]");
    std::lock_guard lock(s->mu);
    if (s->status == SessionStatus::Pending) return error(409, "explanation is still pending");
    if (!s->explanation) return error(409, "session has no live explanation to refine");
    const ModelBundle* b = registry_.find(s->model);
    std::optional<int> target;
    if (request.contains("target_class") && !request["target_class"].is_null()) {
        const auto& t = request["target_class"];
        if (t.is_number_integer())
            target = t.get<int>();
        else if (t.is_string())
            target = b->classes().find(t.get<std::string>());
        if (!target) return error(400, "target_class is not a known class");
    }
    nlohmann::json available = nlohmann::json::array();
    for (const auto& r : s->explanation->counter_rules) {
        const std::string code = b->classes().code(r.consequent);
        if (std::find(available.begin(), available.end(), code) == available.end()) available.push_back(code);
    }
    const std::size_t before = s->explanation->counterexemplars.size();
    const std::uint64_t seed = refinement_seed(*s);
    if (!add_counterexemplars(*s->explanation, *b->classifier, *b->aae, cfg_.explainer, *count, target, seed))
        return error(409, "no counter-rule leads to the requested class", {{"available", available}});
    ++s->refinements;
    publish(*s, *b);
    const auto added = s->explanation->counterexemplars.size() - before;
    nlohmann::json event{{"op", "counterexemplars"}, {"count", *count}, {"seed", seed}, {"added", added}};
    if (target) event["target_class"] = *target;
    store_.record(*s, event);
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = before; i < s->document["counterexemplars"].size(); ++i)
        items.push_back(s->document["counterexemplars"][i]);
    return {200, {{"added", items}, {"seed", seed}, {"explanation", session_json(*s)}}};
}

// ---------------------------------------------------------------- http

namespace {

void reply(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Image from a multipart "image" field, a JSON {"image": base64} body or a
// raw image/* body. Other JSON fields come back in `fields`.
Image read_image(const httplib::Request& req, nlohmann::json& fields) {
    std::vector<std::uint8_t> bytes;
    fields = nlohmann::json::object();
    if (req.is_multipart_form_data()) {
        if (!req.has_file("image")) throw BadRequest("multipart request lacks an 'image' part");
        const auto f = req.get_file_value("image");
        bytes.assign(f.content.begin(), f.content.end());
        for (const char* key : {"seed", "model"})
            if (req.has_file(key)) {
                const auto v = req.get_file_value(key).content;
                fields[key] = std::string(key) == "seed" ? nlohmann::json(std::stoull(v)) : nlohmann::json(v);
            }
    } else if (req.get_header_value("Content-Type").rfind("image/", 0) == 0) {
        bytes.assign(req.body.begin(), req.body.end());
    } else {
        try {
            fields = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::parse_error&) {
            throw BadRequest("body is neither JSON nor an image");
        }
        if (!fields.is_object() || !fields.contains("image") || !fields["image"].is_string())
            throw BadRequest("expected a JSON object with a base64 'image' field");
        try {
            bytes = base64_decode(fields["image"].get<std::string>());
        } catch (const std::invalid_argument& e) {
            throw BadRequest(e.what());
        }
    }
    try {
        return decode_image(bytes);
    } catch (const std::exception& e) {
        throw BadRequest(std::string("malformed image: ") + e.what());
    }
}

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
        throw BadRequest("body is not valid JSON");
    }
}

template <class F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const BadRequest& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const ImageError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const ShapeError& e) {
            reply(res, 400, {{"error", e.what()}});
        } catch (const std::out_of_range& e) {
            reply(res, 404, {{"error", e.what()}});
        } catch (const std::exception& e) {
            reply(res, 500, {{"error", e.what()}});
        }
    };
}

}  // namespace

void mount_routes(httplib::Server& server, ExplanationService& service) {
    server.Get("/healthz", guarded([&](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"status", "ok"}, {"models", service.registry().describe()["models"].size()},
                         {"sessions", service.sessions().size()}});
    }));
    server.Get("/models", guarded([&](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, service.registry().describe());
    }));
    server.Get("/schemas", guarded([&](const httplib::Request&, httplib::Response& res) {
        reply(res, 200, {{"schemas", {"explanation.schema.json"}}});
    }));
    server.Get("/schemas/:name", guarded([&](const httplib::Request& req, httplib::Response& res) {
        if (req.path_params.at("name") != "explanation.schema.json")
            return reply(res, 404, {{"error", "unknown schema"}});
        reply(res, 200, explanation_schema());
    }));
    server.Post("/classify", guarded([&](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json fields;
        const Image img = read_image(req, fields);
        reply(res, 200, service.classify(img, fields.value("model", "")));
    }));
    server.Post("/explanations", guarded([&](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json fields;
        const Image img = read_image(req, fields);
        std::optional<std::uint64_t> seed;
        if (fields.contains("seed")) {
            if (!fields["seed"].is_number_unsigned()) throw BadRequest("seed must be a non-negative integer");
            seed = fields["seed"].get<std::uint64_t>();
        }
        const auto id = service.submit(img, fields.value("model", ""), seed);
        res.set_header("Location", "/explanations/" + id);
        reply(res, 202, {{"session_id", id}, {"status", "pending"}});
    }));
    server.Get("/explanations/:id", guarded([&](const httplib::Request& req, httplib::Response& res) {
        auto s = service.sessions().get(req.path_params.at("id"));
        if (!s) return reply(res, 404, {{"error", "unknown session"}});
        std::lock_guard lock(s->mu);
        reply(res, 200, service.session_json(*s));
    }));
    server.Get("/explanations/:id/history", guarded([&](const httplib::Request& req, httplib::Response& res) {
        auto s = service.sessions().get(req.path_params.at("id"));
        if (!s) return reply(res, 404, {{"error", "unknown session"}});
        std::lock_guard lock(s->mu);
        reply(res, 200, {{"session_id", s->id}, {"history", s->history}});
    }));
    server.Get("/explanations/:id/saliency.png", guarded([&](const httplib::Request& req, httplib::Response& res) {
        auto s = service.sessions().get(req.path_params.at("id"));
        if (!s) return reply(res, 404, {{"error", "unknown session"}});
        std::string ref;
        {
            std::lock_guard lock(s->mu);
            if (s->status == SessionStatus::Pending) return reply(res, 409, {{"error", "explanation is still pending"}});
            if (!s->document.is_object() || !s->document["saliency"].is_object())
                return reply(res, 404, {{"error", "no saliency map for this session"}});
            ref = s->document["saliency"]["image"];
        }
        auto png = service.sessions().artifacts().get(ref);
        if (!png) return reply(res, 404, {{"error", "artifact missing"}});
        res.set_content(std::string(png->begin(), png->end()), "image/png");
    }));
    server.Get("/artifacts/:ref", guarded([&](const httplib::Request& req, httplib::Response& res) {
        auto png = service.sessions().artifacts().get(req.path_params.at("ref"));
        if (!png) return reply(res, 404, {{"error", "unknown artifact"}});
        res.set_content(std::string(png->begin(), png->end()), "image/png");
    }));
    server.Post("/explanations/:id/exemplars", guarded([&](const httplib::Request& req, httplib::Response& res) {
        const auto r = service.more_exemplars(req.path_params.at("id"), parse_body(req));
        reply(res, r.http_status, r.body);
    }));
    server.Post("/explanations/:id/counterexemplars",
                guarded([&](const httplib::Request& req, httplib::Response& res) {
                    const auto r = service.more_counterexemplars(req.path_params.at("id"), parse_body(req));
                    reply(res, r.http_status, r.body);
                }));
}

}  // namespace latentlens
