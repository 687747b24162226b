// Command-line front end: training, evaluation, explanation and serving.

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "latentlens/checkpoint.hpp"
#include "latentlens/classifier.hpp"
#include "latentlens/config.hpp"
#include "latentlens/dataset.hpp"
#include "latentlens/explainer.hpp"
#include "latentlens/metrics.hpp"
#include "latentlens/progressive.hpp"
#include "latentlens/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace latentlens;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void print(const json& j) { std::cout << j.dump(2) << std::endl; }

std::pair<int, int> parse_plan(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("--plan expects BASE:TARGET, e.g. 7:28");
    try {
        return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
    } catch (const std::exception&) {
        throw UsageError("--plan expects BASE:TARGET, e.g. 7:28");
    }
}

Dataset load_data(const fs::path& manifest, const std::optional<fs::path>& images) {
    return load_manifest(manifest, images ? *images : manifest.parent_path());
}

// ---------------------------------------------------------------- commands

int train_classifier_cmd(const AppConfig& cfg, const fs::path& manifest, const std::optional<fs::path>& images,
                         const fs::path& out, std::optional<int> epochs, std::optional<std::uint64_t> seed) {
    ClassifierConfig cc = cfg.classifier;
    if (epochs) cc.epochs = *epochs;
    if (seed) cc.seed = *seed;
    const Dataset ds = resized(load_data(manifest, images), cc.input_res);
    auto [train, val] = split(ds, 1.0 - cfg.val_fraction, cc.seed);
    auto result = train_classifier(train, val, cc);
    fs::create_directories(out);
    result.model.to_checkpoint().save(out / kClassifierFile);
    json log = json::array();
    for (const auto& e : result.log)
        log.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_balanced_accuracy", e.val_balanced_accuracy}});
    print({{"command", "train-classifier"},
           {"checkpoint", (out / kClassifierFile).string()},
           {"train_size", train.samples.size()},
           {"val_size", val.samples.size()},
           {"val_balanced_accuracy", result.val_balanced_accuracy},
           {"log", log},
           {"warnings", result.warnings}});
    return 0;
}

int train_pgaae_cmd(const AppConfig& cfg, const fs::path& manifest, const std::optional<fs::path>& images,
                    const fs::path& out, const std::string& plan_text, const std::vector<int>& epochs,
                    std::optional<int> latent_dim, std::optional<fs::path> metrics_path) {
    ProgressiveHyper hyper = cfg.pgaae;
    if (!epochs.empty()) hyper.epochs = epochs;
    if (latent_dim) hyper.latent_dim = *latent_dim;
    int base = cfg.base_res, target = cfg.target_res;
    if (!plan_text.empty()) std::tie(base, target) = parse_plan(plan_text);
    StagePlan plan;
    try {
        plan = stage_plan(base, target, hyper);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const Dataset ds = load_data(manifest, images);
    fs::create_directories(out);
    std::ofstream metrics_file;
    if (metrics_path) metrics_file.open(*metrics_path);
    ProgressiveOptions opts;
    opts.checkpoint_dir = out;
    opts.metrics = metrics_path ? &metrics_file : nullptr;
    auto run = train_progressive(ds, plan, hyper, opts);
    run.model.to_checkpoint().save(out / kAutoencoderFile);
    json stages = json::array();
    for (const auto& s : run.stages) {
        json j{{"stage", s.stage},
               {"resolution", s.resolution},
               {"rmse", s.final_rmse},
               {"diversity", s.diversity},
               {"checkpoint", (out / ("stage" + std::to_string(s.stage) + "_" + std::to_string(s.resolution) + ".ckpt"))
                                  .string()}};
        if (s.transfer_rmse) j["transfer_rmse"] = *s.transfer_rmse;
        stages.push_back(std::move(j));
    }
    print({{"command", "train-pgaae"},
           {"plan", to_json(plan)},
           {"stages", stages},
           {"halted", run.halted},
           {"halt_reason", run.halt_reason},
           {"checkpoint", (out / kAutoencoderFile).string()}});
    return run.halted ? 1 : 0;
}

int evaluate_cmd(const std::string& metric, const std::optional<fs::path>& predictions,
                 const std::optional<fs::path>& model_dir, const std::optional<fs::path>& manifest,
                 const std::optional<fs::path>& images) {
    if (metric != "balanced-accuracy") throw UsageError("unsupported metric '" + metric + "'");
    std::vector<int> preds, truth;
    if (predictions) {
        std::ifstream in(*predictions);
        if (!in) throw std::runtime_error("cannot open " + predictions->string());
        std::string line;
        int col_truth = 0, col_pred = 1;
        bool header = true;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cells;
            std::stringstream ss(line);
            for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
            if (header) {
                header = false;
                if (!cells.empty() && !std::isdigit(static_cast<unsigned char>(cells[0][0])) && cells[0][0] != '-') {
                    for (std::size_t i = 0; i < cells.size(); ++i) {
                        if (cells[i] == "truth" || cells[i] == "label") col_truth = static_cast<int>(i);
                        if (cells[i] == "prediction" || cells[i] == "predicted") col_pred = static_cast<int>(i);
                    }
                    continue;
                }
            }
            if (static_cast<int>(cells.size()) <= std::max(col_truth, col_pred))
                throw std::runtime_error("predictions file: short row '" + line + "'");
            truth.push_back(std::stoi(cells[col_truth]));
            preds.push_back(std::stoi(cells[col_pred]));
        }
    } else if (model_dir && manifest) {
        const auto clf = CnnClassifier::from_checkpoint(CheckpointContainer::load(*model_dir / kClassifierFile));
        const Dataset ds = resized(load_data(*manifest, images), clf.input_height());
        truth = ds.labels();
        const auto imgs = ds.images();
        preds = clf.labels(imgs);
    } else {
        throw UsageError("evaluate needs --predictions, or --model-dir with --data");
    }
    print({{"metric", metric}, {"value", balanced_accuracy(preds, truth)}, {"count", truth.size()}});
    return 0;
}

int explain_cmd(const AppConfig& cfg, const fs::path& image, const fs::path& model_dir, std::uint64_t seed,
                const fs::path& out, std::optional<fs::path> artifacts) {
    const ModelBundle b = load_bundle(model_dir);
    const auto& bb = *b.classifier;
    const Image x = prepare_input(load_image(image), bb.input_height(), bb.input_width(), bb.input_channels());
    Explanation e = explain(x, bb, *b.aae, cfg.explainer, seed);
    e.input_id = image.filename().string();
    e.classifier_id = b.classifier_id;
    e.aae_id = b.aae_id;
    if (!artifacts) artifacts = out.parent_path() / "artifacts";
    ArtifactStore store(*artifacts);
    const json doc = to_json(e, store, &b.classes());
    const auto errs = validate_explanation_json(doc);
    if (!errs.empty()) throw std::runtime_error("explanation does not match its schema: " + errs.front());
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    std::ofstream(out) << doc.dump(2) << '\n';
    print({{"command", "explain"},
           {"out", out.string()},
           {"artifacts", artifacts->string()},
           {"status", doc["status"]},
           {"class", doc["class"]},
           {"rule", doc["rule"]["text"]},
           {"exemplars", doc["exemplars"].size()},
           {"counterexemplars", doc["counterexemplars"].size()}});
    return 0;
}

httplib::Server* g_server = nullptr;

int serve_cmd(AppConfig cfg, const std::vector<fs::path>& model_dirs, std::optional<int> port,
              std::optional<std::string> host, std::optional<fs::path> session_dir) {
    if (port) cfg.service.port = *port;
    if (host) cfg.service.host = *host;
    if (session_dir) cfg.service.session_dir = *session_dir;
    ModelRegistry registry;
    for (const auto& d : model_dirs.empty() ? std::vector<fs::path>{cfg.service.model_dir} : model_dirs)
        registry.add(load_bundle(d));
    ExplanationService service(std::move(registry), cfg, cfg.service.session_dir);
    httplib::Server server;
    mount_routes(server, service);
    g_server = &server;
    std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
    });
    int bound = cfg.service.port;
    if (bound == 0) {
        bound = server.bind_to_any_port(cfg.service.host);
    } else if (!server.bind_to_port(cfg.service.host, bound)) {
        throw std::runtime_error("cannot bind " + cfg.service.host + ":" + std::to_string(bound));
    }
    print({{"command", "serve"}, {"host", cfg.service.host}, {"port", bound}, {"models", service.registry().describe()}});
    server.listen_after_bind();
    return 0;
}

std::string data_uri(const std::vector<unsigned char>& png) { return "data:image/png;base64," + base64_encode(png); }

int export_report_cmd(const fs::path& explanation, std::optional<fs::path> artifacts, const fs::path& out) {
    std::ifstream in(explanation);
    if (!in) throw std::runtime_error("cannot open " + explanation.string());
    const json doc = json::parse(in);
    const auto errs = validate_explanation_json(doc);
    if (!errs.empty()) throw std::runtime_error("not an explanation document: " + errs.front());
    if (!artifacts) artifacts = explanation.parent_path() / "artifacts";
    ArtifactStore store(*artifacts);
    auto img = [&](const std::string& ref) {
        auto png = store.get(ref);
        if (!png) throw std::runtime_error("artifact " + ref + " missing from " + artifacts->string());
        return "<img src=\"" + data_uri(*png) + "\" width=\"112\" style=\"image-rendering:pixelated\">";
    };
    auto esc = [](const std::string& s) {
        std::string o;
        for (char c : s) {
            if (c == '<') o += "&lt;";
            else if (c == '>') o += "&gt;";
            else if (c == '&') o += "&amp;";
            else o += c;
        }
        return o;
    };
    std::ostringstream h;
    h << "<!doctype html><html><head><meta charset=\"utf-8\"><title>Explanation "
      << esc(doc["input_id"].get<std::string>()) << "</title></head><body style=\"font-family:sans-serif\">\n";
    h << "<h1>Class " << esc(doc["class"].get<std::string>()) << " (" << esc(doc["status"].get<std::string>())
      << ")</h1>\n<p>" << img(doc["input"]) << "</p>\n";
    h << "<h2>Rule</h2><pre>" << esc(doc["rule"]["text"].get<std::string>()) << "</pre>\n";
    h << "<h2>Counter-rules</h2><pre>";
    for (const auto& r : doc["counter_rules"]) h << esc(r["text"].get<std::string>()) << '\n';
    h << "</pre>\n<h2>Exemplars</h2><p>";
    for (const auto& e : doc["exemplars"]) h << img(e["image"]) << ' ';
    h << "</p>\n<h2>Counterexemplars</h2><p>";
    for (const auto& e : doc["counterexemplars"])
        h << "<figure style=\"display:inline-block\">" << img(e["image"]) << "<figcaption>"
          << esc(e["class"].get<std::string>()) << "</figcaption></figure>";
    h << "</p>\n<h2>Saliency</h2><p>";
    if (doc["saliency"].is_object())
        h << img(doc["saliency"]["image"]) << "<br>range [" << doc["saliency"]["min"].get<double>() << ", "
          << doc["saliency"]["max"].get<double>() << "]";
    else
        h << "unavailable";
    h << "</p>\n<h2>Neighborhood</h2><pre>" << esc(doc["neighborhood_stats"].dump()) << "</pre>\n";
    if (doc.contains("diagnostics") && !doc["diagnostics"].empty()) {
        h << "<h2>Diagnostics</h2><ul>";
        for (const auto& d : doc["diagnostics"]) h << "<li>" << esc(d.get<std::string>()) << "</li>";
        h << "</ul>\n";
    }
    h << "</body></html>\n";
    std::ofstream(out) << h.str();
    print({{"command", "export-report"}, {"out", out.string()}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latentlens: latent-space explanations for image classifiers"};
    app.require_subcommand(1);
    std::optional<fs::path> config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

    fs::path manifest, out, image, model_dir_req;
    std::optional<fs::path> images, metrics_path, predictions, model_dir, data_opt, artifacts, session_dir;
    std::optional<int> epochs, latent_dim, port;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> host;
    std::vector<int> stage_epochs;
    std::vector<fs::path> model_dirs;
    std::string plan, metric = "balanced-accuracy";
    std::uint64_t explain_seed = 0;

    auto* tc = app.add_subcommand("train-classifier", "Train the black-box classifier");
    tc->add_option("--data", manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
    tc->add_option("--images", images, "Image directory (defaults to the manifest's)");
    tc->add_option("--out", out, "Model directory")->required();
    tc->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    tc->add_option("--seed", seed);

    auto* tp = app.add_subcommand("train-pgaae", "Train the progressive adversarial autoencoder");
    tp->add_option("--data", manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
    tp->add_option("--images", images);
    tp->add_option("--out", out, "Model directory")->required();
    tp->add_option("--plan", plan, "BASE:TARGET resolutions, e.g. 7:28");
    tp->add_option("--epochs", stage_epochs, "Epochs per stage")->delimiter(',');
    tp->add_option("--latent-dim", latent_dim)->check(CLI::PositiveNumber);
    tp->add_option("--metrics", metrics_path, "Write JSONL training metrics here");

    auto* ev = app.add_subcommand("evaluate", "Compute a metric");
    ev->add_option("--metric", metric)->check(CLI::IsMember({"balanced-accuracy"}));
    ev->add_option("--predictions", predictions, "CSV with truth,prediction columns")->check(CLI::ExistingFile);
    ev->add_option("--model-dir", model_dir);
    ev->add_option("--data", data_opt)->check(CLI::ExistingFile);
    ev->add_option("--images", images);

    auto* ex = app.add_subcommand("explain", "Explain one image");
    ex->add_option("--image", image)->required()->check(CLI::ExistingFile);
    ex->add_option("--model-dir", model_dir_req)->required()->check(CLI::ExistingDirectory);
    ex->add_option("--seed", explain_seed);
    ex->add_option("--out", out)->required();
    ex->add_option("--artifacts", artifacts, "PNG artifact directory (default: artifacts/ beside --out)");

    auto* sv = app.add_subcommand("serve", "Run the HTTP API");
    sv->add_option("--model-dir", model_dirs, "Model directory (repeatable)");
    sv->add_option("--port", port)->check(CLI::Range(0, 65535));
    sv->add_option("--host", host);
    sv->add_option("--session-dir", session_dir);

    auto* er = app.add_subcommand("export-report", "Render an explanation as standalone HTML");
    er->add_option("--explanation", predictions, "Explanation JSON")->required()->check(CLI::ExistingFile);
    er->add_option("--artifacts", artifacts);
    er->add_option("--out", out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        const AppConfig cfg = load_config(config_path);
        if (tc->parsed()) return train_classifier_cmd(cfg, manifest, images, out, epochs, seed);
        if (tp->parsed())
            return train_pgaae_cmd(cfg, manifest, images, out, plan, stage_epochs, latent_dim, metrics_path);
        if (ev->parsed()) return evaluate_cmd(metric, predictions, model_dir, data_opt, images);
        if (ex->parsed()) return explain_cmd(cfg, image, model_dir_req, explain_seed, out, artifacts);
        if (sv->parsed()) return serve_cmd(cfg, model_dirs, port, host, session_dir);
        if (er->parsed()) return export_report_cmd(*predictions, artifacts, out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
