#include "latentlens/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace latentlens {

ClassCatalog::ClassCatalog(std::vector<std::string> codes) : codes_(std::move(codes)) {
    auto sorted = codes_;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("class codes must be unique");
}

std::optional<int> ClassCatalog::find(const std::string& code) const {
    auto it = std::find(codes_.begin(), codes_.end(), code);
    if (it == codes_.end()) return std::nullopt;
    return static_cast<int>(it - codes_.begin());
}

ClassCatalog ClassCatalog::isic2019() { return ClassCatalog({"MEL", "NV", "BCC", "AK", "BKL", "DF", "VASC", "SCC"}); }

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<Image> Dataset::images() const {
    std::vector<Image> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.image);
    return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(static_cast<std::size_t>(classes.size()), 0);
    for (const auto& s : samples) ++counts.at(static_cast<std::size_t>(s.label));
    return counts;
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
        out.push_back(cell);
    }
    return out;
}

std::filesystem::path resolve_image(const std::filesystem::path& dir, const std::string& name) {
    std::filesystem::path p = dir / name;
    if (std::filesystem::exists(p)) return p;
    for (const char* ext : {".png", ".jpg", ".jpeg", ".PNG", ".JPG"}) {
        std::filesystem::path q = dir / (name + ext);
        if (std::filesystem::exists(q)) return q;
    }
    throw std::runtime_error("manifest references missing image " + p.string());
}

}  // namespace

Dataset load_manifest(const std::filesystem::path& csv, const std::filesystem::path& image_dir) {
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot open manifest " + csv.string());
    const auto dir = image_dir.empty() ? csv.parent_path() : image_dir;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty manifest " + csv.string());
    const auto header = split_csv(line);
    if (header.size() < 2) throw std::runtime_error("manifest needs at least two columns");

    std::vector<std::pair<std::string, std::string>> rows;  // filename, code
    const bool one_hot = header.size() > 2;
    std::vector<std::string> codes;
    if (one_hot) codes.assign(header.begin() + 1, header.end());
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv(line);
        if (cells.size() != header.size())
            throw std::runtime_error("manifest row has " + std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        if (!one_hot) {
            rows.emplace_back(cells[0], cells[1]);
            if (std::find(codes.begin(), codes.end(), cells[1]) == codes.end()) codes.push_back(cells[1]);
            continue;
        }
        int hot = -1;
        for (std::size_t c = 1; c < cells.size(); ++c)
            if (std::stod(cells[c]) > 0.5) hot = static_cast<int>(c - 1);
        if (hot < 0) continue;  // e.g. an all-zero row for an excluded category
        rows.emplace_back(cells[0], codes[static_cast<std::size_t>(hot)]);
    }
    Dataset ds;
    ds.classes = ClassCatalog(codes);
    for (const auto& [file, code] : rows) {
        Sample s;
        s.id = std::filesystem::path(file).stem().string();
        s.image = load_image(resolve_image(dir, file));
        s.label = *ds.classes.find(code);
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.csv");
    out << "filename,label\n";
    for (const auto& s : ds.samples) {
        const std::string file = s.id + ".png";
        save_png(s.image, dir / file);
        out << file << ',' << ds.classes.code(s.label) << '\n';
    }
}

Dataset resized(const Dataset& ds, int res) {
    Dataset out;
    out.classes = ds.classes;
    out.samples.reserve(ds.samples.size());
    for (const auto& s : ds.samples) out.samples.push_back({s.id, resize(s.image, res, res), s.label});
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.classes.size()));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class[ds.samples[i].label].push_back(i);
    Dataset train{ds.classes, {}}, val{ds.classes, {}};
    for (auto& idx : by_class) {
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto cut = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(idx.size())));
        for (std::size_t k = 0; k < idx.size(); ++k) (k < cut ? train : val).samples.push_back(ds.samples[idx[k]]);
    }
    return {std::move(train), std::move(val)};
}

Dataset make_blob_dataset(int count, int res, std::uint64_t seed) {
    if (count < 1 || res < 8) throw std::invalid_argument("blob dataset needs count >= 1 and res >= 8");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.03);
    Dataset ds;
    ds.classes = ClassCatalog({"DISC", "SQUARE", "RING", "CROSS"});
    // Base hues per class; each blob is jittered around its hue.
    const double hues[4][3] = {{0.55, 0.25, 0.20}, {0.30, 0.20, 0.45}, {0.25, 0.45, 0.30}, {0.60, 0.45, 0.15}};
    for (int i = 0; i < count; ++i) {
        const int label = i % 4;
        Image im(res, res, 3);
        const double bg[3] = {0.80 + 0.1 * u(rng), 0.65 + 0.1 * u(rng), 0.55 + 0.1 * u(rng)};
        const double cy = res * (0.35 + 0.3 * u(rng)), cx = res * (0.35 + 0.3 * u(rng));
        const double radius = res * (0.18 + 0.12 * u(rng));
        double col[3];
        for (int c = 0; c < 3; ++c) col[c] = std::clamp(hues[label][c] + 0.08 * (u(rng) - 0.5), 0.0, 1.0);
        for (int y = 0; y < res; ++y)
            for (int x = 0; x < res; ++x) {
                const double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
                bool inside = false;
                switch (label) {
                    case 0: inside = dy * dy + dx * dx <= radius * radius; break;
                    case 1: inside = std::abs(dy) <= radius * 0.85 && std::abs(dx) <= radius * 0.85; break;
                    case 2: {
                        const double r = std::sqrt(dy * dy + dx * dx);
                        inside = r <= radius && r >= radius * 0.55;
                        break;
                    }
                    default:
                        inside = (std::abs(dy) <= radius * 0.3 && std::abs(dx) <= radius) ||
                                 (std::abs(dx) <= radius * 0.3 && std::abs(dy) <= radius);
                }
                for (int c = 0; c < 3; ++c)
                    im.at(y, x, c) = std::clamp((inside ? col[c] : bg[c]) + noise(rng), 0.0, 1.0);
            }
        char id[32];
        std::snprintf(id, sizeof id, "blob_%05d", i);
        ds.samples.push_back({id, std::move(im), label});
    }
    return ds;
}

}  // namespace latentlens
