// Writes the synthetic four-shape dataset (PNG files plus manifest.csv).

#include <iostream>

#include <CLI11.hpp>

#include "latentlens/dataset.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate a synthetic shape dataset"};
    std::filesystem::path out;
    int count = 800, res = 28;
    std::uint64_t seed = 1;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--count", count)->check(CLI::PositiveNumber);
    app.add_option("--res", res)->check(CLI::Range(8, 512));
    app.add_option("--seed", seed);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        const auto ds = latentlens::make_blob_dataset(count, res, seed);
        latentlens::write_dataset(ds, out);
        std::cout << "{\"out\": \"" << out.string() << "\", \"count\": " << count << "}\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
