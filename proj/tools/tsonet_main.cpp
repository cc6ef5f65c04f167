// tsonet command-line interface: synthetic dataset generation, training,
// evaluation, prediction, and the ablation matrix.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsonet/tsonet.hpp"

namespace fs = std::filesystem;
using namespace tsonet;

namespace {

int cmd_synth(const std::string& spec_path, int64_t n, const std::string& out_dir,
              uint64_t seed, uint64_t split_seed) {
    data::synthetic_scene_spec spec;
    if (!spec_path.empty()) {
        std::ifstream f(spec_path);
        if (!f) throw config_error("cannot open scene spec: " + spec_path);
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(spec_path + ": " + std::string(e.what()));
        }
        spec = data::synthetic_scene_spec::from_json(j);
    }
    if (n < 10) throw config_error("synth: need at least 10 samples for a 7:2:1 split");

    const fs::path root(out_dir);
    fs::create_directories(root / "samples");
    std::vector<std::string> rel_paths;
    for (int64_t i = 0; i < n; ++i) {
        auto p = data::generate_synthetic_scene(spec, seed + static_cast<uint64_t>(i));
        char name[32];
        std::snprintf(name, sizeof(name), "%06lld", static_cast<long long>(i));
        const std::string rel = std::string("samples/") + name;
        data::save_patch(root / rel, p);
        rel_paths.push_back(rel);
    }
    auto manifest = data::split_dataset(rel_paths, {0.7, 0.2, 0.1}, split_seed);
    data::save_manifest(manifest, root / "manifest.json");
    {
        std::ofstream f(root / "scene_spec.json", std::ios::trunc);
        f << spec.to_json().dump(2) << "\n";
    }
    auto c = manifest.counts();
    std::cout << "wrote " << n << " samples to " << out_dir << " (train " << c[0] << ", val "
              << c[1] << ", test " << c[2] << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path) {
    auto cfg = train_config::from_file(config_path);
    trainer<float> tr(cfg);
    std::cout << "training: " << tr.model.params.total_elements() << " parameters, "
              << tr.samples(data::split_kind::train).size() << " train / "
              << tr.samples(data::split_kind::val).size() << " val samples\n";
    auto res = tr.run();
    std::cout << "best val RMSE " << res.best_val_rmse << " at epoch " << res.best_epoch
              << "\ncheckpoint: " << res.best_ckpt_path << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& split, const std::string& report_path,
             const std::string& data_dir, const std::string& bands, double degrade_gsd) {
    auto rep = evaluate_checkpoint<float>(ckpt, data_dir, data::parse_split(split), bands,
                                          degrade_gsd);
    auto j = rep.to_json();
    if (!report_path.empty()) {
        fs::path rp(report_path);
        if (rp.has_parent_path()) fs::create_directories(rp.parent_path());
        std::ofstream f(rp, std::ios::trunc);
        f << j.dump(2) << "\n";
        const fs::path csv = rp.extension() == ".json" ? fs::path(rp).replace_extension(".csv")
                                                       : fs::path(rp.string() + ".csv");
        std::ofstream fc(csv, std::ios::trunc);
        fc << rep.to_csv();
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& input, const std::string& out_dir) {
    auto ck = load_checkpoint(ckpt);
    auto model = model_from_checkpoint<float>(ck);
    const auto bs = data::parse_band_set(
        ck.train_config.value("band_set", std::string("ALL7")));

    std::vector<fs::path> stems;
    const fs::path in(input);
    if (fs::is_directory(in)) {
        for (const auto& e : fs::directory_iterator(in))
            if (e.path().extension() == ".json" &&
                e.path().filename().string().find(".pred") == std::string::npos)
                stems.push_back(e.path());
        std::sort(stems.begin(), stems.end());
    } else {
        stems.push_back(in);
    }
    if (stems.empty()) throw data_error("predict: no samples under " + input);

    fs::create_directories(out_dir);
    ag::no_grad_guard ng;
    for (const auto& stem : stems) {
        auto p = data::load_patch(stem);
        if (bs != data::band_set::all7) p = data::select_bands(p, bs);
        auto out = model.forward(tensor_cast<float>(p.image));
        auto hmap = tsonet_model<float>::height_map(out, p.height(), p.width());
        for (int64_t i = 0; i < hmap.numel(); ++i) hmap[i] = std::max(0.0f, hmap[i]);

        const std::string id = data::detail::sample_stem(stem).filename().string();
        const fs::path base = fs::path(out_dir) / id;
        data::detail::write_f32(fs::path(base.string() + ".pred.f32"), hmap.data(),
                                hmap.numel());
        nlohmann::json j;
        j["scene_id"] = p.meta.scene_id;
        j["gsd_m"] = p.meta.gsd_m;
        j["dtype"] = "float32";
        j["shape"] = {p.height(), p.width()};
        std::ofstream f(base.string() + ".pred.json", std::ios::trunc);
        f << j.dump(2) << "\n";
    }
    std::cout << "wrote " << stems.size() << " prediction(s) to " << out_dir << "\n";
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& matrix,
               const std::string& out_dir) {
    if (matrix != "default") throw config_error("unknown ablation matrix: " + matrix);
    auto base = train_config::from_file(config_path);
    auto results = run_ablation<float>(base, default_ablation_matrix(), out_dir);
    std::printf("%-24s %8s %8s %8s %8s\n", "config", "MAE", "RMSE", "IoU", "F1");
    for (const auto& r : results) {
        auto v = [](const std::optional<double>& o) { return o ? *o : 0.0; };
        std::printf("%-24s %8.4f %8.4f %8.4f %8.4f\n", r.row.name.c_str(),
                    v(r.test_report.mae), v(r.test_report.rmse), v(r.test_report.iou),
                    v(r.test_report.f1));
    }
    std::cout << "reports under " << out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tsonet: two-stream ordinal building height estimation"};
    app.require_subcommand(1);

    std::string spec_path, out_dir = "data", config_path, ckpt, split = "test";
    std::string report_path, data_dir, input, bands, matrix = "default";
    int64_t n = 64;
    uint64_t seed = 0, split_seed = 0;
    double degrade_gsd = 0.0;

    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    synth->add_option("--spec", spec_path, "scene spec JSON (defaults built in)");
    synth->add_option("--n", n, "number of patches")->required();
    synth->add_option("--out", out_dir, "output dataset directory")->required();
    synth->add_option("--seed", seed, "scene seed base");
    synth->add_option("--split-seed", split_seed, "manifest split seed");

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "train config JSON")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval->add_option("--ckpt", ckpt, "checkpoint path")->required();
    eval->add_option("--split", split, "train | val | test");
    eval->add_option("--report", report_path, "write the report JSON (+CSV) here");
    eval->add_option("--data", data_dir, "override the dataset directory");
    eval->add_option("--bands", bands, "override band set: ALL7 | RGB_NIR | RGB");
    eval->add_option("--degrade-gsd", degrade_gsd, "evaluate at a simulated coarser gsd (m)");

    auto* predict = app.add_subcommand("predict", "write height maps for samples");
    predict->add_option("--ckpt", ckpt, "checkpoint path")->required();
    predict->add_option("--input", input, "sample stem or dataset samples/ directory")
        ->required();
    predict->add_option("--out", out_dir, "output directory")->required();

    auto* ablate = app.add_subcommand("ablate", "run the module/task ablation matrix");
    ablate->add_option("--config", config_path, "base train config JSON")->required();
    ablate->add_option("--matrix", matrix, "matrix name (default)");
    ablate->add_option("--out", out_dir, "report directory")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) return cmd_synth(spec_path, n, out_dir, seed, split_seed);
        if (train->parsed()) return cmd_train(config_path);
        if (eval->parsed())
            return cmd_eval(ckpt, split, report_path, data_dir, bands, degrade_gsd);
        if (predict->parsed()) return cmd_predict(ckpt, input, out_dir);
        if (ablate->parsed()) return cmd_ablate(config_path, matrix, out_dir);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
