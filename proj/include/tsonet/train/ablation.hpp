#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tsonet/train/trainer.hpp"

namespace tsonet {

struct ablation_row {
    std::string name;
    bool use_csem, use_febr, use_footprint_stream;
};

// Module ablations (footprint stream always on) followed by task-configuration
// ablations. The full configuration appears in both families.
inline std::vector<ablation_row> default_ablation_matrix() {
    return {
        {"baseline", false, false, true},
        {"baseline_csem", true, false, true},
        {"baseline_febr", false, true, true},
        {"tsonet", true, true, true},
        {"height_only", false, false, false},
        {"height_bins", false, true, false},
        {"height_footprint", true, false, true},
        {"height_bins_footprint", true, true, true},
    };
}

struct ablation_result {
    ablation_row row;
    metrics_report test_report;
    double best_val_rmse = 0.0;
};

// Runs every row with a shared seed and data, evaluates each best checkpoint
// on the test split, and writes per-run reports plus a combined table.
template <class T>
std::vector<ablation_result> run_ablation(const train_config& base,
                                          const std::vector<ablation_row>& matrix,
                                          const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<ablation_result> results;
    for (const auto& row : matrix) {
        train_config cfg = base;
        cfg.model.use_csem = row.use_csem;
        cfg.model.use_febr = row.use_febr;
        cfg.model.use_footprint_stream = row.use_footprint_stream;
        cfg.out_dir = (std::filesystem::path(out_dir) / row.name).string();
        cfg.validate();

        trainer<T> tr(cfg);
        auto train_res = tr.run();
        auto ck = load_checkpoint(train_res.best_ckpt_path);
        apply_checkpoint(ck, tr.model);
        auto report = tr.evaluate_split(data::split_kind::test);

        ablation_result r;
        r.row = row;
        r.test_report = report;
        r.best_val_rmse = train_res.best_val_rmse;
        results.push_back(r);

        std::ofstream f(std::filesystem::path(cfg.out_dir) / "report.json", std::ios::trunc);
        f << report.to_json().dump(2) << "\n";
    }

    nlohmann::json table = nlohmann::json::array();
    std::ostringstream csv;
    csv << "name,use_csem,use_febr,use_footprint_stream,mae,rmse,rel,iou,recall,f1\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? std::to_string(*v) : std::string();
    };
    for (const auto& r : results) {
        auto j = r.test_report.to_json();
        j["name"] = r.row.name;
        j["use_csem"] = r.row.use_csem;
        j["use_febr"] = r.row.use_febr;
        j["use_footprint_stream"] = r.row.use_footprint_stream;
        table.push_back(j);
        csv << r.row.name << ',' << r.row.use_csem << ',' << r.row.use_febr << ','
            << r.row.use_footprint_stream << ',' << cell(r.test_report.mae) << ','
            << cell(r.test_report.rmse) << ',' << cell(r.test_report.rel) << ','
            << cell(r.test_report.iou) << ',' << cell(r.test_report.recall) << ','
            << cell(r.test_report.f1) << "\n";
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "ablation_table.json", std::ios::trunc);
        f << table.dump(2) << "\n";
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "ablation_table.csv", std::ios::trunc);
        f << csv.str();
    }
    return results;
}

} // namespace tsonet
