#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsonet/data/patch.hpp"
#include "tsonet/data/split.hpp"
#include "tsonet/data/transforms.hpp"
#include "tsonet/model/network.hpp"
#include "tsonet/objectives/losses.hpp"
#include "tsonet/objectives/metrics.hpp"
#include "tsonet/supervision.hpp"
#include "tsonet/train/checkpoint.hpp"
#include "tsonet/train/optimizer.hpp"
#include "tsonet/train/schedule.hpp"

namespace tsonet {

struct train_config {
    int64_t batch_size = 10;
    int64_t epochs = 30;
    double base_lr = 1e-4;
    double warmup_fraction = 0.30; // linear warm-up over the first 30% of steps
    double weight_decay = 0.01;
    double grad_clip_l2 = 10.0;
    uint64_t seed = 0;
    loss_config loss;
    model_config model;
    std::string data_dir;
    std::string out_dir = "runs/default";
    std::string band_set = "ALL7";
    double degrade_gsd_m = 0.0; // 0 = native resolution
    bool write_log = true;

    void validate() const {
        if (batch_size < 1 || epochs < 1) throw config_error("train: batch/epochs must be >= 1");
        if (base_lr <= 0 || grad_clip_l2 <= 0 || weight_decay < 0)
            throw config_error("train: rates must be positive");
        if (!(warmup_fraction > 0 && warmup_fraction < 1))
            throw config_error("train: warmup_fraction must be in (0,1)");
        loss.validate();
        model.validate();
        const auto bs = data::parse_band_set(band_set);
        if (data::band_set_count(bs) != model.in_bands)
            throw config_error("train: model.in_bands does not match band_set " + band_set);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["batch_size"] = batch_size;
        j["epochs"] = epochs;
        j["base_lr"] = base_lr;
        j["warmup_fraction"] = warmup_fraction;
        j["weight_decay"] = weight_decay;
        j["grad_clip_l2"] = grad_clip_l2;
        j["seed"] = seed;
        j["ablation"] = {{"use_csem", model.use_csem},
                         {"use_febr", model.use_febr},
                         {"use_footprint_stream", model.use_footprint_stream}};
        j["loss"] = {{"tau_fp", loss.tau_fp},         {"alpha_outer", loss.alpha_outer},
                     {"alpha_t", loss.alpha_t},       {"beta_t", loss.beta_t},
                     {"lambda_bce", loss.lambda_bce}, {"lambda_f", loss.lambda_f},
                     {"epsilon", loss.epsilon}};
        j["model"] = model.to_json();
        j["data_dir"] = data_dir;
        j["out_dir"] = out_dir;
        j["band_set"] = band_set;
        j["degrade_gsd_m"] = degrade_gsd_m;
        return j;
    }

    static train_config from_json(const nlohmann::json& j) {
        train_config c;
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.base_lr = j.value("base_lr", c.base_lr);
        c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.grad_clip_l2 = j.value("grad_clip_l2", c.grad_clip_l2);
        c.seed = j.value("seed", c.seed);
        if (j.contains("model")) c.model = model_config::from_json(j["model"]);
        if (j.contains("ablation")) {
            const auto& a = j["ablation"];
            c.model.use_csem = a.value("use_csem", c.model.use_csem);
            c.model.use_febr = a.value("use_febr", c.model.use_febr);
            c.model.use_footprint_stream =
                a.value("use_footprint_stream", c.model.use_footprint_stream);
        }
        if (j.contains("loss")) {
            const auto& l = j["loss"];
            c.loss.tau_fp = l.value("tau_fp", c.loss.tau_fp);
            c.loss.alpha_outer = l.value("alpha_outer", c.loss.alpha_outer);
            c.loss.alpha_t = l.value("alpha_t", c.loss.alpha_t);
            c.loss.beta_t = l.value("beta_t", c.loss.beta_t);
            c.loss.lambda_bce = l.value("lambda_bce", c.loss.lambda_bce);
            c.loss.lambda_f = l.value("lambda_f", c.loss.lambda_f);
            c.loss.epsilon = l.value("epsilon", c.loss.epsilon);
        }
        c.data_dir = j.value("data_dir", c.data_dir);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.band_set = j.value("band_set", c.band_set);
        c.degrade_gsd_m = j.value("degrade_gsd_m", c.degrade_gsd_m);
        c.validate();
        return c;
    }

    static train_config from_file(const std::filesystem::path& path) {
        std::ifstream f(path);
        if (!f) throw config_error("cannot open config: " + path.string());
        nlohmann::json j;
        try {
            f >> j;
        } catch (const nlohmann::json::exception& e) {
            throw config_error(path.string() + ": " + e.what());
        }
        return from_json(j);
    }
};

// A training sample with its precomputed supervision, in model precision.
template <class T>
struct train_sample {
    tensor<T> image;
    tensor<T> heights, valid, weights, footprint;
    tensor<float> heights_f, valid_f, footprint_f; // metric-side views
};

template <class T>
train_sample<T> prepare_sample(const data::patch& p, const loss_config& lc) {
    train_sample<T> s;
    s.image = tensor_cast<T>(p.image);
    s.heights_f = p.heights;
    s.valid_f = p.valid_mask;
    auto sup = derive_supervision(p.heights, lc.tau_fp, lc.alpha_outer);
    s.footprint_f = sup.footprint;
    s.heights = tensor_cast<T>(p.heights);
    s.valid = tensor_cast<T>(p.valid_mask);
    s.weights = tensor_cast<T>(sup.weights);
    s.footprint = tensor_cast<T>(sup.footprint);
    return s;
}

template <class T>
struct sample_losses {
    ag::var<T> total, height, tversky, bce;
};

// Eq.-chain loss for one sample under the ablation flags: full multi-task
// objective with a footprint stream, plain masked L1 without one.
template <class T>
sample_losses<T> compute_losses(const typename tsonet_model<T>::forward_out& out,
                                const train_sample<T>& s, const loss_config& lc,
                                bool footprint_stream) {
    sample_losses<T> L;
    const T eps = static_cast<T>(lc.epsilon);
    if (footprint_stream) {
        L.height = weighted_l1_loss(out.height, s.heights, s.valid, s.weights, eps);
        auto prob = ag::sigmoid(out.fp_logits);
        L.tversky = tversky_loss(prob, s.footprint, s.valid, static_cast<T>(lc.alpha_t),
                                 static_cast<T>(lc.beta_t), eps);
        L.bce = bce_loss(prob, s.footprint, s.valid, eps);
        L.total = total_loss(L.height, L.tversky, L.bce, static_cast<T>(lc.lambda_f),
                             static_cast<T>(lc.lambda_bce));
    } else {
        L.height = masked_l1_loss(out.height, s.heights, s.valid, eps);
        L.total = L.height;
    }
    return L;
}

struct step_record {
    int64_t step = 0, epoch = 0;
    double lr = 0, loss = 0, loss_h = 0, loss_tver = 0, loss_bce = 0;
    double grad_norm = 0, grad_norm_clipped = 0;
};

struct val_record {
    int64_t epoch = 0, step = 0;
    std::optional<double> val_rmse, val_mae;
    bool is_best = false;
};

struct train_result {
    std::vector<step_record> steps;
    std::vector<val_record> vals;
    double best_val_rmse = std::numeric_limits<double>::infinity();
    int64_t best_epoch = -1;
    std::string best_ckpt_path;
};

template <class T>
class trainer {
public:
    train_config cfg;
    tsonet_model<T> model;

    explicit trainer(train_config cfg_) : cfg(std::move(cfg_)), model(cfg.model, cfg.seed) {
        cfg.validate();
        load_dataset();
    }

    // Evaluation over a prepared sample list; global accumulation before
    // ratios. Without a footprint stream, the predicted footprint defaults to
    // thresholding the predicted heights at tau_fp.
    metrics_report evaluate_samples(const std::vector<train_sample<T>>& samples) const {
        metrics_accumulator acc;
        acc.tau_fp = cfg.loss.tau_fp;
        acc.eps = cfg.loss.epsilon;
        ag::no_grad_guard ng;
        for (const auto& s : samples) {
            auto out = model.forward(s.image);
            const int64_t h = s.heights_f.dim(0), w = s.heights_f.dim(1);
            auto hmap = tsonet_model<T>::height_map(out, h, w);
            tensor<float> prob;
            if (out.fp_logits) {
                prob = tsonet_model<T>::footprint_prob_map(out, h, w);
            } else {
                prob = tensor<float>({h, w});
                for (int64_t i = 0; i < h * w; ++i)
                    prob[i] = hmap[i] > cfg.loss.tau_fp ? 1.0f : 0.0f;
            }
            acc.add(hmap, s.heights_f, s.valid_f, prob, s.footprint_f);
        }
        return acc.finalize();
    }

    metrics_report evaluate_split(data::split_kind k) const {
        return evaluate_samples(split_samples(k));
    }

    train_result run() {
        const auto& train_set = train_samples_;
        if (train_set.empty()) throw config_error("train: empty train split");
        const int64_t n_train = static_cast<int64_t>(train_set.size());
        const int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
        const int64_t total_steps = cfg.epochs * steps_per_epoch;

        adamw_optimizer<T> opt(cfg.weight_decay);
        rng shuffle_rng(cfg.seed * 0x9E3779B97F4A7C15ULL + 1);

        train_result result;
        std::ofstream log;
        if (cfg.write_log) {
            std::filesystem::create_directories(cfg.out_dir);
            log.open(std::filesystem::path(cfg.out_dir) / "train_log.jsonl", std::ios::trunc);
        }

        std::vector<int64_t> order(train_set.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int64_t>(i);

        int64_t step = 0;
        for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            shuffle_rng.shuffle(order);
            for (int64_t b = 0; b < steps_per_epoch; ++b, ++step) {
                const int64_t lo = b * cfg.batch_size;
                const int64_t hi = std::min<int64_t>(lo + cfg.batch_size, n_train);
                const T inv_n = static_cast<T>(1.0 / static_cast<double>(hi - lo));

                model.params.zero_grad();
                step_record rec;
                rec.step = step;
                rec.epoch = epoch;
                rec.lr = lr_at(static_cast<double>(step), static_cast<double>(total_steps),
                               cfg.base_lr, cfg.warmup_fraction);
                for (int64_t i = lo; i < hi; ++i) {
                    const auto& s = train_set[static_cast<size_t>(order[static_cast<size_t>(i)])];
                    auto out = model.forward(s.image);
                    auto L = compute_losses<T>(out, s, cfg.loss, cfg.model.use_footprint_stream);
                    const double lv = static_cast<double>(L.total->value[0]);
                    if (!std::isfinite(lv))
                        throw numerical_error("train: non-finite loss at step " +
                                              std::to_string(step));
                    rec.loss += lv * inv_n;
                    rec.loss_h += static_cast<double>(L.height->value[0]) * inv_n;
                    if (L.tversky) rec.loss_tver += static_cast<double>(L.tversky->value[0]) * inv_n;
                    if (L.bce) rec.loss_bce += static_cast<double>(L.bce->value[0]) * inv_n;
                    ag::backward(L.total, inv_n);
                }
                auto clip = clip_global_grad_norm(model.params, cfg.grad_clip_l2);
                rec.grad_norm = clip.pre_norm;
                rec.grad_norm_clipped = clip.post_norm;
                opt.step(model.params, rec.lr);
                result.steps.push_back(rec);
                if (log)
                    log << nlohmann::json{{"type", "step"},
                                          {"step", rec.step},
                                          {"epoch", rec.epoch},
                                          {"lr", rec.lr},
                                          {"loss", rec.loss},
                                          {"loss_h", rec.loss_h},
                                          {"loss_tver", rec.loss_tver},
                                          {"loss_bce", rec.loss_bce},
                                          {"grad_norm", rec.grad_norm},
                                          {"grad_norm_clipped", rec.grad_norm_clipped}}
                               .dump()
                        << "\n";
            }

            // Once-per-epoch validation; lowest RMSE wins, earliest epoch on ties.
            auto report = evaluate_samples(val_samples_);
            val_record vr;
            vr.epoch = epoch;
            vr.step = step;
            vr.val_rmse = report.rmse;
            vr.val_mae = report.mae;
            if (report.rmse && *report.rmse < result.best_val_rmse) {
                result.best_val_rmse = *report.rmse;
                result.best_epoch = epoch;
                vr.is_best = true;
                result.best_ckpt_path =
                    (std::filesystem::path(cfg.out_dir) / "best.ckpt").string();
                save_checkpoint(result.best_ckpt_path, model, cfg.to_json(), step,
                                result.best_val_rmse);
            }
            result.vals.push_back(vr);
            if (log)
                log << nlohmann::json{{"type", "val"},
                                      {"epoch", vr.epoch},
                                      {"step", vr.step},
                                      {"val_rmse", vr.val_rmse ? nlohmann::json(*vr.val_rmse)
                                                               : nlohmann::json(nullptr)},
                                      {"is_best", vr.is_best}}
                           .dump()
                    << "\n";
        }

        if (result.best_ckpt_path.empty()) {
            // No epoch produced a scoreable validation RMSE (e.g. no building
            // pixels in the split): persist the final state instead.
            result.best_ckpt_path = (std::filesystem::path(cfg.out_dir) / "best.ckpt").string();
            save_checkpoint(result.best_ckpt_path, model, cfg.to_json(), step,
                            std::numeric_limits<double>::quiet_NaN());
        }
        return result;
    }

    const std::vector<train_sample<T>>& samples(data::split_kind k) const {
        return k == data::split_kind::train ? train_samples_
               : k == data::split_kind::val ? val_samples_
                                            : test_samples_;
    }

private:
    std::vector<train_sample<T>> train_samples_, val_samples_, test_samples_;

    std::vector<train_sample<T>> split_samples(data::split_kind k) const { return samples(k); }

    void load_dataset() {
        if (cfg.data_dir.empty()) return; // tests may inject samples directly
        const auto root = std::filesystem::path(cfg.data_dir);
        auto manifest = data::load_manifest(root / "manifest.json");
        const auto bs = data::parse_band_set(cfg.band_set);
        auto load_split = [&](data::split_kind k, std::vector<train_sample<T>>& dst) {
            for (const auto& rel : manifest.paths(k)) {
                auto p = data::load_patch(root / rel);
                if (cfg.degrade_gsd_m > 0)
                    p = data::degrade_resolution(p, static_cast<float>(cfg.degrade_gsd_m));
                if (bs != data::band_set::all7) p = data::select_bands(p, bs);
                dst.push_back(prepare_sample<T>(p, cfg.loss));
            }
        };
        load_split(data::split_kind::train, train_samples_);
        load_split(data::split_kind::val, val_samples_);
        load_split(data::split_kind::test, test_samples_);
        if (train_samples_.empty())
            throw config_error("train: manifest has an empty train split");
    }

public:
    // Test hook: run with injected samples instead of an on-disk dataset.
    void inject_dataset(std::vector<train_sample<T>> train, std::vector<train_sample<T>> val,
                        std::vector<train_sample<T>> test) {
        train_samples_ = std::move(train);
        val_samples_ = std::move(val);
        test_samples_ = std::move(test);
    }
};

// Evaluate a checkpoint on one split of a dataset directory.
template <class T>
metrics_report evaluate_checkpoint(const std::filesystem::path& ckpt_path,
                                   const std::string& data_dir, data::split_kind split,
                                   const std::string& band_set_override = "",
                                   double degrade_gsd_m = 0.0) {
    auto ck = load_checkpoint(ckpt_path);
    train_config cfg = train_config::from_json(ck.train_config);
    cfg.model = ck.model_cfg;
    if (!data_dir.empty()) cfg.data_dir = data_dir;
    if (!band_set_override.empty()) cfg.band_set = band_set_override;
    cfg.degrade_gsd_m = degrade_gsd_m;
    cfg.write_log = false;
    trainer<T> tr(cfg);
    apply_checkpoint(ck, tr.model);
    return tr.evaluate_split(split);
}

} // namespace tsonet
