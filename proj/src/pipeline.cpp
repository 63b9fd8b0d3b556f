#include "tabdc/pipeline.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "tabdc/benchmark.hpp"
#include "tabdc/csv.hpp"
#include "tabdc/errors.hpp"
#include "tabdc/logistic.hpp"
#include "tabdc/metrics.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::pipeline {

namespace fs = std::filesystem;

namespace {

fs::path prepared_dir(const PipelineConfig& cfg) { return cfg.out_dir / "prepared"; }
fs::path model_dir(const PipelineConfig& cfg) { return cfg.out_dir / "model"; }
fs::path ipc_dir(const PipelineConfig& cfg, int ipc) {
    return cfg.out_dir / ("ipc_" + std::to_string(ipc));
}
fs::path baseline_dir(const PipelineConfig& cfg) { return cfg.out_dir / "baseline"; }

std::string file_fingerprint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

// A stage is current when its marker artifact exists and carries the same
// config hash (plus any recorded upstream fingerprints still matching).
bool stage_is_current(const fs::path& marker, const PipelineConfig& cfg,
                      const std::vector<std::pair<std::string, std::string>>& fingerprints = {}) {
    if (!fs::exists(marker)) return false;
    try {
        const auto doc = read_json(marker);
        if (doc.value("config_hash", "") != cfg.config_hash) return false;
        for (const auto& [key, value] : fingerprints)
            if (doc.value(key, "") != value) return false;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct PreparedData {
    data::AnyDataset train;
    data::AnyDataset val;
    data::AnyDataset test;
    std::vector<std::string> feature_names;
    double time_scale = 1.0;
};

PreparedData load_prepared(const PipelineConfig& cfg) {
    const fs::path meta_path = prepared_dir(cfg) / "meta.json";
    if (!fs::exists(meta_path))
        throw DependencyError("stage 'prepare' has not produced " + meta_path.string() +
                              "; run 'prepare' first");
    const auto meta = read_json(meta_path);
    PreparedData out;
    out.feature_names = meta.at("feature_names").get<std::vector<std::string>>();
    out.time_scale = meta.value("time_scale", 1.0);
    const bool survival = cfg.task != TaskKind::classification;
    for (const char* part : {"train", "val", "test"}) {
        const fs::path p = prepared_dir(cfg) / (std::string(part) + ".csv");
        if (!fs::exists(p))
            throw DependencyError("missing prepared split " + p.string() + "; run 'prepare' first");
        data::AnyDataset ds =
            survival ? data::load_csv(p, "", std::string("time"), std::string("event"))
                     : data::load_csv(p, "label");
        if (part == std::string("train"))
            out.train = std::move(ds);
        else if (part == std::string("val"))
            out.val = std::move(ds);
        else
            out.test = std::move(ds);
    }
    return out;
}

const Matrix& features_of(const data::AnyDataset& ds) {
    if (const auto* c = std::get_if<data::Dataset>(&ds)) return c->features;
    return std::get<data::SurvivalDataset>(ds).features;
}

engine::SyntheticDataset load_condensed(const PipelineConfig& cfg, int ipc) {
    const fs::path p = ipc_dir(cfg, ipc) / "condensed.csv";
    if (!fs::exists(p))
        throw DependencyError("missing condensed data " + p.string() + "; run 'condense' first");
    engine::SyntheticDataset syn;
    if (cfg.task == TaskKind::classification) {
        const auto any = data::load_csv(p, "label");
        const auto& ds = std::get<data::Dataset>(any);
        syn.x = ds.features;
        syn.outcome = engine::ClassificationOutcome{ds.labels};
    } else {
        const auto any = data::load_csv(p, "", std::string("time"), std::string("event"));
        const auto& ds = std::get<data::SurvivalDataset>(any);
        syn.x = ds.features;
        syn.outcome = engine::SurvivalOutcome{ds.times, ds.events};
    }
    return syn;
}

std::unique_ptr<model::Predictor> load_ref_model(const PipelineConfig& cfg) {
    const fs::path p = model_dir(cfg) / "ref_model.json";
    if (!fs::exists(p))
        throw DependencyError("missing reference model " + p.string() + "; run 'train-ref' first");
    return model::load_predictor(p);
}

nlohmann::json ci_to_json(const metrics::BootstrapCi& ci) {
    return {{"mean", ci.mean}, {"ci_low", ci.lo}, {"ci_high", ci.hi}};
}

// Downstream utility of a model trained on (train) and measured on the
// prepared test split. Classification thresholds are frozen on the
// validation split by Youden's J.
nlohmann::json evaluate_downstream(const PipelineConfig& cfg, const PreparedData& prepared,
                                   const data::AnyDataset& train_data, const std::string& label) {
    nlohmann::json out;
    out["trained_on"] = label;
    const std::uint64_t boot_seed = rng::derive_key({cfg.seed, 0x65766179ULL});
    constexpr int kResamples = 1000;

    if (cfg.task == TaskKind::classification) {
        const auto& train = std::get<data::Dataset>(train_data);
        const auto& val = std::get<data::Dataset>(prepared.val);
        const auto& test = std::get<data::Dataset>(prepared.test);
        auto gcfg = cfg.gbdt;
        gcfg.objective = model::Objective::logistic;
        auto downstream = model::train_gbdt(train, &val, gcfg);

        const auto val_scores = downstream->predict(val.features);
        const double threshold = metrics::youden_threshold(val_scores, val.labels);
        const auto scores = downstream->predict(test.features);

        out["task"] = "classification";
        out["threshold_used"] = threshold;
        out["auroc"] = ci_to_json(
            metrics::bootstrap_ci(metrics::auroc, scores, test.labels, kResamples, boot_seed));
        auto rate = [threshold](auto pick) {
            return [threshold, pick](const std::vector<double>& s, const std::vector<int>& y) {
                const auto m = metrics::confusion_metrics(s, y, threshold);
                return pick(m);
            };
        };
        out["sensitivity"] = ci_to_json(metrics::bootstrap_ci(
            rate([](const metrics::ConfusionMetrics& m) { return m.sensitivity; }), scores,
            test.labels, kResamples, boot_seed + 1));
        out["specificity"] = ci_to_json(metrics::bootstrap_ci(
            rate([](const metrics::ConfusionMetrics& m) { return m.specificity; }), scores,
            test.labels, kResamples, boot_seed + 2));
        out["ppv"] = ci_to_json(metrics::bootstrap_ci(
            rate([](const metrics::ConfusionMetrics& m) {
                if (!m.ppv) throw NumericalError("ppv undefined");
                return *m.ppv;
            }),
            scores, test.labels, kResamples, boot_seed + 3));
        out["npv"] = ci_to_json(metrics::bootstrap_ci(
            rate([](const metrics::ConfusionMetrics& m) {
                if (!m.npv) throw NumericalError("npv undefined");
                return *m.npv;
            }),
            scores, test.labels, kResamples, boot_seed + 4));
        return out;
    }

    const auto& train = std::get<data::SurvivalDataset>(train_data);
    const auto& val = std::get<data::SurvivalDataset>(prepared.val);
    const auto& test = std::get<data::SurvivalDataset>(prepared.test);
    std::vector<double> risk;
    if (cfg.task == TaskKind::cox) {
        auto downstream = model::train_cox(train, cfg.cox);
        risk = downstream->predict(test.features);
        out["hazard_ratios"] = downstream->hazard_ratios();
    } else {
        auto gcfg = cfg.gbdt;
        gcfg.objective = model::Objective::aft_normal;
        auto downstream = model::train_gbdt(train, &val, gcfg);
        risk = downstream->predict(test.features);
        for (double& r : risk) r = -r;  // log-time to risk orientation
    }

    out["task"] = task_kind_name(cfg.task);
    out["c_index"] = ci_to_json(metrics::bootstrap_ci_survival(
        metrics::concordance_index, risk, test.times, test.events, kResamples, boot_seed));

    // risk-stratified survival curves (two-column CSVs for plotting)
    std::vector<double> sorted_risk = risk;
    std::sort(sorted_risk.begin(), sorted_risk.end());
    const double median_risk = sorted_risk[sorted_risk.size() / 2];
    nlohmann::json strata = nlohmann::json::array();
    for (const char* which : {"low", "high"}) {
        std::vector<double> times;
        std::vector<int> events;
        for (std::size_t i = 0; i < risk.size(); ++i) {
            const bool high = risk[i] >= median_risk;
            if ((which == std::string("high")) == high) {
                times.push_back(test.times[i]);
                events.push_back(test.events[i]);
            }
        }
        const auto km = metrics::km_curve(times, events);
        nlohmann::json stratum;
        stratum["stratum"] = which;
        stratum["event_times"] = km.event_times;
        stratum["survival_probs"] = km.survival_probs;
        strata.push_back(std::move(stratum));
    }
    out["km_strata"] = std::move(strata);
    return out;
}

void write_km_csvs(const nlohmann::json& utility, const fs::path& dir, const std::string& prefix,
                   std::vector<fs::path>& artifacts) {
    if (!utility.contains("km_strata")) return;
    for (const auto& stratum : utility.at("km_strata")) {
        const fs::path p = dir / (prefix + "_km_" + stratum.at("stratum").get<std::string>() +
                                  ".csv");
        std::ofstream out(p);
        out << "time,survival\n";
        const auto& times = stratum.at("event_times");
        const auto& probs = stratum.at("survival_probs");
        for (std::size_t k = 0; k < times.size(); ++k)
            out << data::format_double(times[k].get<double>()) << ','
                << data::format_double(probs[k].get<double>()) << '\n';
        artifacts.push_back(p);
    }
}

}  // namespace

RunLock::RunLock(const fs::path& out_dir) {
    fs::create_directories(out_dir);
    path_ = out_dir / ".lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw DependencyError("output directory '" + out_dir.string() +
                              "' is locked by another run (remove .lock if stale)");
    ::close(fd);
}

RunLock::~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

void write_json_atomic(const fs::path& path, const nlohmann::json& doc) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
        out << doc.dump(2) << '\n';
    }
    fs::rename(tmp, path);
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("cannot open '" + path.string() + "'");
    nlohmann::json doc;
    in >> doc;
    return doc;
}

void manifest_record(const PipelineConfig& cfg, const std::string& stage,
                     const std::vector<fs::path>& artifacts, double seconds) {
    const fs::path path = cfg.out_dir / "manifest.json";
    nlohmann::json doc;
    if (fs::exists(path)) {
        try {
            doc = read_json(path);
        } catch (const std::exception&) {
            doc = nlohmann::json::object();
        }
    }
    doc["tool_version"] = kToolVersion;
    doc["config_hash"] = cfg.config_hash;
    nlohmann::json arts = nlohmann::json::array();
    for (const auto& a : artifacts) arts.push_back(fs::relative(a, cfg.out_dir).string());
    doc["stages"][stage] = {{"artifacts", std::move(arts)}, {"seconds", seconds}};
    write_json_atomic(path, doc);
}

StageResult run_prepare(const PipelineConfig& cfg, const StageOptions& opt) {
    const fs::path meta_path = prepared_dir(cfg) / "meta.json";
    if (!opt.force && stage_is_current(meta_path, cfg))
        return {true, {}, "prepare: up to date (config hash matches), skipping"};
    const double t0 = now_seconds();

    data::AnyDataset full = [&]() -> data::AnyDataset {
        if (cfg.dataset.generate) {
            const auto& gen = *cfg.dataset.generate;
            return data::generate_benchmark(gen.kind, gen.n, gen.d,
                                            rng::derive_key({cfg.seed, 0x67656eULL}), gen.params);
        }
        return data::load_csv(*cfg.dataset.path, cfg.dataset.label_column, cfg.dataset.time_column,
                              cfg.dataset.event_column);
    }();

    StageResult result;
    nlohmann::json meta;
    meta["config_hash"] = cfg.config_hash;
    meta["task"] = task_kind_name(cfg.task);
    fs::create_directories(prepared_dir(cfg));

    if (cfg.task == TaskKind::classification) {
        auto& ds = std::get<data::Dataset>(full);
        auto [train, val, test] = data::split(ds, cfg.split);
        const auto scaler = data::fit_feature_scaler(train.features);
        for (auto* part : {&train, &val, &test}) part->features = scaler.transform(part->features);
        meta["feature_names"] = train.feature_names;
        meta["scaler_means"] = scaler.means;
        meta["scaler_stds"] = scaler.stds;
        meta["n"] = {{"train", train.n()}, {"val", val.n()}, {"test", test.n()}};
        data::save_csv(prepared_dir(cfg) / "train.csv", train);
        data::save_csv(prepared_dir(cfg) / "val.csv", val);
        data::save_csv(prepared_dir(cfg) / "test.csv", test);
    } else {
        auto& ds = std::get<data::SurvivalDataset>(full);
        auto [train, val, test] = data::split(ds, cfg.split);
        const auto scaler = data::fit_feature_scaler(train.features);
        auto [scaled_train_times, time_scaler] = data::scale_survival_times(train.times,
                                                                            train.events);
        train.times = std::move(scaled_train_times);
        for (auto* part : {&val, &test})
            for (double& t : part->times) t = time_scaler.transform(t);
        for (auto* part : {&train, &val, &test}) part->features = scaler.transform(part->features);
        meta["feature_names"] = train.feature_names;
        meta["scaler_means"] = scaler.means;
        meta["scaler_stds"] = scaler.stds;
        meta["time_scale"] = time_scaler.scale_s;
        meta["n"] = {{"train", train.n()}, {"val", val.n()}, {"test", test.n()}};
        data::save_csv(prepared_dir(cfg) / "train.csv", train);
        data::save_csv(prepared_dir(cfg) / "val.csv", val);
        data::save_csv(prepared_dir(cfg) / "test.csv", test);
    }
    write_json_atomic(meta_path, meta);

    result.artifacts = {prepared_dir(cfg) / "train.csv", prepared_dir(cfg) / "val.csv",
                        prepared_dir(cfg) / "test.csv", meta_path};
    manifest_record(cfg, "prepare", result.artifacts, now_seconds() - t0);
    result.note = "prepare: wrote standardized splits";
    return result;
}

StageResult run_train_ref(const PipelineConfig& cfg, const StageOptions& opt) {
    const fs::path meta_path = model_dir(cfg) / "meta.json";
    const fs::path model_path = model_dir(cfg) / "ref_model.json";
    if (!opt.force && stage_is_current(meta_path, cfg) && fs::exists(model_path))
        return {true, {}, "train-ref: up to date, skipping"};
    const double t0 = now_seconds();

    const auto prepared = load_prepared(cfg);
    std::unique_ptr<model::Predictor> ref;
    double val_metric = 0.0;
    if (cfg.task == TaskKind::classification) {
        const auto& train = std::get<data::Dataset>(prepared.train);
        const auto& val = std::get<data::Dataset>(prepared.val);
        auto gcfg = cfg.gbdt;
        gcfg.objective = model::Objective::logistic;
        ref = model::train_gbdt(train, &val, gcfg);
        val_metric = metrics::auroc(ref->predict(val.features), val.labels);
    } else if (cfg.task == TaskKind::cox) {
        const auto& train = std::get<data::SurvivalDataset>(prepared.train);
        const auto& val = std::get<data::SurvivalDataset>(prepared.val);
        ref = model::train_cox(train, cfg.cox);
        val_metric = metrics::concordance_index(ref->predict(val.features), val.times, val.events);
    } else {
        const auto& train = std::get<data::SurvivalDataset>(prepared.train);
        const auto& val = std::get<data::SurvivalDataset>(prepared.val);
        auto gcfg = cfg.gbdt;
        gcfg.objective = model::Objective::aft_normal;
        ref = model::train_gbdt(train, &val, gcfg);
        auto risk = ref->predict(val.features);
        for (double& r : risk) r = -r;
        val_metric = metrics::concordance_index(risk, val.times, val.events);
    }

    fs::create_directories(model_dir(cfg));
    model::save_predictor(*ref, model_path);
    nlohmann::json meta{{"config_hash", cfg.config_hash},
                        {"val_metric", val_metric},
                        {"model_fingerprint", file_fingerprint(model_path)}};
    write_json_atomic(meta_path, meta);

    StageResult result;
    result.artifacts = {model_path, meta_path};
    manifest_record(cfg, "train-ref", result.artifacts, now_seconds() - t0);
    std::ostringstream note;
    note << "train-ref: validation metric " << val_metric;
    result.note = note.str();
    return result;
}

StageResult run_condense(const PipelineConfig& cfg, const StageOptions& opt, int ipc) {
    const fs::path dir = ipc_dir(cfg, ipc);
    const fs::path sidecar_path = dir / "sidecar.json";
    if (!opt.force && stage_is_current(sidecar_path, cfg) &&
        read_json(sidecar_path).value("ipc", -1) == ipc && fs::exists(dir / "condensed.csv"))
        return {true, {}, "condense[ipc=" + std::to_string(ipc) + "]: up to date, skipping"};
    const double t0 = now_seconds();

    const auto prepared = load_prepared(cfg);
    auto ref = load_ref_model(cfg);

    auto ccfg = cfg.condense;
    ccfg.ipc = ipc;
    auto evaluator = engine::make_downstream_evaluator(to_model_task(cfg.task), cfg.gbdt, cfg.cox);
    const auto result = engine::condense(prepared.train, prepared.val, *ref, ccfg, cfg.dp,
                                         evaluator, opt.threads);

    fs::create_directories(dir);
    const fs::path condensed_path = dir / "condensed.csv";
    const fs::path tmp_csv = dir / "condensed.csv.tmp";
    if (cfg.task == TaskKind::classification) {
        data::Dataset out;
        out.features = result.synthetic.x;
        out.labels = std::get<engine::ClassificationOutcome>(result.synthetic.outcome).labels;
        out.feature_names = prepared.feature_names;
        data::save_csv(tmp_csv, out);
    } else {
        data::SurvivalDataset out;
        out.features = result.synthetic.x;
        const auto& so = std::get<engine::SurvivalOutcome>(result.synthetic.outcome);
        out.times = so.times;
        out.events = so.events;
        out.feature_names = prepared.feature_names;
        data::save_csv(tmp_csv, out);
    }
    fs::rename(tmp_csv, condensed_path);

    nlohmann::json sidecar;
    sidecar["config_hash"] = cfg.config_hash;
    sidecar["config"] = cfg.normalized;
    sidecar["ipc"] = ipc;
    sidecar["model_fingerprint"] = file_fingerprint(model_dir(cfg) / "ref_model.json");
    sidecar["best_iter"] = result.history.best_iter;
    sidecar["best_metric"] = result.history.best_metric;
    sidecar["aborted_non_finite"] = result.history.aborted_non_finite;
    nlohmann::json loss_history = nlohmann::json::array();
    for (const auto& it : result.history.iters)
        loss_history.push_back({{"iter", it.iter},
                                {"supervision", it.loss.supervision},
                                {"match", it.loss.match},
                                {"alpha", it.loss.alpha},
                                {"total", it.loss.total},
                                {"grad_norm", it.grad_norm},
                                {"sigma_step", it.sigma_step}});
    sidecar["loss_history"] = std::move(loss_history);
    nlohmann::json evals = nlohmann::json::array();
    for (const auto& ev : result.history.evals)
        evals.push_back({{"iter", ev.iter}, {"metric", ev.metric}});
    sidecar["eval_history"] = std::move(evals);
    if (result.ledger) {
        sidecar["dp_ledger"] = result.ledger->to_json();
        sidecar["privacy"] = {{"epsilon", result.privacy->epsilon},
                              {"delta", result.privacy->delta},
                              {"best_order", result.privacy->best_order},
                              {"steps_accounted", result.privacy->steps_accounted}};
    }
    write_json_atomic(sidecar_path, sidecar);

    StageResult sr;
    sr.artifacts = {condensed_path, sidecar_path};
    manifest_record(cfg, "condense[ipc=" + std::to_string(ipc) + "]", sr.artifacts,
                    now_seconds() - t0);
    std::ostringstream note;
    note << "condense[ipc=" << ipc << "]: best downstream metric " << result.history.best_metric
         << " at iteration " << result.history.best_iter;
    if (result.privacy)
        note << ", epsilon " << result.privacy->epsilon << " (delta " << result.privacy->delta
             << ")";
    sr.note = note.str();
    return sr;
}

StageResult run_eval(const PipelineConfig& cfg, const StageOptions& opt, int ipc) {
    const fs::path dir = ipc_dir(cfg, ipc);
    const fs::path utility_path = dir / "utility.json";
    const fs::path baseline_path = baseline_dir(cfg) / "utility_full.json";
    const std::string condensed_fp = file_fingerprint(dir / "condensed.csv");
    if (!opt.force &&
        stage_is_current(utility_path, cfg, {{"condensed_fingerprint", condensed_fp}}) &&
        stage_is_current(baseline_path, cfg))
        return {true, {}, "eval[ipc=" + std::to_string(ipc) + "]: up to date, skipping"};
    const double t0 = now_seconds();

    const auto prepared = load_prepared(cfg);
    const auto syn = load_condensed(cfg, ipc);

    data::AnyDataset condensed_train = [&]() -> data::AnyDataset {
        if (cfg.task == TaskKind::classification) {
            data::Dataset ds;
            ds.features = syn.x;
            ds.labels = std::get<engine::ClassificationOutcome>(syn.outcome).labels;
            ds.feature_names = prepared.feature_names;
            return ds;
        }
        data::SurvivalDataset ds;
        ds.features = syn.x;
        const auto& so = std::get<engine::SurvivalOutcome>(syn.outcome);
        ds.times = so.times;
        ds.events = so.events;
        ds.feature_names = prepared.feature_names;
        return ds;
    }();

    StageResult sr;
    nlohmann::json condensed_util =
        evaluate_downstream(cfg, prepared, condensed_train, "condensed");
    condensed_util["config_hash"] = cfg.config_hash;
    condensed_util["ipc"] = ipc;
    condensed_util["condensed_fingerprint"] = condensed_fp;
    const auto sidecar = read_json(dir / "sidecar.json");
    if (sidecar.contains("privacy")) condensed_util["privacy"] = sidecar.at("privacy");
    write_json_atomic(utility_path, condensed_util);
    write_km_csvs(condensed_util, dir, "condensed", sr.artifacts);

    if (opt.force || !stage_is_current(baseline_path, cfg)) {
        nlohmann::json baseline_util =
            evaluate_downstream(cfg, prepared, prepared.train, "full");
        baseline_util["config_hash"] = cfg.config_hash;
        write_json_atomic(baseline_path, baseline_util);
        write_km_csvs(baseline_util, baseline_dir(cfg), "full", sr.artifacts);
        sr.artifacts.push_back(baseline_path);
    }

    sr.artifacts.push_back(utility_path);
    manifest_record(cfg, "eval[ipc=" + std::to_string(ipc) + "]", sr.artifacts,
                    now_seconds() - t0);
    std::ostringstream note;
    note << "eval[ipc=" << ipc << "]: "
         << (cfg.task == TaskKind::classification
                 ? "auroc " + std::to_string(condensed_util["auroc"]["mean"].get<double>())
                 : "c-index " + std::to_string(condensed_util["c_index"]["mean"].get<double>()));
    sr.note = note.str();
    return sr;
}

StageResult run_attack(const PipelineConfig& cfg, const StageOptions& opt, int ipc) {
    if (!cfg.attack)
        throw ConfigError("config: 'attack' section is required for the attack stage");
    const fs::path dir = ipc_dir(cfg, ipc);
    const fs::path attack_path = dir / "attack.json";
    const std::string condensed_fp = file_fingerprint(dir / "condensed.csv");
    if (!opt.force && stage_is_current(attack_path, cfg, {{"condensed_fingerprint", condensed_fp}}))
        return {true, {}, "attack[ipc=" + std::to_string(ipc) + "]: up to date, skipping"};
    const double t0 = now_seconds();

    const auto prepared = load_prepared(cfg);
    const auto syn = load_condensed(cfg, ipc);
    const auto& train_x = features_of(prepared.train);
    const auto& test_x = features_of(prepared.test);

    const std::size_t n_each = std::min({cfg.attack->n_members, train_x.rows(), test_x.rows()});
    auto sample_rows = [&](const Matrix& src, std::uint64_t tag) {
        std::vector<std::size_t> idx(src.rows());
        std::iota(idx.begin(), idx.end(), 0);
        rng::Stream rs(rng::derive_key({cfg.seed, tag}));
        rs.shuffle(idx);
        Matrix out(n_each, src.cols());
        for (std::size_t i = 0; i < n_each; ++i)
            for (std::size_t j = 0; j < src.cols(); ++j) out(i, j) = src(idx[i], j);
        return out;
    };
    const Matrix members = sample_rows(train_x, 0x6d656dULL);
    const Matrix nonmembers = sample_rows(test_x, 0x6e6f6eULL);

    std::optional<double> epsilon;
    double delta = 0.0;
    const auto sidecar = read_json(dir / "sidecar.json");
    if (sidecar.contains("privacy")) {
        epsilon = sidecar["privacy"]["epsilon"].get<double>();
        delta = sidecar["privacy"]["delta"].get<double>();
    }

    const auto mia = attack::run_mia(members, nonmembers, syn.x, cfg.attack->mia, epsilon, delta);

    nlohmann::json doc;
    doc["config_hash"] = cfg.config_hash;
    doc["ipc"] = ipc;
    doc["condensed_fingerprint"] = condensed_fp;
    doc["mia"] = {{"auroc", {{"mean", mia.auroc.mean}, {"sd", mia.auroc.sd}}},
                  {"membership_advantage",
                   {{"mean", mia.membership_advantage.mean}, {"sd", mia.membership_advantage.sd}}},
                  {"tpr_at_fpr10", {{"mean", mia.tpr_at_fpr10.mean}, {"sd", mia.tpr_at_fpr10.sd}}}};
    if (mia.theoretical_bound) doc["mia"]["theoretical_bound"] = *mia.theoretical_bound;

    if (!cfg.attack->aia_targets.empty()) {
        // synthetic rows with outcome columns appended, mirrored on the test side
        const bool survival = cfg.task != TaskKind::classification;
        std::vector<std::string> names = prepared.feature_names;
        auto with_outcomes = [&](const Matrix& x, const data::AnyDataset& ds) {
            const std::size_t extra = survival ? 2 : 1;
            Matrix out(x.rows(), x.cols() + extra);
            for (std::size_t i = 0; i < x.rows(); ++i) {
                for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = x(i, j);
                if (survival) {
                    const auto& s = std::get<data::SurvivalDataset>(ds);
                    out(i, x.cols()) = s.times[i];
                    out(i, x.cols() + 1) = s.events[i];
                } else {
                    out(i, x.cols()) = std::get<data::Dataset>(ds).labels[i];
                }
            }
            return out;
        };
        auto syn_with = [&]() {
            const std::size_t extra = survival ? 2 : 1;
            Matrix out(syn.x.rows(), syn.x.cols() + extra);
            for (std::size_t i = 0; i < syn.x.rows(); ++i) {
                for (std::size_t j = 0; j < syn.x.cols(); ++j) out(i, j) = syn.x(i, j);
                if (survival) {
                    const auto& so = std::get<engine::SurvivalOutcome>(syn.outcome);
                    out(i, syn.x.cols()) = so.times[i];
                    out(i, syn.x.cols() + 1) = so.events[i];
                } else {
                    out(i, syn.x.cols()) =
                        std::get<engine::ClassificationOutcome>(syn.outcome).labels[i];
                }
            }
            return out;
        }();
        if (survival) {
            names.push_back("time");
            names.push_back("event");
        } else {
            names.push_back("label");
        }
        const Matrix real_eval = with_outcomes(test_x, prepared.test);

        nlohmann::json aia = nlohmann::json::array();
        for (const auto& target : cfg.attack->aia_targets) {
            const auto rep = attack::run_aia(syn_with, names, target, real_eval, cfg.attack->aia);
            nlohmann::json one{{"target", rep.target}, {"applicable", rep.applicable}};
            if (rep.applicable) {
                one["r2"] = {{"mean", rep.r2.mean}, {"sd", rep.r2.sd}};
                if (rep.accuracy)
                    one["accuracy"] = {{"mean", rep.accuracy->mean}, {"sd", rep.accuracy->sd}};
                if (rep.auroc) one["auroc"] = {{"mean", rep.auroc->mean}, {"sd", rep.auroc->sd}};
            }
            aia.push_back(std::move(one));
        }
        doc["aia"] = std::move(aia);
    }

    write_json_atomic(attack_path, doc);
    StageResult sr;
    sr.artifacts = {attack_path};
    manifest_record(cfg, "attack[ipc=" + std::to_string(ipc) + "]", sr.artifacts,
                    now_seconds() - t0);
    std::ostringstream note;
    note << "attack[ipc=" << ipc << "]: mia auroc " << mia.auroc.mean;
    sr.note = note.str();
    return sr;
}

StageResult run_budget(const PipelineConfig& cfg, const StageOptions& opt, int ipc) {
    (void)opt;
    const fs::path dir = ipc_dir(cfg, ipc);
    const auto sidecar = read_json(dir / "sidecar.json");
    StageResult sr;
    if (!sidecar.contains("dp_ledger")) {
        std::cout << "budget[ipc=" << ipc << "]: run had no privacy ledger\n";
        sr.note = "no privacy ledger";
        return sr;
    }
    const auto ledger = privacy::DpLedger::from_json(sidecar.at("dp_ledger"));
    const double delta = sidecar.at("privacy").at("delta").get<double>();
    const std::size_t n = ledger.steps_accounted();
    const std::size_t stride = std::max<std::size_t>(1, n / 20);

    const fs::path curve_path = dir / "budget.csv";
    std::ofstream out(curve_path);
    out << "step,epsilon\n";
    std::cout << "step\tepsilon (delta=" << delta << ")\n";
    for (std::size_t s = stride; s <= n; s += stride) {
        const double eps = ledger.to_epsilon_delta(delta, s).epsilon;
        out << s << ',' << data::format_double(eps) << '\n';
        std::cout << s << '\t' << eps << '\n';
    }
    if (n % stride != 0) {
        const double eps = ledger.to_epsilon_delta(delta, n).epsilon;
        out << n << ',' << data::format_double(eps) << '\n';
        std::cout << n << '\t' << eps << '\n';
    }
    sr.artifacts = {curve_path};
    manifest_record(cfg, "budget[ipc=" + std::to_string(ipc) + "]", sr.artifacts, 0.0);
    sr.note = "budget curve written";
    return sr;
}

StageResult run_report(const PipelineConfig& cfg, const StageOptions& opt) {
    (void)opt;
    const double t0 = now_seconds();
    nlohmann::json report;
    report["config_hash"] = cfg.config_hash;
    nlohmann::json rows = nlohmann::json::array();

    const fs::path baseline_path = baseline_dir(cfg) / "utility_full.json";
    if (fs::exists(baseline_path)) {
        auto row = read_json(baseline_path);
        row["row"] = "full";
        rows.push_back(std::move(row));
    }
    std::vector<int> ipcs;
    for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("ipc_", 0) == 0 && fs::exists(entry.path() / "utility.json"))
            ipcs.push_back(std::stoi(name.substr(4)));
    }
    std::sort(ipcs.begin(), ipcs.end());
    for (int ipc : ipcs) {
        auto row = read_json(ipc_dir(cfg, ipc) / "utility.json");
        row["row"] = "ipc_" + std::to_string(ipc);
        const fs::path attack_path = ipc_dir(cfg, ipc) / "attack.json";
        if (fs::exists(attack_path)) row["attack"] = read_json(attack_path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DependencyError("report: no utility artifacts found; run 'eval' first");
    report["rows"] = rows;
    write_json_atomic(cfg.out_dir / "report.json", report);

    // markdown summary table
    std::ostringstream md;
    const bool classification = cfg.task == TaskKind::classification;
    if (classification) {
        md << "| instances | auroc | sensitivity | specificity | ppv | npv | epsilon |\n";
        md << "|---|---|---|---|---|---|---|\n";
    } else {
        md << "| instances | c-index | epsilon |\n|---|---|---|\n";
    }
    auto cell = [](const nlohmann::json& row, const char* key) {
        if (!row.contains(key)) return std::string("-");
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3f (%.3f-%.3f)", row[key]["mean"].get<double>(),
                      row[key]["ci_low"].get<double>(), row[key]["ci_high"].get<double>());
        return std::string(buf);
    };
    for (const auto& row : rows) {
        std::string eps = "-";
        if (row.contains("privacy")) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.2f", row["privacy"]["epsilon"].get<double>());
            eps = buf;
        }
        md << "| " << row["row"].get<std::string>() << " | ";
        if (classification)
            md << cell(row, "auroc") << " | " << cell(row, "sensitivity") << " | "
               << cell(row, "specificity") << " | " << cell(row, "ppv") << " | "
               << cell(row, "npv") << " | " << eps << " |\n";
        else
            md << cell(row, "c_index") << " | " << eps << " |\n";
    }
    {
        const fs::path md_path = cfg.out_dir / "report.md";
        std::ofstream out(md_path);
        out << md.str();
    }
    std::cout << md.str();

    StageResult sr;
    sr.artifacts = {cfg.out_dir / "report.json", cfg.out_dir / "report.md"};
    manifest_record(cfg, "report", sr.artifacts, now_seconds() - t0);
    sr.note = "report written";
    return sr;
}

int run_command(const std::string& command, const PipelineConfig& cfg, const StageOptions& opt) {
    RunLock lock(cfg.out_dir);
    std::vector<int> ipcs = opt.ipc_list;
    if (ipcs.empty()) ipcs.push_back(cfg.condense.ipc);

    auto emit = [](const StageResult& sr) {
        if (!sr.note.empty()) std::cout << sr.note << '\n';
    };

    if (command == "prepare") {
        emit(run_prepare(cfg, opt));
    } else if (command == "train-ref") {
        emit(run_train_ref(cfg, opt));
    } else if (command == "condense") {
        for (int ipc : ipcs) emit(run_condense(cfg, opt, ipc));
    } else if (command == "eval") {
        for (int ipc : ipcs) emit(run_eval(cfg, opt, ipc));
    } else if (command == "attack") {
        for (int ipc : ipcs) emit(run_attack(cfg, opt, ipc));
    } else if (command == "budget") {
        for (int ipc : ipcs) emit(run_budget(cfg, opt, ipc));
    } else if (command == "report") {
        emit(run_report(cfg, opt));
    } else {
        throw ConfigError("unknown command '" + command + "'");
    }
    return 0;
}

}  // namespace tabdc::pipeline
