#include "tabdc/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "tabdc/errors.hpp"
#include "tabdc/rng.hpp"

namespace tabdc::pipeline {

namespace {

std::size_t levenshtein(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

// Strict object reader: every key must be known, with a typo suggestion.
class Section {
public:
    Section(const nlohmann::json& obj, std::string name) : obj_(obj), name_(std::move(name)) {
        if (!obj.is_object())
            throw ConfigError("config: section '" + name_ + "' must be an object");
    }

    ~Section() = default;

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            if (std::find(known_.begin(), known_.end(), key) != known_.end()) continue;
            std::string best;
            std::size_t best_dist = 4;
            for (const auto& k : known_) {
                const std::size_t dist = levenshtein(key, k);
                if (dist < best_dist) {
                    best_dist = dist;
                    best = k;
                }
            }
            std::string msg = "config: unknown key '" + key + "' in " + name_;
            if (!best.empty()) msg += "; did you mean '" + best + "'?";
            throw ConfigError(msg);
        }
    }

    bool has(const std::string& key) {
        known_.push_back(key);
        return obj_.contains(key) && !obj_.at(key).is_null();
    }

    template <typename T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        try {
            return obj_.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: key '" + name_ + "." + key + "' has the wrong type");
        }
    }

    const nlohmann::json& raw(const std::string& key) { return obj_.at(key); }

private:
    const nlohmann::json& obj_;
    std::string name_;
    std::vector<std::string> known_;
};

void check_range(bool ok, const std::string& field, const std::string& bound, double got) {
    if (!ok) {
        std::ostringstream msg;
        msg << "config: " << field << " must " << bound << ", got " << got;
        throw ConfigError(msg.str());
    }
}

}  // namespace

std::string task_kind_name(TaskKind t) {
    switch (t) {
        case TaskKind::classification: return "classification";
        case TaskKind::cox: return "cox";
        case TaskKind::aft: return "aft";
    }
    return "?";
}

model::Task to_model_task(TaskKind t) {
    switch (t) {
        case TaskKind::classification: return model::Task::binary_classification;
        case TaskKind::cox: return model::Task::cox_risk;
        case TaskKind::aft: return model::Task::aft_log_time;
    }
    return model::Task::binary_classification;
}

std::string hash_json(const nlohmann::json& doc) {
    const std::string s = doc.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

PipelineConfig validate_config(const nlohmann::json& raw) {
    PipelineConfig cfg;
    Section root(raw, "config");

    cfg.seed = root.get<std::uint64_t>("seed", 0);
    if (root.has("out_dir")) cfg.out_dir = root.get<std::string>("out_dir", "");

    const std::string task = root.get<std::string>("task", "classification");
    if (task == "classification")
        cfg.task = TaskKind::classification;
    else if (task == "cox")
        cfg.task = TaskKind::cox;
    else if (task == "aft")
        cfg.task = TaskKind::aft;
    else
        throw ConfigError("config: task must be one of classification|cox|aft, got '" + task + "'");

    // --- dataset ---
    if (!root.has("dataset")) throw ConfigError("config: missing 'dataset' section");
    {
        Section ds(root.raw("dataset"), "dataset");
        if (ds.has("path")) cfg.dataset.path = ds.get<std::string>("path", "");
        cfg.dataset.label_column = ds.get<std::string>("label_column", "label");
        if (ds.has("time_column")) cfg.dataset.time_column = ds.get<std::string>("time_column", "");
        if (ds.has("event_column"))
            cfg.dataset.event_column = ds.get<std::string>("event_column", "");
        if (ds.has("generate")) {
            Section gen(ds.raw("generate"), "dataset.generate");
            GenerateSpec spec;
            spec.kind = gen.get<std::string>("kind", "two_gaussians");
            spec.n = gen.get<std::size_t>("n", 5000);
            spec.d = gen.get<std::size_t>("d", 10);
            spec.params.delta = gen.get<double>("delta", 2.0);
            spec.params.censor_frac = gen.get<double>("censor_frac", 0.3);
            gen.finish();
            if (spec.kind != "two_gaussians" && spec.kind != "weibull_survival")
                throw ConfigError("config: dataset.generate.kind must be two_gaussians or "
                                  "weibull_survival");
            cfg.dataset.generate = spec;
        }
        ds.finish();

        if (cfg.dataset.path.has_value() == cfg.dataset.generate.has_value())
            throw ConfigError("config: dataset needs exactly one of 'path' or 'generate'");
        if (cfg.dataset.path && !std::filesystem::exists(*cfg.dataset.path))
            throw ConfigError("config: dataset.path '" + cfg.dataset.path->string() +
                              "' does not exist");
        if (cfg.dataset.time_column.has_value() != cfg.dataset.event_column.has_value())
            throw ConfigError("config: time_column and event_column must be given together");
        const bool survival_task = cfg.task != TaskKind::classification;
        if (cfg.dataset.path) {
            if (survival_task && !cfg.dataset.time_column)
                throw ConfigError("config: task '" + task +
                                  "' needs time_column and event_column");
            if (!survival_task && cfg.dataset.time_column)
                throw ConfigError("config: classification task does not take time/event columns");
        }
        if (cfg.dataset.generate) {
            const bool survival_gen = cfg.dataset.generate->kind == "weibull_survival";
            if (survival_task != survival_gen)
                throw ConfigError("config: task '" + task + "' does not match generator '" +
                                  cfg.dataset.generate->kind + "'");
        }
    }

    // --- split ---
    if (root.has("split")) {
        Section sp(root.raw("split"), "split");
        cfg.split.train_frac = sp.get<double>("train_frac", 0.7);
        cfg.split.val_frac = sp.get<double>("val_frac", 0.1);
        cfg.split.test_frac = sp.get<double>("test_frac", 0.2);
        cfg.split.stratify = sp.get<bool>("stratify", true);
        sp.finish();
    }
    cfg.split.seed = cfg.seed;
    const std::vector<std::pair<double, std::string>> fracs{
        {cfg.split.train_frac, "split.train_frac"},
        {cfg.split.val_frac, "split.val_frac"},
        {cfg.split.test_frac, "split.test_frac"}};
    for (const auto& [v, nm] : fracs) check_range(v > 0.0 && v < 1.0, nm, "lie in (0,1)", v);
    check_range(std::abs(cfg.split.train_frac + cfg.split.val_frac + cfg.split.test_frac - 1.0) <=
                    1e-12,
                "split fractions", "sum to 1",
                cfg.split.train_frac + cfg.split.val_frac + cfg.split.test_frac);

    // --- model ---
    if (root.has("model")) {
        Section md(root.raw("model"), "model");
        cfg.gbdt.rounds = md.get<int>("rounds", 100);
        cfg.gbdt.learning_rate = md.get<double>("learning_rate", 0.1);
        cfg.gbdt.max_depth = md.get<int>("max_depth", 5);
        cfg.gbdt.subsample_fraction = md.get<double>("subsample_fraction", 0.7);
        cfg.gbdt.aft_sigma = md.get<double>("aft_sigma", 1.0);
        cfg.gbdt.l2_leaf = md.get<double>("l2_leaf", 1.0);
        cfg.gbdt.min_samples_leaf = md.get<int>("min_samples_leaf", 1);
        cfg.gbdt.class_weighting = md.get<bool>("class_weighting", false);
        cfg.cox.l2_strength = md.get<double>("cox_l2", 1.0);
        cfg.cox.max_iters = md.get<int>("cox_max_iters", 100);
        cfg.cox.tol = md.get<double>("cox_tol", 1e-8);
        md.finish();
    }
    cfg.gbdt.seed = cfg.seed;
    cfg.gbdt.validate();
    cfg.cox.validate();

    // --- condense ---
    if (root.has("condense")) {
        Section cd(root.raw("condense"), "condense");
        cfg.condense.ipc = cd.get<int>("ipc", 50);
        cfg.condense.rho = cd.get<double>("rho", 0.1);
        cfg.condense.alpha_eps = cd.get<double>("alpha_eps", 1e-12);
        cfg.condense.fd_step_lo = cd.get<double>("fd_step_lo", 0.025);
        cfg.condense.fd_step_hi = cd.get<double>("fd_step_hi", 2.0);
        cfg.condense.optimizer_lr = cd.get<double>("optimizer_lr", 0.001);
        cfg.condense.max_iters = cd.get<int>("max_iters", 2000);
        cfg.condense.eval_every = cd.get<int>("eval_every", 50);
        cfg.condense.patience = cd.get<int>("patience", 5);
        cfg.condense.k_strata = cd.get<int>("k_strata", 4);
        cfg.condense.n_time_bins = cd.get<int>("n_time_bins", 5);
        cfg.condense.class1_fraction = cd.get<double>("class1_fraction", 0.5);
        cd.finish();
    }
    cfg.condense.seed = cfg.seed;
    check_range(cfg.condense.rho > 0.0 && cfg.condense.rho < 1.0, "condense.rho", "lie in (0,1)",
                cfg.condense.rho);
    check_range(cfg.condense.ipc >= 1, "condense.ipc", "be >= 1",
                static_cast<double>(cfg.condense.ipc));
    cfg.condense.validate();

    // --- dp (optional) ---
    if (root.has("dp")) {
        Section dp(root.raw("dp"), "dp");
        privacy::DpConfig d;
        d.clip_norm = dp.get<double>("clip_norm", 1.0);
        d.sigma_base = dp.get<double>("sigma_base", 1.0);
        d.delta = dp.get<double>("delta", 1e-5);
        if (dp.has("sigma_grid_multipliers"))
            d.sigma_grid_multipliers =
                dp.get<std::vector<double>>("sigma_grid_multipliers", privacy::default_sigma_grid());
        if (dp.has("rdp_orders"))
            d.rdp_orders = dp.get<std::vector<double>>("rdp_orders", privacy::default_rdp_orders());
        dp.finish();
        d.noise_seed = rng::derive_key({cfg.seed, 0x6470ULL});
        d.validate();
        cfg.dp = d;
    }

    // --- attack (optional) ---
    if (root.has("attack")) {
        Section at(root.raw("attack"), "attack");
        AttackSpec spec;
        spec.mia.k_neighbors = at.get<int>("k_neighbors", 5);
        spec.mia.repeats = at.get<int>("repeats", 5);
        spec.mia.train_frac = at.get<double>("train_frac", 0.8);
        spec.n_members = at.get<std::size_t>("n_members", 1000);
        spec.aia_targets = at.get<std::vector<std::string>>("aia_targets", {});
        at.finish();
        spec.mia.seed = rng::derive_key({cfg.seed, 0x6d6961ULL});
        spec.aia.repeats = spec.mia.repeats;
        spec.aia.seed = rng::derive_key({cfg.seed, 0x616961ULL});
        spec.mia.validate();
        cfg.attack = spec;
    }

    root.finish();

    // normalized echo (out_dir excluded so a moved run directory keeps its hash)
    nlohmann::json norm;
    norm["seed"] = cfg.seed;
    norm["task"] = task_kind_name(cfg.task);
    norm["dataset"] = {{"label_column", cfg.dataset.label_column}};
    if (cfg.dataset.path) norm["dataset"]["path"] = cfg.dataset.path->string();
    if (cfg.dataset.time_column) {
        norm["dataset"]["time_column"] = *cfg.dataset.time_column;
        norm["dataset"]["event_column"] = *cfg.dataset.event_column;
    }
    if (cfg.dataset.generate) {
        norm["dataset"]["generate"] = {{"kind", cfg.dataset.generate->kind},
                                       {"n", cfg.dataset.generate->n},
                                       {"d", cfg.dataset.generate->d},
                                       {"delta", cfg.dataset.generate->params.delta},
                                       {"censor_frac", cfg.dataset.generate->params.censor_frac}};
    }
    norm["split"] = {{"train_frac", cfg.split.train_frac},
                     {"val_frac", cfg.split.val_frac},
                     {"test_frac", cfg.split.test_frac},
                     {"stratify", cfg.split.stratify}};
    norm["model"] = {{"rounds", cfg.gbdt.rounds},
                     {"learning_rate", cfg.gbdt.learning_rate},
                     {"max_depth", cfg.gbdt.max_depth},
                     {"subsample_fraction", cfg.gbdt.subsample_fraction},
                     {"aft_sigma", cfg.gbdt.aft_sigma},
                     {"l2_leaf", cfg.gbdt.l2_leaf},
                     {"min_samples_leaf", cfg.gbdt.min_samples_leaf},
                     {"class_weighting", cfg.gbdt.class_weighting},
                     {"cox_l2", cfg.cox.l2_strength},
                     {"cox_max_iters", cfg.cox.max_iters},
                     {"cox_tol", cfg.cox.tol}};
    norm["condense"] = {{"ipc", cfg.condense.ipc},
                        {"rho", cfg.condense.rho},
                        {"alpha_eps", cfg.condense.alpha_eps},
                        {"fd_step_lo", cfg.condense.fd_step_lo},
                        {"fd_step_hi", cfg.condense.fd_step_hi},
                        {"optimizer_lr", cfg.condense.optimizer_lr},
                        {"max_iters", cfg.condense.max_iters},
                        {"eval_every", cfg.condense.eval_every},
                        {"patience", cfg.condense.patience},
                        {"k_strata", cfg.condense.k_strata},
                        {"n_time_bins", cfg.condense.n_time_bins},
                        {"class1_fraction", cfg.condense.class1_fraction}};
    if (cfg.dp) {
        norm["dp"] = {{"clip_norm", cfg.dp->clip_norm},
                      {"sigma_base", cfg.dp->sigma_base},
                      {"delta", cfg.dp->delta},
                      {"sigma_grid_multipliers", cfg.dp->sigma_grid_multipliers},
                      {"rdp_orders", cfg.dp->rdp_orders}};
    }
    if (cfg.attack) {
        norm["attack"] = {{"k_neighbors", cfg.attack->mia.k_neighbors},
                          {"repeats", cfg.attack->mia.repeats},
                          {"train_frac", cfg.attack->mia.train_frac},
                          {"n_members", cfg.attack->n_members},
                          {"aia_targets", cfg.attack->aia_targets}};
    }
    cfg.normalized = std::move(norm);
    cfg.config_hash = hash_json(cfg.normalized);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    nlohmann::json raw;
    try {
        in >> raw;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: parse error in '" + path.string() + "': " + e.what());
    }
    return validate_config(raw);
}

}  // namespace tabdc::pipeline
