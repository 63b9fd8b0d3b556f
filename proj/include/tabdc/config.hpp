#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabdc/attacks.hpp"
#include "tabdc/benchmark.hpp"
#include "tabdc/cox.hpp"
#include "tabdc/data.hpp"
#include "tabdc/engine.hpp"
#include "tabdc/gbdt.hpp"
#include "tabdc/privacy.hpp"

namespace tabdc::pipeline {

enum class TaskKind { classification, cox, aft };

std::string task_kind_name(TaskKind t);
model::Task to_model_task(TaskKind t);

struct GenerateSpec {
    std::string kind;  // two_gaussians | weibull_survival
    std::size_t n = 5000;
    std::size_t d = 10;
    data::BenchmarkParams params;
};

struct DatasetSpec {
    std::optional<std::filesystem::path> path;
    std::string label_column = "label";
    std::optional<std::string> time_column;
    std::optional<std::string> event_column;
    std::optional<GenerateSpec> generate;
};

struct AttackSpec {
    attack::MiaConfig mia;
    attack::AiaConfig aia;
    std::size_t n_members = 1000;
    std::vector<std::string> aia_targets;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out_dir;
    TaskKind task = TaskKind::classification;
    DatasetSpec dataset;
    data::SplitSpec split;
    model::GbdtConfig gbdt;
    model::CoxConfig cox;
    engine::CondenseConfig condense;
    std::optional<privacy::DpConfig> dp;
    std::optional<AttackSpec> attack;

    // fully-defaulted configuration echo; hashing input
    nlohmann::json normalized;
    std::string config_hash;
};

// Parses, fills paper-regime defaults, rejects unknown keys (with a nearest
// known-key suggestion) and out-of-range values, and checks that referenced
// paths exist and the task is consistent with the dataset schema.
PipelineConfig validate_config(const nlohmann::json& raw);
PipelineConfig load_config(const std::filesystem::path& path);

std::string hash_json(const nlohmann::json& doc);

}  // namespace tabdc::pipeline
