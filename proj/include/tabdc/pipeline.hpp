#pragma once

#include <string>
#include <vector>

#include "tabdc/config.hpp"

namespace tabdc::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

struct StageOptions {
    bool force = false;
    std::vector<int> ipc_list;  // empty = config default
    int threads = 1;
};

struct StageResult {
    bool skipped = false;
    std::vector<std::filesystem::path> artifacts;
    std::string note;
};

// Serializes a run directory against concurrent invocations. Created
// exclusively; removed on destruction.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& out_dir);
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path path_;
};

// Atomic JSON write (write to a temp name, then rename).
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);

// Records stage artifacts, timings and the config hash; rewritten after
// every completed stage.
void manifest_record(const PipelineConfig& cfg, const std::string& stage,
                     const std::vector<std::filesystem::path>& artifacts, double seconds);

StageResult run_prepare(const PipelineConfig& cfg, const StageOptions& opt);
StageResult run_train_ref(const PipelineConfig& cfg, const StageOptions& opt);
StageResult run_condense(const PipelineConfig& cfg, const StageOptions& opt, int ipc);
StageResult run_eval(const PipelineConfig& cfg, const StageOptions& opt, int ipc);
StageResult run_attack(const PipelineConfig& cfg, const StageOptions& opt, int ipc);
StageResult run_budget(const PipelineConfig& cfg, const StageOptions& opt, int ipc);
StageResult run_report(const PipelineConfig& cfg, const StageOptions& opt);

// Dispatches one CLI command (prepare | train-ref | condense | eval |
// attack | budget | report), iterating the ipc list where relevant.
int run_command(const std::string& command, const PipelineConfig& cfg, const StageOptions& opt);

}  // namespace tabdc::pipeline
