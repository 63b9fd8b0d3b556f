#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabdc/matrix.hpp"

namespace tabdc::model {

// Probabilities are clamped away from {0,1} so log-losses stay finite.
inline constexpr double kProbClamp = 1e-7;

// What a trained model's outputs mean. regression is a utility mode (raw
// scores) used by the attack harness; reference models use the other three.
enum class Task { binary_classification, cox_risk, aft_log_time, regression };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

// The black-box prediction contract. The condensation engine only ever sees
// this surface: batch in, scores out, deterministically.
class Predictor {
public:
    explicit Predictor(Task task) : task_(task) {}
    virtual ~Predictor() = default;

    Task task() const { return task_; }
    virtual std::size_t n_features() const = 0;

    // k x d in, k scores out. Classification outputs are probabilities in
    // [kProbClamp, 1 - kProbClamp].
    std::vector<double> predict(const Matrix& x) const;

    virtual nlohmann::json to_json() const = 0;

protected:
    virtual void predict_raw(const Matrix& x, std::vector<double>& out) const = 0;

private:
    Task task_;
};

inline constexpr int kModelFormatVersion = 1;

void save_predictor(const Predictor& model, const std::filesystem::path& path);
std::unique_ptr<Predictor> load_predictor(const std::filesystem::path& path);
std::unique_ptr<Predictor> predictor_from_json(const nlohmann::json& doc);

}  // namespace tabdc::model
