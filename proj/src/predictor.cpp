#include "tabdc/predictor.hpp"

#include <algorithm>
#include <fstream>

#include "tabdc/cox.hpp"
#include "tabdc/errors.hpp"
#include "tabdc/gbdt.hpp"
#include "tabdc/logistic.hpp"

namespace tabdc::model {

std::string task_name(Task t) {
    switch (t) {
        case Task::binary_classification: return "binary_classification";
        case Task::cox_risk: return "cox_risk";
        case Task::aft_log_time: return "aft_log_time";
        case Task::regression: return "regression";
    }
    return "?";
}

Task task_from_name(const std::string& name) {
    if (name == "binary_classification") return Task::binary_classification;
    if (name == "cox_risk") return Task::cox_risk;
    if (name == "aft_log_time") return Task::aft_log_time;
    if (name == "regression") return Task::regression;
    throw ConfigError("unknown task '" + name + "'");
}

std::vector<double> Predictor::predict(const Matrix& x) const {
    if (x.rows() > 0 && x.cols() != n_features())
        throw std::invalid_argument("predict: expected " + std::to_string(n_features()) +
                                    " features, got " + std::to_string(x.cols()));
    std::vector<double> out;
    if (x.rows() == 0) return out;
    predict_raw(x, out);
    if (task_ == Task::binary_classification)
        for (double& p : out) p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return out;
}

std::unique_ptr<Predictor> predictor_from_json(const nlohmann::json& doc) {
    const int version = doc.value("format_version", -1);
    if (version != kModelFormatVersion)
        throw ConfigError("model file format_version " + std::to_string(version) +
                          " not supported");
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "gbdt") return GbdtModel::from_json(doc);
    if (kind == "cox") return CoxModel::from_json(doc);
    if (kind == "logistic") return LogisticModel::from_json(doc);
    throw ConfigError("unknown model kind '" + kind + "'");
}

void save_predictor(const Predictor& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file '" + path.string() + "'");
    out << model.to_json().dump(2) << '\n';
}

std::unique_ptr<Predictor> load_predictor(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DependencyError("cannot open model file '" + path.string() + "'");
    nlohmann::json doc;
    in >> doc;
    return predictor_from_json(doc);
}

}  // namespace tabdc::model
