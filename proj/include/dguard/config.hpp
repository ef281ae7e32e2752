#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dguard/certify.hpp"
#include "dguard/clustering.hpp"
#include "dguard/eval.hpp"
#include "dguard/objectness.hpp"
#include "dguard/train.hpp"

namespace dguard {

// One flat `key = value` file covers every stage's knobs; unknown keys are
// rejected so typos fail loudly. The effective set is echoed as comment
// lines into every CSV a run produces.
struct RunConfig {
    int r = 9, s = 4;    // receptive field
    int classes = 3;     // object classes (background is classes)
    PredictorConfig predictor{6, 6, 22.0};
    ClusterConfig cluster{3.0, 20};
    // Feature-cell gap separating close from far: the reference value at the
    // 48x48 grid scale is 8; desk grids are ~22 cells tall, where 8 would
    // leave no reachable far region.
    int close_distance = 4;
    EvalConfig eval{};
    double confidence_threshold = 0.0;  // operating threshold for detect verdicts
    TrainConfig train{};

    void validate() const {
        if (r < 1 || s < 1) throw std::invalid_argument("config: r and s must be >= 1");
        if (classes < 1) throw std::invalid_argument("config: classes must be >= 1");
        predictor.validate();
        cluster.validate();
        eval.validate();
        if (close_distance < 1) throw std::invalid_argument("config: close_distance must be >= 1");
        if (confidence_threshold < 0 || confidence_threshold > 1)
            throw std::invalid_argument("config: confidence_threshold out of range");
        if (train.epochs < 0) throw std::invalid_argument("config: negative train_epochs");
        if (!(train.learning_rate > 0)) throw std::invalid_argument("config: train_lr must be > 0");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

inline std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<double> parse_grid(const std::string& value) {
    std::vector<double> grid;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        grid.push_back(std::stod(item));
    }
    return grid;
}

} // namespace detail

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (detail::trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: malformed line " + std::to_string(lineno));
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        try {
            if (key == "r") cfg.r = std::stoi(value);
            else if (key == "s") cfg.s = std::stoi(value);
            else if (key == "classes") cfg.classes = std::stoi(value);
            else if (key == "window_x") cfg.predictor.window_x = std::stoi(value);
            else if (key == "window_y") cfg.predictor.window_y = std::stoi(value);
            else if (key == "threshold") cfg.predictor.threshold = std::stod(value);
            else if (key == "eps") cfg.cluster.eps = std::stod(value);
            else if (key == "min_points") cfg.cluster.min_points = std::stoi(value);
            else if (key == "close_distance") cfg.close_distance = std::stoi(value);
            else if (key == "iou_tau") cfg.eval.iou_tau = std::stod(value);
            else if (key == "recall_anchor") cfg.eval.recall_anchor = std::stod(value);
            else if (key == "confidence_grid") cfg.eval.confidence_grid = detail::parse_grid(value);
            else if (key == "confidence_threshold") cfg.confidence_threshold = std::stod(value);
            else if (key == "train_lr") cfg.train.learning_rate = std::stod(value);
            else if (key == "train_epochs") cfg.train.epochs = std::stoi(value);
            else if (key == "train_seed") cfg.train.seed = std::stoull(value);
            else throw std::runtime_error("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config: bad value for '" + key + "' at line " +
                                     std::to_string(lineno));
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("config: cannot open: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

// The effective configuration as (key, value) pairs, in file order; CSV
// emitters prepend these as comment lines.
inline std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& cfg) {
    std::string grid;
    for (std::size_t k = 0; k < cfg.eval.confidence_grid.size(); ++k) {
        if (k) grid += ",";
        grid += detail::format_g(cfg.eval.confidence_grid[k]);
    }
    return {
        {"r", std::to_string(cfg.r)},
        {"s", std::to_string(cfg.s)},
        {"classes", std::to_string(cfg.classes)},
        {"window_x", std::to_string(cfg.predictor.window_x)},
        {"window_y", std::to_string(cfg.predictor.window_y)},
        {"threshold", detail::format_g(cfg.predictor.threshold)},
        {"eps", detail::format_g(cfg.cluster.eps)},
        {"min_points", std::to_string(cfg.cluster.min_points)},
        {"close_distance", std::to_string(cfg.close_distance)},
        {"iou_tau", detail::format_g(cfg.eval.iou_tau)},
        {"recall_anchor", detail::format_g(cfg.eval.recall_anchor)},
        {"confidence_grid", grid},
        {"confidence_threshold", detail::format_g(cfg.confidence_threshold)},
        {"train_lr", detail::format_g(cfg.train.learning_rate)},
        {"train_epochs", std::to_string(cfg.train.epochs)},
        {"train_seed", std::to_string(cfg.train.seed)},
    };
}

inline std::string config_echo(const RunConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : config_entries(cfg)) out += "# " + k + " = " + v + "\n";
    return out;
}

// Reads `# key = value` comment lines back out of a CSV produced by a run.
inline std::vector<std::pair<std::string, std::string>> parse_csv_comments(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] != '#') break;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out.emplace_back(detail::trim(line.substr(1, eq - 1)), detail::trim(line.substr(eq + 1)));
    }
    return out;
}

} // namespace dguard
