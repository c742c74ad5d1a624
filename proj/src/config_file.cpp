#include "uhdres/config_file.hpp"

#include <fstream>
#include <sstream>

namespace uhdres {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        int64_t r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "on") return true;
    if (v == "0" || v == "false" || v == "off") return false;
    throw ConfigError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

std::vector<int64_t> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    return out;
}

}  // namespace

FileConfig parse_config_text(const std::string& text) {
    FileConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value, got '" +
                              line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));

        if (key == "initial_channels") cfg.model.initial_channels = parse_int(key, val);
        else if (key == "level_depths") cfg.model.level_depths = parse_int_list(key, val);
        else if (key == "expansion") cfg.model.expansion = parse_int(key, val);
        else if (key == "msca_kernels") cfg.model.msca_kernels = parse_int_list(key, val);
        else if (key == "strip_kernel") cfg.model.strip_kernel = parse_int(key, val);
        else if (key == "cam_reduction") cfg.model.cam_reduction = parse_int(key, val);
        else if (key == "use_msca") cfg.model.use_msca = parse_bool(key, val);
        else if (key == "use_samu") cfg.model.use_samu = parse_bool(key, val);
        else if (key == "use_sru") cfg.model.use_sru = parse_bool(key, val);
        else if (key == "use_sgfn") cfg.model.use_sgfn = parse_bool(key, val);
        else if (key == "patch_size") cfg.train.patch_size = parse_int(key, val);
        else if (key == "batch_size") cfg.train.batch_size = parse_int(key, val);
        else if (key == "total_steps") cfg.train.total_steps = parse_int(key, val);
        else if (key == "seed") cfg.train.seed = static_cast<uint64_t>(parse_int(key, val));
        else if (key == "lambda") cfg.train.lambda_weight = parse_double(key, val);
        else if (key == "checkpoint_every") cfg.train.checkpoint_every = parse_int(key, val);
        else if (key == "eval_every") cfg.train.eval_every = parse_int(key, val);
        else if (key == "lr_max") cfg.train.lr_max = parse_double(key, val);
        else if (key == "lr_min") cfg.train.lr_min = parse_double(key, val);
        else if (key == "weight_decay") cfg.train.weight_decay = parse_double(key, val);
        else if (key == "clip_norm") cfg.train.clip_norm = parse_double(key, val);
        else throw ConfigError("unknown config key '" + key + "'");
    }
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

FileConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace uhdres
