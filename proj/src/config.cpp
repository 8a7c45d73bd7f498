#include "ctt/config.hpp"

#include <charconv>
#include <climits>
#include <fstream>
#include <sstream>

#include "ctt/common.hpp"

namespace ctt {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
    throw ConfigError("config key \"" + key + "\": cannot parse \"" + value + "\" as " + want);
}

long long parse_ll(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    const long long x = parse_ll(key, v);
    if (x < INT_MIN || x > INT_MAX) bad_value(key, v, "a 32-bit integer");
    return static_cast<int>(x);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
        bad_value(key, v, "an unsigned 64-bit integer");
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    bad_value(key, v, "a boolean (true/false/1/0/on/off)");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
    if (out.empty()) bad_value(key, v, "a comma-separated integer list");
    return out;
}

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_int_list(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(xs[i]);
    }
    return s;
}

struct KeyDef {
    const char* key;
    void (*set)(TrainConfig&, const std::string&, const std::string&);
    std::string (*get)(const TrainConfig&);
};

// One row per documented key; dump order is table order.
const KeyDef kKeys[] = {
    {"pairs", [](TrainConfig& c, const std::string& k, const std::string& v) { c.pairs = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.pairs); }},
    {"topology", [](TrainConfig& c, const std::string&, const std::string& v) { c.topology = topology_from_string(v); },
     [](const TrainConfig& c) { return to_string(c.topology); }},
    {"backbone.feature_dim", [](TrainConfig& c, const std::string& k, const std::string& v) { c.backbone.feature_dim = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.backbone.feature_dim); }},
    {"backbone.stride", [](TrainConfig& c, const std::string& k, const std::string& v) { c.backbone.stride = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.backbone.stride); }},
    {"backbone.widths", [](TrainConfig& c, const std::string& k, const std::string& v) { c.backbone.widths = parse_int_list(k, v); },
     [](const TrainConfig& c) { return format_int_list(c.backbone.widths); }},
    {"backbone.num_classes", [](TrainConfig& c, const std::string& k, const std::string& v) { c.backbone.num_classes = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.backbone.num_classes); }},
    {"weights.sup", [](TrainConfig& c, const std::string& k, const std::string& v) { c.weights.sup = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.weights.sup); }},
    {"weights.ct", [](TrainConfig& c, const std::string& k, const std::string& v) { c.weights.ct = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.weights.ct); }},
    {"weights.hc", [](TrainConfig& c, const std::string& k, const std::string& v) { c.weights.hc = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.weights.hc); }},
    {"weights.lc", [](TrainConfig& c, const std::string& k, const std::string& v) { c.weights.lc = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.weights.lc); }},
    {"contrast.temperature", [](TrainConfig& c, const std::string& k, const std::string& v) { c.contrast.temperature = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.contrast.temperature); }},
    {"contrast.phi", [](TrainConfig& c, const std::string& k, const std::string& v) { c.contrast.phi = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.contrast.phi); }},
    {"bank_capacity", [](TrainConfig& c, const std::string& k, const std::string& v) { c.bank_capacity = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.bank_capacity); }},
    {"bank_dim", [](TrainConfig& c, const std::string& k, const std::string& v) { c.bank_dim = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.bank_dim); }},
    {"selection", [](TrainConfig& c, const std::string&, const std::string& v) { c.selection = selection_from_string(v); },
     [](const TrainConfig& c) { return to_string(c.selection); }},
    {"ema_decay", [](TrainConfig& c, const std::string& k, const std::string& v) { c.ema_decay = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.ema_decay); }},
    {"base_lr", [](TrainConfig& c, const std::string& k, const std::string& v) { c.base_lr = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.base_lr); }},
    {"momentum", [](TrainConfig& c, const std::string& k, const std::string& v) { c.momentum = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.momentum); }},
    {"weight_decay", [](TrainConfig& c, const std::string& k, const std::string& v) { c.weight_decay = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.weight_decay); }},
    {"lr_power", [](TrainConfig& c, const std::string& k, const std::string& v) { c.lr_power = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.lr_power); }},
    {"max_iters", [](TrainConfig& c, const std::string& k, const std::string& v) { c.max_iters = parse_ll(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.max_iters); }},
    {"batch_labeled", [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_labeled = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.batch_labeled); }},
    {"batch_unlabeled", [](TrainConfig& c, const std::string& k, const std::string& v) { c.batch_unlabeled = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.batch_unlabeled); }},
    {"crop", [](TrainConfig& c, const std::string& k, const std::string& v) { c.crop = parse_int(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.crop); }},
    {"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.seed); }},
    {"lc_directional", [](TrainConfig& c, const std::string& k, const std::string& v) { c.lc_directional = parse_bool(k, v); },
     [](const TrainConfig& c) { return std::string(c.lc_directional ? "true" : "false"); }},
    {"eval_network", [](TrainConfig& c, const std::string&, const std::string& v) { c.eval_network = eval_network_from_string(v); },
     [](const TrainConfig& c) { return to_string(c.eval_network); }},
    {"data.dir", [](TrainConfig& c, const std::string&, const std::string& v) { c.data.dir = v; },
     [](const TrainConfig& c) { return c.data.dir; }},
    {"data.val_dir", [](TrainConfig& c, const std::string&, const std::string& v) { c.data.val_dir = v; },
     [](const TrainConfig& c) { return c.data.val_dir; }},
    {"data.labeled_fraction", [](TrainConfig& c, const std::string& k, const std::string& v) { c.data.labeled_fraction = parse_double(k, v); },
     [](const TrainConfig& c) { return format_double(c.data.labeled_fraction); }},
    {"data.split_seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.data.split_seed = parse_u64(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.data.split_seed); }},
    {"log_interval", [](TrainConfig& c, const std::string& k, const std::string& v) { c.log_interval = parse_ll(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.log_interval); }},
    {"eval_interval", [](TrainConfig& c, const std::string& k, const std::string& v) { c.eval_interval = parse_ll(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.eval_interval); }},
    {"checkpoint_interval", [](TrainConfig& c, const std::string& k, const std::string& v) { c.checkpoint_interval = parse_ll(k, v); },
     [](const TrainConfig& c) { return std::to_string(c.checkpoint_interval); }},
};

}  // namespace

std::string to_string(Topology t) {
    switch (t) {
        case Topology::kCrossTeacher: return "cross_teacher";
        case Topology::kMeanTeacher: return "mean_teacher";
        case Topology::kMutual: return "mutual";
        case Topology::kDualTeacher: return "dual_teacher";
        case Topology::kSelfTraining: return "self_training";
        case Topology::kSupervisedOnly: return "supervised_only";
        case Topology::kEnsemble: return "ensemble";
    }
    throw StateError("to_string: bad Topology");
}

std::string to_string(EvalNetwork n) {
    switch (n) {
        case EvalNetwork::kStudentA: return "student_a";
        case EvalNetwork::kTeacherA: return "teacher_a";
        case EvalNetwork::kEnsemble: return "ensemble";
    }
    throw StateError("to_string: bad EvalNetwork");
}

std::string to_string(SelectionMode m) {
    return m == SelectionMode::kRandom ? "random" : "topk";
}

Topology topology_from_string(const std::string& s) {
    for (Topology t : {Topology::kCrossTeacher, Topology::kMeanTeacher, Topology::kMutual,
                       Topology::kDualTeacher, Topology::kSelfTraining, Topology::kSupervisedOnly,
                       Topology::kEnsemble}) {
        if (to_string(t) == s) return t;
    }
    throw ConfigError("unknown topology \"" + s +
                      "\" (valid: cross_teacher, mean_teacher, mutual, dual_teacher, "
                      "self_training, supervised_only, ensemble)");
}

EvalNetwork eval_network_from_string(const std::string& s) {
    for (EvalNetwork n : {EvalNetwork::kStudentA, EvalNetwork::kTeacherA, EvalNetwork::kEnsemble}) {
        if (to_string(n) == s) return n;
    }
    throw ConfigError("unknown eval_network \"" + s +
                      "\" (valid: student_a, teacher_a, ensemble)");
}

SelectionMode selection_from_string(const std::string& s) {
    if (s == "random") return SelectionMode::kRandom;
    if (s == "topk") return SelectionMode::kTopK;
    throw ConfigError("unknown selection mode \"" + s + "\" (valid: random, topk)");
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> ks;
        for (const auto& def : kKeys) ks.emplace_back(def.key);
        return ks;
    }();
    return keys;
}

void apply_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& def : kKeys) {
        if (key == def.key) {
            def.set(cfg, key, value);
            return;
        }
    }
    std::string msg = "unknown config key \"" + key + "\". Valid keys:";
    for (const auto& k : config_keys()) msg += "\n  " + k;
    throw ConfigError(msg);
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected \"key = value\", got \"" + line + "\"");
        }
        apply_config_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text, std::move(base));
}

std::string dump_config(const TrainConfig& cfg) {
    std::string out;
    for (const auto& def : kKeys) {
        out += def.key;
        out += " = ";
        out += def.get(cfg);
        out += "\n";
    }
    return out;
}

void validate(const TrainConfig& cfg) {
    validate(cfg.backbone);
    if (cfg.pairs < 1) throw ConfigError("TrainConfig.pairs: must be >= 1");
    const int min_pairs = [&] {
        switch (cfg.topology) {
            case Topology::kCrossTeacher:
            case Topology::kMutual:
            case Topology::kDualTeacher:
            case Topology::kEnsemble: return 2;
            default: return 1;
        }
    }();
    if (cfg.pairs < min_pairs) {
        throw ConfigError("TrainConfig.pairs: topology " + to_string(cfg.topology) +
                          " needs at least " + std::to_string(min_pairs) + " pairs");
    }
    if (cfg.topology == Topology::kSelfTraining && cfg.pairs != 1) {
        throw ConfigError("TrainConfig.pairs: self_training uses exactly 1 pair");
    }
    if (cfg.weights.sup < 0 || cfg.weights.ct < 0 || cfg.weights.hc < 0 || cfg.weights.lc < 0) {
        throw ConfigError("TrainConfig.weights: loss weights must be >= 0");
    }
    if (!(cfg.contrast.temperature > 0)) {
        throw ConfigError("TrainConfig.contrast.temperature: must be > 0");
    }
    if (cfg.contrast.phi < 0 || cfg.contrast.phi > 1) {
        throw ConfigError("TrainConfig.contrast.phi: must be in [0, 1]");
    }
    if (cfg.bank_capacity < 1) throw ConfigError("TrainConfig.bank_capacity: must be >= 1");
    if (cfg.bank_dim != cfg.backbone.feature_dim) {
        throw ConfigError("TrainConfig.bank_dim: must equal backbone.feature_dim (" +
                          std::to_string(cfg.bank_dim) + " vs " +
                          std::to_string(cfg.backbone.feature_dim) + ")");
    }
    if (cfg.ema_decay < 0 || cfg.ema_decay > 1) {
        throw ConfigError("TrainConfig.ema_decay: must be in [0, 1]");
    }
    if (!(cfg.base_lr > 0)) throw ConfigError("TrainConfig.base_lr: must be > 0");
    if (cfg.momentum < 0 || cfg.momentum >= 1) {
        throw ConfigError("TrainConfig.momentum: must be in [0, 1)");
    }
    if (cfg.weight_decay < 0) throw ConfigError("TrainConfig.weight_decay: must be >= 0");
    if (!(cfg.lr_power > 0)) throw ConfigError("TrainConfig.lr_power: must be > 0");
    if (cfg.max_iters < 0) throw ConfigError("TrainConfig.max_iters: must be >= 0");
    if (cfg.batch_labeled < 1) throw ConfigError("TrainConfig.batch_labeled: must be >= 1");
    if (cfg.batch_unlabeled < 0) throw ConfigError("TrainConfig.batch_unlabeled: must be >= 0");
    if (cfg.crop < 2 * cfg.backbone.stride || cfg.crop % cfg.backbone.stride != 0) {
        throw ConfigError("TrainConfig.crop: must be a multiple of backbone.stride and >= 2x it");
    }
    if (!(cfg.data.labeled_fraction > 0) || cfg.data.labeled_fraction > 1) {
        throw ConfigError("TrainConfig.data.labeled_fraction: must be in (0, 1]");
    }
    if (cfg.log_interval < 1) throw ConfigError("TrainConfig.log_interval: must be >= 1");
    if (cfg.eval_interval < 0) throw ConfigError("TrainConfig.eval_interval: must be >= 0");
    if (cfg.checkpoint_interval < 0) {
        throw ConfigError("TrainConfig.checkpoint_interval: must be >= 0");
    }
}

}  // namespace ctt
