#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctt/checkpoint.hpp"
#include "ctt/common.hpp"
#include "ctt/config.hpp"
#include "ctt/dataset.hpp"
#include "ctt/evaluation.hpp"
#include "ctt/plot.hpp"
#include "ctt/trainer.hpp"

namespace fs = std::filesystem;
using namespace ctt;

namespace {

std::vector<std::string> split_list(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream ss(s);
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// --- generate-data ---

struct GenOpts {
    std::string out;
    int count = 800;
    int classes = 4;
    int height = 96;
    int width = 96;
    int shapes_min = 2;
    int shapes_max = 5;
    double color_jitter = 0.25;
    double noise_std = 0.05;
    std::uint64_t seed = 7;
    bool force = false;
};

int cmd_generate(const GenOpts& o) {
    const fs::path out = o.out;
    if (fs::exists(out) && !fs::is_empty(out) && !o.force) {
        throw ConfigError("output directory " + out.string() +
                          " exists and is not empty; pass --force to overwrite");
    }
    SceneSpec spec;
    spec.height = o.height;
    spec.width = o.width;
    spec.num_classes = o.classes;
    spec.shapes_min = o.shapes_min;
    spec.shapes_max = o.shapes_max;
    spec.color_jitter = o.color_jitter;
    spec.noise_std = o.noise_std;
    spec.seed = o.seed;
    write_dataset(out, spec, o.count);
    std::cout << "wrote " << o.count << " samples (" << o.width << "x" << o.height << ", "
              << o.classes << " classes) to " << out.string() << "\n"
              << "manifest: " << (out / "manifest").string() << "\n";
    return 0;
}

// --- train ---

struct TrainOpts {
    std::string config_path;
    std::string run_dir = "run";
    bool force = false;
};

int apply_overrides(TrainConfig& cfg, const std::vector<std::string>& extras) {
    for (const std::string& arg : extras) {
        const auto eq = arg.find('=');
        if (arg.rfind("--", 0) != 0 || eq == std::string::npos || eq <= 2) {
            std::cerr << "malformed override \"" << arg << "\"; expected --key=value\n";
            return 2;
        }
        apply_config_kv(cfg, arg.substr(2, eq - 2), arg.substr(eq + 1));
    }
    return 0;
}

int cmd_train(const TrainOpts& o, const std::vector<std::string>& extras) {
    TrainConfig cfg;
    if (!o.config_path.empty()) cfg = load_config_file(o.config_path, cfg);
    if (const int rc = apply_overrides(cfg, extras)) return rc;
    validate(cfg);

    const fs::path run_dir = o.run_dir;
    if (fs::exists(run_dir / "metrics.jsonl") && !o.force) {
        throw ConfigError("run directory " + run_dir.string() +
                          " already holds a metrics log; pass --force to overwrite");
    }
    fs::create_directories(run_dir);
    std::ofstream(run_dir / "config.resolved.cfg") << dump_config(cfg);

    const RunResult res = run_training(cfg, run_dir);
    std::cout << "trained " << res.iterations << " iterations\n";
    if (res.final_miou) {
        std::printf("final miou: %.4f\n", *res.final_miou);
    }
    std::cout << "checkpoint: " << res.final_checkpoint.string() << "\n"
              << "metrics: " << res.metrics_log.string() << "\n";
    return 0;
}

// --- eval ---

struct EvalOpts {
    std::string checkpoint;
    std::string split = "val";
    std::string network;  // empty: take the checkpoint's eval_network
    std::string report;
    std::string data_dir;
    std::string features;
    int features_cap = 200;
};

std::vector<ModelParams> restore_role(const Checkpoint& ck, const TrainConfig& cfg,
                                      const std::string& role) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : ck.tensors) by_name[name] = &tensor;
    std::vector<ModelParams> out;
    for (int p = 0; p < cfg.pairs; ++p) {
        ModelParams mp = init_model(cfg.backbone);  // shapes; values replaced below
        for (auto& t : mp.tensors) {
            const std::string key = "pair" + std::to_string(p) + "." + role + "." + t.name;
            const auto it = by_name.find(key);
            if (it == by_name.end()) throw DataError("checkpoint missing tensor " + key);
            if (!it->second->same_shape(t.value)) {
                throw DataError("checkpoint tensor " + key + " has shape " +
                                it->second->shape_str() + ", expected " + t.value.shape_str());
            }
            t.value = *it->second;
        }
        out.push_back(std::move(mp));
    }
    return out;
}

DatasetOnDisk read_matching_dataset(const fs::path& dir, const TrainConfig& cfg) {
    DatasetOnDisk ds = read_dataset(dir);
    if (ds.spec.num_classes != cfg.backbone.num_classes) {
        throw ConfigError("dataset " + dir.string() + " has " +
                          std::to_string(ds.spec.num_classes) + " classes, checkpoint expects " +
                          std::to_string(cfg.backbone.num_classes));
    }
    return ds;
}

int cmd_eval(const EvalOpts& o) {
    const Checkpoint ck = load_checkpoint(o.checkpoint);
    const TrainConfig cfg = parse_config_text(ck.config_text, TrainConfig{});

    EvalNetwork network =
        cfg.topology == Topology::kEnsemble ? EvalNetwork::kEnsemble : cfg.eval_network;
    if (!o.network.empty()) network = eval_network_from_string(o.network);

    const Network net(cfg.backbone);
    const std::vector<ModelParams> students = restore_role(ck, cfg, "student");
    std::vector<ModelParams> teachers;
    std::vector<const ModelParams*> models;
    switch (network) {
        case EvalNetwork::kEnsemble:
            for (const auto& s : students) models.push_back(&s);
            break;
        case EvalNetwork::kTeacherA:
            teachers = restore_role(ck, cfg, "teacher");
            models.push_back(&teachers[0]);
            break;
        case EvalNetwork::kStudentA:
            models.push_back(&students[0]);
            break;
    }

    std::vector<Sample> samples;
    if (o.split == "val") {
        const std::string dir = o.data_dir.empty() ? cfg.data.val_dir : o.data_dir;
        if (dir.empty()) {
            throw ConfigError("no validation directory: checkpoint config has no data.val_dir "
                              "and --data-dir was not given");
        }
        samples = read_matching_dataset(dir, cfg).samples;
    } else if (o.split == "train" || o.split == "labeled" || o.split == "unlabeled") {
        const std::string dir = o.data_dir.empty() ? cfg.data.dir : o.data_dir;
        if (dir.empty()) {
            throw ConfigError("no training directory: checkpoint config has no data.dir "
                              "and --data-dir was not given");
        }
        DatasetOnDisk ds = read_matching_dataset(dir, cfg);
        if (o.split == "train") {
            samples = std::move(ds.samples);
        } else {
            const SplitResult split = split_labeled(
                ds.samples.size(), SplitSpec{cfg.data.labeled_fraction, cfg.data.split_seed});
            for (const int i : o.split == "labeled" ? split.labeled : split.unlabeled) {
                samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
            }
        }
    } else {
        std::cerr << "unknown split \"" << o.split
                  << "\"; expected val, train, labeled or unlabeled\n";
        return 2;
    }

    const ConfusionMatrix cm = evaluate_model(net, models, samples);
    const double mean = miou(cm).mean;

    const fs::path report_path = o.report.empty() ? fs::path(o.checkpoint + ".eval.txt")
                                                  : fs::path(o.report);
    std::ofstream rep(report_path);
    if (!rep) throw DataError("cannot write report: " + report_path.string());
    rep << "checkpoint: " << o.checkpoint << "\n"
        << "iteration: " << ck.iteration << "\n"
        << "split: " << o.split << " (" << samples.size() << " samples)\n"
        << "network: " << to_string(network) << "\n\n"
        << miou_report(cm);

    std::printf("miou[%s, %s]: %.4f\n", o.split.c_str(), to_string(network).c_str(), mean);
    std::cout << "report: " << report_path.string() << "\n";

    if (!o.features.empty()) {
        const std::string dir = o.data_dir.empty() ? cfg.data.dir : o.data_dir;
        if (dir.empty()) throw ConfigError("feature export needs data.dir or --data-dir");
        DatasetOnDisk ds = read_matching_dataset(dir, cfg);
        const SplitResult split = split_labeled(
            ds.samples.size(), SplitSpec{cfg.data.labeled_fraction, cfg.data.split_seed});
        std::vector<const Sample*> lab, unlab;
        for (const int i : split.labeled) lab.push_back(&ds.samples[static_cast<std::size_t>(i)]);
        for (const int i : split.unlabeled) unlab.push_back(&ds.samples[static_cast<std::size_t>(i)]);
        export_features(net, *models[0], lab, unlab, o.features_cap, o.features);
        std::cout << "features: " << o.features << "\n";
    }
    return 0;
}

// --- ablate ---

struct AblateOpts {
    std::string config_path;
    std::string out_dir = "ablation";
    std::string toggles = "sup;sup,ct;sup,hc,lc;sup,ct,hc,lc";
    std::string topologies;
    std::string pairs;
    std::string banks;
    std::string phis;
    std::string directional;
    std::string seeds;
    bool force = false;
};

struct Variant {
    TrainConfig cfg;
    std::string losses;  // "sup+ct" style tag
    std::string key;     // canonical config dump, used for stable ordering
};

int cmd_ablate(const AblateOpts& o) {
    TrainConfig base;
    if (!o.config_path.empty()) base = load_config_file(o.config_path, base);

    const std::vector<std::string> toggle_sets = split_list(o.toggles, ';');
    if (toggle_sets.empty()) {
        std::cerr << "--toggles is empty; at least one loss set is required\n";
        return 2;
    }
    std::vector<std::pair<std::string, LossWeights>> losses;
    for (const std::string& set : toggle_sets) {
        std::set<std::string> terms;
        for (const std::string& t : split_list(set, ',')) {
            if (t != "sup" && t != "ct" && t != "hc" && t != "lc") {
                std::cerr << "unknown loss term \"" << t << "\" in --toggles\n";
                return 2;
            }
            terms.insert(t);
        }
        if (!terms.count("sup")) {
            std::cerr << "toggle set \"" << set << "\" lacks the supervised term\n";
            return 2;
        }
        LossWeights w;
        w.sup = base.weights.sup;
        w.ct = terms.count("ct") ? base.weights.ct : 0.0;
        w.hc = terms.count("hc") ? base.weights.hc : 0.0;
        w.lc = terms.count("lc") ? base.weights.lc : 0.0;
        std::string tag;
        for (const std::string& t : {std::string("sup"), std::string("ct"), std::string("hc"),
                                     std::string("lc")}) {
            if (terms.count(t)) tag += (tag.empty() ? "" : "+") + t;
        }
        losses.emplace_back(tag, w);
    }

    std::vector<Topology> topologies;
    for (const std::string& t : split_list(o.topologies, ',')) {
        topologies.push_back(topology_from_string(t));
    }
    if (topologies.empty()) topologies.push_back(base.topology);

    auto int_axis = [](const std::string& s, int fallback) {
        std::vector<int> v;
        for (const std::string& item : split_list(s, ',')) v.push_back(std::stoi(item));
        if (v.empty()) v.push_back(fallback);
        return v;
    };
    const std::vector<int> pair_axis = int_axis(o.pairs, base.pairs);
    const std::vector<int> bank_axis = int_axis(o.banks, base.bank_capacity);
    std::vector<double> phi_axis;
    for (const std::string& s : split_list(o.phis, ',')) phi_axis.push_back(std::stod(s));
    if (phi_axis.empty()) phi_axis.push_back(base.contrast.phi);
    std::vector<bool> dir_axis;
    for (const std::string& s : split_list(o.directional, ',')) {
        if (s != "true" && s != "false") {
            std::cerr << "--directional entries must be true or false\n";
            return 2;
        }
        dir_axis.push_back(s == "true");
    }
    if (dir_axis.empty()) dir_axis.push_back(base.lc_directional);
    std::vector<std::uint64_t> seed_axis;
    for (const std::string& s : split_list(o.seeds, ',')) seed_axis.push_back(std::stoull(s));
    if (seed_axis.empty()) seed_axis.push_back(base.seed);

    if (base.data.val_dir.empty()) {
        throw ConfigError("ablate needs data.val_dir in the base config to score runs");
    }

    std::vector<Variant> variants;
    std::set<std::string> seen;
    for (const Topology topo : topologies) {
        for (const int np : pair_axis) {
            for (const int bank : bank_axis) {
                for (const double phi : phi_axis) {
                    for (const bool dir : dir_axis) {
                        for (const auto& [tag, w] : losses) {
                            for (const std::uint64_t seed : seed_axis) {
                                Variant v;
                                v.cfg = base;
                                v.cfg.topology = topo;
                                v.cfg.pairs = np;
                                v.cfg.bank_capacity = bank;
                                v.cfg.contrast.phi = phi;
                                v.cfg.lc_directional = dir;
                                v.cfg.weights = w;
                                v.cfg.seed = seed;
                                validate(v.cfg);
                                v.losses = tag;
                                v.key = dump_config(v.cfg);
                                // Distinct toggle sets can collapse to one
                                // config when base weights are zero.
                                if (seen.insert(v.key).second) variants.push_back(std::move(v));
                            }
                        }
                    }
                }
            }
        }
    }
    std::sort(variants.begin(), variants.end(),
              [](const Variant& a, const Variant& b) { return a.key < b.key; });

    const fs::path out_dir = o.out_dir;
    if (fs::exists(out_dir / "summary.txt") && !o.force) {
        throw ConfigError("ablation directory " + out_dir.string() +
                          " already holds a summary; pass --force to overwrite");
    }
    fs::create_directories(out_dir);

    struct Row {
        std::string topo, losses;
        int pairs, bank;
        double phi;
        bool dir;
        std::uint64_t seed;
        double miou;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const Variant& v = variants[i];
        char name[32];
        std::snprintf(name, sizeof name, "v%03zu", i);
        const fs::path run_dir = out_dir / name;
        std::cout << "[" << i + 1 << "/" << variants.size() << "] " << name << ": "
                  << to_string(v.cfg.topology) << " losses=" << v.losses
                  << " seed=" << v.cfg.seed << std::endl;
        fs::create_directories(run_dir);
        std::ofstream(run_dir / "config.resolved.cfg") << v.key;
        const RunResult res = run_training(v.cfg, run_dir);
        if (!res.final_miou) throw StateError("ablation run produced no final miou");
        rows.push_back({to_string(v.cfg.topology), v.losses, v.cfg.pairs, v.cfg.bank_capacity,
                        v.cfg.contrast.phi, v.cfg.lc_directional, v.cfg.seed, *res.final_miou});
    }

    std::ostringstream table;
    table << "topology        pairs  bank  phi    dir    losses          seed  miou\n";
    for (const Row& r : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-15s %-6d %-5d %-6.3g %-6s %-15s %-5llu %.4f\n",
                      r.topo.c_str(), r.pairs, r.bank, r.phi, r.dir ? "true" : "false",
                      r.losses.c_str(), static_cast<unsigned long long>(r.seed), r.miou);
        table << line;
    }
    // Means over the shared seeds, keyed by everything except the seed.
    table << "\nmeans over seeds\n";
    std::map<std::string, std::pair<double, int>> means;
    std::vector<std::string> order;
    for (const Row& r : rows) {
        char key[160];
        std::snprintf(key, sizeof key, "%-15s %-6d %-5d %-6.3g %-6s %-15s", r.topo.c_str(),
                      r.pairs, r.bank, r.phi, r.dir ? "true" : "false", r.losses.c_str());
        if (!means.count(key)) order.push_back(key);
        means[key].first += r.miou;
        means[key].second += 1;
    }
    for (const std::string& key : order) {
        char line[200];
        std::snprintf(line, sizeof line, "%s n=%-3d  %.4f\n", key.c_str(), means[key].second,
                      means[key].first / means[key].second);
        table << line;
    }

    std::ofstream(out_dir / "summary.txt") << table.str();
    std::cout << "\n" << table.str() << "\nsummary: " << (out_dir / "summary.txt").string() << "\n";
    return 0;
}

// --- plot ---

struct PlotOpts {
    std::vector<std::string> logs;
    std::string out = "plots";
};

struct LogSeries {
    std::string label;
    std::vector<double> iter, total, sup, ct, hc, lc;
    std::vector<double> miou_iter, miou;
};

LogSeries read_log(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read metrics log: " + path.string());
    LogSeries s;
    s.label = path.filename() == "metrics.jsonl" ? path.parent_path().filename().string()
                                                 : path.stem().string();
    if (s.label.empty()) s.label = path.string();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        if (j.contains("event")) continue;  // divergence diagnostics
        const double it = j.at("iter").get<double>();
        s.iter.push_back(it);
        s.total.push_back(j.at("total").get<double>());
        s.sup.push_back(j.at("sup").get<double>());
        s.ct.push_back(j.at("ct").get<double>());
        s.hc.push_back(j.at("hc").get<double>());
        s.lc.push_back(j.at("lc").get<double>());
        if (j.contains("miou")) {
            s.miou_iter.push_back(it);
            s.miou.push_back(j.at("miou").get<double>());
        }
    }
    return s;
}

int cmd_plot(const PlotOpts& o) {
    std::vector<LogSeries> logs;
    for (const std::string& p : o.logs) logs.push_back(read_log(p));
    const fs::path out = o.out;
    fs::create_directories(out);
    int written = 0;

    if (logs[0].iter.empty()) {
        std::cerr << "warning: " << o.logs[0] << " has no records; skipping loss curves\n";
    } else {
        ChartOptions opt;
        opt.title = "loss curves: " + logs[0].label;
        opt.x_label = "iteration";
        opt.y_label = "loss";
        const LogSeries& l = logs[0];
        render_chart({{"total", l.iter, l.total},
                      {"sup", l.iter, l.sup},
                      {"ct", l.iter, l.ct},
                      {"hc", l.iter, l.hc},
                      {"lc", l.iter, l.lc}},
                     opt, out / "loss_curves.ppm");
        std::cout << "wrote " << (out / "loss_curves.ppm").string() << "\n";
        ++written;
    }

    std::vector<Series> miou_series;
    for (const LogSeries& l : logs) {
        if (!l.miou.empty()) miou_series.push_back({l.label, l.miou_iter, l.miou});
    }
    if (miou_series.empty()) {
        std::cerr << "warning: no evaluation records in any log; skipping miou chart\n";
    } else {
        ChartOptions opt;
        opt.title = "validation miou";
        opt.x_label = "iteration";
        opt.y_label = "miou";
        render_chart(miou_series, opt, out / "miou.ppm");
        std::cout << "wrote " << (out / "miou.ppm").string() << "\n";
        ++written;
    }

    if (logs.size() >= 2) {
        std::map<double, double> baseline;
        for (std::size_t i = 0; i < logs[0].miou.size(); ++i) {
            baseline[logs[0].miou_iter[i]] = logs[0].miou[i];
        }
        std::vector<Series> gains;
        for (std::size_t li = 1; li < logs.size(); ++li) {
            Series g;
            g.label = logs[li].label + " - " + logs[0].label;
            for (std::size_t i = 0; i < logs[li].miou.size(); ++i) {
                const auto it = baseline.find(logs[li].miou_iter[i]);
                if (it == baseline.end()) continue;
                g.x.push_back(logs[li].miou_iter[i]);
                g.y.push_back(logs[li].miou[i] - it->second);
            }
            if (!g.x.empty()) gains.push_back(std::move(g));
        }
        if (gains.empty()) {
            std::cerr << "warning: no matching evaluation iterations; skipping gain chart\n";
        } else {
            ChartOptions opt;
            opt.title = "miou gain over " + logs[0].label;
            opt.x_label = "iteration";
            opt.y_label = "miou gain";
            render_chart(gains, opt, out / "gain.ppm");
            std::cout << "wrote " << (out / "gain.ppm").string() << "\n";
            ++written;
        }
    }
    if (written == 0) std::cerr << "warning: nothing to plot\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-teacher training for semi-supervised segmentation"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* gen_cmd = app.add_subcommand("generate-data", "render a synthetic shape dataset");
    gen_cmd->add_option("--out", gen.out, "output directory")->required();
    gen_cmd->add_option("--count", gen.count, "number of images");
    gen_cmd->add_option("--classes", gen.classes, "class count incl. background");
    gen_cmd->add_option("--height", gen.height, "image height");
    gen_cmd->add_option("--width", gen.width, "image width");
    gen_cmd->add_option("--shapes-min", gen.shapes_min, "min shapes per image");
    gen_cmd->add_option("--shapes-max", gen.shapes_max, "max shapes per image");
    gen_cmd->add_option("--color-jitter", gen.color_jitter, "per-shape color jitter");
    gen_cmd->add_option("--noise-std", gen.noise_std, "pixel noise stddev");
    gen_cmd->add_option("--seed", gen.seed, "generator seed");
    gen_cmd->add_flag("--force", gen.force, "overwrite a non-empty directory");

    TrainOpts train;
    CLI::App* train_cmd = app.add_subcommand("train", "run the training loop");
    train_cmd->add_option("--config", train.config_path, "config file (key = value lines)");
    train_cmd->add_option("--run-dir", train.run_dir, "output directory");
    train_cmd->add_flag("--force", train.force, "overwrite an existing run");
    train_cmd->allow_extras();  // --key=value config overrides

    EvalOpts eval;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--split", eval.split, "val, train, labeled or unlabeled");
    eval_cmd->add_option("--network", eval.network, "student_a, teacher_a or ensemble");
    eval_cmd->add_option("--report", eval.report, "report path (default <checkpoint>.eval.txt)");
    eval_cmd->add_option("--data-dir", eval.data_dir, "override the dataset directory");
    eval_cmd->add_option("--features", eval.features, "also export a feature dump here");
    eval_cmd->add_option("--features-cap", eval.features_cap, "rows per class and origin");

    AblateOpts ablate;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "run a study over config variants");
    ablate_cmd->add_option("--config", ablate.config_path, "base config file");
    ablate_cmd->add_option("--out-dir", ablate.out_dir, "study output directory");
    ablate_cmd->add_option("--toggles", ablate.toggles,
                           "';'-separated loss sets, e.g. \"sup;sup,ct\"");
    ablate_cmd->add_option("--topologies", ablate.topologies, "comma list of topologies");
    ablate_cmd->add_option("--pairs", ablate.pairs, "comma list of pair counts");
    ablate_cmd->add_option("--banks", ablate.banks, "comma list of bank capacities");
    ablate_cmd->add_option("--phis", ablate.phis, "comma list of confidence thresholds");
    ablate_cmd->add_option("--directional", ablate.directional,
                           "comma list of true/false for the lc mask");
    ablate_cmd->add_option("--seeds", ablate.seeds, "comma list of seeds shared by all variants");
    ablate_cmd->add_flag("--force", ablate.force, "overwrite an existing study");

    PlotOpts plot;
    CLI::App* plot_cmd = app.add_subcommand("plot", "render charts from metrics logs");
    plot_cmd->add_option("--log", plot.logs, "metrics.jsonl (repeat for comparisons)")
        ->required()
        ->expected(-1);
    plot_cmd->add_option("--out", plot.out, "chart output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen_cmd->parsed()) return cmd_generate(gen);
        if (train_cmd->parsed()) return cmd_train(train, train_cmd->remaining());
        if (eval_cmd->parsed()) return cmd_eval(eval);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate);
        if (plot_cmd->parsed()) return cmd_plot(plot);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 4;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
