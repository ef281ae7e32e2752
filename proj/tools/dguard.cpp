// dguard command-line shell: synthetic data generation, local-model
// training, defended detection, certification sweeps, the
// certificate-validating attack oracle, the metric suite, map rendering
// and hyper-parameter sweeps.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dguard/attack_oracle.hpp"
#include "dguard/certify.hpp"
#include "dguard/config.hpp"
#include "dguard/dataset.hpp"
#include "dguard/detectors.hpp"
#include "dguard/eval.hpp"
#include "dguard/explainer.hpp"
#include "dguard/image.hpp"
#include "dguard/synthdata.hpp"
#include "dguard/train.hpp"

namespace fs = std::filesystem;
using namespace dguard;

namespace {

struct Args {
    std::map<std::string, std::string> values;

    static Args parse(int argc, char** argv, int start) {
        Args args;
        for (int k = start; k < argc; ++k) {
            std::string key = argv[k];
            if (key.rfind("--", 0) != 0) throw std::runtime_error("unexpected argument: " + key);
            key = key.substr(2);
            if (k + 1 >= argc) throw std::runtime_error("missing value for --" + key);
            args.values[key] = argv[++k];
        }
        return args;
    }

    std::string require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw std::runtime_error("missing required flag --" + key);
        return it->second;
    }
    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second;
    }
    bool has(const std::string& key) const { return values.count(key) > 0; }

    void expect_only(std::initializer_list<const char*> allowed) const {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, _] : values)
            if (!ok.count(k)) throw std::runtime_error("unknown flag --" + k);
    }
};

// Tracks files created by a subcommand; on failure everything written so
// far is removed so no partial outputs survive.
class OutputGuard {
public:
    ~OutputGuard() {
        if (armed_)
            for (const auto& p : paths_) {
                std::error_code ec;
                fs::remove(p, ec);
            }
    }
    void add(const fs::path& p) { paths_.push_back(p); }
    void release() { armed_ = false; }

private:
    bool armed_ = true;
    std::vector<fs::path> paths_;
};

void write_file(OutputGuard& guard, const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    guard.add(path);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig config_from(const Args& args) {
    return args.has("config") ? load_config(args.require("config")) : RunConfig{};
}

int parse_jobs(const Args& args) {
    const int jobs = std::stoi(args.get("jobs", "1"));
    if (jobs < 1) throw std::runtime_error("--jobs must be >= 1");
    return jobs;
}

std::pair<int, int> parse_patch(const std::string& text) {
    const auto x = text.find('x');
    if (x == std::string::npos) throw std::runtime_error("--patch expects WxH, got: " + text);
    const int w = std::stoi(text.substr(0, x));
    const int h = std::stoi(text.substr(x + 1));
    if (w < 1 || h < 1) throw std::runtime_error("--patch expects positive dimensions");
    return {w, h};
}

struct BaseHandle {
    std::unique_ptr<BaseDetector> detector;
    std::string descriptor;
};

BaseHandle make_base(const std::string& spec, const Dataset& ds) {
    BaseHandle h;
    h.descriptor = spec;
    if (spec == "perfect") {
        h.detector = std::make_unique<PerfectCleanDetector>(ds);
    } else if (spec.rfind("external:", 0) == 0) {
        h.detector = std::make_unique<ExternalDetector>(spec.substr(9));
    } else {
        throw std::runtime_error("--base expects 'perfect' or 'external:PATH', got: " + spec);
    }
    return h;
}

std::vector<PatchCategory> parse_categories(const std::string& text) {
    if (text == "all")
        return {PatchCategory::Far, PatchCategory::Close, PatchCategory::Over};
    return {parse_category(text)};
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const Args& args) {
    args.expect_only({"spec", "out"});
    const SceneSpec spec = load_scene_spec(args.require("spec"));
    const fs::path out_dir = args.require("out");

    const auto files = encode_dataset_files(spec);
    OutputGuard guard;
    for (const auto& [rel, bytes] : files) write_file(guard, out_dir / rel, bytes);
    guard.release();
    std::cout << "gen-data: wrote " << files.size() << " files to " << out_dir.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------- train

int cmd_train(const Args& args) {
    args.expect_only({"data", "config", "out"});
    const RunConfig cfg = config_from(args);
    const Dataset ds = load_dataset(args.require("data"));

    TrainStats stats;
    const LocalModel model = train_local_model(ds, cfg.r, cfg.s, cfg.classes, cfg.train, &stats);

    OutputGuard guard;
    write_file(guard, args.require("out"), encode_model(model));
    guard.release();

    std::cout << "train: images=" << ds.images.size() << " objects=" << ds.total_objects()
              << " skipped_boxes=" << stats.skipped_boxes;
    if (!stats.epoch_loss.empty()) std::cout << " final_loss=" << format_g(stats.epoch_loss.back());
    std::cout << " box_accuracy=" << format_g(box_classification_accuracy(model, ds)) << "\n";
    return 0;
}

// ------------------------------------------------------------------ detect

int cmd_detect(const Args& args) {
    args.expect_only({"data", "model", "base", "config", "out", "dump-om", "jobs"});
    const RunConfig cfg = config_from(args);
    const Dataset ds = load_dataset(args.require("data"));
    const LocalModel model = load_model(args.require("model"));
    const BaseHandle base = make_base(args.require("base"), ds);
    const int jobs = parse_jobs(args);

    const auto records =
        run_clean_pipeline(ds, model, *base.detector, cfg.predictor, cfg.cluster, cfg.eval, jobs);

    std::string csv = config_echo(cfg);
    csv += "# base = " + base.descriptor + "\n";
    csv += "image_id,record,x_min,y_min,x_max,y_max,label,value\n";
    for (const auto& rec : records) {
        for (const auto& d : rec.eval.detections)
            csv += rec.eval.image_id + ",det," + std::to_string(d.box.x_min) + "," +
                   std::to_string(d.box.y_min) + "," + std::to_string(d.box.x_max) + "," +
                   std::to_string(d.box.y_max) + "," + std::to_string(d.label) + "," +
                   format_g(d.confidence) + "\n";
        csv += rec.eval.image_id + ",alert_from,0,0,0,0,0," + format_g(rec.eval.alert_from) + "\n";

        // Verdict at the configured operating threshold.
        std::vector<Detection> kept;
        for (const auto& d : rec.eval.detections)
            if (d.confidence >= cfg.confidence_threshold) kept.push_back(d);
        const bool alert = explain(kept, rec.om, cfg.cluster, rec.logits.cfg);
        csv += rec.eval.image_id + ",verdict,0,0,0,0,0," + std::string(alert ? "alert" : "ok") + "\n";
    }

    OutputGuard guard;
    write_file(guard, args.require("out"), csv);
    if (args.has("dump-om")) {
        const fs::path dir = args.require("dump-om");
        for (const auto& rec : records)
            write_file(guard, dir / (rec.eval.image_id + ".om"), dump_objectness_map(rec.om));
    }
    guard.release();

    long alerts = 0;
    for (const auto& rec : records)
        if (cfg.confidence_threshold >= rec.eval.alert_from) ++alerts;
    std::cout << "detect: images=" << records.size() << " alerts_at_threshold=" << alerts << "\n";
    return 0;
}

// ----------------------------------------------------------------- certify

int cmd_certify(const Args& args) {
    args.expect_only({"data", "model", "base", "config", "patch", "category", "out", "summary",
                      "jobs", "confidence-threshold"});
    const RunConfig cfg = config_from(args);
    const Dataset ds = load_dataset(args.require("data"));
    const LocalModel model = load_model(args.require("model"));
    const BaseHandle base = make_base(args.require("base"), ds);

    CertifyOptions opt;
    std::tie(opt.patch_w, opt.patch_h) = parse_patch(args.require("patch"));
    opt.categories = parse_categories(args.get("category", "all"));
    opt.close_distance = cfg.close_distance;
    opt.jobs = parse_jobs(args);
    if (args.has("confidence-threshold"))
        opt.confidence_threshold = std::stod(args.require("confidence-threshold"));

    const CertifyResult result = certify_dataset(ds, model, *base.detector, cfg.predictor,
                                                 cfg.cluster, cfg.eval, opt);

    std::string csv = config_echo(cfg);
    csv += "# base = " + base.descriptor + "\n";
    csv += "# patch = " + std::to_string(opt.patch_w) + "x" + std::to_string(opt.patch_h) + "\n";
    const double op_t = opt.confidence_threshold.value_or(result.operating.threshold);
    csv += "# operating_threshold = " + format_g(op_t) + "\n";
    csv += "# operating_recall = " + format_g(result.operating.recall) + "\n";
    csv += "# anchor_reachable = " + std::string(result.operating.reachable ? "1" : "0") + "\n";
    csv += "image_id,object_id,label,category,n_locations,certified,failing_x,failing_y\n";
    for (const auto& row : result.rows) {
        csv += row.image_id + "," + std::to_string(row.object_id) + "," + std::to_string(row.label) +
               "," + to_string(row.category) + "," + std::to_string(row.n_locations) + "," +
               (row.certified ? "1" : "0") + ",";
        if (row.has_failing)
            csv += std::to_string(row.failing_x) + "," + std::to_string(row.failing_y);
        else
            csv += ",";
        csv += "\n";
    }

    std::string summary = config_echo(cfg);
    summary += "# patch = " + std::to_string(opt.patch_w) + "x" + std::to_string(opt.patch_h) + "\n";
    summary += "category,label,objects,certified,cr\n";
    for (const auto& [cat, stat] : result.by_category)
        summary += std::string(to_string(cat)) + ",-1," + std::to_string(stat.objects) + "," +
                   std::to_string(stat.certified) + "," + format_g(stat.cr()) + "\n";
    for (const auto& [key, stat] : result.by_class)
        summary += std::string(to_string(key.first)) + "," + std::to_string(key.second) + "," +
                   std::to_string(stat.objects) + "," + std::to_string(stat.certified) + "," +
                   format_g(stat.cr()) + "\n";

    OutputGuard guard;
    write_file(guard, args.require("out"), csv);
    if (args.has("summary")) write_file(guard, args.require("summary"), summary);
    guard.release();

    std::cout << "certify: operating_threshold=" << format_g(op_t)
              << " recall=" << format_g(result.operating.recall) << "\n";
    for (const auto& [cat, stat] : result.by_category)
        std::cout << "certify: CR(" << to_string(cat) << ") = " << format_g(stat.cr()) << " ("
                  << stat.certified << "/" << stat.objects << ")\n";
    return 0;
}

// -------------------------------------------------------------- attack-sim

int cmd_attack_sim(const Args& args) {
    args.expect_only({"data", "model", "base", "config", "certificates", "seed", "out", "jobs",
                      "patch", "feature-variants", "pixel-variants"});
    const RunConfig cfg = config_from(args);
    const Dataset ds = load_dataset(args.require("data"));
    const LocalModel model = load_model(args.require("model"));
    const BaseHandle base = make_base(args.require("base"), ds);
    const int jobs = parse_jobs(args);

    // Certificates: rows plus the run parameters echoed into the header.
    std::ifstream cf(args.require("certificates"), std::ios::binary);
    if (!cf) throw std::runtime_error("cannot open certificates: " + args.require("certificates"));
    std::stringstream css;
    css << cf.rdbuf();
    const std::string cert_text = css.str();

    std::optional<std::pair<int, int>> patch;
    std::optional<double> op_threshold;
    for (const auto& [k, v] : parse_csv_comments(cert_text)) {
        if (k == "patch") patch = parse_patch(v);
        if (k == "operating_threshold") op_threshold = std::stod(v);
    }
    if (args.has("patch")) patch = parse_patch(args.require("patch"));
    if (!patch) throw std::runtime_error("certificates carry no patch size; pass --patch WxH");

    struct CertTask {
        std::string image_id;
        int object_id;
        PatchCategory category;
    };
    std::vector<CertTask> tasks;
    {
        std::istringstream in(cert_text);
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!header_seen) { header_seen = true; continue; }
            std::stringstream ls(line);
            std::string image_id, object_id, label, category, n_locations, certified;
            std::getline(ls, image_id, ',');
            std::getline(ls, object_id, ',');
            std::getline(ls, label, ',');
            std::getline(ls, category, ',');
            std::getline(ls, n_locations, ',');
            std::getline(ls, certified, ',');
            if (certified == "1")
                tasks.push_back({image_id, std::stoi(object_id), parse_category(category)});
        }
    }

    AttackOracleConfig oracle;
    oracle.seed = std::stoull(args.get("seed", "99"));
    if (args.has("feature-variants")) oracle.feature_random = std::stoi(args.require("feature-variants"));
    if (args.has("pixel-variants")) oracle.pixel_variants = std::stoi(args.require("pixel-variants"));

    // Clean logits and operating-threshold detections per image.
    std::map<std::string, std::size_t> image_index;
    for (std::size_t k = 0; k < ds.images.size(); ++k) image_index[ds.images[k].id] = k;
    std::vector<LocalLogitsMap> logits(ds.images.size());
    std::vector<std::vector<Detection>> dets(ds.images.size());
    const double op_t = op_threshold.value_or(cfg.confidence_threshold);
    parallel_for(ds.images.size(), jobs, [&](std::size_t k) {
        logits[k] = extract_local_logits(ds.images[k].image, model);
        for (const auto& d : base.detector->detect(ds.images[k].id, ds.images[k].image))
            if (d.confidence >= op_t) dets[k].push_back(d);
    });

    std::vector<std::vector<Violation>> violations(tasks.size());
    std::vector<AttackStats> stats(tasks.size());
    parallel_for(tasks.size(), jobs, [&](std::size_t t) {
        const CertTask& task = tasks[t];
        auto it = image_index.find(task.image_id);
        if (it == image_index.end())
            throw std::runtime_error("certificate references unknown image: " + task.image_id);
        const AnnotatedImage& ai = ds.images[it->second];
        if (task.object_id < 0 || task.object_id >= static_cast<int>(ai.objects.size()))
            throw std::runtime_error("certificate references unknown object in " + task.image_id);
        const LabeledBox& object = ai.objects[task.object_id];

        const ThreatModel tm{task.category, cfg.close_distance};
        const auto locations = enumerate_patch_locations(patch->first, patch->second,
                                                         logits[it->second].cfg, object.box, tm);
        attack_certified_object(ai, logits[it->second], task.object_id, object.box, patch->first,
                                patch->second, locations, dets[it->second], model, cfg.predictor,
                                cfg.cluster, cfg.eval.iou_tau, oracle, violations[t], &stats[t]);
    });

    std::string csv = config_echo(cfg);
    csv += "# base = " + base.descriptor + "\n";
    csv += "# patch = " + std::to_string(patch->first) + "x" + std::to_string(patch->second) + "\n";
    csv += "# seed = " + std::to_string(oracle.seed) + "\n";
    csv += "image_id,object_id,patch_x,patch_y,strategy,outcome\n";
    long long n_violations = 0, n_variants = 0, n_checks = 0, n_locations = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        for (const auto& v : violations[t]) {
            csv += v.image_id + "," + std::to_string(v.object_id) + "," + std::to_string(v.patch_x) +
                   "," + std::to_string(v.patch_y) + "," + v.strategy + "," + v.outcome + "\n";
            ++n_violations;
        }
        n_variants += stats[t].variants;
        n_checks += stats[t].checks;
        n_locations += stats[t].locations;
    }

    OutputGuard guard;
    write_file(guard, args.require("out"), csv);
    guard.release();

    std::cout << "attack-sim: certified=" << tasks.size() << " locations=" << n_locations
              << " variants=" << n_variants << " checks=" << n_checks
              << " violations=" << n_violations << "\n";
    return 0;
}

// -------------------------------------------------------------------- eval

int cmd_eval(const Args& args) {
    args.expect_only({"verdicts", "data", "config", "anchor", "out"});
    RunConfig cfg = config_from(args);

    std::ifstream vf(args.require("verdicts"), std::ios::binary);
    if (!vf) throw std::runtime_error("cannot open verdicts: " + args.require("verdicts"));
    std::stringstream vss;
    vss << vf.rdbuf();
    const std::string verdict_text = vss.str();

    // Replay against the grid the detect run used; alert_from is only exact
    // on that grid.
    for (const auto& [k, v] : parse_csv_comments(verdict_text))
        if (k == "confidence_grid") cfg.eval.confidence_grid = detail::parse_grid(v);
    if (args.has("anchor")) cfg.eval.recall_anchor = std::stod(args.require("anchor"));

    std::map<std::string, std::vector<LabeledBox>> truths;
    {
        const fs::path ann = fs::path(args.require("data")) / "annotations.txt";
        if (fs::exists(ann))
            for (const auto& rec : read_detections(ann.string()))
                truths[rec.image_id].push_back(LabeledBox{rec.det.box, rec.det.label});
    }

    std::vector<ImageEvalRecord> records;
    std::map<std::string, std::size_t> index;
    {
        std::istringstream in(verdict_text);
        std::string line;
        bool header_seen = false;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            if (!header_seen) { header_seen = true; continue; }
            std::stringstream ls(line);
            std::string image_id, record, x0, y0, x1, y1, label, value;
            std::getline(ls, image_id, ',');
            std::getline(ls, record, ',');
            std::getline(ls, x0, ',');
            std::getline(ls, y0, ',');
            std::getline(ls, x1, ',');
            std::getline(ls, y1, ',');
            std::getline(ls, label, ',');
            std::getline(ls, value, ',');
            if (!index.count(image_id)) {
                index[image_id] = records.size();
                records.emplace_back();
                records.back().image_id = image_id;
                if (auto it = truths.find(image_id); it != truths.end())
                    records.back().truths = it->second;
            }
            ImageEvalRecord& rec = records[index[image_id]];
            if (record == "det") {
                rec.detections.push_back(Detection{PixelBox{std::stoi(x0), std::stoi(y0),
                                                            std::stoi(x1), std::stoi(y1)},
                                                   std::stoi(label), std::stod(value)});
            } else if (record == "alert_from") {
                rec.alert_from = std::stod(value);
            }
        }
    }
    if (records.empty()) throw std::runtime_error("verdicts file holds no records");

    const auto points = threshold_sweep(records, cfg.eval);
    const double ap = average_precision(points);
    const AnchorPick far = far_at_recall(points, cfg.eval.recall_anchor);

    std::string csv = config_echo(cfg);
    csv += "# anchor = " + format_g(cfg.eval.recall_anchor) + "\n";
    csv += "row,threshold,tp,fp,fn,alerts,images,precision,recall,far,ap,far_at_anchor,anchor_threshold,anchor_recall,anchor_reachable\n";
    for (const auto& pt : points)
        csv += "point," + format_g(pt.threshold) + "," + std::to_string(pt.tp) + "," +
               std::to_string(pt.fp) + "," + std::to_string(pt.fn) + "," +
               std::to_string(pt.alerts) + "," + std::to_string(pt.images) + "," +
               format_g(pt.precision) + "," + format_g(pt.recall) + "," + format_g(pt.far) +
               ",,,,,\n";
    csv += "summary,,,,,,,,,," + format_g(ap) + "," + format_g(far.value) + "," +
           format_g(far.threshold) + "," + format_g(far.recall) + "," +
           (far.reachable ? "1" : "0") + "\n";

    OutputGuard guard;
    write_file(guard, args.require("out"), csv);
    guard.release();

    std::cout << "eval: ap=" << format_g(ap) << " far@" << format_g(cfg.eval.recall_anchor) << "="
              << format_g(far.value) << (far.reachable ? "" : " (anchor unreachable)") << "\n";
    return 0;
}

// ------------------------------------------------------------------ render

int cmd_render(const Args& args) {
    args.expect_only({"map", "out"});
    std::ifstream f(args.require("map"), std::ios::binary);
    if (!f) throw std::runtime_error("cannot open map dump: " + args.require("map"));
    std::stringstream ss;
    ss << f.rdbuf();
    const ObjectnessMap om = parse_objectness_map(ss.str());

    OutputGuard guard;
    write_file(guard, args.require("out"), encode_pgm(om));
    guard.release();
    std::cout << "render: " << om.X << "x" << om.Y << " map, " << om.popcount() << " active cells\n";
    return 0;
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const Args& args) {
    args.expect_only({"param", "values", "data", "model", "base", "config", "patch", "out", "jobs"});
    const RunConfig base_cfg = config_from(args);
    const Dataset ds = load_dataset(args.require("data"));
    const LocalModel model = load_model(args.require("model"));
    const BaseHandle base = make_base(args.require("base"), ds);
    const std::string param = args.require("param");
    const int jobs = parse_jobs(args);
    const auto [patch_w, patch_h] = parse_patch(args.require("patch"));

    std::vector<std::string> values;
    {
        std::stringstream ss(args.require("values"));
        std::string item;
        while (std::getline(ss, item, ',')) values.push_back(item);
    }
    if (values.empty()) throw std::runtime_error("--values is empty");

    std::string csv = config_echo(base_cfg);
    csv += "# base = " + base.descriptor + "\n";
    csv += "# patch = " + std::to_string(patch_w) + "x" + std::to_string(patch_h) + "\n";
    csv += "param,value,ap,far_at_anchor,cr_far,cr_close,cr_over\n";
    for (const auto& value : values) {
        RunConfig cfg = base_cfg;
        if (param == "T") cfg.predictor.threshold = std::stod(value);
        else if (param == "window") cfg.predictor.window_x = cfg.predictor.window_y = std::stoi(value);
        else if (param == "eps") cfg.cluster.eps = std::stod(value);
        else if (param == "min_points") cfg.cluster.min_points = std::stoi(value);
        else throw std::runtime_error("--param must be T, window, eps or min_points");
        cfg.validate();

        const auto records =
            run_clean_pipeline(ds, model, *base.detector, cfg.predictor, cfg.cluster, cfg.eval, jobs);
        std::vector<ImageEvalRecord> eval_records;
        for (const auto& r : records) eval_records.push_back(r.eval);
        const auto points = threshold_sweep(eval_records, cfg.eval);
        const double ap = average_precision(points);
        const AnchorPick far = far_at_recall(points, cfg.eval.recall_anchor);

        CertifyOptions opt;
        opt.patch_w = patch_w;
        opt.patch_h = patch_h;
        opt.close_distance = cfg.close_distance;
        opt.jobs = jobs;
        const CertifyResult cert =
            certify_dataset(ds, model, *base.detector, cfg.predictor, cfg.cluster, cfg.eval, opt);

        csv += param + "," + value + "," + format_g(ap) + "," + format_g(far.value) + "," +
               format_g(cert.certified_recall(PatchCategory::Far)) + "," +
               format_g(cert.certified_recall(PatchCategory::Close)) + "," +
               format_g(cert.certified_recall(PatchCategory::Over)) + "\n";
        std::cout << "sweep: " << param << "=" << value << " ap=" << format_g(ap)
                  << " far=" << format_g(far.value) << "\n";
    }

    OutputGuard guard;
    write_file(guard, args.require("out"), csv);
    guard.release();
    return 0;
}

void print_usage() {
    std::cout <<
        "usage: dguard <subcommand> [flags]\n"
        "\n"
        "  gen-data    --spec FILE --out DIR\n"
        "  train       --data DIR --config FILE --out MODEL\n"
        "  detect      --data DIR --model MODEL --base perfect|external:PATH\n"
        "              [--config FILE] --out CSV [--dump-om DIR] [--jobs N]\n"
        "  certify     --data DIR --model MODEL --base ... [--config FILE]\n"
        "              --patch WxH [--category far|close|over|all] --out CSV\n"
        "              [--summary CSV] [--jobs N] [--confidence-threshold T]\n"
        "  attack-sim  --data DIR --model MODEL --base ... [--config FILE]\n"
        "              --certificates CSV [--seed N] --out CSV [--jobs N]\n"
        "              [--patch WxH] [--feature-variants N] [--pixel-variants N]\n"
        "  eval        --verdicts CSV --data DIR [--config FILE] [--anchor X] --out CSV\n"
        "  render      --map DUMP --out PGM\n"
        "  sweep       --param T|window|eps|min_points --values a,b,c --data DIR\n"
        "              --model MODEL --base ... [--config FILE] --patch WxH\n"
        "              --out CSV [--jobs N]\n";
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        print_usage();
        return 1;
    }
    const std::string cmd = argv[1];
    try {
        const Args args = Args::parse(argc, argv, 2);
        if (cmd == "gen-data") return cmd_gen_data(args);
        if (cmd == "train") return cmd_train(args);
        if (cmd == "detect") return cmd_detect(args);
        if (cmd == "certify") return cmd_certify(args);
        if (cmd == "attack-sim") return cmd_attack_sim(args);
        if (cmd == "eval") return cmd_eval(args);
        if (cmd == "render") return cmd_render(args);
        if (cmd == "sweep") return cmd_sweep(args);
        if (cmd == "help" || cmd == "--help" || cmd == "-h") {
            print_usage();
            return 0;
        }
        throw std::runtime_error("unknown subcommand: " + cmd);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
