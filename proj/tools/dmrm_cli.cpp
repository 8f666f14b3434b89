#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmrm/dmrm.h"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void check(dmrm_status s) {
    if (s != DMRM_OK) throw std::runtime_error(dmrm_last_error());
}

struct CorpusPtr {
    dmrm_corpus* p = nullptr;
    ~CorpusPtr() { dmrm_corpus_free(p); }
};

struct ModelPtr {
    dmrm_model* p = nullptr;
    ~ModelPtr() { dmrm_model_free(p); }
};

struct CStr {
    char* p = nullptr;
    ~CStr() { dmrm_string_free(p); }
    std::string str() const { return p ? std::string(p) : std::string(); }
};

std::uint64_t default_seed() {
    if (const char* env = std::getenv("DMRM_SEED")) {
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(env, &used);
            if (used == std::strlen(env)) return v;
        } catch (const std::exception&) {
        }
        throw std::runtime_error(std::string("invalid DMRM_SEED value: ") + env);
    }
    return 7;
}

// ---- manifest helpers ----

std::uint64_t fnv1a64_bytes(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ull;

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::string file_hash(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is.good()) throw std::runtime_error("cannot read file for hashing: " + path);
    std::uint64_t h = kFnvBasis;
    char buf[1 << 16];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0)
        h = fnv1a64_bytes(buf, static_cast<std::size_t>(is.gcount()), h);
    return hex64(h);
}

std::string dir_hash(const std::string& dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    std::uint64_t h = kFnvBasis;
    for (const std::string& name : names) {
        h = fnv1a64_bytes(name.data(), name.size(), h);
        const std::string fh = file_hash((fs::path(dir) / name).string());
        h = fnv1a64_bytes(fh.data(), fh.size(), h);
    }
    return hex64(h);
}

std::string iso_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ordered_json manifest_base(const std::string& command, std::uint64_t seed) {
    ordered_json m;
    m["command"] = command;
    m["timestamp"] = iso_timestamp();
    m["seed"] = seed;
    m["inputs"] = ordered_json::object();
    m["outputs"] = ordered_json::object();
    return m;
}

ordered_json artifact(const std::string& path, bool is_dir = false) {
    ordered_json a;
    a["path"] = path;
    a["hash"] = is_dir ? dir_hash(path) : file_hash(path);
    return a;
}

void write_manifest(const ordered_json& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os.good()) throw std::runtime_error("cannot write manifest: " + path);
    os << m.dump(2) << "\n";
}

void write_text(const std::string& text, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os.good()) throw std::runtime_error("cannot write file: " + path);
    os << text;
    if (text.empty() || text.back() != '\n') os << "\n";
}

// ---- shared train/model options ----

struct TrainOpts {
    std::string corpus_dir;
    std::string vocab_path;
    std::string config_path;
    int embed_dim = 64;
    int hidden = 64;
    int d_track = 64;
    int d_locate = 64;
    int hops = 3;
    bool no_track = false;
    bool no_locate = false;
    bool no_attd = false;
    double base_lr = 1e-3;
    double min_lr = 1e-5;
    double clip_norm = 5.0;
    int warmup = 20;
    int steps = 0;
    int epochs = 0;
    int batch = 16;
    std::uint64_t seed = 7;
};

void add_model_options(CLI::App* cmd, TrainOpts& o) {
    cmd->add_option("--embed-dim", o.embed_dim, "embedding width E")->capture_default_str();
    cmd->add_option("--hidden", o.hidden, "recurrent width D")->capture_default_str();
    cmd->add_option("--d-track", o.d_track, "track attention width")->capture_default_str();
    cmd->add_option("--d-locate", o.d_locate, "locate attention width")->capture_default_str();
    cmd->add_option("--hops", o.hops, "reasoning hops (odd)")->capture_default_str();
    cmd->add_flag("--no-track", o.no_track, "ablate the track channel");
    cmd->add_flag("--no-locate", o.no_locate, "ablate the locate channel");
    cmd->add_flag("--no-attd", o.no_attd, "replace decoder attention with the fused vector");
}

void add_train_options(CLI::App* cmd, TrainOpts& o) {
    add_model_options(cmd, o);
    cmd->add_option("--base-lr", o.base_lr, "peak learning rate")->capture_default_str();
    cmd->add_option("--min-lr", o.min_lr, "floor learning rate")->capture_default_str();
    cmd->add_option("--clip-norm", o.clip_norm, "global gradient norm cap")->capture_default_str();
    cmd->add_option("--warmup", o.warmup, "warm-up steps")->capture_default_str();
    cmd->add_option("--steps", o.steps, "total optimizer steps (default 200)");
    cmd->add_option("--epochs", o.epochs, "derive steps from epochs over the corpus");
    cmd->add_option("--batch-size", o.batch, "dialogs per step")->capture_default_str();
    cmd->add_option("--seed", o.seed, "run seed")->capture_default_str();
    cmd->add_option("--config", o.config_path, "flat key=value options file");
}

std::string trimmed(std::string s) {
    const auto from = s.find_first_not_of(" \t\r");
    if (from == std::string::npos) return "";
    return s.substr(from, s.find_last_not_of(" \t\r") - from + 1);
}

template <typename T>
T parse_config_value(const std::string& key, const std::string& value) {
    std::istringstream is(value);
    T out;
    is >> out;
    if (is.fail() || !(is >> std::ws).eof())
        throw std::runtime_error("invalid config value for " + key + ": " + value);
    return out;
}

bool parse_config_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::runtime_error("invalid config value for " + key + ": " + value);
}

// Applies flat key=value lines named after the long options. Keys whose flag
// appeared on the command line are skipped, so explicit flags keep precedence.
void apply_config_file(const CLI::App* cmd, TrainOpts& o) {
    std::ifstream is(o.config_path);
    if (!is.good()) throw std::runtime_error("cannot read config file: " + o.config_path);

    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"embed-dim", [&](const std::string& v) { o.embed_dim = parse_config_value<int>("embed-dim", v); }},
        {"hidden", [&](const std::string& v) { o.hidden = parse_config_value<int>("hidden", v); }},
        {"d-track", [&](const std::string& v) { o.d_track = parse_config_value<int>("d-track", v); }},
        {"d-locate", [&](const std::string& v) { o.d_locate = parse_config_value<int>("d-locate", v); }},
        {"hops", [&](const std::string& v) { o.hops = parse_config_value<int>("hops", v); }},
        {"no-track", [&](const std::string& v) { o.no_track = parse_config_flag("no-track", v); }},
        {"no-locate", [&](const std::string& v) { o.no_locate = parse_config_flag("no-locate", v); }},
        {"no-attd", [&](const std::string& v) { o.no_attd = parse_config_flag("no-attd", v); }},
        {"base-lr", [&](const std::string& v) { o.base_lr = parse_config_value<double>("base-lr", v); }},
        {"min-lr", [&](const std::string& v) { o.min_lr = parse_config_value<double>("min-lr", v); }},
        {"clip-norm", [&](const std::string& v) { o.clip_norm = parse_config_value<double>("clip-norm", v); }},
        {"warmup", [&](const std::string& v) { o.warmup = parse_config_value<int>("warmup", v); }},
        {"steps", [&](const std::string& v) { o.steps = parse_config_value<int>("steps", v); }},
        {"epochs", [&](const std::string& v) { o.epochs = parse_config_value<int>("epochs", v); }},
        {"batch-size", [&](const std::string& v) { o.batch = parse_config_value<int>("batch-size", v); }},
        {"seed", [&](const std::string& v) { o.seed = parse_config_value<std::uint64_t>("seed", v); }},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad config line " + std::to_string(lineno) + " in " +
                                     o.config_path + ": " + line);
        const std::string key = trimmed(line.substr(0, eq));
        const std::string value = trimmed(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) throw std::runtime_error("unknown config key: " + key);
        if (cmd->count("--" + key) > 0) continue;
        it->second(value);
    }
}

dmrm_train_config make_train_config(const TrainOpts& o, int steps) {
    dmrm_train_config cfg;
    dmrm_train_config_init(&cfg);
    cfg.model.embed_dim = o.embed_dim;
    cfg.model.hidden = o.hidden;
    cfg.model.d_track = o.d_track;
    cfg.model.d_locate = o.d_locate;
    cfg.model.n_hops = o.hops;
    cfg.model.no_track = o.no_track ? 1 : 0;
    cfg.model.no_locate = o.no_locate ? 1 : 0;
    cfg.model.no_attd = o.no_attd ? 1 : 0;
    cfg.base_lr = o.base_lr;
    cfg.min_lr = o.min_lr;
    cfg.clip_norm = o.clip_norm;
    cfg.warmup_steps = o.warmup;
    cfg.total_steps = steps;
    cfg.batch_size = o.batch;
    cfg.seed = o.seed;
    return cfg;
}

ordered_json train_config_json(const dmrm_train_config& c) {
    ordered_json j;
    j["embed_dim"] = c.model.embed_dim;
    j["hidden"] = c.model.hidden;
    j["d_track"] = c.model.d_track;
    j["d_locate"] = c.model.d_locate;
    j["n_hops"] = c.model.n_hops;
    j["no_track"] = c.model.no_track != 0;
    j["no_locate"] = c.model.no_locate != 0;
    j["no_attd"] = c.model.no_attd != 0;
    j["base_lr"] = c.base_lr;
    j["min_lr"] = c.min_lr;
    j["clip_norm"] = c.clip_norm;
    j["warmup_steps"] = c.warmup_steps;
    j["total_steps"] = c.total_steps;
    j["batch_size"] = c.batch_size;
    j["seed"] = c.seed;
    return j;
}

struct CorpusPaths {
    std::string dataset;
    std::string features;
    std::string vocab;
};

CorpusPaths corpus_paths(const std::string& dir, const std::string& vocab_override) {
    CorpusPaths p;
    p.dataset = (fs::path(dir) / "dataset.json").string();
    p.features = (fs::path(dir) / "features").string();
    p.vocab = vocab_override.empty() ? (fs::path(dir) / "vocab.txt").string() : vocab_override;
    return p;
}

dmrm_corpus* open_corpus(const CorpusPaths& p, const std::string& split) {
    dmrm_corpus* c = nullptr;
    check(dmrm_corpus_open(p.dataset.c_str(), p.features.c_str(), p.vocab.c_str(), split.c_str(),
                           &c));
    return c;
}

int resolve_steps(const TrainOpts& o, int num_dialogs) {
    if (o.steps > 0 && o.epochs > 0)
        throw std::runtime_error("give either --steps or --epochs, not both");
    if (o.epochs > 0) {
        const int per_epoch = (num_dialogs + o.batch - 1) / o.batch;
        return o.epochs * per_epoch;
    }
    return o.steps > 0 ? o.steps : 200;
}

ordered_json corpus_inputs_json(const CorpusPaths& p) {
    ordered_json j;
    j["dataset"] = artifact(p.dataset);
    j["vocab"] = artifact(p.vocab);
    j["features"] = artifact(p.features, true);
    return j;
}

void print_metrics_block(const ordered_json& metrics, const std::string& indent) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << indent << "mrr " << metrics.at("mrr").get<double>() << "\n"
       << indent << "r@1 " << metrics.at("r_at_1").get<double>() << "\n"
       << indent << "r@5 " << metrics.at("r_at_5").get<double>() << "\n"
       << indent << "r@10 " << metrics.at("r_at_10").get<double>() << "\n"
       << indent << "mean_rank " << metrics.at("mean_rank").get<double>() << "\n"
       << indent << "questions " << metrics.at("num_questions").get<int>() << "\n";
    std::cout << os.str();
}

// ---- commands ----

int cmd_synth(const std::string& out_dir, int num_dialogs, int rounds, int objects,
              int candidates, std::uint64_t seed, bool force) {
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force)
        throw std::runtime_error("output directory not empty: " + out_dir +
                                 " (use --force to overwrite)");
    fs::create_directories(out_dir);
    dmrm_synth_config cfg;
    dmrm_synth_config_init(&cfg);
    cfg.num_dialogs = num_dialogs;
    cfg.rounds_per_dialog = rounds;
    cfg.objects_per_image = objects;
    cfg.num_candidates = candidates;
    cfg.seed = seed;
    check(dmrm_synth_write(&cfg, out_dir.c_str()));

    ordered_json m = manifest_base("synth", seed);
    m["config"] = {{"num_dialogs", num_dialogs},
                   {"rounds_per_dialog", rounds},
                   {"objects_per_image", objects},
                   {"num_candidates", candidates}};
    CorpusPaths p = corpus_paths(out_dir, "");
    m["outputs"] = corpus_inputs_json(p);
    write_manifest(m, (fs::path(out_dir) / "manifest.json").string());

    std::cout << "synth: " << num_dialogs << " dialogs, " << num_dialogs * rounds
              << " rounds -> " << out_dir << "\n";
    return 0;
}

int cmd_preprocess(const std::string& dataset, int min_count, const std::string& out_vocab,
                   const std::string& features) {
    check(dmrm_build_vocab(dataset.c_str(), min_count, out_vocab.c_str()));
    int vocab_size = 0;
    {
        std::ifstream is(out_vocab);
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line))
            if (!line.empty()) ++vocab_size;
    }
    if (!features.empty()) {
        CorpusPtr c;
        check(dmrm_corpus_open(dataset.c_str(), features.c_str(), out_vocab.c_str(), "train",
                               &c.p));
    }

    ordered_json m = manifest_base("preprocess", 0);
    m["config"] = {{"min_count", min_count}};
    m["inputs"]["dataset"] = artifact(dataset);
    if (!features.empty()) m["inputs"]["features"] = artifact(features, true);
    m["outputs"]["vocab"] = artifact(out_vocab);
    write_manifest(m, out_vocab + ".manifest.json");

    std::cout << "preprocess: " << vocab_size << " tokens -> " << out_vocab << "\n";
    return 0;
}

int cmd_train(const TrainOpts& o, const std::string& ckpt, const std::string& log_path,
              int ckpt_every) {
    const CorpusPaths paths = corpus_paths(o.corpus_dir, o.vocab_path);
    CorpusPtr corpus;
    corpus.p = open_corpus(paths, "train");
    const int steps = resolve_steps(o, dmrm_corpus_dialogs(corpus.p));
    const dmrm_train_config cfg = make_train_config(o, steps);

    ModelPtr model;
    check(dmrm_model_create(&cfg.model, corpus.p, cfg.seed, &model.p));
    check(dmrm_train(model.p, corpus.p, &cfg, log_path.empty() ? nullptr : log_path.c_str(),
                     ckpt.c_str(), ckpt_every));

    double final_loss = 0.0;
    bool have_loss = false;
    if (!log_path.empty()) {
        std::ifstream is(log_path);
        std::string line, last;
        while (std::getline(is, line))
            if (!line.empty()) last = line;
        if (!last.empty()) {
            final_loss = ordered_json::parse(last).at("loss").get<double>();
            have_loss = true;
        }
    }

    ordered_json m = manifest_base("train", cfg.seed);
    m["config"] = train_config_json(cfg);
    m["inputs"] = corpus_inputs_json(paths);
    m["outputs"]["checkpoint"] = artifact(ckpt);
    if (!log_path.empty()) m["outputs"]["log"] = artifact(log_path);
    write_manifest(m, ckpt + ".manifest.json");

    std::cout << "train: " << steps << " steps -> " << ckpt;
    if (have_loss) std::cout << " (final loss " << std::setprecision(6) << final_loss << ")";
    std::cout << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& corpus_dir, const std::string& vocab,
             const std::string& split, const std::string& scores, const std::string& report) {
    const CorpusPaths paths = corpus_paths(corpus_dir, vocab);
    CorpusPtr corpus;
    corpus.p = open_corpus(paths, split);
    ModelPtr model;
    check(dmrm_model_load(ckpt.c_str(), dmrm_corpus_vocab_fingerprint(corpus.p), &model.p));

    CStr report_json;
    check(dmrm_evaluate(model.p, corpus.p, scores.empty() ? nullptr : scores.c_str(),
                        &report_json.p));
    const ordered_json j = ordered_json::parse(report_json.str());

    print_metrics_block(j, "");
    for (const auto& [name, slice] : j.at("slices").items()) {
        std::cout << "slice " << name << ":\n";
        print_metrics_block(slice, "  ");
    }
    if (!report.empty()) write_text(j.dump(2), report);

    if (!report.empty() || !scores.empty()) {
        ordered_json m = manifest_base("eval", 0);
        m["config"] = {{"split", split}};
        m["inputs"] = corpus_inputs_json(paths);
        m["inputs"]["checkpoint"] = artifact(ckpt);
        if (!report.empty()) m["outputs"]["report"] = artifact(report);
        if (!scores.empty()) m["outputs"]["scores"] = artifact(scores);
        write_manifest(m, (report.empty() ? scores : report) + ".manifest.json");
    }
    return 0;
}

int cmd_ablate(const TrainOpts& o, const std::string& train_dir, const std::string& val_dir,
               const std::string& variants, const std::string& out) {
    const CorpusPaths train_paths = corpus_paths(train_dir, o.vocab_path);
    CorpusPaths val_paths = corpus_paths(val_dir, o.vocab_path);
    val_paths.vocab = train_paths.vocab;  // held-out split shares the training vocabulary
    CorpusPtr train_corpus, val_corpus;
    train_corpus.p = open_corpus(train_paths, "train");
    val_corpus.p = open_corpus(val_paths, "val");

    const int steps = resolve_steps(o, dmrm_corpus_dialogs(train_corpus.p));
    const dmrm_train_config cfg = make_train_config(o, steps);

    CStr table_json;
    check(dmrm_ablate(train_corpus.p, val_corpus.p, &cfg, variants.c_str(), &table_json.p));
    const ordered_json table = ordered_json::parse(table_json.str());

    std::cout << std::left << std::setw(12) << "variant" << std::right << std::setw(8) << "mrr"
              << std::setw(8) << "r@1" << std::setw(8) << "r@5" << std::setw(8) << "r@10"
              << std::setw(11) << "mean_rank" << std::setw(6) << "n" << "\n";
    std::cout << std::fixed << std::setprecision(4);
    for (const auto& row : table) {
        std::cout << std::left << std::setw(12) << row.at("variant").get<std::string>();
        if (row.contains("error")) {
            std::cout << "  rejected: " << row.at("error").get<std::string>() << "\n";
            continue;
        }
        std::cout << std::right << std::setw(8) << row.at("mrr").get<double>() << std::setw(8)
                  << row.at("r_at_1").get<double>() << std::setw(8)
                  << row.at("r_at_5").get<double>() << std::setw(8)
                  << row.at("r_at_10").get<double>() << std::setw(11)
                  << row.at("mean_rank").get<double>() << std::setw(6)
                  << row.at("num_questions").get<int>() << "\n";
    }

    if (!out.empty()) {
        write_text(table.dump(2), out);
        ordered_json m = manifest_base("ablate", cfg.seed);
        m["config"] = train_config_json(cfg);
        m["config"]["variants"] = variants;
        m["inputs"]["train"] = corpus_inputs_json(train_paths);
        m["inputs"]["val"] = corpus_inputs_json(val_paths);
        m["outputs"]["table"] = artifact(out);
        write_manifest(m, out + ".manifest.json");
    }
    return 0;
}

int cmd_trace(const std::string& ckpt, const std::string& corpus_dir, const std::string& vocab,
              int dialog, int round, const std::string& out, const std::string& plot_prefix) {
    const CorpusPaths paths = corpus_paths(corpus_dir, vocab);
    CorpusPtr corpus;
    corpus.p = open_corpus(paths, "val");
    ModelPtr model;
    check(dmrm_model_load(ckpt.c_str(), dmrm_corpus_vocab_fingerprint(corpus.p), &model.p));

    CStr trace_json;
    check(dmrm_trace(model.p, corpus.p, dialog, round, &trace_json.p));
    write_text(trace_json.str(), out);

    std::vector<std::string> plot_paths;
    if (!plot_prefix.empty()) {
        CStr paths_json;
        check(dmrm_trace_plots(trace_json.p, plot_prefix.c_str(), &paths_json.p));
        for (const auto& p : ordered_json::parse(paths_json.str()))
            plot_paths.push_back(p.get<std::string>());
    }

    ordered_json m = manifest_base("trace", 0);
    m["config"] = {{"dialog", dialog}, {"round", round}};
    m["inputs"] = corpus_inputs_json(paths);
    m["inputs"]["checkpoint"] = artifact(ckpt);
    m["outputs"]["trace"] = artifact(out);
    for (std::size_t i = 0; i < plot_paths.size(); ++i)
        m["outputs"]["plot_" + std::to_string(i)] = artifact(plot_paths[i]);
    write_manifest(m, out + ".manifest.json");

    std::cout << "trace: dialog " << dialog << " round " << round << " -> " << out;
    if (!plot_paths.empty()) std::cout << " (+" << plot_paths.size() << " plots)";
    std::cout << "\n";
    return 0;
}

int cmd_compare(const std::string& a, const std::string& b, const std::string& out) {
    CStr result;
    check(dmrm_compare_scores(a.c_str(), b.c_str(), &result.p));
    std::cout << result.str() << "\n";
    if (!out.empty()) {
        write_text(result.str(), out);
        ordered_json m = manifest_base("compare-scores", 0);
        m["inputs"]["scores_a"] = artifact(a);
        m["inputs"]["scores_b"] = artifact(b);
        m["outputs"]["result"] = artifact(out);
        write_manifest(m, out + ".manifest.json");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-channel multi-hop visual dialog model"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dmrm_version()));

    try {
        std::uint64_t seed0 = default_seed();

        // synth
        auto* synth = app.add_subcommand("synth", "generate a synthetic grounded-dialog corpus");
        std::string synth_out;
        int synth_dialogs = 50, synth_rounds = 3, synth_objects = 8, synth_candidates = 20;
        std::uint64_t synth_seed = seed0;
        bool synth_force = false;
        synth->add_option("--out", synth_out, "output directory")->required();
        synth->add_option("--num-dialogs", synth_dialogs)->capture_default_str();
        synth->add_option("--rounds", synth_rounds)->capture_default_str();
        synth->add_option("--objects", synth_objects, "objects per image (K)")
            ->capture_default_str()
            ->check(CLI::PositiveNumber);
        synth->add_option("--candidates", synth_candidates)->capture_default_str();
        synth->add_option("--seed", synth_seed)->capture_default_str();
        synth->add_flag("--force", synth_force, "overwrite a non-empty output directory");

        // preprocess
        auto* prep = app.add_subcommand("preprocess", "build a vocabulary from a raw dataset");
        std::string prep_dataset, prep_out, prep_features;
        int prep_min_count = 5;
        prep->add_option("--dataset", prep_dataset, "raw dataset JSON")->required();
        prep->add_option("--min-count", prep_min_count)->capture_default_str();
        prep->add_option("--out", prep_out, "vocabulary file to write")->required();
        prep->add_option("--features", prep_features,
                         "feature directory; when given, validates the full corpus");

        // train
        auto* tr = app.add_subcommand("train", "train a model");
        TrainOpts tr_opts;
        tr_opts.seed = seed0;
        std::string tr_ckpt, tr_log;
        int tr_ckpt_every = 0;
        tr->add_option("--corpus", tr_opts.corpus_dir, "corpus directory")->required();
        tr->add_option("--vocab", tr_opts.vocab_path, "vocabulary (default <corpus>/vocab.txt)");
        add_train_options(tr, tr_opts);
        tr->add_option("--ckpt", tr_ckpt, "checkpoint to write")->required();
        tr->add_option("--log", tr_log, "training log (newline-delimited JSON)");
        tr->add_option("--ckpt-every", tr_ckpt_every, "periodic checkpoint cadence")
            ->capture_default_str();

        // eval
        auto* ev = app.add_subcommand("eval", "rank candidates and report retrieval metrics");
        std::string ev_ckpt, ev_corpus, ev_vocab, ev_scores, ev_report, ev_split = "val";
        ev->add_option("--ckpt", ev_ckpt, "checkpoint")->required();
        ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
        ev->add_option("--vocab", ev_vocab, "vocabulary (default <corpus>/vocab.txt)");
        ev->add_option("--split", ev_split)->capture_default_str();
        ev->add_option("--scores", ev_scores, "per-question score dump (newline-delimited JSON)");
        ev->add_option("--report", ev_report, "metrics report JSON file");

        // ablate
        auto* ab = app.add_subcommand("ablate", "train and evaluate ablation variants");
        TrainOpts ab_opts;
        ab_opts.seed = seed0;
        std::string ab_train, ab_val, ab_out;
        std::string ab_variants = "full,no-track,no-locate,no-attd";
        ab->add_option("--train", ab_train, "training corpus directory")->required();
        ab->add_option("--val", ab_val, "held-out corpus directory")->required();
        ab->add_option("--vocab", ab_opts.vocab_path,
                       "vocabulary (default <train>/vocab.txt, shared with val)");
        add_train_options(ab, ab_opts);
        ab->add_option("--variants", ab_variants, "comma-separated variant list")
            ->capture_default_str();
        ab->add_option("--out", ab_out, "comparison table JSON file");

        // trace
        auto* trc = app.add_subcommand("trace", "dump attention traces for one round");
        std::string trc_ckpt, trc_corpus, trc_vocab, trc_out = "trace.json", trc_plot;
        int trc_dialog = 0, trc_round = 0;
        trc->add_option("--ckpt", trc_ckpt, "checkpoint")->required();
        trc->add_option("--corpus", trc_corpus, "corpus directory")->required();
        trc->add_option("--vocab", trc_vocab, "vocabulary (default <corpus>/vocab.txt)");
        trc->add_option("--dialog", trc_dialog, "dialog index")->capture_default_str();
        trc->add_option("--round", trc_round, "round index")->capture_default_str();
        trc->add_option("--out", trc_out, "trace JSON file")->capture_default_str();
        trc->add_option("--plot", trc_plot, "render SVG plots under this path prefix");

        // compare-scores
        auto* cmp = app.add_subcommand("compare-scores",
                                       "paired t-test over two per-question score dumps");
        std::string cmp_a, cmp_b, cmp_out;
        cmp->add_option("--a", cmp_a, "first score dump")->required();
        cmp->add_option("--b", cmp_b, "second score dump")->required();
        cmp->add_option("--out", cmp_out, "result JSON file");

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForAllHelp& e) {
            return app.exit(e);
        } catch (const CLI::CallForVersion& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            std::string msg = e.what();
            for (char& c : msg)
                if (c == '\n') c = ' ';
            std::cerr << "error: " << msg << "\n";
            return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
        }

        if (synth->parsed())
            return cmd_synth(synth_out, synth_dialogs, synth_rounds, synth_objects,
                             synth_candidates, synth_seed, synth_force);
        if (prep->parsed())
            return cmd_preprocess(prep_dataset, prep_min_count, prep_out, prep_features);
        if (tr->parsed()) {
            if (!tr_opts.config_path.empty()) apply_config_file(tr, tr_opts);
            return cmd_train(tr_opts, tr_ckpt, tr_log, tr_ckpt_every);
        }
        if (ev->parsed())
            return cmd_eval(ev_ckpt, ev_corpus, ev_vocab, ev_split, ev_scores, ev_report);
        if (ab->parsed()) {
            if (!ab_opts.config_path.empty()) apply_config_file(ab, ab_opts);
            return cmd_ablate(ab_opts, ab_train, ab_val, ab_variants, ab_out);
        }
        if (trc->parsed())
            return cmd_trace(trc_ckpt, trc_corpus, trc_vocab, trc_dialog, trc_round, trc_out,
                             trc_plot);
        if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_out);
        return 0;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "error: " << msg << "\n";
        return 1;
    }
}
