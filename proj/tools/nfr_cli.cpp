#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nfr/attack.hpp"
#include "nfr/error.hpp"
#include "nfr/experiment.hpp"
#include "nfr/folds.hpp"
#include "nfr/io.hpp"
#include "nfr/negative_codec.hpp"
#include "nfr/pipeline.hpp"
#include "nfr/synth.hpp"
#include "nfr/theory.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitValidation = 4;
constexpr int kExitComputation = 5;
constexpr const char* kVersion = "0.1.0";

std::string timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Relative paths are taken from NFR_DATA_DIR when it is set.
fs::path resolve(const std::string& path) {
    fs::path p(path);
    if (p.is_relative())
        if (const char* dir = std::getenv("NFR_DATA_DIR"); dir && *dir) return fs::path(dir) / p;
    return p;
}

void ensure_parent(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

struct Run {
    std::string command;
    std::vector<std::string> argv;
    json config = json::object();
    json seeds = json::object();
    json fingerprints = json::object();
    json inputs = json::array();
    json outputs = json::array();
    std::string started = timestamp();

    void output(const fs::path& p) { outputs.push_back(p.string()); }
    void input(const fs::path& p) { inputs.push_back(p.string()); }

    void write_manifest(const fs::path& primary) const {
        json m;
        m["tool"] = "nfr";
        m["version"] = kVersion;
        m["command"] = command;
        m["argv"] = argv;
        m["config"] = config;
        m["seeds"] = seeds;
        m["fingerprints"] = fingerprints;
        m["inputs"] = inputs;
        m["outputs"] = outputs;
        m["started_at"] = started;
        m["finished_at"] = timestamp();
        fs::path path = primary;
        path += ".manifest.json";
        ensure_parent(path);
        nfr::write_file_atomic(path, m.dump(2) + "\n");
        spdlog::info("manifest written to {}", path.string());
    }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed, Run& run, const std::string& name = "seed") {
    if (seed) {
        run.seeds[name] = *seed;
        run.seeds["policy"] = "seeded";
        return *seed;
    }
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    run.seeds[name] = s;
    run.seeds["policy"] = "os_entropy";
    return s;
}

// Flags shared by the commands that build pipelines.
struct PipelineFlags {
    int k = 3;
    std::size_t length = 512;
    std::string enlargement = "trained";
    std::string preset;
    int epochs = 50;
    std::vector<std::size_t> hidden = {256, 512};
    std::size_t batch_size = 64;
    CLI::Option* length_opt = nullptr;
    CLI::Option* enlargement_opt = nullptr;
    CLI::Option* epochs_opt = nullptr;
    CLI::Option* hidden_opt = nullptr;

    void add(CLI::App* app) {
        app->add_option("--k", k, "Bins per feature")->check(CLI::Range(2, nfr::kMaxBins));
        length_opt = app->add_option("--big-l,--L", length, "Enlarged embedding length L")->check(CLI::PositiveNumber);
        enlargement_opt = app->add_option("--enlargement", enlargement, "Enlargement network")
                              ->check(CLI::IsMember({"trained", "random"}));
        app->add_option("--preset", preset, "Named configuration")->check(CLI::IsMember({"paper"}));
        epochs_opt = app->add_option("--epochs", epochs, "Training epochs")->check(CLI::PositiveNumber);
        hidden_opt = app->add_option("--hidden", hidden, "Hidden layer widths")->delimiter(',');
        app->add_option("--batch-size", batch_size, "Training batch size")->check(CLI::PositiveNumber);
    }

    // Explicit flags override the preset.
    nfr::PipelineConfig resolve(std::uint64_t seed) const {
        auto use = [&](CLI::Option* o) { return preset.empty() || (o && o->count()); };
        nfr::PipelineConfig c;
        if (preset == "paper") c = nfr::PipelineConfig::paper_preset(k);
        c.k = k;
        if (use(length_opt)) c.length = length;
        if (use(enlargement_opt))
            c.enlargement = enlargement == "random" ? nfr::EnlargementMode::random : nfr::EnlargementMode::trained;
        if (use(epochs_opt)) c.training.epochs = epochs;
        if (use(hidden_opt)) c.training.hidden = hidden;
        c.training.batch_size = batch_size;
        c.seed = seed;
        return c;
    }
};

json to_json(const nfr::PipelineConfig& c) {
    json j;
    j["k"] = c.k;
    j["L"] = c.length;
    j["enlargement"] = c.enlargement == nfr::EnlargementMode::random ? "random" : "trained";
    if (c.enlargement == nfr::EnlargementMode::trained) {
        j["hidden"] = c.training.hidden;
        j["epochs"] = c.training.epochs;
        j["batch_size"] = c.training.batch_size;
        j["learning_rate"] = c.training.learning_rate;
        j["rho"] = c.training.rho;
        j["epsilon"] = c.training.epsilon;
        j["dropout"] = c.training.dropout;
        j["batch_norm"] = c.training.batch_norm;
    }
    j["seed"] = c.seed;
    return j;
}

std::vector<nfr::Embedding> load_input(const std::string& path, Run& run) {
    const auto p = resolve(path);
    auto data = nfr::load_embeddings(p);
    run.input(p);
    spdlog::info("loaded {} embeddings from {}", data.size(), p.string());
    return data;
}

void write_text(const fs::path& path, const std::string& text, Run& run) {
    ensure_parent(path);
    nfr::write_file_atomic(path, text);
    run.output(path);
    spdlog::info("wrote {}", path.string());
}

nfr::Pipeline load_pipeline(const std::string& model, const std::string& quantizer, Run& run) {
    const auto mp = resolve(model);
    const auto qp = resolve(quantizer);
    auto p = nfr::Pipeline(nfr::EnlargementNetwork::load(mp), nfr::Quantizer::load(qp));
    run.input(mp);
    run.input(qp);
    run.fingerprints["model"] = nfr::to_hex(p.network().fingerprint());
    run.fingerprints["quantizer"] = nfr::to_hex(p.quantizer().fingerprint());
    return p;
}

// First capture of each subject, in file order.
std::vector<const nfr::Embedding*> first_captures(const std::vector<nfr::Embedding>& data) {
    std::set<std::string> seen;
    std::vector<const nfr::Embedding*> out;
    for (const auto& e : data)
        if (seen.insert(e.subject_id).second) out.push_back(&e);
    return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    std::string output;
    std::size_t subjects = 100, captures = 5, dimension = 64;
    double sigma_within = 1.0 / 6.0, sigma_between = 1.0, attribute_scale = 3.0;
    std::vector<std::string> attributes = {"a0:2:0.8"};
    std::optional<std::uint64_t> seed;
};

void cmd_synth(const SynthArgs& a, Run& run) {
    nfr::SynthConfig c;
    c.subjects = a.subjects;
    c.captures = a.captures;
    c.dimension = a.dimension;
    c.sigma_within = a.sigma_within;
    c.sigma_between = a.sigma_between;
    c.attribute_scale = a.attribute_scale;
    for (const auto& spec : a.attributes) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() != 3) throw CLI::ValidationError("--attribute", "expected name:classes:signal, got " + spec);
        try {
            c.attributes.push_back({parts[0], std::stoul(parts[1]), std::stod(parts[2])});
        } catch (const std::logic_error&) {
            throw CLI::ValidationError("--attribute", "expected name:classes:signal, got " + spec);
        }
    }
    c.seed = resolve_seed(a.seed, run);
    run.config = {{"subjects", c.subjects},         {"captures", c.captures},
                  {"dimension", c.dimension},       {"sigma_within", c.sigma_within},
                  {"sigma_between", c.sigma_between}, {"attribute_scale", c.attribute_scale},
                  {"attributes", a.attributes}};
    const auto data = nfr::generate(c);
    const auto out = resolve(a.output);
    ensure_parent(out);
    nfr::save_embeddings(data, out);
    run.output(out);
    spdlog::info("wrote {} embeddings to {}", data.size(), out.string());
    run.write_manifest(out);
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
    std::string input, output;
    PipelineFlags pipeline;
    double calibration_fraction = 0.2;
    std::optional<std::uint64_t> seed;
};

void cmd_train(const TrainArgs& a, Run& run) {
    const auto data = load_input(a.input, run);
    const auto seed = resolve_seed(a.seed, run);
    const auto config = a.pipeline.resolve(seed);
    run.config = to_json(config);
    run.config["calibration_fraction"] = a.calibration_fraction;

    // Hold out whole subjects for threshold calibration.
    auto subjects = nfr::distinct_subjects(data);
    std::set<std::string> held;
    if (a.calibration_fraction > 0.0) {
        std::mt19937_64 rng(nfr::derive_seed(seed, 0xca1));
        std::shuffle(subjects.begin(), subjects.end(), rng);
        const auto n = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::llround(a.calibration_fraction * static_cast<double>(subjects.size()))));
        if (subjects.size() < n + 2)
            throw nfr::ValidationError("too few subjects (" + std::to_string(subjects.size()) +
                                       ") for a calibration split; pass --calibration-fraction 0");
        held.insert(subjects.begin(), subjects.begin() + static_cast<std::ptrdiff_t>(n));
    }
    std::vector<nfr::Embedding> fit, calib;
    for (const auto& e : data) (held.contains(e.subject_id) ? calib : fit).push_back(e);

    spdlog::info("building pipeline on {} embeddings (k={}, L={})", fit.size(), config.k, config.length);
    const auto pipe = nfr::Pipeline::build(fit, config);
    if (!pipe.training_loss().empty())
        spdlog::info("final training loss {:.4f}", pipe.training_loss().back());

    const auto dir = resolve(a.output);
    fs::create_directories(dir);
    pipe.network().save(dir / "enlargement.nenl");
    pipe.quantizer().save(dir / "quantizer.nqnt");
    run.output(dir / "enlargement.nenl");
    run.output(dir / "quantizer.nqnt");
    run.fingerprints["model"] = nfr::to_hex(pipe.network().fingerprint());
    run.fingerprints["quantizer"] = nfr::to_hex(pipe.quantizer().fingerprint());

    if (!calib.empty()) {
        auto rng = nfr::RandomSource::seeded(nfr::derive_seed(seed, 0xca2));
        const auto collected = nfr::collect_scores(calib, pipe, {}, rng);
        const auto point = nfr::eer_point(collected.scores);
        json c;
        c["threshold"] = point.threshold;
        c["eer"] = point.eer;
        c["fmr"] = point.fmr;
        c["fnmr"] = point.fnmr;
        c["held_out_subjects"] = held.size();
        c["genuine"] = collected.scores.genuine.size();
        c["imposter"] = collected.scores.imposter.size();
        write_text(dir / "calibration.json", c.dump(2) + "\n", run);
        spdlog::info("calibration threshold {:.6f} (held-out EER {:.4f})", point.threshold, point.eer);
    }
    if (!pipe.training_loss().empty()) {
        std::ostringstream loss;
        loss.precision(17);
        loss << "epoch,loss\n";
        for (std::size_t i = 0; i < pipe.training_loss().size(); ++i)
            loss << i + 1 << ',' << pipe.training_loss()[i] << '\n';
        write_text(dir / "training_loss.csv", loss.str(), run);
    }
    run.write_manifest(dir);
}

// ---------------------------------------------------------------------------
// enroll

struct EnrollArgs {
    std::string input, model, quantizer, gallery;
    std::optional<std::uint64_t> seed;
};

void cmd_enroll(const EnrollArgs& a, Run& run) {
    const auto data = load_input(a.input, run);
    const auto pipe = load_pipeline(a.model, a.quantizer, run);
    const auto policy = a.seed ? nfr::SeedPolicy::seeded : nfr::SeedPolicy::os_entropy;
    auto rng = a.seed ? nfr::RandomSource::seeded(*a.seed) : nfr::RandomSource::from_entropy();
    run.seeds["policy"] = a.seed ? "seeded" : "os_entropy";
    if (a.seed) run.seeds["seed"] = *a.seed;

    const auto path = resolve(a.gallery);
    nfr::Gallery gallery(pipe.gallery_metadata(policy));
    if (fs::exists(path)) {
        auto existing = nfr::load_gallery(path);
        pipe.check_gallery(existing);
        auto meta = existing.metadata();
        if (meta.seed_policy != policy) {
            spdlog::warn("gallery mixes seeded and entropy enrolments; marking it os_entropy");
            meta.seed_policy = nfr::SeedPolicy::os_entropy;
        }
        gallery = nfr::Gallery(meta);
        for (const auto& [id, t] : existing.entries()) gallery.enroll(t);
        spdlog::info("appending to gallery with {} entries", existing.size());
    }
    std::size_t enrolled = 0;
    for (const auto* e : first_captures(data)) {
        if (gallery.contains(e->subject_id)) spdlog::warn("replacing template of subject {}", e->subject_id);
        gallery.enroll(pipe.enroll(*e, rng));
        ++enrolled;
    }
    ensure_parent(path);
    nfr::save_gallery(gallery, path);
    run.output(path);
    run.config = {{"k", pipe.k()}, {"L", pipe.length()}, {"enrolled", enrolled}, {"gallery_size", gallery.size()}};
    spdlog::info("enrolled {} subjects, gallery holds {}", enrolled, gallery.size());
    run.write_manifest(path);
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
    std::string input, model, quantizer, gallery, output, calibration;
    std::optional<double> threshold;
};

void cmd_verify(const VerifyArgs& a, Run& run) {
    const auto probes = load_input(a.input, run);
    const auto pipe = load_pipeline(a.model, a.quantizer, run);
    const auto gpath = resolve(a.gallery);
    const auto gallery = nfr::load_gallery(gpath);
    run.input(gpath);
    pipe.check_gallery(gallery);

    double threshold = 0.0;
    if (a.threshold) {
        threshold = *a.threshold;
    } else {
        const auto cpath = a.calibration.empty() ? resolve(a.model).parent_path() / "calibration.json"
                                                 : resolve(a.calibration);
        if (!fs::exists(cpath))
            throw nfr::ValidationError("no threshold given and no calibration file at '" + cpath.string() +
                                       "'; pass --threshold or --calibration");
        const auto c = json::parse(nfr::read_file(cpath), nullptr, false);
        if (c.is_discarded() || !c.contains("threshold") || !c["threshold"].is_number())
            throw nfr::ParseError("calibration file '" + cpath.string() + "' has no numeric threshold");
        threshold = c["threshold"].get<double>();
        run.input(cpath);
    }
    run.config = {{"threshold", threshold}};

    std::ostringstream out;
    out.precision(17);
    out << "capture_id,subject_id,score,decision\n";
    std::size_t accepted = 0, unknown = 0;
    const auto positives = pipe.positives(probes);
    for (const auto& t : positives) {
        out << t.capture_id << ',' << t.subject_id << ',';
        if (!gallery.contains(t.subject_id)) {
            out << ",not_enrolled\n";
            ++unknown;
            continue;
        }
        const double s = nfr::nhd(t, gallery.at(t.subject_id));
        const bool accept = s >= threshold;
        accepted += accept;
        out << s << ',' << (accept ? "accept" : "reject") << '\n';
    }
    if (a.output.empty()) {
        std::cout << out.str();
    } else {
        const auto path = resolve(a.output);
        write_text(path, out.str(), run);
        run.write_manifest(path);
    }
    spdlog::info("{} probes: {} accepted, {} not enrolled (threshold {:.6f})", positives.size(), accepted, unknown,
                 threshold);
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
    std::string input, output;
    PipelineFlags pipeline;
    std::size_t folds = 5;
    std::vector<double> target_fmr;
    std::string pairing = "all";
    std::size_t imposter_pairs = 10000;
    std::optional<std::uint64_t> seed;
};

void cmd_eval(const EvalArgs& a, Run& run) {
    const auto data = load_input(a.input, run);
    const auto seed = resolve_seed(a.seed, run);
    const auto config = a.pipeline.resolve(seed);
    nfr::PairingConfig pairing;
    pairing.policy = a.pairing == "sampled" ? nfr::PairingPolicy::sampled_pairs : nfr::PairingPolicy::all_pairs;
    pairing.imposter_pairs = a.imposter_pairs;
    pairing.seed = nfr::derive_seed(seed, 0x9a1);
    pairing.verify_distance_range = true;
    run.config = to_json(config);
    run.config["folds"] = a.folds;
    run.config["pairing"] = nfr::to_string(pairing.policy);
    if (pairing.policy == nfr::PairingPolicy::sampled_pairs) run.config["imposter_pairs"] = a.imposter_pairs;
    run.config["target_fmr"] = a.target_fmr;

    const auto split = nfr::make_subject_disjoint_folds(data, a.folds, seed);
    const auto report = nfr::run_verification_experiment(data, config, split, pairing);
    for (const auto& w : report.warnings) spdlog::warn("{}", w);

    const auto dir = resolve(a.output);
    fs::create_directories(dir);
    write_text(dir / "verification.csv", report.to_csv(), run);
    write_text(dir / "roc.csv", nfr::roc_csv(report.roc), run);
    if (!a.target_fmr.empty()) {
        std::ostringstream t;
        t.precision(17);
        t << "target_fmr,fold,threshold,fnmr\n";
        for (double target : a.target_fmr) {
            std::vector<double> values;
            for (const auto& f : report.folds) {
                const double v = nfr::fnmr_at_fmr(f.scores, target);
                values.push_back(v);
                t << target << ',' << f.fold << ',' << nfr::threshold_at_fmr(f.scores, target) << ',' << v << '\n';
            }
            const auto ms = nfr::mean_std(values);
            t << target << ",mean,," << ms.mean << '\n' << target << ",std,," << ms.stddev << '\n';
        }
        write_text(dir / "fnmr_at_target.csv", t.str(), run);
    }
    std::cout << report.to_table();
    run.write_manifest(dir);
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
    std::string input, output, attribute;
    PipelineFlags pipeline;
    std::size_t folds = 5;
    std::optional<std::uint64_t> seed;
};

void cmd_attack(const AttackArgs& a, Run& run) {
    const auto data = load_input(a.input, run);
    const auto seed = resolve_seed(a.seed, run);
    const auto config = a.pipeline.resolve(seed);
    run.config = to_json(config);
    run.config["folds"] = a.folds;
    run.config["attribute"] = a.attribute;
    run.config["attackers"] = {"logreg (tuned l2)", "knn (tuned k)"};

    const auto split = nfr::make_subject_disjoint_folds(data, a.folds, seed);
    const auto report = nfr::run_attack(data, config, a.attribute, split, nfr::AttackConfig::builtin(seed));
    const auto dir = resolve(a.output);
    fs::create_directories(dir);
    write_text(dir / "attack.csv", report.to_csv(), run);
    std::cout << report.to_table();
    run.write_manifest(dir);
}

// ---------------------------------------------------------------------------
// theory

struct TheoryArgs {
    std::optional<std::size_t> length, distance;
    int k = 3;
    std::string input, embeddings, output;
    PipelineFlags pipeline;
    std::size_t bins = 100;
    std::size_t draws = 5;
    std::optional<std::uint64_t> seed;
};

std::vector<std::size_t> read_distances(const fs::path& path) {
    std::istringstream in(nfr::read_file(path));
    std::vector<std::size_t> out;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto field = line.substr(0, line.find(','));
        if (n == 1 && !field.empty() && !std::isdigit(static_cast<unsigned char>(field[0]))) continue;  // header
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(field, &pos);
        } catch (const std::logic_error&) {
            pos = 0;
        }
        if (pos == 0 || pos != field.size() || field[0] == '-')
            throw nfr::ParseError(path.string() + ":" + std::to_string(n) + ": expected a non-negative integer, got '" +
                                  field + "'");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty()) throw nfr::ParseError(path.string() + ": no distances");
    return out;
}

void cmd_theory(const TheoryArgs& a, Run& run) {
    std::string csv;
    std::string summary;
    if (!a.embeddings.empty()) {
        const auto data = load_input(a.embeddings, run);
        const auto seed = resolve_seed(a.seed, run);
        auto config = a.pipeline.resolve(seed);
        config.k = a.k;
        if (a.length) config.length = *a.length;
        nfr::TheoryValidationConfig v;
        v.bins = a.bins;
        v.negation_draws = a.draws;
        v.seed = nfr::derive_seed(seed, 0x7e0);
        run.config = to_json(config);
        run.config["bins"] = a.bins;
        run.config["negation_draws"] = a.draws;
        const auto report = nfr::validate_theory(data, config, v);
        for (const auto& w : report.warnings) spdlog::warn("{}", w);
        csv = report.to_csv();
        summary = report.to_table();
    } else {
        if (!a.length) throw CLI::ValidationError("--big-l", "L is required");
        const auto length = *a.length;
        run.config = {{"L", length}, {"k", a.k}};
        if (a.distance) {
            const auto p = nfr::pmf(length, *a.distance, a.k);
            std::ostringstream out;
            out.precision(17);
            out << "negative_distance,probability\n";
            for (std::size_t mu = 0; mu < p.probabilities.size(); ++mu)
                out << p.min_support() + mu << ',' << p.probabilities[mu] << '\n';
            csv = out.str();
            run.config["D"] = *a.distance;
        } else if (!a.input.empty()) {
            const auto path = resolve(a.input);
            const auto distances = read_distances(path);
            run.input(path);
            csv = nfr::transform_score_distribution(distances, length, a.k).to_csv();
            run.config["distances"] = distances.size();
        } else {
            throw CLI::ValidationError("theory", "pass --D, a distance file via --input, or --embeddings");
        }
    }
    if (a.output.empty()) {
        std::cout << csv;
    } else {
        const auto path = resolve(a.output);
        write_text(path, csv, run);
        run.write_manifest(path);
    }
    if (!summary.empty()) std::cerr << summary;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepArgs {
    std::string input, output, attribute;
    PipelineFlags pipeline;
    std::vector<int> ks = {3};
    std::vector<std::size_t> lengths = {64, 256, 1024};
    std::vector<std::uint64_t> seeds;
    std::size_t folds = 5;
    std::optional<std::uint64_t> seed;
};

void cmd_sweep(const SweepArgs& a, Run& run) {
    const auto data = load_input(a.input, run);
    nfr::SweepGrid grid;
    grid.ks = a.ks;
    grid.lengths = a.lengths;
    grid.folds = a.folds;
    grid.attribute = a.attribute;
    if (!a.seeds.empty()) {
        grid.seeds = a.seeds;
        run.seeds["seeds"] = a.seeds;
        run.seeds["policy"] = "seeded";
    } else {
        grid.seeds = {resolve_seed(a.seed, run)};
    }
    const auto base = a.pipeline.resolve(0);
    run.config = to_json(base);
    run.config.erase("seed");
    run.config["ks"] = grid.ks;
    run.config["lengths"] = grid.lengths;
    run.config["folds"] = grid.folds;
    run.config["attribute"] = grid.attribute;

    const auto report = nfr::parameter_sweep(data, base, grid);
    const auto path = resolve(a.output);
    write_text(path, report.to_csv(), run);
    std::cout << report.to_csv();
    run.write_manifest(path);
}

void add_seed(CLI::App* app, std::optional<std::uint64_t>& seed) {
    app->add_option("--seed", seed, "Master seed; omit to draw one from the OS");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Negative face recognition: privacy-enhancing templates and experiments", "nfr"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    bool verbose = false;
    bool quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic embedding dataset");
    s->add_option("--output,-o", synth.output, "Embedding file (.csv or binary)")->required();
    s->add_option("--subjects", synth.subjects)->check(CLI::Range(2, 1000000));
    s->add_option("--captures", synth.captures)->check(CLI::PositiveNumber);
    s->add_option("--dimension,--d", synth.dimension)->check(CLI::PositiveNumber);
    s->add_option("--sigma-within", synth.sigma_within)->check(CLI::PositiveNumber);
    s->add_option("--sigma-between", synth.sigma_between)->check(CLI::PositiveNumber);
    s->add_option("--attribute-scale", synth.attribute_scale)->check(CLI::NonNegativeNumber);
    s->add_option("--attribute", synth.attributes, "name:classes:signal (repeatable)");
    add_seed(s, synth.seed);

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train the enlargement network and fit the quantizer");
    t->add_option("--input,-i", train.input, "Training embeddings")->required();
    t->add_option("--output,-o", train.output, "Output directory")->required();
    train.pipeline.add(t);
    t->add_option("--calibration-fraction", train.calibration_fraction,
                  "Share of subjects held out to calibrate the decision threshold")
        ->check(CLI::Range(0.0, 0.9));
    add_seed(t, train.seed);

    EnrollArgs enroll;
    auto* e = app.add_subcommand("enroll", "Enroll negative templates into a gallery");
    e->add_option("--input,-i", enroll.input, "Embeddings to enroll (first capture per subject)")->required();
    e->add_option("--model", enroll.model, "Enlargement network file")->required();
    e->add_option("--quantizer", enroll.quantizer, "Quantizer file")->required();
    e->add_option("--gallery,--output,-o", enroll.gallery, "Gallery file; appended to if it exists")->required();
    e->add_option("--seed", enroll.seed, "Seed the negation stream; omit for OS entropy");

    VerifyArgs verify;
    auto* v = app.add_subcommand("verify", "Score probes against their claimed identity");
    v->add_option("--input,-i", verify.input, "Probe embeddings")->required();
    v->add_option("--model", verify.model, "Enlargement network file")->required();
    v->add_option("--quantizer", verify.quantizer, "Quantizer file")->required();
    v->add_option("--gallery", verify.gallery, "Gallery file")->required();
    v->add_option("--threshold", verify.threshold, "Accept when score >= threshold")->check(CLI::Range(0.0, 1.0));
    v->add_option("--calibration", verify.calibration, "Calibration file (default: next to the model)");
    v->add_option("--output,-o", verify.output, "Decision CSV (default: stdout)");

    EvalArgs eval;
    auto* ev = app.add_subcommand("eval", "Cross-validated verification experiment");
    ev->add_option("--input,-i", eval.input, "Embeddings")->required();
    ev->add_option("--output,-o", eval.output, "Output directory")->required();
    eval.pipeline.add(ev);
    ev->add_option("--folds", eval.folds)->check(CLI::Range(2, 1000));
    ev->add_option("--target-fmr", eval.target_fmr, "Extra FNMR@FMR operating points")
        ->delimiter(',')
        ->check(CLI::Range(0.0, 1.0));
    ev->add_option("--pairing", eval.pairing)->check(CLI::IsMember({"all", "sampled"}));
    ev->add_option("--imposter-pairs", eval.imposter_pairs)->check(CLI::PositiveNumber);
    add_seed(ev, eval.seed);

    AttackArgs attack;
    auto* at = app.add_subcommand("attack", "Attribute-inference attack on original, positive and negative templates");
    at->add_option("--input,-i", attack.input, "Embeddings with attribute labels")->required();
    at->add_option("--output,-o", attack.output, "Output directory")->required();
    at->add_option("--attribute", attack.attribute, "Attribute to attack")->required();
    attack.pipeline.add(at);
    at->add_option("--folds", attack.folds)->check(CLI::Range(2, 1000));
    add_seed(at, attack.seed);

    TheoryArgs theory;
    auto* th = app.add_subcommand("theory", "Negative-domain distance distributions");
    th->add_option("--big-l,--L", theory.length, "Template length L")->check(CLI::PositiveNumber);
    th->add_option("--D", theory.distance, "Positive-domain distance D");
    th->add_option("--k", theory.k)->check(CLI::Range(2, nfr::kMaxBins));
    th->add_option("--input,-i", theory.input, "File of positive-domain distances, one per line");
    th->add_option("--embeddings", theory.embeddings, "Validate the prediction against a pipeline on these");
    th->add_option("--output,-o", theory.output, "CSV output (default: stdout)");
    th->add_option("--enlargement", theory.pipeline.enlargement)->check(CLI::IsMember({"trained", "random"}));
    th->add_option("--epochs", theory.pipeline.epochs)->check(CLI::PositiveNumber);
    th->add_option("--hidden", theory.pipeline.hidden)->delimiter(',');
    th->add_option("--bins", theory.bins)->check(CLI::PositiveNumber);
    th->add_option("--draws", theory.draws, "Negations per comparison pair")->check(CLI::PositiveNumber);
    add_seed(th, theory.seed);

    SweepArgs sweep;
    auto* sw = app.add_subcommand("sweep", "EER and attack accuracy over a (k, L) grid");
    sw->add_option("--input,-i", sweep.input, "Embeddings")->required();
    sw->add_option("--output,-o", sweep.output, "Sweep CSV")->required();
    sweep.pipeline.add(sw);
    sw->add_option("--ks", sweep.ks, "Comma-separated k values")->delimiter(',');
    sw->add_option("--lengths", sweep.lengths, "Comma-separated L values")->delimiter(',');
    sw->add_option("--seeds", sweep.seeds, "Comma-separated seeds to average over")->delimiter(',');
    sw->add_option("--folds", sweep.folds)->check(CLI::Range(2, 1000));
    sw->add_option("--attribute", sweep.attribute, "Also attack this attribute at every grid point");
    add_seed(sw, sweep.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    spdlog::set_default_logger(spdlog::stderr_color_mt("nfr"));
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    Run run;
    run.argv.assign(argv, argv + argc);
    try {
        if (s->parsed()) {
            run.command = "synth";
            cmd_synth(synth, run);
        } else if (t->parsed()) {
            run.command = "train";
            cmd_train(train, run);
        } else if (e->parsed()) {
            run.command = "enroll";
            cmd_enroll(enroll, run);
        } else if (v->parsed()) {
            run.command = "verify";
            cmd_verify(verify, run);
        } else if (ev->parsed()) {
            run.command = "eval";
            cmd_eval(eval, run);
        } else if (at->parsed()) {
            run.command = "attack";
            cmd_attack(attack, run);
        } else if (th->parsed()) {
            run.command = "theory";
            cmd_theory(theory, run);
        } else if (sw->parsed()) {
            run.command = "sweep";
            cmd_sweep(sweep, run);
        }
    } catch (const CLI::ValidationError& err) {
        spdlog::error("{}", err.what());
        return kExitUsage;
    } catch (const nfr::IoError& err) {
        spdlog::error("I/O error: {}", err.what());
        return kExitIo;
    } catch (const fs::filesystem_error& err) {
        spdlog::error("I/O error: {}", err.what());
        return kExitIo;
    } catch (const nfr::ValidationError& err) {
        spdlog::error("invalid input: {}", err.what());
        return kExitValidation;
    } catch (const nfr::ComputationError& err) {
        spdlog::error("computation failed: {}", err.what());
        return kExitComputation;
    } catch (const std::exception& err) {
        spdlog::error("{}", err.what());
        return 1;
    }
    return 0;
}
