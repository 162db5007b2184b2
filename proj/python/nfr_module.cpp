#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nfr/attack.hpp"
#include "nfr/error.hpp"
#include "nfr/experiment.hpp"
#include "nfr/folds.hpp"
#include "nfr/io.hpp"
#include "nfr/metrics.hpp"
#include "nfr/negative_codec.hpp"
#include "nfr/pipeline.hpp"
#include "nfr/synth.hpp"
#include "nfr/theory.hpp"

namespace py = pybind11;
using namespace pybind11::literals;

namespace {

nfr::ScoreSet score_set(std::vector<double> genuine, std::vector<double> imposter) {
    return {std::move(genuine), std::move(imposter)};
}

py::dict fold_dict(const nfr::FoldResult& f) {
    return py::dict("fold"_a = f.fold, "eer"_a = f.eer.eer, "eer_threshold"_a = f.eer.threshold,
                    "fnmr_at_1e2"_a = f.fnmr_at_1e2, "fnmr_at_1e3"_a = f.fnmr_at_1e3, "raw_eer"_a = f.raw_eer,
                    "genuine"_a = f.genuine_count, "imposter"_a = f.imposter_count);
}

}  // namespace

PYBIND11_MODULE(_nfr, m) {
    m.doc() = "Negative face recognition: complementary templates for soft-biometric privacy.";

    auto base = py::register_exception<nfr::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<nfr::IoError>(m, "IoError", base.ptr());
    auto validation = py::register_exception<nfr::ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<nfr::ParseError>(m, "ParseError", validation.ptr());
    py::register_exception<nfr::ComputationError>(m, "ComputationError", base.ptr());

    py::class_<nfr::Embedding>(m, "Embedding")
        .def(py::init<>())
        .def(py::init([](std::string subject, std::string capture, std::vector<float> values,
                         std::map<std::string, std::string> attributes) {
                 return nfr::Embedding{std::move(subject), std::move(capture), std::move(values),
                                       std::move(attributes)};
             }),
             "subject_id"_a, "capture_id"_a, "values"_a, "attributes"_a = std::map<std::string, std::string>{})
        .def_readwrite("subject_id", &nfr::Embedding::subject_id)
        .def_readwrite("capture_id", &nfr::Embedding::capture_id)
        .def_readwrite("values", &nfr::Embedding::values)
        .def_readwrite("attributes", &nfr::Embedding::attributes)
        .def("__repr__", [](const nfr::Embedding& e) {
            return "<Embedding " + e.capture_id + " of " + e.subject_id + ", d=" + std::to_string(e.dimension()) +
                   ">";
        });

    py::class_<nfr::PositiveTemplate>(m, "PositiveTemplate")
        .def(py::init([](std::vector<nfr::Label> labels, int k) { return nfr::PositiveTemplate{std::move(labels), k}; }),
             "labels"_a, "k"_a)
        .def_readonly("labels", &nfr::PositiveTemplate::labels)
        .def_readonly("k", &nfr::PositiveTemplate::k)
        .def_readonly("subject_id", &nfr::PositiveTemplate::subject_id)
        .def_readonly("capture_id", &nfr::PositiveTemplate::capture_id)
        .def("__len__", &nfr::PositiveTemplate::length);

    py::class_<nfr::NegativeTemplate>(m, "NegativeTemplate")
        .def_readonly("labels", &nfr::NegativeTemplate::labels)
        .def_readonly("k", &nfr::NegativeTemplate::k)
        .def_readonly("subject_id", &nfr::NegativeTemplate::subject_id)
        .def("__len__", &nfr::NegativeTemplate::length);

    py::class_<nfr::RandomSource>(m, "RandomSource")
        .def_static("seeded", &nfr::RandomSource::seeded, "seed"_a)
        .def_static("from_entropy", &nfr::RandomSource::from_entropy)
        .def_property_readonly("is_seeded", &nfr::RandomSource::is_seeded);

    m.def("negate", &nfr::negate, "positive"_a, "rng"_a);
    m.def("collisions", &nfr::collisions, "positive"_a, "negative"_a);
    m.def("nhd", &nfr::nhd, "positive"_a, "negative"_a);
    m.def("positive_hd", &nfr::positive_hd, "a"_a, "b"_a);

    m.def(
        "synth",
        [](std::size_t subjects, std::size_t captures, std::size_t dimension, double sigma_within,
           double sigma_between, double attribute_scale, std::vector<std::tuple<std::string, std::size_t, double>> attrs,
           std::uint64_t seed) {
            nfr::SynthConfig c;
            c.subjects = subjects;
            c.captures = captures;
            c.dimension = dimension;
            c.sigma_within = sigma_within;
            c.sigma_between = sigma_between;
            c.attribute_scale = attribute_scale;
            for (auto& [name, classes, signal] : attrs) c.attributes.push_back({name, classes, signal});
            c.seed = seed;
            return nfr::generate(c);
        },
        "subjects"_a = 100, "captures"_a = 5, "dimension"_a = 64, "sigma_within"_a = 1.0 / 6.0,
        "sigma_between"_a = 1.0, "attribute_scale"_a = 3.0,
        "attributes"_a = std::vector<std::tuple<std::string, std::size_t, double>>{{"a0", 2, 0.8}}, "seed"_a = 0,
        "Generate an identity-clustered synthetic embedding dataset.");

    m.def("load_embeddings", py::overload_cast<const std::filesystem::path&>(&nfr::load_embeddings), "path"_a);
    m.def(
        "save_embeddings",
        [](const std::vector<nfr::Embedding>& e, const std::filesystem::path& path) { nfr::save_embeddings(e, path); },
        "embeddings"_a, "path"_a);

    py::enum_<nfr::EnlargementMode>(m, "EnlargementMode")
        .value("trained", nfr::EnlargementMode::trained)
        .value("random", nfr::EnlargementMode::random);

    py::class_<nfr::PipelineConfig>(m, "PipelineConfig")
        .def(py::init([](int k, std::size_t length, nfr::EnlargementMode enlargement, std::uint64_t seed, int epochs,
                         std::vector<std::size_t> hidden) {
                 nfr::PipelineConfig c;
                 c.k = k;
                 c.length = length;
                 c.enlargement = enlargement;
                 c.seed = seed;
                 c.training.epochs = epochs;
                 c.training.hidden = std::move(hidden);
                 return c;
             }),
             "k"_a = 3, "length"_a = 512, "enlargement"_a = nfr::EnlargementMode::random, "seed"_a = 0,
             "epochs"_a = 50, "hidden"_a = std::vector<std::size_t>{256, 512})
        .def_static("paper_preset", &nfr::PipelineConfig::paper_preset, "k"_a)
        .def_readwrite("k", &nfr::PipelineConfig::k)
        .def_readwrite("length", &nfr::PipelineConfig::length)
        .def_readwrite("enlargement", &nfr::PipelineConfig::enlargement)
        .def_readwrite("seed", &nfr::PipelineConfig::seed);

    py::class_<nfr::Pipeline>(m, "Pipeline")
        .def_static(
            "build", [](const std::vector<nfr::Embedding>& train, const nfr::PipelineConfig& c) {
                return nfr::Pipeline::build(train, c);
            },
            "train"_a, "config"_a)
        .def_property_readonly("k", &nfr::Pipeline::k)
        .def_property_readonly("length", &nfr::Pipeline::length)
        .def_property_readonly("training_loss", &nfr::Pipeline::training_loss)
        .def_property_readonly("model_fingerprint",
                               [](const nfr::Pipeline& p) { return nfr::to_hex(p.network().fingerprint()); })
        .def_property_readonly("quantizer_fingerprint",
                               [](const nfr::Pipeline& p) { return nfr::to_hex(p.quantizer().fingerprint()); })
        .def("enlarge", [](const nfr::Pipeline& p, const nfr::Embedding& e) { return p.network().enlarge(e).values; })
        .def("positive", &nfr::Pipeline::positive, "embedding"_a)
        .def("enroll", &nfr::Pipeline::enroll, "embedding"_a, "rng"_a)
        .def("save", [](const nfr::Pipeline& p, const std::filesystem::path& model,
                        const std::filesystem::path& quantizer) {
            p.network().save(model);
            p.quantizer().save(quantizer);
        })
        .def_static("load", [](const std::filesystem::path& model, const std::filesystem::path& quantizer) {
            return nfr::Pipeline(nfr::EnlargementNetwork::load(model), nfr::Quantizer::load(quantizer));
        });

    py::class_<nfr::NegativeDistancePmf>(m, "NegativeDistancePmf")
        .def_readonly("length", &nfr::NegativeDistancePmf::length)
        .def_readonly("distance", &nfr::NegativeDistancePmf::distance)
        .def_readonly("k", &nfr::NegativeDistancePmf::k)
        .def_readonly("probabilities", &nfr::NegativeDistancePmf::probabilities)
        .def("probability", &nfr::NegativeDistancePmf::probability, "d_prime"_a)
        .def("mean", &nfr::NegativeDistancePmf::mean)
        .def("variance", &nfr::NegativeDistancePmf::variance)
        .def("mode", &nfr::NegativeDistancePmf::mode)
        .def("support", [](const nfr::NegativeDistancePmf& p) {
            return std::pair{p.min_support(), p.max_support()};
        });

    m.def("pmf", &nfr::pmf, "length"_a, "distance"_a, "k"_a,
          "Distribution of the negative-domain distance D' given positive distance D.");
    m.def(
        "pmf_exact",
        [](std::size_t length, std::size_t distance, int k) {
            py::object fraction = py::module_::import("fractions").attr("Fraction");
            py::list out;
            for (const auto& r : nfr::pmf_exact(length, distance, k))
                out.append(fraction(py::int_(py::str(boost::multiprecision::numerator(r).str())),
                                    py::int_(py::str(boost::multiprecision::denominator(r).str()))));
            return out;
        },
        "length"_a, "distance"_a, "k"_a, "Exact masses as fractions.Fraction, indexed by D' - (L - D).");
    m.def("expected_nhd", &nfr::expected_nhd, "length"_a, "distance"_a, "k"_a);

    m.def("eer", [](std::vector<double> g, std::vector<double> i) { return nfr::eer(score_set(g, i)); },
          "genuine"_a, "imposter"_a);
    m.def(
        "fnmr_at_fmr",
        [](std::vector<double> g, std::vector<double> i, double target) {
            return nfr::fnmr_at_fmr(score_set(g, i), target);
        },
        "genuine"_a, "imposter"_a, "target_fmr"_a);
    m.def(
        "collect_scores",
        [](const std::vector<nfr::Embedding>& data, const nfr::Pipeline& p, std::uint64_t seed) {
            auto rng = nfr::RandomSource::seeded(seed);
            const auto c = nfr::collect_scores(data, p, {}, rng);
            return std::pair{c.scores.genuine, c.scores.imposter};
        },
        "embeddings"_a, "pipeline"_a, "seed"_a = 0, "Genuine and imposter NHD scores under the enrolment protocol.");

    m.def(
        "run_verification",
        [](const std::vector<nfr::Embedding>& data, const nfr::PipelineConfig& c, std::size_t folds,
           std::uint64_t split_seed) {
            const auto split = nfr::make_subject_disjoint_folds(data, folds, split_seed);
            const auto r = nfr::run_verification_experiment(data, c, split);
            py::list per_fold;
            for (const auto& f : r.folds) per_fold.append(fold_dict(f));
            return py::dict("eer"_a = std::pair{r.eer.mean, r.eer.stddev},
                            "fnmr_at_1e2"_a = std::pair{r.fnmr_at_1e2.mean, r.fnmr_at_1e2.stddev},
                            "fnmr_at_1e3"_a = std::pair{r.fnmr_at_1e3.mean, r.fnmr_at_1e3.stddev},
                            "raw_eer"_a = std::pair{r.raw_eer.mean, r.raw_eer.stddev}, "folds"_a = per_fold,
                            "csv"_a = r.to_csv());
        },
        "embeddings"_a, "config"_a, "folds"_a = 5, "split_seed"_a = 0);

    m.def(
        "validate_theory",
        [](const std::vector<nfr::Embedding>& data, const nfr::PipelineConfig& c, std::size_t draws,
           std::size_t bins, std::uint64_t seed) {
            nfr::TheoryValidationConfig v;
            v.negation_draws = draws;
            v.bins = bins;
            v.seed = seed;
            const auto r = nfr::validate_theory(data, c, v);
            return py::dict("genuine_tv"_a = r.genuine_tv, "imposter_tv"_a = r.imposter_tv,
                            "genuine_comparisons"_a = r.genuine_comparisons,
                            "imposter_comparisons"_a = r.imposter_comparisons,
                            "range_violations"_a = r.range_violations, "warnings"_a = r.warnings,
                            "csv"_a = r.to_csv());
        },
        "embeddings"_a, "config"_a, "negation_draws"_a = 5, "bins"_a = 100, "seed"_a = 0);

    m.def(
        "run_attack",
        [](const std::vector<nfr::Embedding>& data, const nfr::PipelineConfig& c, const std::string& attribute,
           std::size_t folds, std::uint64_t seed) {
            const auto split = nfr::make_subject_disjoint_folds(data, folds, seed);
            const auto r = nfr::run_attack(data, c, attribute, split, nfr::AttackConfig::builtin(seed));
            py::dict acc;
            for (const auto& cell : r.cells)
                acc[py::make_tuple(cell.attacker, nfr::to_string(cell.representation))] = cell.accuracy.mean;
            return py::dict("accuracy"_a = acc, "csv"_a = r.to_csv());
        },
        "embeddings"_a, "config"_a, "attribute"_a, "folds"_a = 5, "seed"_a = 0);

    m.def("suppression_rate", &nfr::suppression_rate, "unprotected"_a, "protected_accuracy"_a);
}
