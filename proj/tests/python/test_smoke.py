import itertools
import os
import subprocess
from fractions import Fraction

import pytest

import nfr


def test_version():
    assert nfr.__version__ == "0.1.0"


def test_negation_complements_every_label():
    rng = nfr.RandomSource.seeded(1)
    t = nfr.PositiveTemplate([1, 2, 3, 1, 2, 3], 3)
    n = nfr.negate(t, rng)
    assert all(a != b for a, b in zip(t.labels, n.labels))
    assert nfr.collisions(t, n) == 0
    assert nfr.nhd(t, n) == 1.0


def test_nhd_and_hamming_arithmetic():
    a = nfr.PositiveTemplate([1, 2, 3], 3)
    assert nfr.positive_hd(a, nfr.PositiveTemplate([1, 3, 3], 3)) == 1
    forced = nfr.negate(nfr.PositiveTemplate([1, 2, 1], 2), nfr.RandomSource.seeded(0))
    assert list(forced.labels) == [2, 1, 2]


def test_exact_pmf_matches_enumeration():
    # Each differing position collides for exactly one of the k-1 choices.
    k, D = 3, 4
    counts = [0] * (D + 1)
    for choice in itertools.product(range(k - 1), repeat=D):
        counts[sum(1 for c in choice if c != 0)] += 1
    expected = [Fraction(c, (k - 1) ** D) for c in counts]
    assert nfr.pmf_exact(8, D, k) == expected
    p = nfr.pmf(8, 2, 3)
    assert p.probability(6) == pytest.approx(0.25)
    assert p.probability(7) == pytest.approx(0.5)
    assert nfr.expected_nhd(8, 4, 3) == pytest.approx(0.75)


def test_metrics():
    assert nfr.eer([0.9, 0.8, 0.7], [0.75, 0.6, 0.5]) == pytest.approx(1 / 3)
    assert nfr.fnmr_at_fmr([0.9, 0.8], [0.1, 0.2], 0.01) == 0.0
    assert nfr.suppression_rate(0.9, 0.45) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        nfr.eer([], [0.5])


def test_pipeline_end_to_end(tmp_path):
    data = nfr.synth(subjects=20, captures=3, dimension=16, seed=2)
    assert len(data) == 60
    path = tmp_path / "e.bin"
    nfr.save_embeddings(data, path)
    assert [e.values for e in nfr.load_embeddings(path)] == [e.values for e in data]

    config = nfr.PipelineConfig(k=3, length=64, enlargement=nfr.EnlargementMode.random, seed=2)
    pipe = nfr.Pipeline.build(data, config)
    assert pipe.length == 64
    rng = nfr.RandomSource.seeded(3)
    assert nfr.nhd(pipe.positive(data[0]), pipe.enroll(data[0], rng)) == 1.0
    genuine, imposter = nfr.collect_scores(data, pipe, seed=3)
    assert len(genuine) == 40
    assert len(imposter) == 60 * 19

    report = nfr.run_verification(data, config, folds=4, split_seed=2)
    assert 0.0 <= report["eer"][0] <= 0.1
    assert len(report["folds"]) == 4


def test_cli_theory():
    cli = os.environ.get("NFR_CLI")
    if not cli:
        pytest.skip("CLI path not provided")
    out = subprocess.run([cli, "theory", "--L", "8", "--D", "2", "--k", "3"], check=True, capture_output=True,
                         text=True).stdout.splitlines()
    assert out[0] == "negative_distance,probability"
    assert [float(line.split(",")[1]) for line in out[1:]] == [0.25, 0.5, 0.25]
