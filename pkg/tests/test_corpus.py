import io

import numpy as np
import pytest

from hbmlab import corpus
from hbmlab.corpus import CorpusConfig, draw_case, equality_witnesses, run_corpus, write_csv


@pytest.mark.parametrize("n", [2, 3])
def test_equality_witnesses(n):
    reports = equality_witnesses(n)
    bad = [(r.name, r.residual / r.scale) for r in reports if r.verdict != "equality"]
    assert not bad


def test_cases_independent_of_order():
    cfg = CorpusConfig(dim=3, size=5, seed=7)
    a = draw_case(cfg, 3)[0][0].coeffs
    draw_case(cfg, 0)
    b = draw_case(cfg, 3)[0][0].coeffs
    assert np.array_equal(a, b)


def test_small_corpus_reproducible_and_clean():
    cfg = CorpusConfig(dim=2, size=6, seed=1, workers=1)
    r1, r2 = run_corpus(cfg), run_corpus(cfg)
    f1, f2 = io.StringIO(), io.StringIO()
    write_csv(r1.rows, f1)
    write_csv(r2.rows, f2)
    assert f1.getvalue() == f2.getvalue()
    assert not r1.violations
    assert f1.getvalue().splitlines()[0] == ",".join(corpus.CSV_FIELDS)


def test_parallel_matches_serial():
    cfg1 = CorpusConfig(dim=3, size=4, seed=2, workers=1)
    cfg2 = CorpusConfig(dim=3, size=4, seed=2, workers=2)
    assert run_corpus(cfg1).rows == run_corpus(cfg2).rows


def test_large_amplitude_draws_are_rejected_and_logged():
    cfg = CorpusConfig(dim=3, size=20, seed=0, amplitude=0.5, workers=1)
    res = run_corpus(cfg)
    assert res.rejections
    assert all(r["reason"] for r in res.rejections)
    assert not res.violations


def test_num_workers_cap(monkeypatch):
    monkeypatch.setenv("HBM_NUM_THREADS", "1")
    assert corpus.num_workers(8) == 1


def test_random_body_kinds(d3):
    rng = np.random.default_rng(0)
    for kind in corpus.KINDS:
        K = corpus.random_body(d3, rng, kind, symmetric=True)
        assert K.is_symmetric()
    with pytest.raises(ValueError):
        corpus.random_body(d3, rng, "cube")
