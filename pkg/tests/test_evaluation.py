import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pebg.core import PretrainConfig
from pebg.errors import ConfigError, MetricError
from pebg.evaluation import ExperimentReport, ExperimentSpec, RunResult, StageError, run_experiment
from pebg.kt import KtConfig
from pebg.metrics import auc
from pebg.synthetic import SyntheticSpec, generate_rows, write_csv

from _oracles import brute_auc


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.5, 0.5], [1, 0]) == 0.5
    assert auc([0.1, 0.9], [1, 0]) == 0.0


def test_auc_single_class():
    with pytest.raises(MetricError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(MetricError):
        auc([], [])


def test_auc_length_mismatch():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [1])


# scores on a 1/64 grid: plenty of ties, and every transform below stays strictly monotone in floating point
scored = st.integers(2, 80).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 64).map(lambda k: k / 64), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
)).filter(lambda t: 0 < sum(t[1]) < len(t[1]))


@given(scored)
@settings(max_examples=200, deadline=None)
def test_auc_matches_pairwise_count(data):
    scores, labels = data
    assert auc(scores, labels) == pytest.approx(brute_auc(scores, labels), abs=1e-12)


def test_auc_random_sets_exact():
    rng = np.random.default_rng(0)
    for _ in range(50):
        scores = np.round(rng.random(50), 2)  # forces ties
        labels = rng.integers(0, 2, size=50)
        if 0 < labels.sum() < 50:
            assert auc(scores, labels) == brute_auc(scores, labels)


@given(scored)
@settings(max_examples=100, deadline=None)
def test_auc_monotone_invariance(data):
    scores, labels = data
    s = np.asarray(scores)
    base = auc(s, labels)
    for f in (lambda x: 3 * x - 7, np.exp, lambda x: x ** 3, lambda x: np.log1p(x) * 0.01):
        assert auc(f(s), labels) == base


@given(scored)
@settings(max_examples=100, deadline=None)
def test_auc_complement_without_ties(data):
    scores, labels = data
    s = np.asarray(scores)
    if len(np.unique(s)) < len(s):
        return
    assert auc(s, labels) + auc(1 - s, labels) == pytest.approx(1.0, abs=1e-12)


def test_auc_equals_trapezoidal_roc():
    rng = np.random.default_rng(1)
    s = np.round(rng.random(200), 1)
    y = rng.integers(0, 2, 200)
    thresholds = np.unique(s)[::-1]
    tpr = [0.0] + [((s >= t) & (y == 1)).sum() / y.sum() for t in thresholds]
    fpr = [0.0] + [((s >= t) & (y == 0)).sum() / (1 - y).sum() for t in thresholds]
    assert auc(s, y) == pytest.approx(np.trapezoid(tpr, fpr), abs=1e-12)


# harness


def test_report_mean_is_arithmetic_mean(tmp_path):
    runs = [RunResult(i, i, a, 1.0) for i, a in enumerate([0.7, 0.8, 0.75])]
    rep = ExperimentReport("x", runs, "fp")
    assert rep.mean_auc == sum(r.auc for r in runs) / 3
    rep.write_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "run,seed,auc,wall_clock_s"
    assert [float(l.split(",")[2]) for l in lines[1:]] == [0.7, 0.8, 0.75]


@pytest.fixture(scope="module")
def synth_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("exp") / "log.csv"
    spec = SyntheticSpec(num_skills=3, questions_per_skill=4, skill_overlap=0.3, num_students=30,
                         records_per_student=12)
    write_csv(generate_rows(spec, 0)[0], path)
    return path


def _spec(path, arms=("pebg_dkt", "dkt_q")):
    return ExperimentSpec(
        dataset=str(path), arms=arms, train_fraction=0.8, seed=3,
        pretrain=PretrainConfig(d_v=4, d=6, epochs=2, batch_size=16),
        kt=KtConfig(hidden=6, embed_dim=6, epochs=2, batch_size=8),
    )


def test_single_repeat_report(synth_csv, tmp_path):
    reports = run_experiment(_spec(synth_csv), 1, tmp_path / "out")
    assert set(reports) == {"pebg_dkt", "dkt_q"}
    for rep in reports.values():
        assert len(rep.runs) == 1 and rep.runs[0].seed == 3
        assert 0 <= rep.runs[0].auc <= 1
    out = tmp_path / "out"
    assert (out / "pebg_dkt" / "report.csv").exists()
    assert (out / "pebg_dkt" / "run0_pretrain_loss.csv").exists()
    assert (out / "dkt_q" / "run0_kt_log.csv").exists()
    assert (out / "figures" / "auc_by_arm.png").stat().st_size > 0
    assert (out / "figures" / "pretrain_loss_pebg_dkt.png").exists()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["auc_pooling"].startswith("pooled")
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "arm,runs,mean_auc" and len(summary) == 3


def test_repeats_use_consecutive_seeds(synth_csv):
    reports = run_experiment(_spec(synth_csv, ("dkt",)), 2)
    assert [r.seed for r in reports["dkt"].runs] == [3, 4]


def test_identical_runs_identical_reports(synth_csv):
    arms = ("pebg_dkt", "rer_dkt", "ris_dkt", "rpl_dkt", "rpf_dkt", "pebg_dkt_frozen", "dkt_q", "dkt")
    a = run_experiment(_spec(synth_csv, arms), 1)
    b = run_experiment(_spec(synth_csv, arms), 1)
    for arm in arms:
        assert [r.auc for r in a[arm].runs] == [r.auc for r in b[arm].runs]
        assert a[arm].config_fingerprint == b[arm].config_fingerprint


def test_stage_failure_names_stage(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("student_id,question_id,skill_ids,correct\na,q1,s1,maybe\n")
    with pytest.raises(StageError, match="ingest"):
        run_experiment(_spec(bad), 1)


def test_unknown_arm():
    with pytest.raises(ConfigError):
        ExperimentSpec(dataset="x", arms=("nope",))


def test_spec_file(tmp_path, synth_csv):
    spec_path = tmp_path / "exp.cfg"
    spec_path.write_text(
        f"dataset = {synth_csv}\narms = pebg_dkt, dkt\ntrain_fraction = 0.7\n"
        "pretrain.epochs = 4  # short\nkt.hidden = 12\npretrain.lambda = 0.25\n")
    spec = ExperimentSpec.from_file(spec_path)
    assert spec.arms == ("pebg_dkt", "dkt") and spec.train_fraction == 0.7
    assert spec.pretrain.epochs == 4 and spec.pretrain.lam == 0.25 and spec.kt.hidden == 12


def test_spec_file_relative_dataset(tmp_path):
    (tmp_path / "e.cfg").write_text("dataset = data/log.csv\n")
    assert ExperimentSpec.from_file(tmp_path / "e.cfg").dataset == str(tmp_path / "data" / "log.csv")


@pytest.mark.parametrize("text", ["arms = dkt\n", "dataset = x\ncolour = red\n", "dataset = x\nfoo.bar = 1\n",
                                  "dataset = x\npretrain.nope = 1\n"])
def test_spec_file_errors(tmp_path, text):
    (tmp_path / "e.cfg").write_text(text)
    with pytest.raises(ConfigError):
        ExperimentSpec.from_file(tmp_path / "e.cfg")


def test_repeats_must_be_positive(synth_csv):
    with pytest.raises(ConfigError):
        run_experiment(_spec(synth_csv), 0)
