"""Acceptance gates. Each test prints one ``ACCEPTANCE <id> ... PASS|FAIL`` line.

Run standalone with ``python tests/test_acceptance.py`` or through pytest.
"""
import itertools
import json
import math
import sys
import time

import numpy as np
import pytest

from earmem.classifiers import lda_fit
from earmem.classifiers.cnn import (EVAL, PARAM_KEYS, cnn_forward, cnn_loss_and_grads,
                                    conv_output_length, gradient_check, init_cnn)
from earmem.cli import main as cli_main
from earmem.csp import csp_fit
from earmem.data import BETA, THETA, Label
from earmem.evaluation import cross_validate
from earmem.sigproc import design_butterworth
from earmem.stats import kruskal_wallis, wilcoxon_ranksum
from earmem.synth import Effect, SynthSpec, generate

METHODS = ("csp-lda", "fbcsp-lda", "cnn")
HIGH_SEPARATION = SynthSpec(
    n_trials=200, n_channels=18,
    effects=(Effect(THETA, (0, 1, 2, 3), 2.0, Label.REMEMBERED),
             Effect(BETA, (4, 5, 6, 7), 2.0, Label.FORGOTTEN)),
    seed=7)
NULL = SynthSpec(n_trials=200, n_channels=18, seed=1)


@pytest.fixture
def verdict(capsys):
    def emit(cid, name, ok, detail=""):
        with capsys.disabled():
            print(f"\nACCEPTANCE {cid:<3} {name}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return emit


def random_spd(rng, c):
    a = rng.standard_normal((c, 3 * c))
    s = a @ a.T / (3 * c)
    return s / np.trace(s)


# ---------------------------------------------------------------- 1 filter

def test_1_filter_correctness(verdict):
    fs, lo, hi, n = 250.0, 0.5, 40.0, 5
    start = time.perf_counter()
    filt = design_butterworth("bandpass", [lo, hi], n, fs)
    edges = np.abs(filt.response([lo, hi]))
    sweep = np.linspace(0.1, 124.0, 20)
    got = np.abs(filt.response(sweep))
    elapsed = time.perf_counter() - start
    # analog prototype |H| = 1/sqrt(1 + x^2n) at the bilinear image of each frequency
    warp = lambda f: 2 * fs * np.tan(np.pi * np.asarray(f) / fs)
    w, w1, w2 = warp(sweep), warp(lo), warp(hi)
    expected = 1 / np.sqrt(1 + ((w ** 2 - w1 * w2) / (w * (w2 - w1))) ** (2 * n))
    edge_err = float(np.max(np.abs(edges - 1 / math.sqrt(2))))
    sweep_err = float(np.max(np.abs(got - expected)))
    ok = edge_err < 1e-3 and sweep_err < 1e-6 and elapsed < 1.0
    verdict("1", "filter edges and analytic sweep", ok,
            f"edge err {edge_err:.2e} (<1e-3), sweep err {sweep_err:.2e} (<1e-6), {elapsed:.3f}s (<1s)")
    assert ok


# ---------------------------------------------------------------- 2 CSP

def test_2_csp_correctness(verdict):
    model = csp_fit(np.diag([2.0, 1.0]), np.diag([1.0, 2.0]), m=1)
    w = model.filters / np.linalg.norm(model.filters, axis=1, keepdims=True)
    eig_err = float(np.max(np.abs(model.eigvals - [2 / 3, 1 / 3])))
    axis_err = float(np.max(np.abs(np.abs(w) - np.eye(2))))
    ok_a = eig_err < 1e-10 and axis_err < 1e-10

    worst_b = 0.0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        c = 2 + seed % 9
        sr, sf = random_spd(rng, c), random_spd(rng, c)
        f = csp_fit(sr, sf, m=c // 2).filters
        dr, df = f @ sr @ f.T, f @ sf @ f.T
        off = ~np.eye(len(f), dtype=bool)
        worst_b = max(worst_b, np.abs(dr[off]).max(initial=0), np.abs(df[off]).max(initial=0),
                      np.abs(dr + df - np.eye(len(f))).max())
    ok_b = worst_b < 1e-8

    theta = np.deg2rad(np.arange(0, 180, 0.5))
    grid = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    worst_c = np.inf
    for seed in range(10):
        rng = np.random.default_rng(2000 + seed)
        sr, sf = random_spd(rng, 2), random_spd(rng, 2)
        f = csp_fit(sr, sf, m=1).filters[0]
        ratio = (f @ sr @ f) / (f @ sf @ f)
        best = np.max(np.einsum("ka,ab,kb->k", grid, sr, grid) / np.einsum("ka,ab,kb->k", grid, sf, grid))
        worst_c = min(worst_c, ratio - (best - 1e-6))
    ok_c = worst_c >= 0
    verdict("2a", "CSP 2x2 closed form", ok_a, f"eig err {eig_err:.1e}, axis err {axis_err:.1e}")
    verdict("2b", "CSP simultaneous diagonalization", ok_b, f"max residual {worst_b:.1e} (<1e-8)")
    verdict("2c", "CSP first filter vs 0.5 deg grid", ok_c, f"min margin {worst_c:.2e} (>=0)")
    assert ok_a and ok_b and ok_c


# ---------------------------------------------------------------- 3 LDA

def test_3_lda_equivalence(verdict):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(3000 + seed)
        d = int(rng.integers(2, 9))
        X = rng.standard_normal((80, d)) @ rng.standard_normal((d, d))
        y = np.repeat([0, 1], 40)
        X[y == 1] += rng.standard_normal(d)
        gamma = float(rng.uniform(0, 1))
        model = lda_fit(X, y, gamma)
        mr, mf = X[y == 1].mean(0), X[y == 0].mean(0)
        dev = np.vstack([X[y == 1] - mr, X[y == 0] - mf])
        s = dev.T @ dev / (len(X) - 2)
        s_g = (1 - gamma) * s + gamma * np.trace(s) / d * np.eye(d)
        w = np.linalg.inv(s_g) @ (mr - mf)
        b = -w @ (mr + mf) / 2
        worst = max(worst, np.abs(model.w - w).max(), abs(model.b - b))
    ok = worst < 1e-10
    verdict("3", "LDA vs dense solve on 20 instances", ok, f"max diff {worst:.1e} (<1e-10)")
    assert ok


# ---------------------------------------------------------------- 4 CNN

def test_4_cnn_shape_and_gradients(verdict):
    t_out = conv_output_length(250)
    model = init_cnn(18)
    model.bn_running_mean, model.bn_running_var = np.zeros(20), np.ones(20)
    _, cache = cnn_forward(model, np.zeros((1, 4, 250, 18)), EVAL)
    ok_shape = t_out == 9 and cache["z"].shape[1] == 9 and model.fc_w.shape == (2, 180)

    worst = 0.0
    per_group = {}
    for seed in range(3):
        rng = np.random.default_rng(4000 + seed)
        m = init_cnn(3, rng=rng)
        m.conv_b = 0.1 * rng.standard_normal(20)
        m.bn_gamma = 1 + 0.1 * rng.standard_normal(20)
        m.bn_beta = 0.1 * rng.standard_normal(20)
        m.fc_b = 0.1 * rng.standard_normal(2)
        x = rng.standard_normal((4, 4, 250, 3))
        errs = gradient_check(m, x, np.array([0, 1, 1, 0]), dropout_mask_seed=seed, h=1e-5)
        for k, v in errs.items():
            per_group[k] = max(per_group.get(k, 0.0), v)
        worst = max(worst, max(errs.values()))
    ok_grad = worst < 1e-4 and set(per_group) == set(PARAM_KEYS)

    zero = init_cnn(3)
    for k in PARAM_KEYS:
        setattr(zero, k, np.zeros_like(getattr(zero, k)))
    loss, _ = cnn_loss_and_grads(zero, np.random.default_rng(0).standard_normal((4, 4, 250, 3)),
                                 [0, 1, 0, 1], 0)
    ln2_err = abs(loss - math.log(2))
    ok_ln2 = ln2_err < 1e-12
    verdict("4a", "CNN conv output length", ok_shape, f"T_out={t_out}, flat={model.fc_w.shape[1]}")
    verdict("4b", "CNN finite-difference gradients (3 instances, every entry)", ok_grad,
            f"max rel err {worst:.2e} (<1e-4); " +
            ", ".join(f"{k} {v:.1e}" for k, v in per_group.items()))
    verdict("4c", "CNN zero-parameter loss", ok_ln2, f"|loss - ln2| = {ln2_err:.1e}")
    assert ok_shape and ok_grad and ok_ln2


# ---------------------------------------------------------------- 5 statistics

def test_5_statistics_oracles(verdict):
    h = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]]).statistic
    ok_kw = abs(h - 7.2) < 1e-12
    res = wilcoxon_ranksum([1, 2, 3], [4, 5, 6])
    ok_exact = res.exact and abs(res.p_value - 0.1) < 1e-12
    worst = 0.0
    for n_a, n_b in itertools.product(range(8, 11), repeat=2):
        for seed in range(10):
            rng = np.random.default_rng(5000 + 100 * n_a + 10 * n_b + seed)
            a = rng.normal(size=n_a)
            b = rng.normal(size=n_b) + 0.25 * seed
            e = wilcoxon_ranksum(a, b, exact=True).p_value
            n = wilcoxon_ranksum(a, b, exact=False).p_value
            worst = max(worst, abs(e - n))
    ok_agree = worst < 0.02
    verdict("5a", "Kruskal-Wallis H on 1..9", ok_kw, f"H = {h!r}")
    verdict("5b", "rank-sum exact p for {1,2,3} vs {4,5,6}", ok_exact, f"p = {res.p_value!r}")
    verdict("5c", "rank-sum exact vs normal, sizes 8-10", ok_agree, f"max |diff| {worst:.4f} (<0.02)")
    assert ok_kw and ok_exact and ok_agree


# ---------------------------------------------------------------- 6 null calibration

def test_6_null_calibration(verdict):
    start = time.perf_counter()
    data = generate(NULL)
    means = {m: cross_validate(data, m, k=10, seed=0).mean for m in METHODS}
    elapsed = time.perf_counter() - start
    ok_band = all(abs(v - 0.5) <= 0.07 for v in means.values())
    ok = ok_band and elapsed < 180
    verdict("6", "null calibration, n=400", ok,
            ", ".join(f"{m} {v:.3f}" for m, v in means.items()) + f" (0.50 +/- 0.07); {elapsed:.0f}s (<180s)")
    assert ok


# ---------------------------------------------------------------- 7 + 8 signal recovery and workflow

@pytest.fixture(scope="module")
def high_separation(tmp_path_factory):
    start = time.perf_counter()
    data = generate(HIGH_SEPARATION)
    reports = {m: cross_validate(data, m, k=10, seed=0) for m in METHODS}
    elapsed = time.perf_counter() - start
    out = tmp_path_factory.mktemp("reports")
    paths = []
    for m, rep in reports.items():
        rep.write(out / f"{m}.json")
        paths.append(str(out / f"{m}.json"))
    return reports, elapsed, paths, out


def test_7_signal_recovery(verdict, high_separation):
    reports, elapsed, _, _ = high_separation
    fb, cnn, csp = (reports[m].mean for m in ("fbcsp-lda", "cnn", "csp-lda"))
    ok_fb = fb >= 0.85
    ok_cnn = cnn >= 0.80
    ok_csp = abs(csp - fb) <= 0.10
    ok_time = elapsed < 600
    verdict("7a", "FBCSP-LDA recovers theta+beta effects", ok_fb, f"{fb:.3f} (>=0.85)")
    verdict("7b", "CNN recovers theta+beta effects", ok_cnn, f"{cnn:.3f} (>=0.80)")
    verdict("7c", "CSP-LDA within 10 points of FBCSP-LDA", ok_csp, f"{csp:.3f} vs {fb:.3f}")
    verdict("7d", "signal-recovery runtime", ok_time, f"{elapsed:.0f}s (<600s)")
    assert ok_fb and ok_cnn and ok_csp and ok_time


def test_8_workflow_reproduction(verdict, high_separation, capsys):
    reports, _, paths, out = high_separation
    table = out / "table.csv"
    code = cli_main(["compare", "--reports", *paths, "--out", str(table)])
    capsys.readouterr()
    lines = [l for l in table.read_text(encoding="utf-8").splitlines() if not l.startswith("#")]
    rows = [l.split(",") for l in lines]
    ok_table = (code == 0 and rows[0][0] == "method" and len(rows[0]) == 3
                and [r[0] for r in rows[1:]] == ["csp-lda", "fbcsp-lda", "cnn", "Kruskal-Wallis p"]
                and all("±" in r[1] for r in rows[1:4]) and rows[1][2] != "" and rows[4][1] != "")
    p = wilcoxon_ranksum(reports["cnn"].fold_accuracies, reports["csp-lda"].fold_accuracies).p_value
    cnn_higher = reports["cnn"].mean > reports["csp-lda"].mean
    ok_order = p < 0.05 and cnn_higher
    verdict("8a", "compare emits methods x segment table with p vs CNN", ok_table,
            " | ".join(",".join(r) for r in rows))
    verdict("8b", "CNN significantly above CSP-LDA", ok_order,
            f"p = {p:.4g} (<0.05), CNN {reports['cnn'].mean:.3f} vs CSP {reports['csp-lda'].mean:.3f}")
    assert ok_table and ok_order


# ---------------------------------------------------------------- 9 determinism

def test_9_determinism(verdict, tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"n_trials": 24, "n_channels": 6, "effects": [
        {"band": "theta", "channels": [0, 1], "power_delta": 2.0, "condition": "remembered"}]}))
    from earmem.data import ContinuousRecording, Event
    from earmem.io import save_recording
    rng = np.random.default_rng(0)
    rec = ContinuousRecording(rng.standard_normal((3, 16000)), 500.0, ["a", "b", "c"],
                              [Event(1000 + 700 * i, 1 + i % 4, True) for i in range(20)])
    save_recording(rec, tmp_path / "rec")

    def run_all(tag):
        d = tmp_path / tag
        d.mkdir()
        cmds = [["synth", "--spec", str(spec), "--out", str(d / "data"), "--seed", "3"],
                ["preprocess", "--in", str(tmp_path / "rec"), "--segment", "ongoing",
                 "--out", str(d / "pre")],
                ["spectra", "--in", str(d / "data"), "--out", str(d / "s.csv"), "--svg", str(d / "s.svg")]]
        for m in METHODS:
            cmds.append(["train", "--in", str(d / "data"), "--method", m, "--model-out",
                         str(d / f"{m}.model.json"), "--epochs", "3", "--seed", "9"])
            cmds.append(["evaluate", "--in", str(d / "data"), "--method", m, "--k", "4", "--seed", "9",
                         "--report", str(d / f"{m}.json"), "--epochs", "3"])
        cmds.append(["evaluate", "--in", str(d / "data"), "--method", "csp-lda", "--k", "4",
                     "--seed", "9", "--report", str(d / "csp.csv")])
        cmds.append(["compare", "--reports", *(str(d / f"{m}.json") for m in METHODS),
                     "--out", str(d / "table.csv")])
        codes = [cli_main(c) for c in cmds]
        echo = capsys.readouterr().out
        files = {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}
        return codes, files, echo

    codes_a, files_a, echo_a = run_all("a")
    codes_b, files_b, echo_b = run_all("b")
    differing = sorted(k for k in files_a if files_a[k] != files_b.get(k))
    ok = (all(c == 0 for c in codes_a + codes_b) and files_a.keys() == files_b.keys()
          and not differing and echo_a.replace("/a/", "/b/") == echo_b)
    verdict("9", "byte-identical outputs on re-run", ok,
            f"{len(files_a)} files compared, differing: {differing or 'none'}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
