import json
import math

import numpy as np
import pytest

from brokenray.cli import main
from brokenray.field import FourierField


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


def test_phantom_uniform(workdir):
    out = workdir / "u.json"
    assert run("phantom", "--name", "uniform", "--grid", 64, "--out", out) == 0
    f = FourierField.from_json(out.read_text())
    assert np.all(f.a[0] == 1.0) and f.K == 0


def test_phantom_raster(workdir):
    out, raster = workdir / "k8.json", workdir / "k8.csv"
    assert run("phantom", "--name", "offcenter-K8", "--grid", 512, "--out", out, "--raster", raster,
               "--n-theta", 16) == 0
    f = FourierField.from_json(out.read_text())
    assert f.K == 8 and f.N == 512
    rows = np.loadtxt(raster, delimiter=",", skiprows=1)
    assert rows.shape == (513 * 16, 3)
    np.testing.assert_allclose(rows[:, 2], f.eval(rows[:, 0], rows[:, 1]), atol=1e-12, rtol=0)


def test_simulate_uniform_and_rerun(workdir):
    field = workdir / "u128.json"
    run("phantom", "--name", "uniform", "--grid", 128, "--out", field)
    outs = []
    for i in range(2):
        out, plan = workdir / f"s{i}.json", workdir / f"p{i}.json"
        assert run("simulate", "--field", field, "--n-min", 64, "--targets", 32, "--sigma", 0,
                   "--seed", 3, "--out", out, "--plan-out", plan, "--csv", workdir / f"s{i}.csv") == 0
        outs.append(out.read_bytes())
    rec = json.loads(outs[0])
    assert rec["seed"] == 3
    assert all(abs(e["value"] - 1.0) <= 1e-10 for e in rec["entries"])
    assert len(rec["entries"]) == len(json.loads((workdir / "p0.json").read_text())["rays"]) == 32
    assert outs[0] == outs[1]
    assert (workdir / "s0.csv").read_text().startswith("n,m,alpha,iota,kappa,z,value\n")


def test_ring_singleton_end_to_end(workdir):
    field, sino, plan = workdir / "ring.json", workdir / "ring_s.json", workdir / "ring_p.json"
    run("phantom", "--name", "ring", "--grid", 256, "--out", field)
    assert run("simulate", "--field", field, "--mode", "singleton", "--n-min", 512, "--out", sino,
               "--plan-out", plan) == 0
    rec, rep = workdir / "ring_r.json", workdir / "ring_rep.json"
    assert run("reconstruct", "--sinogram", sino, "--plan", plan, "--grid", 256, "--truth", field,
               "--out", rec, "--report", rep) == 0
    report = json.loads(rep.read_text())
    assert report["errors"] == [] and report["mode"] == "singleton"
    assert report["metrics"]["a0_relative_l2"] <= 2e-2


@pytest.fixture(scope="module")
def open_run(workdir):
    field, sino, plan = workdir / "o.json", workdir / "o_s.json", workdir / "o_p.json"
    run("phantom", "--name", "antisym", "--grid", 128, "--out", field)
    assert run("simulate", "--field", field, "--mode", "open", "--arc", -0.25, 0.25, "--K", 3,
               "--n-max", 200, "--out", sino, "--plan-out", plan) == 0
    return field, sino, plan


def test_open_set_report(workdir, open_run):
    field, sino, plan = open_run
    rec, rep = workdir / "o_r.json", workdir / "o_rep.json"
    assert run("reconstruct", "--sinogram", sino, "--plan", plan, "--grid", 128, "--truth", field,
               "--out", rec, "--report", rep, "--lam", 0) == 0
    report = json.loads(rep.read_text())
    assert report["mode"] == "open" and report["errors"] == []
    assert math.isfinite(report["cond_reg"]) and report["lam_rel"] == 0
    assert {"a0", "a3", "b3"} <= set(report["metrics"]["per_coefficient_l2"])
    assert all(s["rank"] == 4 for s in report["systems"])


def test_truncated_sinogram_fails(workdir, open_run):
    field, sino, plan = open_run
    rec = json.loads(sino.read_text())
    rec["entries"] = rec["entries"][: len(rec["entries"]) // 2]
    cut = workdir / "o_cut.json"
    cut.write_text(json.dumps(rec))
    rep = workdir / "o_cut_rep.json"
    assert run("reconstruct", "--sinogram", cut, "--plan", plan, "--grid", 128,
               "--out", workdir / "o_cut_r.json", "--report", rep) == 1
    errors = json.loads(rep.read_text())["errors"]
    assert [e["error"] for e in errors] == ["RankDeficiencyError"]
    failed = errors[0]["failures"]
    assert failed and {"axis", "z", "rays", "rank", "missing"} <= set(failed[0])
    assert all(f["missing"] > 0 for f in failed)


def test_threads_do_not_change_output(workdir, open_run, monkeypatch):
    field, _, plan = open_run
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("BRT_THREADS", threads)
        out = workdir / f"t{threads}.json"
        assert run("simulate", "--field", field, "--plan", plan, "--sigma", 1e-3, "--seed", 9,
                   "--out", out) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    out = workdir / "t8.json"
    assert run("--threads", 8, "simulate", "--field", field, "--plan", plan, "--sigma", 1e-3,
               "--seed", 9, "--out", out) == 0
    assert out.read_bytes() == outs[0]


def test_trace(capsys):
    assert run("trace", "--n", 3, "--m", 1) == 0
    rows = np.loadtxt(capsys.readouterr().out.splitlines(), delimiter=",", skiprows=1)
    ang = np.mod(np.arctan2(rows[:, 1], rows[:, 0]), 2 * math.pi)
    np.testing.assert_allclose(np.sort(ang[:3]), [0, 2 * math.pi / 3, 4 * math.pi / 3], atol=1e-14)
    assert run("trace", "--n", 2, "--m", 1, "--iota", 0.4, "--kappa", 0.4) == 0
    rows = np.loadtxt(capsys.readouterr().out.splitlines(), delimiter=",", skiprows=1)
    np.testing.assert_allclose(rows[1], -rows[0], atol=1e-15)
    assert run("trace", "--n", 40, "--m", 7, "--iota", 0.1, "--kappa", 2.0) == 0
    rows = np.loadtxt(capsys.readouterr().out.splitlines(), delimiter=",", skiprows=1)
    assert np.max(np.abs(np.hypot(rows[:, 0], rows[:, 1]) - 1)) <= 1e-14


def test_trace_invalid_ray(capsys):
    assert run("trace", "--n", 2, "--m", 0) == 2
    assert "error" in capsys.readouterr().err


def test_evaluate(workdir, capsys):
    a = workdir / "e_a.json"
    run("phantom", "--name", "offcenter-K8", "--grid", 64, "--out", a)
    assert run("evaluate", "--truth", a, "--recon", a) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["l2"] == 0 and m["linf"] == 0
    f = FourierField.from_json(a.read_text())
    shifted = f.a.copy()
    shifted[0] += 1.0
    b = workdir / "e_b.json"
    b.write_text(FourierField(f.grid, shifted, f.b).to_json())
    assert run("evaluate", "--truth", a, "--recon", b) == 0
    m = json.loads(capsys.readouterr().out)
    assert m["linf"] == pytest.approx(1.0, abs=1e-12)
    assert m["per_coefficient_l2"]["a0"] == pytest.approx(1.0, rel=1e-12)


def test_evaluate_mismatch(workdir):
    a, b = workdir / "m_a.json", workdir / "m_b.json"
    run("phantom", "--name", "uniform", "--grid", 32, "--out", a)
    run("phantom", "--name", "uniform", "--grid", 64, "--out", b)
    assert run("evaluate", "--truth", a, "--recon", b) == 2
