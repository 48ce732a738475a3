import math
import os

import pytest

import figtools
import plot_fig2
import plot_fig3
import plot_fig4
from figtools import EmptyDataError, ManifestMismatchError, check_manifest

RESULTS = os.path.join(os.path.dirname(__file__), "..", "..", "results")


def write(path, text):
    with open(path, "w") as f:
        f.write(text)
    return str(path)


def synth_manifest(tmp_path, name="manifest.cfg", **overrides):
    vals = {
        "n_atoms": 1, "kappa": 200.0, "delta": 100.0, "gamma_c": 0.1, "w": 0.15,
        "omega_r": 0.25, "kprime_ratio": 0.0, "n_traj": 10, "t_final": 100.0,
        "seed": 1, "dt": 0.01, "sample_stride": 10,
    }
    vals.update(overrides)
    lines = [f"{k} = {v}" for k, v in vals.items()]
    return write(tmp_path / name, "\n".join(lines) + "\n")


def synth_series(tmp_path, name="series.csv"):
    lines = ["t,p2_mean,p2_sem,corrE_mean,inversion_mean"]
    for i in range(60):
        t = i * 10.0
        p2 = 100.0 + 125.0 * math.exp(-0.0004 * t)
        lines.append(f"{t},{p2},1.0,0.0,0.75")
    return write(tmp_path / name, "\n".join(lines) + "\n")


def synth_hist(tmp_path, name="hist.csv", sigma=10.0):
    lines = ["bin_left,bin_right,count"]
    for i in range(40):
        lo = -20.0 + i * 1.0
        c = math.exp(-0.5 * ((lo + 0.5) / sigma) ** 2)
        lines.append(f"{lo},{lo + 1.0},{int(1000 * c)}")
    return write(tmp_path / name, "\n".join(lines) + "\n")


def synth_fit(tmp_path, name="fit.csv"):
    return write(
        tmp_path / name,
        "rate,asymptote,amplitude,rms_residual,window_lo,window_hi\n"
        "0.0004,100.0,125.0,0.5,0.0,590.0\n",
    )


def synth_sweep(tmp_path, name="sweep.csv", axis_vals=(1, 5, 20, 60), w_vals=(0.15, 0.21, 0.28, 1.3)):
    header = (
        "value,status,w,n_traj,final_dp,final_p2,final_p2_sem,corrE,corrE_sem,"
        "rate,rate_asymptote,clamped_mass,error"
    )
    lines = [header]
    for v, w in zip(axis_vals, w_vals):
        dp = 10.0 / v**0.5
        corr = "nan" if v == 1 else f"{0.001 * v}"
        lines.append(f"{v},ok,{w},16,{dp},{dp * dp},0.1,{corr},0.0001,{0.0004 * v},1.0,0.0,")
    return write(tmp_path / name, "\n".join(lines) + "\n")


def test_manifest_check_accepts_matching(tmp_path):
    m = synth_manifest(tmp_path)
    assert check_manifest(m, "fig2a")["n_atoms"] == 1


def test_manifest_check_refuses_mismatch(tmp_path):
    m = synth_manifest(tmp_path, n_atoms=7)
    with pytest.raises(ManifestMismatchError, match="n_atoms"):
        check_manifest(m, "fig2a")


def test_manifest_check_refuses_wrong_figure(tmp_path):
    m = synth_manifest(tmp_path)
    with pytest.raises(ManifestMismatchError):
        check_manifest(m, "fig2c")
    with pytest.raises(ValueError, match="unknown figure"):
        check_manifest(m, "fig9")


def test_fig2_renders_synthetic(tmp_path):
    out = str(tmp_path / "fig2.png")
    plot_fig2.render(
        synth_series(tmp_path), synth_hist(tmp_path), synth_fit(tmp_path),
        synth_manifest(tmp_path), "fig2a", out,
    )
    assert os.path.getsize(out) > 1000


def test_fig2_cli_mismatch_is_an_error(tmp_path):
    rc = plot_fig2.main([
        "--series", synth_series(tmp_path), "--hist", synth_hist(tmp_path),
        "--manifest", synth_manifest(tmp_path, w=9.0), "--expect", "fig2a",
        "--out", str(tmp_path / "x.png"),
    ])
    assert rc == 1
    assert not os.path.exists(tmp_path / "x.png")


def test_fig2_empty_series_is_a_clear_error(tmp_path):
    empty = write(tmp_path / "empty.csv", "t,p2_mean,p2_sem,corrE_mean,inversion_mean\n")
    with pytest.raises(EmptyDataError):
        plot_fig2.render(
            empty, synth_hist(tmp_path), None, synth_manifest(tmp_path), "fig2a",
            str(tmp_path / "y.png"),
        )


def test_fig3_renders_synthetic(tmp_path):
    m = synth_manifest(tmp_path, w=1.3, n_atoms=60, sweep_axis="n_atoms")
    out = str(tmp_path / "fig3.png")
    plot_fig3.render(synth_sweep(tmp_path), m, out)
    assert os.path.getsize(out) > 1000


def test_fig3_single_row_sweep_renders_points(tmp_path):
    m = synth_manifest(tmp_path, w=1.3, n_atoms=60, sweep_axis="n_atoms")
    sweep = synth_sweep(tmp_path, axis_vals=(60,), w_vals=(1.3,))
    out = str(tmp_path / "fig3single.png")
    plot_fig3.render(sweep, m, out)
    assert os.path.exists(out)


def test_fig4_renders_synthetic(tmp_path):
    ma = synth_manifest(tmp_path, "ma.cfg", n_atoms=40, kappa=400.0, delta=200.0,
                        gamma_c=1.0, w=10.0, sweep_axis="gamma_c")
    m0 = synth_manifest(tmp_path, "m0.cfg", n_atoms=40, kappa=400.0, delta=200.0,
                        gamma_c=0.5, w=8.0, sweep_axis="w")
    m1 = synth_manifest(tmp_path, "m1.cfg", n_atoms=40, kappa=400.0, delta=200.0,
                        gamma_c=0.5, w=8.0, sweep_axis="w", kprime_ratio=1.0)
    sa = synth_sweep(tmp_path, "sa.csv", axis_vals=(0.5, 1.0, 2.0), w_vals=(5, 10, 20))
    s0 = synth_sweep(tmp_path, "s0.csv", axis_vals=(1, 4, 20), w_vals=(1, 4, 20))
    s1 = synth_sweep(tmp_path, "s1.csv", axis_vals=(1, 4, 20), w_vals=(1, 4, 20))
    out = str(tmp_path / "fig4.png")
    plot_fig4.render(sa, ma, s0, m0, s1, m1, out)
    assert os.path.getsize(out) > 1000


def test_fig4_refuses_swapped_recoil_manifests(tmp_path):
    ma = synth_manifest(tmp_path, "ma.cfg", n_atoms=40, kappa=400.0, delta=200.0,
                        gamma_c=1.0, w=10.0, sweep_axis="gamma_c")
    m1 = synth_manifest(tmp_path, "m1.cfg", n_atoms=40, kappa=400.0, delta=200.0,
                        gamma_c=0.5, w=8.0, sweep_axis="w", kprime_ratio=1.0)
    s = synth_sweep(tmp_path, "s.csv")
    with pytest.raises(ManifestMismatchError):
        plot_fig4.render(s, ma, s, m1, s, m1, str(tmp_path / "z.png"))


@pytest.mark.skipif(
    not os.path.exists(os.path.join(RESULTS, "fig2a", "manifest.cfg")),
    reason="shipped preset outputs not generated yet (run scripts/reproduce_all.py)",
)
def test_fig2_renders_real_output(tmp_path):
    base = os.path.join(RESULTS, "fig2a")
    out = str(tmp_path / "fig2a_real.png")
    plot_fig2.render(
        os.path.join(base, "series.csv"), os.path.join(base, "hist_final.csv"),
        None, os.path.join(base, "manifest.cfg"), "fig2a", out,
    )
    assert os.path.getsize(out) > 1000
