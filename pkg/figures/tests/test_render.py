import os
import struct
import subprocess
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from gridfield_figures import RENDERERS, InputError, read_state, sidecar_path

BRANCH_L2R = """sigma,max_mean,min_mean,pattern,stop_reason,final_time
0.01,1.5,0.2,hexagonal,stationary,2000.0
0.02,1.4,0.25,hexagonal,stationary,2100.0
0.03,0.58,0.58,homogeneous,stationary,2000.0
"""

BRANCH_R2L = """sigma,max_mean,min_mean,pattern,stop_reason,final_time
0.01,1.45,0.22,hexagonal,stationary,2000.0
0.02,0.59,0.59,homogeneous,stationary,2000.0
0.03,0.58,0.58,homogeneous,stationary,2000.0
"""

SUMMARY = "sigma_c\n0.0175\n"

EVENTS = """t_ms,x_cm,y_cm,rate
20.0,1.25,-3.5,0.07
40.0,2.5,-2.5,0.09
"""

TRAJ = """t_ms,x_cm,y_cm
0.0,0.0,0.0
20.0,1.25,-3.5
40.0,2.5,-2.5
60.0,3.0,-1.0
"""

RELAX_CURVE = """t_ms,mean_err,l1_err
1.0,0.5,1.2
2.0,0.1,0.6
3.0,0.02,0.2
"""

REFINE = """n,L1,L2,OOC_L1,OOC_L2
32,0.1,0.2,nan,nan
64,0.05,0.1,1.0,1.0
128,0.01,0.02,2.3,2.3
"""


def write_dispersion(path, kmax=4):
    lines = ["k1,k2,What,shift,F"]
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            # radial bump with maxima at |k| = 3 on the axes
            r = np.hypot(k1, k2)
            F = 1.5 * np.exp(-((r - 3.0) ** 2)) * (1 + 0.01 * (k1 == 0 or k2 == 0))
            lines.append(f"{k1},{k2},{repr(-1.0 + F)},{repr(3.9)},{repr(float(F))}")
    path.write_text("\n".join(lines) + "\n")


def write_state(path, n=8, ns=8, seed=0):
    rng = np.random.default_rng(seed)
    f = rng.uniform(0.0, 3.0, size=(4, n, n, ns))
    with open(path, "wb") as fh:
        fh.write(b"GCNF1")
        fh.write(np.array([4, n, n, ns, 0], dtype="<u4").tobytes())
        fh.write(f.astype("<f8").tobytes())
        fh.write(struct.pack("<d", 1234.5))
    return f


@pytest.fixture
def artifacts(tmp_path):
    (tmp_path / "branch_l2r.csv").write_text(BRANCH_L2R)
    (tmp_path / "branch_r2l.csv").write_text(BRANCH_R2L)
    (tmp_path / "stability_summary.csv").write_text(SUMMARY)
    (tmp_path / "events.csv").write_text(EVENTS)
    (tmp_path / "trajectory.csv").write_text(TRAJ)
    (tmp_path / "relaxation_curve.csv").write_text(RELAX_CURVE)
    (tmp_path / "refinement.csv").write_text(REFINE)
    write_dispersion(tmp_path / "dispersion.csv")
    f = write_state(tmp_path / "state_final.gcnf")
    write_state(tmp_path / "state_sigma_0.01.gcnf", seed=1)
    return tmp_path, f


def sidecar_lines(out):
    return open(sidecar_path(out)).read().splitlines()


def echoed_section(lines, name):
    start = lines.index(f"# file: {name}") + 1
    end = len(lines)
    for i in range(start, len(lines)):
        if lines[i].startswith("# "):
            end = i
            break
    return lines[start:end]


def test_a11_round_trip_all_figures(artifacts):
    """[A11] every figure id renders an image plus a sidecar whose values
    byte-match the fixtures; the bifurcation figure carries sigma_c and both
    branch directions."""
    tmp_path, f = artifacts
    echo_inputs = {
        "firing-map": ["trajectory.csv", "events.csv"],
        "relaxation": ["relaxation_curve.csv"],
        "dispersion": ["dispersion.csv"],
        "mode-patterns": ["dispersion.csv"],
        "bifurcation": ["branch_l2r.csv", "branch_r2l.csv", "stability_summary.csv"],
        "refinement": ["refinement.csv"],
    }
    results = {}
    for fig_id, renderer in RENDERERS.items():
        out = str(tmp_path / f"{fig_id}.png")
        renderer(str(tmp_path), out)
        assert os.path.exists(out) and os.path.getsize(out) > 0
        lines = sidecar_lines(out)
        for name in echo_inputs.get(fig_id, []):
            fixture_lines = (tmp_path / name).read_text().splitlines()
            assert echoed_section(lines, name) == fixture_lines, \
                f"{fig_id}: sidecar does not byte-match {name}"
        results[fig_id] = lines
    # binary-derived sidecars: values equal the dump bit-exactly
    lines = results["density-slice"]
    header = lines[1]
    assert header == "x,y,f"
    vals = np.array([float(line.split(",")[2]) for line in lines[2:]])
    assert np.array_equal(vals, np.fft.fftshift(f[0, :, :, 0]).reshape(-1))
    # bifurcation figure marks sigma_c and both directions
    blines = results["bifurcation"]
    assert "# file: branch_l2r.csv" in blines
    assert "# file: branch_r2l.csv" in blines
    assert "0.0175" in blines
    print("[A11] PASS all figure ids round-trip; bifurcation carries sigma_c "
          "and both branch directions")


def test_density_slice_options(artifacts):
    tmp_path, f = artifacts
    out = str(tmp_path / "slice.png")
    RENDERERS["density-slice"](str(tmp_path), out, s_value=0.5, beta=2, s_max=1.3)
    lines = sidecar_lines(out)
    j = min(int(0.5 / (1.3 / 8)), 7)
    vals = np.array([float(line.split(",")[2]) for line in lines[2:]])
    assert np.array_equal(vals, np.fft.fftshift(f[2, :, :, j]).reshape(-1))


def test_missing_input_raises(tmp_path):
    with pytest.raises(InputError):
        RENDERERS["relaxation"](str(tmp_path), str(tmp_path / "x.png"))
    with pytest.raises(InputError):
        RENDERERS["pattern-gallery"](str(tmp_path), str(tmp_path / "y.png"))


def test_corrupt_state_rejected(tmp_path):
    bad = tmp_path / "state_final.gcnf"
    bad.write_bytes(b"NOTGC" + b"\x00" * 64)
    with pytest.raises(InputError):
        read_state(str(bad))


def test_bad_header_rejected(tmp_path):
    (tmp_path / "refinement.csv").write_text("wrong,header\n1,2\n")
    with pytest.raises(InputError):
        RENDERERS["refinement"](str(tmp_path), str(tmp_path / "r.png"))


def test_cli_invocation(artifacts):
    tmp_path, _ = artifacts
    out = tmp_path / "cli.png"
    script = os.path.join(os.path.dirname(__file__), "..", "render.py")
    proc = subprocess.run([sys.executable, script, "bifurcation",
                           "--in", str(tmp_path), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
    assert (tmp_path / "cli.png.sidecar.csv").exists()

    proc = subprocess.run([sys.executable, script, "relaxation",
                           "--in", str(tmp_path / "nope"), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "input error" in proc.stderr


def test_empty_events_renders_path_only(tmp_path):
    (tmp_path / "trajectory.csv").write_text(TRAJ)
    (tmp_path / "events.csv").write_text("t_ms,x_cm,y_cm,rate\n")
    out = str(tmp_path / "fm.png")
    RENDERERS["firing-map"](str(tmp_path), out)
    assert os.path.exists(out)
    lines = sidecar_lines(out)
    assert echoed_section(lines, "events.csv") == ["t_ms,x_cm,y_cm,rate"]
