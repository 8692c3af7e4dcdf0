"""Figure rendering smoke checks."""

import numpy as np

from nashflow import report, sim

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def make_traj(with_reference: bool):
    cols = ["t", "x_0_0", "x_0_1", "u_0", "wbar_0_0",
            "kkt", "V", "err_phys", "err_dm"]
    rows = 40
    t = np.linspace(0.0, 4.0, rows)
    data = np.column_stack([
        t, np.cos(t), np.sin(t), -np.sin(t), np.cos(t),
        np.exp(-t),
        np.exp(-2 * t) if with_reference else np.full(rows, np.nan),
        np.exp(-t) if with_reference else np.full(rows, np.nan),
        np.exp(-t) if with_reference else np.full(rows, np.nan),
    ])
    return sim.Trajectory("alg1", 0.1, 1, cols, data,
                          0 if with_reference else None, 10.0,
                          {"horizon": 4.0, "steps": rows - 1})


def test_render_report_writes_three_pngs(tmp_path):
    written = report.render_report(make_traj(True), str(tmp_path), "case")
    assert len(written) == 3
    names = sorted(p.name for p in tmp_path.glob("*.png"))
    assert names == ["case_errors.png", "case_monitors.png",
                     "case_state.png"]
    for path in written:
        with open(path, "rb") as fh:
            assert fh.read(8) == PNG_MAGIC


def test_render_report_without_reference(tmp_path):
    # All-NaN error and V columns must not crash the panels.
    written = report.render_report(make_traj(False), str(tmp_path), "raw")
    assert len(written) == 3
    for path in written:
        with open(path, "rb") as fh:
            assert fh.read(8) == PNG_MAGIC
