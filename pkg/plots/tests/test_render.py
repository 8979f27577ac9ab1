"""Render each figure kind from golden result files and verify the schema
round-trip: parsing a stored CSV and re-serializing it reproduces the data
section byte-for-byte, and rendering never touches the inputs."""

import hashlib
import json
from pathlib import Path

import pytest

from driven_ising_plots import (
    FigureSpec,
    SchemaError,
    parse_fit_json,
    parse_scan_dir,
    parse_trace_csv,
    parse_trace_json,
    render,
    serialize_trace_csv,
)
from driven_ising_plots.cli import (
    main_autocorrelator_panels,
    main_heatmap_cuts,
    main_lifetime_heatmap,
    main_trace_logtime,
)

GOLDEN = Path(__file__).parent / "golden"


def checksum_tree(root: Path) -> dict:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


# --- schema round-trip -----------------------------------------------------------


@pytest.mark.parametrize("name", ["trace_boundary.csv", "ensemble_boundary.csv",
                                  "scan/traces/001_001.csv"])
def test_trace_csv_roundtrip_is_byte_identical(name):
    path = GOLDEN / name
    table = parse_trace_csv(path)
    assert serialize_trace_csv(table) == path.read_text()


def test_trace_json_parses_and_matches_csv():
    doc = parse_trace_json(GOLDEN / "trace_boundary.json")
    table = parse_trace_csv(GOLDEN / "trace_boundary.csv")
    assert doc["grid"]["periods"] == table.periods
    assert doc["series"]["m_global"] == table.series["m_global"]


def test_scan_dir_parses_grid_and_mask():
    grid = parse_scan_dir(GOLDEN / "scan")
    assert len(grid.eps) == 3 and len(grid.eps_prime) == 3
    statuses = {s for row in grid.status for s in row}
    assert "unresolved-high" in statuses  # masked cell present in the golden scan
    assert grid.lifetime[0][0] is None
    assert grid.lifetime[2][2] is not None


def test_fit_json_parses():
    doc = parse_fit_json(GOLDEN / "fit_eps_prime.json")
    assert doc["model"] == "power-law"
    assert doc["params"]["beta"] == pytest.approx(-1.0, abs=0.05)


# --- schema errors name file and field ----------------------------------------------


def test_schema_errors_are_specific(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("period,observable\n")
    with pytest.raises(SchemaError) as excinfo:
        parse_trace_csv(bad)
    assert excinfo.value.field == "header" and str(bad) in str(excinfo.value)

    missing = tmp_path / "missing.csv"
    with pytest.raises(SchemaError):
        parse_trace_csv(missing)

    not_a_trace = tmp_path / "x.json"
    not_a_trace.write_text(json.dumps({"schema": "other/1"}))
    with pytest.raises(SchemaError) as excinfo:
        parse_trace_json(not_a_trace)
    assert excinfo.value.field == "schema"


def test_render_rejects_unknown_kind():
    with pytest.raises(ValueError):
        FigureSpec("pie-chart", ["x"], "y.png")
    with pytest.raises(ValueError):
        FigureSpec("trace-logtime", [], "y.png")


# --- rendering ------------------------------------------------------------------------


def test_trace_logtime_renders_with_metronome_axis(tmp_path):
    before = checksum_tree(GOLDEN)
    out = render(
        FigureSpec(
            "trace-logtime",
            [GOLDEN / "trace_boundary.csv"],
            str(tmp_path / "fig_trace.png"),
            labels=["metronome eps'=1e-3"],
        )
    )
    assert Path(out).stat().st_size > 10_000
    assert checksum_tree(GOLDEN) == before  # inputs untouched, nothing recomputed


def test_lifetime_heatmap_renders_with_mask(tmp_path):
    out = render(
        FigureSpec("lifetime-heatmap", [GOLDEN / "scan"], str(tmp_path / "fig_heat.png"))
    )
    assert Path(out).stat().st_size > 10_000


def test_heatmap_cuts_render_with_fit_overlay(tmp_path):
    out = render(
        FigureSpec(
            "heatmap-cuts",
            [GOLDEN / "scan"],
            str(tmp_path / "fig_cuts.png"),
            fit_overlays=[None, str(GOLDEN / "fit_eps_prime.json")],
        )
    )
    assert Path(out).stat().st_size > 10_000


def test_autocorrelator_panels_render(tmp_path):
    out = render(
        FigureSpec(
            "autocorrelator-panels",
            [GOLDEN / "ensemble_boundary.csv"],
            str(tmp_path / "fig_panels.png"),
        )
    )
    assert Path(out).stat().st_size > 10_000


def test_rendering_is_deterministic(tmp_path):
    a = render(FigureSpec("trace-logtime", [GOLDEN / "trace_boundary.csv"], str(tmp_path / "a.png")))
    b = render(FigureSpec("trace-logtime", [GOLDEN / "trace_boundary.csv"], str(tmp_path / "b.png")))
    assert Path(a).read_bytes() == Path(b).read_bytes()


# --- CLI entry points --------------------------------------------------------------------


def test_cli_scripts_render_all_kinds(tmp_path):
    assert main_trace_logtime([str(GOLDEN / "trace_boundary.csv"),
                               "--out", str(tmp_path / "1.png")]) == 0
    assert main_lifetime_heatmap([str(GOLDEN / "scan"), "--out", str(tmp_path / "2.png")]) == 0
    assert main_heatmap_cuts([str(GOLDEN / "scan"),
                              "--fit-eps-prime", str(GOLDEN / "fit_eps_prime.json"),
                              "--out", str(tmp_path / "3.png")]) == 0
    assert main_autocorrelator_panels([str(GOLDEN / "ensemble_boundary.csv"),
                                       "--out", str(tmp_path / "4.png")]) == 0
    for k in range(1, 5):
        assert (tmp_path / f"{k}.png").exists()


def test_cli_schema_error_exit_code(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main_trace_logtime([str(empty), "--out", str(tmp_path / "x.png")]) == 2
    assert not (tmp_path / "x.png").exists()
