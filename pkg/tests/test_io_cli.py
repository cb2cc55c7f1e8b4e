import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import synthetic
from photonkit import cli
from photonkit import io as pio
from photonkit.coupling import FieldMap, gaussian_field
from photonkit.correlator import Histogram
from photonkit.fitter import FitResult
from photonkit.models import saturation
from photonkit.tags import TagStream

tag_streams = st.lists(st.tuples(st.integers(-10**15, 10**15), st.integers(0, 0xFFFF)),
                       max_size=100).map(sorted)


def stream_from(pairs, extra=7):
    t = np.array([p[0] for p in pairs], np.int64)
    c = np.array([p[1] for p in pairs], np.uint16)
    return TagStream(t, c, max(int(t[-1]), 0) + extra if t.size else extra)


class TestTagFiles:
    @settings(max_examples=50, deadline=None)
    @given(tag_streams, st.sampled_from([".csv", ".ptag"]))
    def test_round_trip(self, tmp_path_factory, pairs, suffix):
        s = stream_from(pairs)
        path = tmp_path_factory.mktemp("tags") / f"t{suffix}"
        pio.write_tags(path, s)
        back = pio.read_tags(path, s.duration)
        assert back == s

    def test_binary_layout(self, tmp_path):
        path = tmp_path / "t.bin"
        pio.write_tags(path, TagStream(np.array([-2, 5]), np.array([3, 1]), 10))
        raw = path.read_bytes()
        assert raw[:6] == b"PTAG\x01\x00"
        assert len(raw) == 6 + 2 * 12
        assert raw[6:18] == (-2).to_bytes(8, "little", signed=True) + b"\x03\x00\x00\x00"

    def test_default_duration(self, tmp_path):
        path = tmp_path / "t.csv"
        pio.write_tags(path, TagStream(np.array([4, 9]), 0, 100))
        assert pio.read_tags(path).duration == 10

    @pytest.mark.parametrize("content", [
        b"PTAX\x01\x00",
        b"PTAG\x02\x00",
        b"PTAG\x01\x00" + b"\x00" * 11,
        b"PTAG\x01\x00" + (5).to_bytes(8, "little") + b"\x00\x00\x01\x00",
        b"PTAG\x01\x00" + (5).to_bytes(8, "little") + b"\x00" * 4 + b"\x00" * 12,
    ])
    def test_binary_violations(self, tmp_path, content):
        path = tmp_path / "bad.bin"
        path.write_bytes(content)
        with pytest.raises(pio.FormatError):
            pio.read_tags(path)

    @pytest.mark.parametrize("content", [
        "time_ps,channel\n0,1\n",
        "channel,time_ps\n0,abc\n",
        "channel,time_ps\n0,5,6\n",
        "channel,time_ps\n70000,5\n",
        "channel,time_ps\n0,5\n0,3\n",
    ])
    def test_csv_violations(self, tmp_path, content):
        path = tmp_path / "bad.csv"
        path.write_text(content)
        with pytest.raises(pio.FormatError):
            pio.read_tags(path)


class TestHistogramFiles:
    def test_round_trip_with_norm(self, tmp_path):
        h = Histogram(100, 1000, np.arange(20), 190, norm=12.5)
        pio.write_histogram(tmp_path / "h.csv", h)
        assert pio.read_histogram(tmp_path / "h.csv") == h

    def test_round_trip_without_norm(self, tmp_path):
        h = Histogram(7, 70, np.arange(20) % 3, 19)
        pio.write_histogram(tmp_path / "h.csv", h)
        back = pio.read_histogram(tmp_path / "h.csv")
        assert back == h and back.norm is None

    @pytest.mark.parametrize("body", [
        "",
        "a,b,c,d\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n-10,0,1,0.1\n0,20,1,0.1\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n-10,0,1,0.1\n5,15,1,0.1\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n-20,-10,1,0.1\n-10,0,1,0.1\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n-10,0,x,0.1\n0,10,1,0.1\n",
        "bin_start_ps,bin_end_ps,counts,normalized\n-10,0,1\n0,10,1,0.1\n",
    ])
    def test_violations(self, tmp_path, body):
        path = tmp_path / "h.csv"
        path.write_text(body)
        with pytest.raises(pio.FormatError):
            pio.read_histogram(path)


class TestFieldFiles:
    def test_round_trip(self, tmp_path):
        f = FieldMap(0.1, 0.2, np.exp(1j * np.arange(12).reshape(3, 4)) * 0.3)
        pio.write_field(tmp_path / "f.txt", f)
        assert pio.read_field(tmp_path / "f.txt") == f

    @pytest.mark.parametrize("body", ["2 2 0.1\n", "2 2 0.1 0.1\n1 0\n1 0\n1 0\n",
                                      "2 2 0.1 0.1\n" + "0 0\n" * 4, "2 x 0.1 0.1\n"])
    def test_violations(self, tmp_path, body):
        path = tmp_path / "f.txt"
        path.write_text(body)
        with pytest.raises(pio.FormatError):
            pio.read_field(path)


class TestFitResultFiles:
    def test_round_trip(self, tmp_path):
        r = FitResult(("a", "b"), np.array([1.5, -2e-9]), np.array([0.1, np.inf]),
                      np.array([[0.01, 1e-3], [1e-3, np.inf]]), 1.1, 7, True, 33.0, 32,
                      extras={"visibility_raw": 0.7})
        pio.write_fit_result(tmp_path / "r.txt", r, "demo")
        back, name = pio.read_fit_result(tmp_path / "r.txt")
        assert name == "demo"
        assert back.names == r.names and back.extras == r.extras
        np.testing.assert_array_equal(back.params, r.params)
        np.testing.assert_array_equal(back.sigma, r.sigma)
        np.testing.assert_array_equal(back.covariance, r.covariance)
        assert (back.chi2_reduced, back.iterations, back.converged, back.chi2, back.n_points) == \
            (1.1, 7, True, 33.0, 32)

    def test_violation(self, tmp_path):
        (tmp_path / "r.txt").write_text("params = a\na = 1\n")
        with pytest.raises(pio.FormatError):
            pio.read_fit_result(tmp_path / "r.txt")
        (tmp_path / "r.txt").write_text("garbage\n")
        with pytest.raises(pio.FormatError):
            pio.read_fit_result(tmp_path / "r.txt")


def test_svg_plot(tmp_path):
    pio.write_svg_plot(tmp_path / "p.svg", [("a", [0, 1, 2], [1, 0, 1]), ("b", [0, 2], [1, 1])])
    text = (tmp_path / "p.svg").read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 2


class TestCliExitCodes:
    def test_usage_errors(self, capsys):
        assert cli.run([]) == 2
        assert cli.run(["frobnicate"]) == 2
        assert cli.run(["budget", "--isat", "1"]) == 2
        assert cli.run(["budget", "--isat", "1", "--rep", "1", "--stages", "a,b"]) == 2
        assert cli.run(["correlate", "--input", "x", "--out", "y", "--bin-width", "0"]) == 2

    def test_format_errors(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("nonsense\n")
        assert cli.run(["correlate", "--input", str(bad), "--out", str(tmp_path / "h")]) == 3
        assert cli.run(["fit-g2", "--input", str(bad)]) == 3
        assert cli.run(["fit-g2", "--input", str(tmp_path / "missing.csv")]) == 3
        assert cli.run(["overlap", "--field", str(bad), "--fiber-waist", "1"]) == 3
        assert "input error" in capsys.readouterr().err

    def test_computation_errors(self, tmp_path, capsys):
        assert cli.run(["budget", "--isat", "1", "--rep", "0", "--stages", "0.5"]) == 4
        assert cli.run(["budget", "--isat", "1", "--rep", "1", "--stages", "0.5,1.5"]) == 4
        xy = tmp_path / "sat.csv"
        xy.write_text("power,rate\n1,1\n2,1\n")
        assert cli.run(["fit-sat", "--input", str(xy)]) == 4
        assert "computation error" in capsys.readouterr().err


def test_budget_output(capsys):
    assert cli.run(["budget", "--isat", "452000", "--rep", "40e6",
                    "--stages", "0.6,0.526,0.44,0.82,0.8"]) == 0
    out = capsys.readouterr().out
    values = dict(line.split(" = ") for line in out.strip().splitlines())
    assert float(values["end_to_end"].rstrip("%")) == pytest.approx(1.13, abs=0.01)
    assert float(values["b_fib"].rstrip("%")) == pytest.approx(3.58, abs=0.01)
    assert float(values["b_source"].rstrip("%")) == pytest.approx(12.41, abs=0.01)


@pytest.mark.parametrize("suffix", [".csv", ".ptag"])
def test_simulate_is_deterministic(tmp_path, capsys, suffix):
    paths = [tmp_path / f"a{suffix}", tmp_path / f"b{suffix}"]
    for p in paths:
        assert cli.run(["simulate", "--mode", "cw", "--seed", "7", "--duration", "2e-4",
                        "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert cli.run(["simulate", "--mode", "cw", "--seed", "8", "--duration", "2e-4",
                    "--out", str(tmp_path / f"c{suffix}")]) == 0
    assert (tmp_path / f"c{suffix}").read_bytes() != paths[0].read_bytes()


def test_pipeline_outputs_are_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        tags, hist, fit = (tmp_path / f"t{k}.ptag", tmp_path / f"h{k}.csv", tmp_path / f"f{k}.txt")
        assert cli.run(["simulate", "--mode", "pulsed", "--seed", "3", "--duration", "1e-3",
                        "--background-rate", "5e5", "--out", str(tags)]) == 0
        assert cli.run(["correlate", "--input", str(tags), "--tau-max", "100000",
                        "--out", str(hist)]) == 0
        outs.append((tags.read_bytes(), hist.read_bytes()))
    assert outs[0] == outs[1]


def test_correlate_and_fit_g2(tmp_path, capsys):
    tags, hist, fit = tmp_path / "t.ptag", tmp_path / "h.csv", tmp_path / "f.txt"
    assert cli.run(["simulate", "--seed", "11", "--duration", "2e-3", "--pump-rate", "0.3",
                    "--out", str(tags)]) == 0
    assert cli.run(["correlate", "--input", str(tags), "--out", str(hist),
                    "--svg", str(tmp_path / "h.svg")]) == 0
    assert cli.run(["fit-g2", "--input", str(hist), "--out", str(fit),
                    "--plot-csv", str(tmp_path / "p.csv")]) == 0
    r, name = pio.read_fit_result(fit)
    gamma1 = 0.3 + 1 / 1.87
    assert name == "g2_two_level"
    assert abs(r["gamma1"] - gamma1) <= 3 * r.error("gamma1")
    assert abs(r["g2_zero"]) <= 3 * r.error("g2_zero") + 0.02


def test_fit_sat_cli(tmp_path, capsys):
    p = np.linspace(0.1, 8, 25)
    rate = saturation(p, 0.0, 575_000, 1.19)
    path = tmp_path / "sat.csv"
    pio.write_xy(path, "power_uW,rate_cps,g2_zero", p, rate, np.zeros_like(p))
    assert cli.run(["fit-sat", "--input", str(path), "--correct", "--fix-i0", "0",
                    "--out", str(tmp_path / "f.txt")]) == 0
    r, _ = pio.read_fit_result(tmp_path / "f.txt")
    assert r["i_sat"] == pytest.approx(575_000, rel=1e-8)
    assert r["p_sat"] == pytest.approx(1.19, rel=1e-8)


def test_fit_spectrum_cli(tmp_path, capsys):
    x = np.linspace(1553.5, 1554.6, 111)
    y = 10 + 400 / (1 + ((x - 1554.05) / (0.067 / 2)) ** 2)
    path = tmp_path / "spec.csv"
    pio.write_xy(path, "wavelength_nm,counts", x, y)
    assert cli.run(["fit-spectrum", "--input", str(path)]) == 0
    assert "fwhm = 0.0670000" in capsys.readouterr().out


def test_overlap_cli(tmp_path, capsys):
    f = gaussian_field(128, 128, 0.0625, 0.0625, 1.0)
    pio.write_field(tmp_path / "f.txt", f)
    assert cli.run(["overlap", "--field", str(tmp_path / "f.txt"), "--fiber-waist", "2",
                    "--fit", "--out", str(tmp_path / "o.txt")]) == 0
    lines = dict(l.split(" = ") for l in (tmp_path / "o.txt").read_text().splitlines())
    assert float(lines["overlap"]) == pytest.approx(0.64, abs=1e-4)
    assert float(lines["fit.waist_x"]) == pytest.approx(1.0, abs=1e-8)
    assert cli.run(["overlap", "--field", str(tmp_path / "f.txt"),
                    "--field2", str(tmp_path / "f.txt"), "--fit-aligned", "--fit"]) == 0
    assert "overlap = 1.0\n" in capsys.readouterr().out
    assert cli.run(["overlap", "--field", str(tmp_path / "f.txt")]) == 4


def test_fit_hom_on_synthetic_histograms(tmp_path, capsys):
    co, cross = synthetic.hom_histograms(0.0, 1 / 1.87 + 0.1, 1.0, 450.0, norm=5e4,
                                         rng=np.random.default_rng(4))
    pio.write_histogram(tmp_path / "co.csv", co)
    pio.write_histogram(tmp_path / "cross.csv", cross)
    assert cli.run(["fit-hom", "--co", str(tmp_path / "co.csv"),
                    "--cross", str(tmp_path / "cross.csv"), "--g2-zero", "0.0",
                    "--out", str(tmp_path / "r.txt")]) == 0
    r, name = pio.read_fit_result(tmp_path / "r.txt")
    assert name == "hom_joint"
    assert abs(r["tau_c"] - 450) <= 50
    assert r.extras["v_hom_raw"] > 0.9


@pytest.mark.slow
def test_simulate_correlate_fit_hom(tmp_path, capsys):
    hists = {}
    for label, vis, seed in (("co", "1", "21"), ("cross", "0", "22")):
        tags = tmp_path / f"{label}.ptag"
        assert cli.run(["simulate", "--setup", "hom", "--visibility", vis, "--tau-c", "450",
                        "--pump-rate", "0.1", "--duration", "0.05", "--seed", seed,
                        "--out", str(tags)]) == 0
        hists[label] = tmp_path / f"{label}.csv"
        assert cli.run(["correlate", "--input", str(tags), "--tau-max", "10000",
                        "--out", str(hists[label])]) == 0
    out = tmp_path / "hom.txt"
    assert cli.run(["fit-hom", "--co", str(hists["co"]), "--cross", str(hists["cross"]),
                    "--out", str(out)]) == 0
    r, _ = pio.read_fit_result(out)
    assert abs(r["tau_c"] - 450) <= 50
    assert abs(r["visibility"] - 1) <= 0.05


def test_report_runs(tmp_path, capsys):
    assert cli.run(["report", "--out", str(tmp_path / "r.txt")]) == 0
    text = (tmp_path / "r.txt").read_text()
    assert "b_source" in text or "12.4" in text
