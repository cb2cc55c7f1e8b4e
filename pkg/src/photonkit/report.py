"""One table of every reference number the toolkit reproduces."""
from __future__ import annotations

import math

from .coupling import (EfficiencyChain, ReflectanceMeasurement, efficiency_chain,
                       gaussian_overlap_closed_form, reflectance_coupling)
from .hom import (HOMParams, eval_g2_co, eval_g2_cross, lifetime_limit_factor,
                  visibility_corrected)
from .models import (G2TwoLevelParams, LorentzianParams, PowerDecayParams, SaturationParams,
                     eval_gamma1, eval_lorentzian, eval_saturation)
from . import pipelines


def _row(name, value, reference, ok):
    return (name, value, reference, "PASS" if ok else "FAIL")


def build_rows(seed=0, full=False):
    rows = []
    b = efficiency_chain(452e3, 40e6, EfficiencyChain.from_values([0.6, 0.526, 0.44, 0.82, 0.8]))
    for key, ref in (("end_to_end", 1.13), ("b_fib", 3.58), ("b_source", 12.41)):
        v = 100 * b[key]
        rows.append(_row(f"budget {key} [%]", f"{v:.3f}", f"{ref}", abs(v - ref) <= 0.01))

    ms = visibility_corrected(0.64, 0.109)
    rows.append(_row("corrected visibility M_s", f"{ms:.4f}", "0.84 +- 0.06", round(ms, 2) == 0.84))

    f = lifetime_limit_factor(1.87, 450.0)
    rows.append(_row("lifetime-limit factor", f"{f:.3f}", "8.3", 8.2 <= f <= 8.4))

    hom = HOMParams(dtau2=4.36, visibility=1.0, tau_c=450.0,
                    base=G2TwoLevelParams(0.0, 1e3))
    side = eval_g2_cross(4.36, hom)
    rows.append(_row("HOM cross side dip g(+-dtau2)", f"{side:.6f}", "0.75", side == 0.75))
    co0 = eval_g2_co(0.0, hom)
    rows.append(_row("HOM co central dip, V=1", f"{co0:.6f}", "< 0.5 (0 ideal)", co0 == 0.0))
    hom109 = HOMParams(dtau2=4.36, visibility=1.0, tau_c=450.0,
                       base=G2TwoLevelParams(0.109, 1e3))
    v = eval_g2_co(0.0, hom109)
    rows.append(_row("HOM co central dip, g2(0)=0.109", f"{v:.5f}", "0.0545",
                     abs(v - 0.0545) < 1e-12))

    g1 = eval_gamma1(0.0, PowerDecayParams(1.87))
    rows.append(_row("gamma1 at zero power [1/ns]", f"{g1:.5f}", "0.53476", abs(g1 - 0.53476) < 5e-6))

    s10 = eval_saturation(11.9, SaturationParams(0.0, 575e3, 1.19))
    rows.append(_row("I(10 P_sat) / I_sat", f"{s10 / 575e3:.6f}", ">= 0.99995",
                     s10 / 575e3 >= 1 - 5e-5))

    lp = LorentzianParams(1554.05, 0.067, 1.0, 0.0)
    half = eval_lorentzian(1554.05 + 0.0335, lp)
    rows.append(_row("Lorentzian at center + fwhm/2", f"{half:.6f}", "0.5", abs(half - 0.5) < 1e-9))

    eta = reflectance_coupling(ReflectanceMeasurement(1.0, 0.83 * 0.65**2, 0.83))
    rows.append(_row("reflectance coupling", f"{eta:.4f}", "0.65", abs(eta - 0.65) < 1e-9))

    ov = gaussian_overlap_closed_form(1.0, 2.0)
    rows.append(_row("Gaussian overlap w=1,2 um", f"{ov:.4f}", "0.64", abs(ov - 0.64) < 1e-12))

    for i_sat, p_sat in ((575e3, 1.19), (452e3, 1.6)):
        r = pipelines.synthetic_saturation(i_sat, p_sat, seed=seed)
        ok = (abs(r["i_sat"] - i_sat) <= 3 * r.error("i_sat")
              and abs(r["p_sat"] - p_sat) <= 3 * r.error("p_sat"))
        rows.append(_row(f"saturation fit I_sat={i_sat / 1e3:g}k P_sat={p_sat}",
                         f"{r['i_sat'] / 1e3:.1f}k +- {r.error('i_sat') / 1e3:.1f}k, "
                         f"{r['p_sat']:.3f} +- {r.error('p_sat'):.3f} uW",
                         f"{i_sat / 1e3:g}k, {p_sat} uW", ok))

    (g2p, sg), _ = pipelines.pulsed_purity_pipeline(seed=seed + 5)
    rows.append(_row("pulsed MC g2(0)", f"{g2p:.4f} +- {sg:.4f}", "0.135 +- 0.02",
                     abs(g2p - 0.135) <= 0.02))

    if full:
        lt, _, _ = pipelines.lifetime_pipeline(seed=seed + 10)
        rows.append(_row("MC lifetime pipeline tau_rad [ns]",
                         f"{lt['tau_rad']:.3f} +- {lt.error('tau_rad'):.3f}", "1.87 (5%)",
                         abs(lt["tau_rad"] - 1.87) <= 0.05 * 1.87))
        run, _, _ = pipelines.hom_pipeline(seed=seed + 3)
        r = run.result
        rows.append(_row("MC HOM tau_c [ps]", f"{r['tau_c']:.1f} +- {r.error('tau_c'):.1f}",
                         "450 +- 50", abs(r["tau_c"] - 450) <= 50))
        rows.append(_row("MC HOM visibility", f"{r['visibility']:.3f}", "1 +- 0.05",
                         abs(r["visibility"] - 1) <= 0.05))
    return rows


def build_report(seed=0, full=False):
    rows = build_rows(seed, full)
    header = ("quantity", "computed", "reference", "status")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(4)]
    fmt = "  ".join("{:<%d}" % w for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*r) for r in rows]
    n_fail = sum(r[3] == "FAIL" for r in rows)
    lines.append(f"{len(rows) - n_fail}/{len(rows)} reproduced")
    return "\n".join(lines) + "\n"
