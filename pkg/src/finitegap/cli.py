"""finitegap command line: periods, check, grid."""

from __future__ import annotations

import sys
import warnings
from pathlib import Path

import click
import numpy as np

from .errors import FiniteGapError, PrecisionError, ThetaDivisorWarning
from .io import (SpecError, decode_array, dump_json, fmt_complex, fmt_real, load_spec,
                 read_cache, spec_from_dict, write_cache)
from .workbench import CHECKERS, DEFAULT_SAMPLES, Workbench

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PRECISION = 0, 1, 2, 3


def _fail(code: int, msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _guard(fun):
    """Map library errors onto exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fun(*args, **kwargs)
        except PrecisionError as exc:
            _fail(EXIT_PRECISION, f"precision: {exc}")
        except (FiniteGapError, ValueError) as exc:
            _fail(EXIT_INPUT, str(exc))
    wrapper.__name__ = fun.__name__
    wrapper.__doc__ = fun.__doc__
    return wrapper


def _load(cache: str, curve: str | None):
    spec = load_spec(curve) if curve else None
    payload = read_cache(cache, spec)
    return Workbench(spec_from_dict(payload["spec"]), payload), payload


def _format_B(B: np.ndarray) -> str:
    rows = []
    for r in B:
        rows.append("  [" + ", ".join(f"{z.real:+.12f}{z.imag:+.12f}j" for z in r) + "]")
    return "\n".join(rows)


@click.group()
@click.version_option(package_name="finitegap")
def main():
    """Theta functions, Baker-Akhiezer functions and Prym-locus checks on hyperelliptic curves."""
    warnings.simplefilter("ignore", ThetaDivisorWarning)


@main.command()
@click.option("--curve", "curve", required=True, type=click.Path(dir_okay=False),
              help="Curve spec (YAML or JSON).")
@click.option("--cache", "cache", required=True, type=click.Path(dir_okay=False),
              help="Period cache to write (reused when it matches the curve spec).")
@_guard
def periods(curve, cache):
    """Compute period data, Riemann constants and Prym shifts; write the cache."""
    spec = load_spec(curve)
    if Path(cache).exists():
        payload = read_cache(cache, spec)
        click.echo(f"cache hit: {cache}")
    else:
        wb = Workbench(spec)
        payload = wb.cache_payload()
        write_cache(cache, payload)
        for note in wb.notes:
            click.echo(f"note: {note}")
    B = decode_array(payload["B"])
    click.echo(f"curve {payload['spec']['name']}: genus {payload['genus']}")
    click.echo("B =\n" + _format_B(np.atleast_2d(B)))
    click.echo(f"symmetry residual {payload['symmetry_residual']}, "
               f"quadrature error {payload['quadrature_error']}")
    for key in ("one_point", "two_point"):
        part = payload.get(key)
        if part and part.get("involution"):
            inv = part["involution"]
            click.echo(f"{inv['mode']} Prym shift zeta = {inv['zeta']}, "
                       f"involution fit residual {inv['fit_residual']}")


def _report_record(rep) -> dict:
    def enc(v):
        if isinstance(v, (complex, np.complexfloating)):
            return fmt_complex(v)
        if isinstance(v, (float, np.floating)):
            return fmt_real(v)
        return v
    d = rep.to_dict()
    d["residual_max"] = fmt_real(d["residual_max"])
    d["residual_rms"] = fmt_real(d["residual_rms"])
    d["tolerance"] = fmt_real(d["tolerance"])
    d["constants"] = {k: enc(v) for k, v in sorted(d["constants"].items())}
    d["parts"] = {k: fmt_real(v) for k, v in sorted(d["parts"].items())}
    return d


@main.command()
@click.option("--cache", "cache", required=True, type=click.Path(dir_okay=False))
@click.option("--curve", "curve", type=click.Path(dir_okay=False), default=None,
              help="Spec the cache must belong to.")
@click.option("--checker", default="all", show_default=True,
              type=click.Choice(CHECKERS + ("all",)))
@click.option("--samples", default=DEFAULT_SAMPLES, show_default=True, type=click.IntRange(1))
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0))
@click.option("--tol", default=None, type=float, help="Pass threshold (default 1e-5).")
@click.option("--zeta-perturb", "perturb", default=0.0, show_default=True, type=float,
              help="Move zeta off the Prym locus along an invariant direction.")
@click.option("--out", "out", type=click.Path(dir_okay=False), default=None)
@_guard
def check(cache, curve, checker, samples, seed, tol, perturb, out):
    """Run condition checkers; exit 0 iff every report passes."""
    wb, payload = _load(cache, curve)
    names = wb.applicable() if checker == "all" else [checker]
    reports = []
    for name in names:
        rep = wb.run(name, samples=samples, seed=seed, tol=tol, perturb=perturb)
        reports.append(rep)
        status = "PASS" if rep.passed else "FAIL"
        extra = " (vacuous)" if rep.vacuous else ""
        click.echo(f"{rep.name:<14} {status}{extra}  max {rep.residual_max:.3e}  "
                   f"tol {rep.tolerance:.0e}  samples {rep.samples}")
    doc = {"run": {"cache_hash": payload["curve_hash"], "checker": checker, "samples": samples,
                   "seed": seed, "tol": None if tol is None else fmt_real(tol),
                   "zeta_perturb": fmt_real(perturb)},
           "notes": wb.notes, "reports": [_report_record(r) for r in reports]}
    if out:
        Path(out).write_text(dump_json(doc))
    sys.exit(EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL)


def _range(text: str):
    try:
        parts = [float(v) for v in text.split(":")]
    except ValueError:
        raise click.BadParameter(f"expected start:stop:count, got {text!r}") from None
    if len(parts) == 1:
        return np.array(parts)
    if len(parts) != 3 or parts[2] < 1 or parts[2] != int(parts[2]):
        raise click.BadParameter(f"expected start:stop:count, got {text!r}")
    return np.linspace(parts[0], parts[1], int(parts[2]))


@main.command()
@click.option("--cache", "cache", required=True, type=click.Path(dir_okay=False))
@click.option("--curve", "curve", type=click.Path(dir_okay=False), default=None)
@click.option("--field", "name", default="u", show_default=True, type=click.Choice(["u", "f"]))
@click.option("--data", "which", default=None, type=click.Choice(["one-point", "two-point"]),
              help="Default: one-point for u, two-point for f.")
@click.option("--x", "xr", default="0", show_default=True, help="start:stop:count or a value")
@click.option("--y", "yr", default="0", show_default=True)
@click.option("--t", "tr", default="0", show_default=True)
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0))
@click.option("--zeta-perturb", "perturb", default=0.0, show_default=True, type=float)
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False))
@_guard
def grid(cache, curve, name, which, xr, yr, tr, seed, perturb, out):
    """Write u or f on a grid as CSV (x,y,t,re,im,pole), Z = the Prym shift when known."""
    from .ba import field_grid

    xs, ys, ts = _range(xr), _range(yr), _range(tr)
    wb, _payload = _load(cache, curve)
    which = which or ("one-point" if name == "u" else "two-point")
    data = wb.one if which == "one-point" else wb.two
    if data is None:
        raise SpecError(f"spec has no {which} data")
    inv = wb.inv_flex if which == "one-point" else wb.inv_toda
    rng = np.random.default_rng(seed)
    if inv is not None:
        Z = inv.perturbed(perturb, rng) if perturb else inv.zeta
    else:
        Z = np.zeros(data.g, dtype=complex)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals, pole = field_grid(data, Z, xs, ys, ts, name)
    lines = ["x,y,t,re,im,pole"]
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            for k, t in enumerate(ts):
                v = complex(vals[i, j, k])
                bad = bool(pole[i, j, k]) or not np.isfinite(v)
                re, im = ("nan", "nan") if bad else fmt_complex(v)
                lines.append(",".join([fmt_real(x), fmt_real(y), fmt_real(t), re, im,
                                       "1" if bad else "0"]))
    Path(out).write_text("\n".join(lines) + "\n")
    click.echo(f"wrote {len(lines) - 1} rows to {out}")


if __name__ == "__main__":
    main()
