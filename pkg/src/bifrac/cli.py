"""Command-line interface: ``bifrac {kernel,state-stats,grid,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
error.  ``BIFRAC_THREADS`` caps the worker threads used for grids (0 or
unset means one per CPU).
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, fock, phasespace as ps, states
from .checks import run_checks
from .errors import BifracError, NormLoss, SpecialAngle, UntrustedTruncation
from .fracft import _kernel, compose_kernels, special_value
from .operators import BifracAngles

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

KINDS = {
    "weyl": ps.WEYL,
    "wigner": ps.WIGNER,
    "bifrac-wigner": ps.BIFRAC_WIGNER,
    "q": ps.BIFRAC_Q,
    "p": ps.BIFRAC_P,
}


class UsageError(ValueError):
    pass


def _complex(z):
    # round first so that -0.00000 prints as +0.00000
    re, im = round(z.real, 5) + 0.0, round(z.imag, 5) + 0.0
    return f"{re:.5f}{im:+.5f}i"


def _sig5(v):
    return format(float(v), ".5g")


def _threads():
    n = int(os.environ.get("BIFRAC_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def parse_range(text):
    """``lo:hi:count`` into an axis."""
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError(f"range must be lo:hi:count, got {text!r}") from None
    if count < 2:
        raise UsageError("grid count must be at least 2 per axis")
    if not hi > lo:
        raise UsageError("range needs hi > lo")
    return ps.axis(lo, hi, count)


def parse_sweep(text):
    """``start:stop:step``, stop included when it lies on the lattice."""
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"sweep must be start:stop:step, got {text!r}") from None
    if not step > 0 or stop < start:
        raise UsageError("sweep needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def parse_op(text, N):
    """Operator mini-language: ``fock:n``, ``coherent:a,b``, ``thermal:s``, ``file:PATH``."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "fock":
            n = int(arg)
            if not 0 <= n < N:
                raise UsageError(f"fock level {n} outside 0..{N - 1}")
            M = np.zeros((N, N), complex)
            M[n, n] = 1
            return fock.FockOperator(M)
        if kind == "coherent":
            a, b = (float(t) for t in arg.split(","))
            v = fock.glauber_column(a, b, N)
            return fock.FockOperator(np.outer(v, v.conj()))
        if kind == "thermal":
            s = float(arg)
            if not 0 <= s < 1:
                raise UsageError("thermal parameter must lie in [0, 1)")
            return ps.thermal_operator(s, N)
        if kind == "file":
            with open(arg) as fh:
                obj = fock.loads(fh.read())
            M = obj.projector().matrix if isinstance(obj, fock.FockState) else obj.matrix
            if M.shape[0] > N:
                raise UsageError(f"operator in {arg} has dimension {M.shape[0]} > --n {N}")
            out = np.zeros((N, N), complex)
            out[: M.shape[0], : M.shape[0]] = M
            return fock.FockOperator(out)
    except (ValueError, OSError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad operator spec {text!r}: {exc}") from None
    raise UsageError(f"unknown operator kind {kind!r}")


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", newline="")


def cmd_kernel(args):
    if args.compose is not None:
        t1, t2 = args.compose
        if args.z is None:
            raise UsageError("--compose needs --x and --z")
        quad = compose_kernels(t1, t2, args.x, args.z)
        closed = _kernel(args.x, args.z, t1 + t2)
        print(_complex(quad))
        print(_complex(closed))
        return EXIT_OK
    if args.y is None:
        raise UsageError("kernel needs --y (or --compose with --z)")
    s = special_value(args.theta)
    if s in (0.0, np.pi):
        raise SpecialAngle(f"kernel at theta={args.theta!r} is a delta distribution")
    if s is not None:
        val = np.exp(np.sign(s) * 1j * args.x * args.y) / np.sqrt(2 * np.pi)
    else:
        val = _kernel(args.x, args.y, args.theta)
    print(_complex(complex(val)))
    return EXIT_OK


STATS_HEADER = ["theta_alpha", "sigma_pp", "mean_n", "g2", "norm_captured", "rs_residual"]


def _stats_row(alpha, beta, ta, tb, N, n_max):
    if tb == 0.0:
        bp = states.bargmann_params(alpha, beta, ta)
        m = states.moments_from_wavefunction(bp)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NormLoss)
            st = states.photon_stats(bp, n_max)
    else:
        psi, rep = states.bifrac_coherent(alpha, beta, (ta, tb), N)
        if not rep.trusted:
            raise UntrustedTruncation(f"state truncation untrusted (edge weight {rep.edge_weight:.3g})")
        m = states.fock_moments(psi)
        st = states.fock_photon_stats(psi)
    return [ta, m.spp, st.mean_n, st.g2, st.norm_captured, m.rs_determinant - 0.25]


def cmd_state_stats(args):
    if args.sweep_theta_alpha is not None:
        thetas = parse_sweep(args.sweep_theta_alpha)
    elif args.theta_alpha is not None:
        thetas = np.array([args.theta_alpha])
    else:
        raise UsageError("give --theta-alpha or --sweep-theta-alpha")
    # angle admissibility before any computation
    for ta in thetas:
        BifracAngles(ta, args.theta_beta)
    with ThreadPoolExecutor(_threads()) as pool:
        rows = list(pool.map(lambda ta: _stats_row(args.alpha, args.beta, float(ta), args.theta_beta,
                                                   args.n, args.n_max), thetas))
    out = _open_out(args.output)
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(STATS_HEADER)
        for r in rows:
            w.writerow([_sig5(v) for v in r])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _grid_rows(kind, T, alpha_axis, beta_axis, ang):
    if kind == ps.WEYL:
        return ps.weyl_function(T, alpha_axis, beta_axis)
    if kind == ps.WIGNER:
        return ps.wigner_function(T, alpha_axis, beta_axis)
    if kind == ps.BIFRAC_WIGNER:
        return ps.bifrac_wigner_grid(T, alpha_axis, beta_axis, ang)
    return ps.q_function(T, alpha_axis, beta_axis, ang)


def compute_grid(kind, T, alpha_axis, beta_axis, ang):
    """Evaluate a grid, splitting the alpha axis across threads in index order."""
    if kind == ps.BIFRAC_P:
        A, B = np.meshgrid(alpha_axis, beta_axis, indexing="ij")
        vals, diag = ps.p_function_grid(T, A, B, ang)
        return ps.PhaseSpaceGrid(alpha_axis, beta_axis, vals, kind, ang, T.dim, True, diag)
    chunks = [c for c in np.array_split(np.arange(alpha_axis.size), _threads()) if c.size]
    with ThreadPoolExecutor(len(chunks)) as pool:
        parts = list(pool.map(lambda c: _grid_rows(kind, T, alpha_axis[c], beta_axis, ang), chunks))
    g0 = parts[0]
    meta = {k: max(p.meta[k] for p in parts) for k in g0.meta}
    return ps.PhaseSpaceGrid(alpha_axis, beta_axis, np.concatenate([p.values for p in parts]), g0.kind,
                             g0.angles, g0.fock_dim, all(p.trusted for p in parts), meta)


def _oracle_points(alpha_axis, beta_axis, count=5):
    ia = np.linspace(0, alpha_axis.size - 1, count + 2)[1:-1].round().astype(int)
    ib = np.linspace(0, beta_axis.size - 1, count + 2)[1:-1].round().astype(int)
    return [(alpha_axis[i], beta_axis[j]) for i, j in zip(ia, ib[::-1])]


def cmd_grid(args):
    kind = KINDS[args.kind]
    if (args.theta_alpha is None) != (args.theta_beta is None):
        raise UsageError("--theta-alpha and --theta-beta go together")
    if args.theta_alpha is not None:
        if args.angles:
            raise UsageError("give --angles or --theta-alpha/--theta-beta, not both")
        args.angles = [args.theta_alpha, args.theta_beta]
    ang = BifracAngles(*args.angles) if args.angles else None
    if ang is None and kind in (ps.BIFRAC_WIGNER, ps.BIFRAC_Q, ps.BIFRAC_P):
        raise UsageError(f"--kind {args.kind} needs --angles")
    if args.verify_oracle and kind != ps.BIFRAC_WIGNER:
        raise UsageError("--verify-oracle applies to --kind bifrac-wigner")
    alpha_axis = parse_range(args.alpha_range or args.range)
    beta_axis = parse_range(args.beta_range or args.range)
    T = parse_op(args.op, args.n)
    grid = compute_grid(kind, T, alpha_axis, beta_axis, ang)
    if not grid.trusted and not args.allow_untrusted:
        print(f"error: grid truncation untrusted at N={args.n} (edge weight "
              f"{grid.meta['edge_weight']:.3g}); raise --n or pass --allow-untrusted", file=sys.stderr)
        return EXIT_NUMERIC
    meta = ps.grid_metadata(grid)
    status = EXIT_OK
    if args.verify_oracle:
        dev, phase = ps.compare_with_oracle(T, _oracle_points(alpha_axis, beta_axis), ang)
        meta["oracle"] = {"max_deviation": dev, "tolerance": 2e-3, "phase": [phase.real, phase.imag]}
        print(json.dumps({"oracle_max_deviation": dev, "tolerance": 2e-3}), file=sys.stderr)
        status = EXIT_OK if dev < 2e-3 else EXIT_VERIFY
    out = _open_out(args.output)
    try:
        if args.format == "json":
            doc = json.loads(ps.grid_to_json(grid))
            doc.update(meta)
            out.write(json.dumps(doc) + "\n")
        else:
            ps.grid_to_csv(grid, out)
    finally:
        if out is not sys.stdout:
            out.close()
    if args.format == "csv" and args.output not in (None, "-"):
        with open(args.output + ".meta.json", "w") as fh:
            json.dump(meta, fh, indent=2)
    return status


def cmd_verify(args):
    report = run_checks(N=args.n, seed=args.seed, only=args.only)
    if not report:
        raise UsageError(f"no check matches {args.only!r}")
    text = json.dumps(report, indent=2)
    out = _open_out(args.output)
    try:
        out.write(text + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK if all(r["status"] == "pass" for r in report) else EXIT_VERIFY


def build_parser():
    p = argparse.ArgumentParser(prog="bifrac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"bifrac {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="fractional Fourier kernel values and compositions")
    k.add_argument("--theta", type=float, default=np.pi / 2)
    k.add_argument("--x", type=float, required=True)
    k.add_argument("--y", type=float)
    k.add_argument("--z", type=float)
    k.add_argument("--compose", type=float, nargs=2, metavar=("THETA1", "THETA2"))
    k.set_defaults(func=cmd_kernel)

    s = sub.add_parser("state-stats", help="moments and photon statistics of bifractional coherent states")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, required=True)
    s.add_argument("--theta-alpha", type=float)
    s.add_argument("--sweep-theta-alpha", metavar="START:STOP:STEP")
    s.add_argument("--theta-beta", type=float, default=0.0)
    s.add_argument("--n", type=int, default=64, help="Fock dimension for theta_beta != 0")
    s.add_argument("--n-max", type=int, default=30, help="photon-number cutoff for theta_beta = 0")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_state_stats)

    g = sub.add_parser("grid", help="phase-space function on a grid")
    g.add_argument("--kind", choices=sorted(KINDS), required=True)
    g.add_argument("--op", required=True, help="fock:n | coherent:a,b | thermal:s | file:PATH")
    g.add_argument("--range", default="-3:3:61", help="lo:hi:count for both axes")
    g.add_argument("--alpha-range")
    g.add_argument("--beta-range")
    g.add_argument("--angles", type=float, nargs=2, metavar=("THETA_ALPHA", "THETA_BETA"))
    g.add_argument("--theta-alpha", type=float, help="same as the first --angles value")
    g.add_argument("--theta-beta", type=float, help="same as the second --angles value")
    g.add_argument("--n", type=int, default=64)
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    g.add_argument("--output", "-o")
    g.add_argument("--allow-untrusted", action="store_true")
    g.add_argument("--verify-oracle", action="store_true")
    g.set_defaults(func=cmd_grid)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--n", type=int, default=64)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--only", action="append", help="substring filter on check names (repeatable)")
    v.add_argument("--output", "-o")
    v.set_defaults(func=cmd_verify)
    return p


def _glue_ranges(argv):
    # "--range -3:3:61" would otherwise be read as an unknown option
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--range", "--alpha-range", "--beta-range"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(_glue_ranges(sys.argv[1:] if argv is None else argv))
    try:
        if getattr(args, "n", 4) < 4:
            raise UsageError("--n (Fock dimension) must be at least 4")
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BifracError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
